#include "collapse/tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "collapse/error.hpp"

namespace collapse {

namespace {

std::string fixed(double v, int decimals) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  // Avoid printing "-0.000".
  std::string s = buf;
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string f3(double v) { return fixed(v, 3); }
std::string f4(double v) { return fixed(v, 4); }

const PerfSummary* find_summary(const ScenarioResult& r, MethodCode code) {
  for (const auto& s : r.summaries)
    if (s.method.code == code) return &s;
  return nullptr;
}

// Summary row, or a NaN row with failure counts when the method could not be
// summarized.
PerfSummary row_for(const ScenarioResult& r, std::size_t j) {
  if (const PerfSummary* s = find_summary(r, kAllMethods[j])) return *s;
  PerfSummary s;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.method = {r.spec.design == Design::SingleStudy ? Setting::Single : Setting::ITC, kAllMethods[j]};
  for (const auto& rep : r.replications) {
    if (rep[j].failed())
      ++s.n_failed;
    else
      ++s.n_reps;
  }
  s.mean = s.mcse_mean = s.emp_se = s.mcse_emp_se = s.bias = nan;
  s.truth = r.truth;
  return s;
}

bool flagged(const PerfSummary& s) { return !std::isnan(s.bias) && std::abs(s.bias) > kBiasFlag; }

std::string group_title(Design d, OutcomeKind k) {
  std::string t = d == Design::SingleStudy ? "Single study" : "Indirect comparison";
  t += k == OutcomeKind::Binary ? ", marginal log odds ratio" : ", marginal log hazard ratio";
  return t;
}

double parse_number(const std::string& s) {
  if (s == "NA") return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

}  // namespace

std::string render_csv(const std::vector<ScenarioResult>& results) {
  std::ostringstream out;
  out << "scenario,outcome,method,n_reps,n_failed,truth,mean,mcse_mean,emp_se,mcse_emp_se,bias,flagged\n";
  for (const auto& r : results) {
    for (std::size_t j = 0; j < kAllMethods.size(); ++j) {
      const PerfSummary s = row_for(r, j);
      out << r.spec.label << ',' << to_string(r.spec.outcome) << ',' << to_string(kAllMethods[j]) << ','
          << s.n_reps << ',' << s.n_failed << ',' << f3(r.truth) << ',' << f3(s.mean) << ','
          << f4(s.mcse_mean) << ',' << f3(s.emp_se) << ',' << f4(s.mcse_emp_se) << ',' << f3(s.bias)
          << ',' << (flagged(s) ? "true" : "false") << '\n';
    }
  }
  return out.str();
}

std::string render_markdown(const std::vector<ScenarioResult>& results) {
  std::vector<std::pair<Design, OutcomeKind>> groups;
  for (const auto& r : results) {
    const std::pair g{r.spec.design, r.spec.outcome};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }

  std::ostringstream out;
  out << "# Simulation results\n\n"
      << "Cells show mean (MC error) and empirical SE (MC error). "
      << "Bold cells have |bias| > " << kBiasFlag << ".\n";
  for (const auto& [design, outcome] : groups) {
    const Setting setting = design == Design::SingleStudy ? Setting::Single : Setting::ITC;
    std::vector<const ScenarioResult*> rows;
    for (const auto& r : results)
      if (r.spec.design == design && r.spec.outcome == outcome) rows.push_back(&r);

    auto header = [&](const std::string& first) {
      out << "| Scenario | " << first;
      for (auto code : kAllMethods) out << " | " << method_name({setting, code});
      out << " |\n|---|---";
      for (std::size_t j = 0; j < kAllMethods.size(); ++j) out << "|---";
      out << "|\n";
    };

    out << "\n## " << group_title(design, outcome) << "\n\n";
    header("True value");
    for (const auto* r : rows) {
      out << "| " << r->spec.label << " | " << f3(r->truth);
      for (std::size_t j = 0; j < kAllMethods.size(); ++j) {
        const PerfSummary s = row_for(*r, j);
        const std::string cell =
            f3(s.mean) + " (" + f4(s.mcse_mean) + ") " + f3(s.emp_se) + " (" + f4(s.mcse_emp_se) + ")";
        out << " | " << (flagged(s) ? "**" + cell + "**" : cell);
      }
      out << " |\n";
    }

    out << "\nBias, with usable / failed replications:\n\n";
    header("");
    for (const auto* r : rows) {
      out << "| " << r->spec.label << " | ";
      for (std::size_t j = 0; j < kAllMethods.size(); ++j) {
        const PerfSummary s = row_for(*r, j);
        out << " | " << f3(s.bias) << " [" << s.n_reps << " / " << s.n_failed << "]";
      }
      out << " |\n";
    }
  }
  return out.str();
}

std::vector<TableRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("scenario,", 0) != 0)
    throw Error(ErrorKind::Io, "missing results header");
  std::vector<TableRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) f.push_back(field);
    if (f.size() != 12) throw Error(ErrorKind::Io, "expected 12 fields: " + line);
    TableRow r;
    try {
      r.scenario = f[0];
      r.outcome = f[1];
      r.method = f[2];
      r.n_reps = std::stoull(f[3]);
      r.n_failed = std::stoull(f[4]);
      r.truth = parse_number(f[5]);
      r.mean = parse_number(f[6]);
      r.mcse_mean = parse_number(f[7]);
      r.emp_se = parse_number(f[8]);
      r.mcse_emp_se = parse_number(f[9]);
      r.bias = parse_number(f[10]);
      if (f[11] != "true" && f[11] != "false") throw std::invalid_argument(f[11]);
      r.flagged = f[11] == "true";
    } catch (const std::exception&) {
      throw Error(ErrorKind::Io, "malformed results line: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<std::filesystem::path> emit_tables(const std::vector<ScenarioResult>& results,
                                               const RunConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + config.out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto write = [&](const std::string& name, const std::string& content) {
    const auto path = config.out_dir / name;
    std::ofstream out(path);
    out << content;
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    written.push_back(path);
  };
  if (config.format != TableFormat::Markdown) write("results.csv", render_csv(results));
  if (config.format != TableFormat::Csv) write("results.md", render_markdown(results));
  return written;
}

}  // namespace collapse
