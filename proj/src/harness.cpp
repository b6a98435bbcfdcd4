#include "collapse/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "collapse/error.hpp"
#include "collapse/truth.hpp"

namespace collapse {

namespace {

Replication failed_replication(Setting setting, const std::string& reason) {
  Replication rep;
  for (std::size_t j = 0; j < kAllMethods.size(); ++j) {
    rep[j].method = {setting, kAllMethods[j]};
    rep[j].failure_reason = reason;
  }
  return rep;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace

PerfSummary summarize(std::span<const Estimate> estimates, double truth) {
  PerfSummary s;
  if (!estimates.empty()) s.method = estimates.front().method;
  std::vector<double> v;
  for (const Estimate& e : estimates) {
    if (e.failed())
      ++s.n_failed;
    else
      v.push_back(*e.value);
  }
  if (v.size() < 2)
    throw Error(ErrorKind::InsufficientReplications, "fewer than two usable estimates");
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  s.n_reps = v.size();
  s.mean = mean;
  s.emp_se = std::sqrt(ss / (n - 1.0));
  s.mcse_mean = s.emp_se / std::sqrt(n);
  s.mcse_emp_se = s.emp_se / std::sqrt(2.0 * (n - 1.0));
  s.truth = truth;
  s.bias = mean - truth;
  return s;
}

Replication run_replication(const ScenarioSpec& spec, std::size_t n, const StreamKey& key,
                            const RunOptions& options) {
  Replication rep;
  Stream data_rng = key.stream(Purpose::Data);
  if (spec.design == Design::SingleStudy) {
    ObsDataset data = gen_single_study(spec, n, data_rng);
    for (std::size_t j = 0; j < kAllMethods.size(); ++j)
      rep[j] = estimate_single(data, {Setting::Single, kAllMethods[j]}, key, options.estimator);
    return rep;
  }
  ItcPair pair = [&] {
    try {
      return gen_itc_pair(spec, n, options.pool_size, data_rng);
    } catch (const Error& e) {
      throw Error(ErrorKind::EstimationFailure, e.what());
    }
  }();
  AggregateData agg;
  try {
    agg = reduce_to_aggregate(pair.study2);
  } catch (const Error& e) {
    return failed_replication(Setting::ITC, e.what());
  }
  for (std::size_t j = 0; j < kAllMethods.size(); ++j)
    rep[j] = estimate_itc(pair.study1, agg, {Setting::ITC, kAllMethods[j]}, key, options.estimator);
  return rep;
}

ScenarioResult run_scenario(const ScenarioSpec& spec, double truth, const RunOptions& options) {
  if (options.nsim < 2) throw Error(ErrorKind::InvalidArgument, "nsim must be at least 2");
  const std::size_t n =
      options.n != 0 ? options.n : (spec.design == Design::SingleStudy ? kDefaultSingleN : kDefaultItcN);
  const Setting setting = spec.design == Design::SingleStudy ? Setting::Single : Setting::ITC;

  ScenarioResult result;
  result.spec = spec;
  result.truth = truth;
  result.replications.resize(options.nsim);

  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= options.nsim) return;
      const StreamKey key{options.seed, options.common_stream ? 0 : r};
      try {
        result.replications[r] = run_replication(spec, n, key, options);
      } catch (const Error& e) {
        result.replications[r] = failed_replication(setting, e.what());
      }
      const std::size_t d = ++done;
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        options.progress(d, options.nsim);
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, options.nsim));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  result.complete = true;
  for (std::size_t j = 0; j < kAllMethods.size(); ++j) {
    std::vector<Estimate> column;
    column.reserve(options.nsim);
    for (const Replication& rep : result.replications) {
      column.push_back(rep[j]);
      if (rep[j].m_capped) ++result.m_capped;
    }
    try {
      result.summaries.push_back(summarize(column, truth));
    } catch (const Error& e) {
      result.complete = false;
      result.problems.push_back(std::string(to_string(kAllMethods[j])) + ": " + e.what());
    }
  }
  return result;
}

TruthCache::TruthCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string label, outcome, mc, seed, value;
    if (!std::getline(fields, label, '\t') || !std::getline(fields, outcome, '\t') ||
        !std::getline(fields, mc, '\t') || !std::getline(fields, seed, '\t') ||
        !std::getline(fields, value, '\t'))
      throw Error(ErrorKind::Io, "malformed truth cache line: " + line);
    try {
      values_[{label, outcome, std::stoull(mc), std::stoull(seed)}] = std::stod(value);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Io, "malformed truth cache line: " + line);
    }
  }
}

bool TruthCache::contains(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed) const {
  std::lock_guard lock(mutex_);
  return values_.count({spec.label, std::string(to_string(spec.outcome)), mc_size, seed}) > 0;
}

double TruthCache::get_or_compute(const ScenarioSpec& spec, std::size_t mc_size, std::uint64_t seed) {
  const Key key{spec.label, std::string(to_string(spec.outcome)), mc_size, seed};
  {
    std::lock_guard lock(mutex_);
    if (const auto it = values_.find(key); it != values_.end()) return it->second;
  }
  const double value = true_marginal_effect(spec, mc_size, seed).value;
  std::lock_guard lock(mutex_);
  return values_.try_emplace(key, value).first->second;
}

void TruthCache::save() const {
  if (path_.empty()) return;
  std::lock_guard lock(mutex_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_);
  if (!out) throw Error(ErrorKind::Io, "cannot write truth cache " + path_.string());
  for (const auto& [key, value] : values_)
    out << std::get<0>(key) << '\t' << std::get<1>(key) << '\t' << std::get<2>(key) << '\t'
        << std::get<3>(key) << '\t' << format_double(value) << '\n';
}

void write_estimates_csv(const std::filesystem::path& path, const std::vector<ScenarioResult>& results) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "scenario,outcome,setting,replication,method,value,failed,m_used,m_capped,reason\n";
  for (const auto& res : results) {
    for (std::size_t r = 0; r < res.replications.size(); ++r) {
      for (const Estimate& e : res.replications[r]) {
        out << csv_quote(res.spec.label) << ',' << to_string(res.spec.outcome) << ','
            << (e.method.setting == Setting::Single ? "single" : "itc") << ',' << r << ','
            << to_string(e.method.code) << ',' << (e.value ? format_double(*e.value) : "") << ','
            << (e.failed() ? 1 : 0) << ',' << (e.m_used ? std::to_string(*e.m_used) : "") << ','
            << (e.m_capped ? 1 : 0) << ',' << csv_quote(e.failure_reason.value_or("")) << '\n';
      }
    }
  }
}

std::vector<DumpedEstimate> read_estimates_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::vector<DumpedEstimate> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 10) throw Error(ErrorKind::Io, "malformed estimate line: " + line);
    DumpedEstimate d;
    d.scenario = f[0];
    d.outcome = f[1];
    try {
      d.replication = std::stoull(f[3]);
      d.estimate.method.setting = f[2] == "single" ? Setting::Single : Setting::ITC;
      if (f[4].size() != 2 || f[4][0] != 'A' || f[4][1] < '1' || f[4][1] > '5')
        throw Error(ErrorKind::Io, "bad method");
      d.estimate.method.code = static_cast<MethodCode>(f[4][1] - '0');
      if (f[6] == "0") d.estimate.value = std::stod(f[5]);
      if (!f[7].empty()) d.estimate.m_used = std::stoull(f[7]);
      d.estimate.m_capped = f[8] == "1";
      if (!f[9].empty()) d.estimate.failure_reason = f[9];
    } catch (const std::exception&) {
      throw Error(ErrorKind::Io, "malformed estimate line: " + line);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace collapse
