#include "orank/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "orank/baselines.hpp"
#include "orank/csv.hpp"
#include "orank/error.hpp"
#include "orank/eval.hpp"
#include "orank/ranker.hpp"
#include "orank/rng.hpp"

namespace orank::experiment {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::t_learner: return "t_learner";
    case Method::dr_learner: return "dr_learner";
    case Method::plugin_ranker: return "plugin_ranker";
    case Method::rank_learner: return "rank_learner";
    case Method::oracle: return "oracle";
  }
  return "?";
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::t_learner, Method::dr_learner, Method::plugin_ranker, Method::rank_learner}) {
    if (name == to_string(m)) return m;
  }
  throw InvalidInput("unknown method '" + std::string(name) +
                     "' (expected t_learner, dr_learner, plugin_ranker or rank_learner)");
}

void BenchmarkSpec::validate() const {
  if (methods.empty()) throw InvalidInput("methods must not be empty");
  if (std::find(methods.begin(), methods.end(), Method::oracle) != methods.end()) {
    throw InvalidInput("oracle is always reported and cannot be requested");
  }
  if (n_grid.empty()) throw InvalidInput("n_grid must not be empty");
  if (seeds.empty()) throw InvalidInput("seeds must not be empty");
  if (kappa_grid.empty()) throw InvalidInput("kappa_grid must not be empty");
  for (std::size_t n : n_grid) {
    if (n < 50) throw InvalidInput("every n must be at least 50");
  }
  for (double k : kappa_grid) {
    if (!(k > 0.0)) throw InvalidInput("kappa values must be > 0");
  }
  if (!(pair_fraction > 0.0 && pair_fraction <= 1.0)) throw InvalidInput("pair_fraction must lie in (0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be finite and > 0");
  if (test_size < 2) throw InvalidInput("test_size must be at least 2");
}

// ---------------------------------------------------------------------------
// Config text

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) throw InvalidInput(key + ": not a number: '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidInput(key + ": not a non-negative integer: '" + text + "'");
  }
  return std::stoull(text);
}

std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + csv::format_double(v[i]);
  return out;
}

template <typename T>
std::string join_ints(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no, 0);
    const std::string key = trim(std::string_view(content).substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no, 1);
    out[key] = trim(std::string_view(content).substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_config(BenchmarkSpec& spec, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "methods") {
      spec.methods.clear();
      for (const auto& m : split_list(value)) spec.methods.push_back(method_from_string(m));
    } else if (key == "n_grid") {
      spec.n_grid.clear();
      for (const auto& v : split_list(value)) spec.n_grid.push_back(parse_uint(key, v));
    } else if (key == "seeds") {
      spec.seeds.clear();
      for (const auto& v : split_list(value)) spec.seeds.push_back(parse_uint(key, v));
    } else if (key == "kappa_grid") {
      spec.kappa_grid.clear();
      for (const auto& v : split_list(value)) spec.kappa_grid.push_back(parse_real(key, v));
    } else if (key == "pair_fraction") {
      spec.pair_fraction = parse_real(key, value);
    } else if (key == "alpha") {
      spec.alpha = parse_real(key, value);
    } else if (key == "test_size") {
      spec.test_size = parse_uint(key, value);
    } else if (key == "test_seed") {
      spec.test_seed = parse_uint(key, value);
    } else if (key == "output_dir") {
      spec.output_dir = value;
    } else {
      throw InvalidInput("unknown config key '" + key + "'");
    }
  }
}

std::string to_config_text(const BenchmarkSpec& spec) {
  std::vector<std::string> names;
  for (Method m : spec.methods) names.emplace_back(to_string(m));
  std::string methods;
  for (std::size_t i = 0; i < names.size(); ++i) methods += (i ? "," : "") + names[i];
  std::ostringstream out;
  out << "methods = " << methods << '\n'
      << "n_grid = " << join_ints(spec.n_grid) << '\n'
      << "seeds = " << join_ints(spec.seeds) << '\n'
      << "kappa_grid = " << join_reals(spec.kappa_grid) << '\n'
      << "pair_fraction = " << csv::format_double(spec.pair_fraction) << '\n'
      << "alpha = " << csv::format_double(spec.alpha) << '\n'
      << "test_size = " << spec.test_size << '\n'
      << "test_seed = " << spec.test_seed << '\n'
      << "output_dir = " << spec.output_dir.string() << '\n';
  return out.str();
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"method", to_string(r.method)},
                     {"n", r.n},
                     {"seed", r.seed},
                     {"kappa_selected", r.kappa_selected ? nlohmann::json(*r.kappa_selected) : nlohmann::json()},
                     {"autoc", r.autoc},
                     {"policy_value", r.policy_value},
                     {"spearman", r.spearman},
                     {"wall_time_seconds", r.wall_time_seconds}};
  if (r.error) j["error"] = *r.error;
}

// ---------------------------------------------------------------------------
// Cells

CellData prepare_cell(std::size_t n, std::uint64_t seed, double alpha, const Hyperparameters& hp) {
  CellData cell;
  cell.n = n;
  cell.seed = seed;
  const auto nuisance_sample =
      dgp::generate({n, derive_seed(seed, "nuisance-sample"), alpha, 0.6}).data;
  const auto stage2 = dgp::generate({n, derive_seed(seed, "stage2-sample"), alpha, 0.6}).data;

  nuisance::CrossFitConfig cf;
  cf.folds = std::max(hp.folds, 2);
  cf.clip_eps = hp.clip_eps;
  cf.outcome = hp.outcome;
  cf.propensity = hp.propensity;
  cf.seed = derive_seed(seed, "cross-fit");
  cell.nuisances = hp.folds >= 2 ? nuisance::cross_fit(nuisance_sample, cf) : nuisance::fit_split(nuisance_sample, cf);

  const dgp::Split split = dgp::partition(n, derive_seed(seed, "stage2-split"));
  cell.train = stage2.subset(split.train);
  cell.val = stage2.subset(split.validation);
  cell.train_eta = nuisance::predict_nuisances(cell.nuisances, cell.train.x());
  cell.val_eta = nuisance::predict_nuisances(cell.nuisances, cell.val.x());
  cell.val_phi = nuisance::dr_scores(cell.val, cell.val_eta);
  return cell;
}

dgp::Sample make_test_set(std::size_t size, std::uint64_t test_seed, double alpha) {
  return dgp::generate({size, derive_seed(test_seed, "test"), alpha, 0.6});
}

namespace {

std::vector<double> as_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void fill_metrics(RunRecord& r, std::span<const double> scores, const dgp::GroundTruth& truth) {
  const eval::EvalReport report = eval::evaluate(scores, truth);
  r.autoc = report.autoc;
  r.policy_value = report.mean_policy_value;
  r.spearman = report.spearman_vs_truth;
  if (!std::isfinite(r.autoc) || !std::isfinite(r.policy_value) || !std::isfinite(r.spearman)) {
    throw NumericError("non-finite test metric");
  }
}

}  // namespace

MethodResult run_method(Method method, const CellData& cell, const dgp::Sample& test,
                        const MethodOptions& options, const Hyperparameters& hp) {
  const auto start = std::chrono::steady_clock::now();
  MethodResult out;
  out.record.method = method;
  out.record.n = cell.n;
  out.record.seed = cell.seed;
  const std::uint64_t method_seed = derive_seed(cell.seed, to_string(method));

  switch (method) {
    case Method::t_learner: {
      nn::TrainConfig c = hp.outcome;
      c.seed = method_seed;
      const auto model = baselines::train_t_learner(cell.train, cell.val, c);
      out.test_scores = as_std(model.score(test.data.x()));
      break;
    }
    case Method::dr_learner: {
      nn::TrainConfig c = hp.cate;
      c.seed = method_seed;
      const auto model = baselines::train_dr_learner(cell.train, cell.val, cell.nuisances, c);
      out.test_scores = as_std(model.score(test.data.x()));
      break;
    }
    case Method::plugin_ranker:
    case Method::rank_learner: {
      if (options.kappa_grid.empty()) throw InvalidInput("kappa grid must not be empty");
      const auto kind = method == Method::rank_learner ? ranker::LabelKind::orthogonal : ranker::LabelKind::plugin;
      std::vector<std::vector<double>> val_scores, test_scores;
      for (double kappa : options.kappa_grid) {
        ranker::RankConfig rc;
        rc.kappa = kappa;
        rc.pair_fraction = options.pair_fraction;
        rc.train = hp.ranker;
        rc.train.seed = derive_seed(method_seed, "kappa-" + csv::format_double(kappa));
        const auto fit = ranker::train_ranker(cell.train, cell.train_eta, cell.val, cell.val_eta, rc, kind);
        val_scores.push_back(as_std(fit.model.score(cell.val.x())));
        test_scores.push_back(as_std(fit.model.score(test.data.x())));
      }
      const std::size_t best = eval::select_best(val_scores, cell.val_phi);
      out.record.kappa_selected = options.kappa_grid[best];
      out.test_scores = std::move(test_scores[best]);
      break;
    }
    case Method::oracle:
      out.test_scores = test.truth.tau;
      break;
  }
  fill_metrics(out.record, out.test_scores, test.truth);
  out.record.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

RunRecord oracle_record(std::size_t n, std::uint64_t seed, const dgp::Sample& test) {
  RunRecord r;
  r.method = Method::oracle;
  r.n = n;
  r.seed = seed;
  fill_metrics(r, test.truth.tau, test.truth);
  return r;
}

unsigned worker_threads() {
  if (const char* env = std::getenv("CAUSAL_RANK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

/// Runs fn(0..count-1) on up to `threads` workers. Each index is claimed once.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct CellSlot {
  std::optional<CellData> data;
  std::string error;
};

struct Job {
  std::size_t cell = 0;
  Method method = Method::rank_learner;
  MethodOptions options;
  double x = 0.0;
};

/// Prepares cells in parallel, then runs the jobs in parallel. The result vector is
/// indexed like `jobs`, so output order never depends on scheduling.
std::vector<RunRecord> run_jobs(std::vector<std::pair<std::size_t, std::uint64_t>> cells_nseed,
                                double alpha, const std::vector<Job>& jobs, const dgp::Sample& test,
                                const Hyperparameters& hp, unsigned threads) {
  std::vector<CellSlot> cells(cells_nseed.size());
  parallel_for(cells.size(), threads, [&](std::size_t c) {
    try {
      cells[c].data = prepare_cell(cells_nseed[c].first, cells_nseed[c].second, alpha, hp);
    } catch (const std::exception& ex) {
      cells[c].error = std::string("nuisance stage: ") + ex.what();
    }
  });
  std::vector<RunRecord> records(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t k) {
    const Job& job = jobs[k];
    const auto& slot = cells[job.cell];
    RunRecord& r = records[k];
    r.method = job.method;
    r.n = cells_nseed[job.cell].first;
    r.seed = cells_nseed[job.cell].second;
    if (!slot.data) {
      r.error = slot.error;
      return;
    }
    try {
      r = run_method(job.method, *slot.data, test, job.options, hp).record;
    } catch (const std::exception& ex) {
      r.error = ex.what();
    }
  });
  return records;
}

}  // namespace

std::vector<RunRecord> run_benchmark(const BenchmarkSpec& spec, const Hyperparameters& hp, unsigned threads) {
  spec.validate();
  const dgp::Sample test = make_test_set(spec.test_size, spec.test_seed, spec.alpha);
  std::vector<std::pair<std::size_t, std::uint64_t>> cells;
  std::vector<Job> jobs;
  for (std::size_t n : spec.n_grid) {
    for (std::uint64_t seed : spec.seeds) {
      cells.emplace_back(n, seed);
      for (Method m : spec.methods) jobs.push_back({cells.size() - 1, m, {spec.kappa_grid, spec.pair_fraction}, 0.0});
    }
  }
  const auto learned = run_jobs(cells, spec.alpha, jobs, test, hp, threads);
  std::vector<RunRecord> records;
  std::size_t k = 0;
  for (const auto& [n, seed] : cells) {
    for (std::size_t m = 0; m < spec.methods.size(); ++m) records.push_back(learned[k++]);
    records.push_back(oracle_record(n, seed, test));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation and output

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return m;
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records) {
  std::vector<std::pair<Method, std::size_t>> keys;
  for (const auto& r : records) {
    const std::pair key{r.method, r.n};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<AggregateRow> rows;
  for (const auto& [method, n] : keys) {
    std::vector<double> a, p;
    for (const auto& r : records) {
      if (r.method == method && r.n == n && r.ok()) {
        a.push_back(r.autoc);
        p.push_back(r.policy_value);
      }
    }
    const Moments ma = moments(a), mp = moments(p);
    rows.push_back({method, n, ma.mean, ma.sd, mp.mean, mp.sd, a.size()});
  }
  return rows;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  auto out = open_out(path);
  out << "method,n,seed,kappa_selected,autoc,policy_value,spearman\n";
  for (const auto& r : records) {
    if (!r.ok()) continue;
    out << to_string(r.method) << ',' << r.n << ',' << r.seed << ','
        << (r.kappa_selected ? csv::format_double(*r.kappa_selected) : "") << ','
        << csv::format_double(r.autoc) << ',' << csv::format_double(r.policy_value) << ','
        << csv::format_double(r.spearman) << '\n';
  }
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  auto out = open_out(path);
  out << "method,n,autoc_mean,autoc_sd,pv_mean,pv_sd,n_seeds\n";
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.n << ',' << csv::format_double(r.autoc_mean) << ','
        << csv::format_double(r.autoc_sd) << ',' << csv::format_double(r.pv_mean) << ','
        << csv::format_double(r.pv_sd) << ',' << r.n_seeds << '\n';
  }
}

void write_run_directory(const std::filesystem::path& dir, const BenchmarkSpec& spec,
                         const std::vector<RunRecord>& records) {
  std::filesystem::create_directories(dir / "runs");
  open_out(dir / "config.txt") << to_config_text(spec);
  write_metrics_csv(dir / "metrics.csv", records);
  write_aggregate_csv(dir / "aggregate.csv", aggregate(records));
  for (const auto& r : records) {
    const std::string name = std::string(to_string(r.method)) + "_n" + std::to_string(r.n) + "_seed" +
                             std::to_string(r.seed) + ".json";
    open_out(dir / "runs" / name) << nlohmann::json(r).dump(2) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

std::vector<SweepRow> summarise(const std::vector<RunRecord>& records, const std::vector<double>& xs,
                                const std::vector<double>& overlaps, const std::vector<Method>& methods,
                                const std::vector<std::size_t>& record_x) {
  std::vector<SweepRow> rows;
  for (std::size_t xi = 0; xi < xs.size(); ++xi) {
    for (Method m : methods) {
      std::vector<double> a;
      for (std::size_t k = 0; k < records.size(); ++k) {
        if (record_x[k] == xi && records[k].method == m && records[k].ok()) a.push_back(records[k].autoc);
      }
      const Moments mo = moments(a);
      const double se = a.size() > 1 ? mo.sd / std::sqrt(static_cast<double>(a.size())) : 0.0;
      rows.push_back({xs[xi], overlaps[xi], m, mo.mean, se, a.size()});
    }
  }
  return rows;
}

}  // namespace

SweepResult sweep_pairs(const PairSweepSpec& spec, const Hyperparameters& hp, unsigned threads) {
  if (spec.fractions.empty() || spec.seeds.empty() || spec.kappa_grid.empty()) {
    throw InvalidInput("fractions, seeds and kappa grid must not be empty");
  }
  for (double f : spec.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw InvalidInput("pair fractions must lie in (0, 1]");
  }
  const dgp::Sample test = make_test_set(spec.test_size, spec.test_seed, spec.alpha);
  std::vector<std::pair<std::size_t, std::uint64_t>> cells;
  std::vector<Job> jobs;
  std::vector<std::size_t> record_x;
  for (std::uint64_t seed : spec.seeds) cells.emplace_back(spec.n, seed);
  for (std::size_t fi = 0; fi < spec.fractions.size(); ++fi) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      jobs.push_back({c, Method::rank_learner, {spec.kappa_grid, spec.fractions[fi]}, spec.fractions[fi]});
      record_x.push_back(fi);
    }
  }
  SweepResult result;
  result.records = run_jobs(cells, spec.alpha, jobs, test, hp, threads);
  const double overlap = dgp::overlap_measure(test.truth);
  result.rows = summarise(result.records, spec.fractions, std::vector<double>(spec.fractions.size(), overlap),
                          {Method::rank_learner}, record_x);
  return result;
}

SweepResult sweep_overlap(const OverlapSweepSpec& spec, const Hyperparameters& hp, unsigned threads) {
  if (spec.alphas.empty() || spec.seeds.empty() || spec.methods.empty() || spec.kappa_grid.empty()) {
    throw InvalidInput("alphas, seeds, methods and kappa grid must not be empty");
  }
  SweepResult result;
  std::vector<double> overlaps;
  std::vector<std::size_t> record_x;
  for (std::size_t ai = 0; ai < spec.alphas.size(); ++ai) {
    const double alpha = spec.alphas[ai];
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be finite and > 0");
    const dgp::Sample test = make_test_set(spec.test_size, spec.test_seed, alpha);
    overlaps.push_back(dgp::overlap_measure(test.truth));
    std::vector<std::pair<std::size_t, std::uint64_t>> cells;
    std::vector<Job> jobs;
    for (std::uint64_t seed : spec.seeds) {
      cells.emplace_back(spec.n, seed);
      for (Method m : spec.methods) jobs.push_back({cells.size() - 1, m, {spec.kappa_grid, spec.pair_fraction}, alpha});
    }
    for (auto& r : run_jobs(cells, alpha, jobs, test, hp, threads)) {
      result.records.push_back(std::move(r));
      record_x.push_back(ai);
    }
  }
  result.rows = summarise(result.records, spec.alphas, overlaps, spec.methods, record_x);
  return result;
}

void write_pair_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "pair_fraction,autoc_mean,autoc_se,n_seeds\n";
  for (const auto& r : rows) {
    out << csv::format_double(r.x) << ',' << csv::format_double(r.autoc_mean) << ','
        << csv::format_double(r.autoc_se) << ',' << r.n_seeds << '\n';
  }
}

void write_overlap_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "alpha,overlap,method,autoc_mean,autoc_se,n_seeds\n";
  for (const auto& r : rows) {
    out << csv::format_double(r.x) << ',' << csv::format_double(r.overlap) << ',' << to_string(r.method)
        << ',' << csv::format_double(r.autoc_mean) << ',' << csv::format_double(r.autoc_se) << ','
        << r.n_seeds << '\n';
  }
}

}  // namespace orank::experiment
