// Command-line front end: data generation, benchmark grids, sweeps, orthogonality checks,
// metric evaluation and hyperparameter search.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "orank/dgp.hpp"
#include "orank/error.hpp"
#include "orank/eval.hpp"
#include "orank/experiment.hpp"
#include "orank/orthocheck.hpp"
#include "orank/scorer.hpp"

namespace fs = std::filesystem;
using namespace orank;

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsageOrIo = 2;

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<experiment::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<experiment::Method> out;
  for (const auto& n : names) out.push_back(experiment::method_from_string(n));
  return out;
}

void print_rows(const std::vector<experiment::AggregateRow>& rows) {
  std::printf("%-14s %6s %10s %8s %10s %8s %6s\n", "method", "n", "autoc", "sd", "policy", "sd", "seeds");
  for (const auto& r : rows) {
    std::printf("%-14s %6zu %10.4f %8.4f %10.4f %8.4f %6zu\n", std::string(to_string(r.method)).c_str(), r.n,
                r.autoc_mean, r.autoc_sd, r.pv_mean, r.pv_sd, r.n_seeds);
  }
}

/// Reports failed cells on stderr; returns true if any failed.
bool report_failures(const std::vector<experiment::RunRecord>& records) {
  bool failed = false;
  for (const auto& r : records) {
    if (r.ok()) continue;
    failed = true;
    std::fprintf(stderr, "cell failed: %s n=%zu seed=%llu: %s\n", std::string(to_string(r.method)).c_str(), r.n,
                 static_cast<unsigned long long>(r.seed), r.error->c_str());
  }
  return failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orank: orthogonal ranking of treatment effects"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Draw a synthetic dataset and its ground truth");
  dgp::DgpConfig gen_cfg;
  fs::path gen_out = "data/generated";
  gen->add_option("--n", gen_cfg.n, "Number of units")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_cfg.seed, "Random seed");
  gen->add_option("--alpha", gen_cfg.alpha, "Propensity sharpness (larger means less overlap)");
  gen->add_option("--noise-sd", gen_cfg.noise_sd, "Outcome noise standard deviation");
  gen->add_option("--out", gen_out, "Output directory (data.csv, truth.csv)");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Run the (method, n, seed) grid");
  experiment::BenchmarkSpec spec;
  fs::path bench_config;
  std::vector<std::string> bench_methods;
  std::vector<std::size_t> bench_n;
  std::vector<std::uint64_t> bench_seeds;
  std::vector<double> bench_kappa;
  double bench_pair_fraction = 0.0, bench_alpha = 0.0;
  std::size_t bench_test_size = 0;
  std::uint64_t bench_test_seed = 0;
  fs::path bench_out;
  bench->add_option("--config", bench_config, "key = value file; flags override it")->check(CLI::ExistingFile);
  auto* o_methods = bench->add_option("--methods", bench_methods, "Subset of t_learner,dr_learner,plugin_ranker,rank_learner")->delimiter(',');
  auto* o_n = bench->add_option("--n", bench_n, "Training sizes")->delimiter(',');
  auto* o_seeds = bench->add_option("--seeds", bench_seeds, "Seeds")->delimiter(',');
  auto* o_kappa = bench->add_option("--kappa", bench_kappa, "Kappa grid for the rankers")->delimiter(',');
  auto* o_pf = bench->add_option("--pair-fraction", bench_pair_fraction, "Pairs per epoch as a fraction of n^2");
  auto* o_alpha = bench->add_option("--alpha", bench_alpha, "Propensity sharpness");
  auto* o_ts = bench->add_option("--test-size", bench_test_size, "Test set size");
  auto* o_tseed = bench->add_option("--test-seed", bench_test_seed, "Test set seed");
  auto* o_out = bench->add_option("--out", bench_out, "Run directory");

  // sweep-pairs
  auto* sp = app.add_subcommand("sweep-pairs", "Rank-Learner AUTOC against the pair fraction");
  experiment::PairSweepSpec sp_spec;
  fs::path sp_out = "runs/sweep_pairs.csv";
  sp->add_option("--n", sp_spec.n, "Training size");
  sp->add_option("--fractions", sp_spec.fractions, "Pair fractions")->delimiter(',');
  sp->add_option("--seeds", sp_spec.seeds, "Seeds")->delimiter(',');
  sp->add_option("--kappa", sp_spec.kappa_grid, "Kappa grid")->delimiter(',');
  sp->add_option("--test-seed", sp_spec.test_seed, "Test set seed");
  sp->add_option("--out", sp_out, "Output CSV");

  // sweep-overlap
  auto* so = app.add_subcommand("sweep-overlap", "AUTOC of every method against overlap");
  experiment::OverlapSweepSpec so_spec;
  std::vector<std::string> so_methods;
  fs::path so_out = "runs/sweep_overlap.csv";
  so->add_option("--n", so_spec.n, "Training size");
  so->add_option("--alphas", so_spec.alphas, "Propensity sharpness grid")->delimiter(',');
  so->add_option("--seeds", so_spec.seeds, "Seeds")->delimiter(',');
  auto* o_so_methods = so->add_option("--methods", so_methods, "Methods")->delimiter(',');
  so->add_option("--kappa", so_spec.kappa_grid, "Kappa grid for the rankers")->delimiter(',');
  so->add_option("--pair-fraction", so_spec.pair_fraction, "Pairs per epoch as a fraction of n^2");
  so->add_option("--test-seed", so_spec.test_seed, "Test set seed");
  so->add_option("--out", so_out, "Output CSV");

  // ortho-check
  auto* oc = app.add_subcommand("ortho-check", "Verify orthogonality and the population minimizer");
  fs::path oc_population;
  std::vector<double> oc_kappas{1.0};
  int oc_directions = 20;
  double oc_h = 1e-3;
  std::uint64_t oc_seed = 0;
  fs::path oc_out;
  oc->add_option("--population", oc_population, "Population file (default: built-in five-point fixture)");
  oc->add_option("--kappa", oc_kappas, "Kappa values, one report section each");
  oc->add_option("--directions", oc_directions, "Random directions")->check(CLI::PositiveNumber);
  oc->add_option("--step", oc_h, "Finite-difference step")->check(CLI::PositiveNumber);
  oc->add_option("--seed", oc_seed, "Direction seed");
  oc->add_option("--out", oc_out, "Write the JSON report here as well as to stdout");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a ranking against ground truth");
  fs::path ev_scores, ev_truth;
  ev->add_option("--scores", ev_scores, "Scores CSV (index,score)")->required();
  ev->add_option("--truth", ev_truth, "Ground-truth CSV (tau,mu0,mu1,e)")->required();

  // tune
  auto* tn = app.add_subcommand("tune", "Random hyperparameter search per model family");
  std::uint64_t tn_seed = 0;
  std::size_t tn_n = 500;
  int tn_draws = 12;
  fs::path tn_out;
  tn->add_option("--seed", tn_seed, "Search seed");
  tn->add_option("--n", tn_n, "Tuning sample size");
  tn->add_option("--draws", tn_draws, "Draws per family")->check(CLI::PositiveNumber);
  tn->add_option("--out", tn_out, "Write all trials as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageOrIo;
  }

  try {
    if (*gen) {
      gen_cfg.validate();
      const auto sample = dgp::generate(gen_cfg);
      fs::create_directories(gen_out);
      dgp::save_dataset(gen_out / "data.csv", sample.data);
      dgp::save_ground_truth(gen_out / "truth.csv", sample.truth);
      std::printf("n=%zu overlap=%.4f -> %s\n", sample.data.size(), dgp::overlap_measure(sample.truth),
                  gen_out.string().c_str());
      return kOk;
    }

    if (*bench) {
      if (!bench_config.empty()) experiment::apply_config(spec, experiment::read_config(bench_config));
      if (o_methods->count()) spec.methods = parse_methods(bench_methods);
      if (o_n->count()) spec.n_grid = bench_n;
      if (o_seeds->count()) spec.seeds = bench_seeds;
      if (o_kappa->count()) spec.kappa_grid = bench_kappa;
      if (o_pf->count()) spec.pair_fraction = bench_pair_fraction;
      if (o_alpha->count()) spec.alpha = bench_alpha;
      if (o_ts->count()) spec.test_size = bench_test_size;
      if (o_tseed->count()) spec.test_seed = bench_test_seed;
      if (o_out->count()) spec.output_dir = bench_out;
      spec.validate();
      const auto records = experiment::run_benchmark(spec, experiment::default_hyperparameters(),
                                                     experiment::worker_threads());
      experiment::write_run_directory(spec.output_dir, spec, records);
      print_rows(experiment::aggregate(records));
      return report_failures(records) ? kCheckFailed : kOk;
    }

    if (*sp) {
      const auto result = experiment::sweep_pairs(sp_spec, experiment::default_hyperparameters(),
                                                  experiment::worker_threads());
      experiment::write_pair_sweep_csv(sp_out, result.rows);
      for (const auto& r : result.rows) {
        std::printf("fraction=%-8g autoc=%.4f se=%.4f seeds=%zu\n", r.x, r.autoc_mean, r.autoc_se, r.n_seeds);
      }
      return report_failures(result.records) ? kCheckFailed : kOk;
    }

    if (*so) {
      if (o_so_methods->count()) so_spec.methods = parse_methods(so_methods);
      const auto result = experiment::sweep_overlap(so_spec, experiment::default_hyperparameters(),
                                                    experiment::worker_threads());
      experiment::write_overlap_sweep_csv(so_out, result.rows);
      for (const auto& r : result.rows) {
        std::printf("alpha=%-6g overlap=%.4f %-14s autoc=%.4f se=%.4f\n", r.x, r.overlap,
                    std::string(to_string(r.method)).c_str(), r.autoc_mean, r.autoc_se);
      }
      return report_failures(result.records) ? kCheckFailed : kOk;
    }

    if (*oc) {
      const auto pop = oc_population.empty() ? orthocheck::canonical_population()
                                             : orthocheck::load_population(oc_population);
      nlohmann::json report = nlohmann::json::array();
      bool pass = true;
      for (double kappa : oc_kappas) {
        const auto orth = orthocheck::verify_orthogonality(pop, kappa, oc_directions, oc_h, oc_seed);
        const auto mini = orthocheck::verify_minimizer(pop, kappa, oc_seed);
        report.push_back({{"kappa", kappa}, {"orthogonality", orth}, {"minimizer", mini}});
        pass = pass && orth.pass && mini.pass;
        if (!orth.pass) {
          std::fprintf(stderr, "kappa=%g orthogonality failed: max|orth|=%.3g (<= %.3g), median|soft|=%.3g (>= %.3g)\n",
                       kappa, orth.orth_max_abs, orth.thresholds.orth_max_abs, orth.soft_median_abs,
                       orth.thresholds.soft_median_abs);
        }
        if (!mini.pass) {
          std::fprintf(stderr, "kappa=%g minimizer failed: stationarity=%.3g slope=%.6g r2=%.6g spearman=%.3g\n",
                       kappa, mini.stationarity_max_abs, mini.slope, mini.r_squared, mini.spearman);
        }
      }
      std::cout << report.dump(2) << '\n';
      if (!oc_out.empty()) write_json(oc_out, report);
      return pass ? kOk : kCheckFailed;
    }

    if (*ev) {
      const auto scores = load_scores(ev_scores);
      const auto truth = dgp::load_ground_truth(ev_truth);
      if (scores.size() != truth.size()) {
        throw InvalidInput("scores have " + std::to_string(scores.size()) + " rows, truth has " +
                           std::to_string(truth.size()));
      }
      const auto r = eval::evaluate(scores, truth);
      std::cout << nlohmann::json{{"autoc", r.autoc},
                                  {"policy_value", r.mean_policy_value},
                                  {"spearman", r.spearman_vs_truth}}
                       .dump(2)
                << '\n';
      return kOk;
    }

    if (*tn) {
      const auto result = experiment::tune(tn_seed, tn_n, tn_draws);
      const nlohmann::json j = result;
      std::cout << j["best"].dump(2) << '\n';
      if (!tn_out.empty()) write_json(tn_out, j);
      return kOk;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageOrIo;
  }
  return kUsageOrIo;
}
