#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orank/dgp.hpp"
#include "orank/nn.hpp"
#include "orank/nuisance.hpp"

namespace orank::experiment {

enum class Method { t_learner, dr_learner, plugin_ranker, rank_learner, oracle };
std::string_view to_string(Method method);
/// Accepts the four learner names; "oracle" is emitted, never requested.
Method method_from_string(std::string_view name);

/// Training settings per model family, frozen after tuning.
struct Hyperparameters {
  nn::TrainConfig outcome;     // mu0 / mu1 regressions, also the T-learner arms
  nn::TrainConfig propensity;  // e classifier
  nn::TrainConfig cate;        // DR-learner second stage
  nn::TrainConfig ranker;      // both pairwise rankers
  int folds = 0;  // 0 fits the nuisances once on the nuisance sample, K >= 2 cross-fits
  double clip_eps = 0.01;
};

/// The values chosen by `tune` and used by every experiment command.
Hyperparameters default_hyperparameters();
/// Kappa of the best ranker draw in the same search; the pair sweep holds kappa here.
inline constexpr double kTunedKappa = 1.5;

struct BenchmarkSpec {
  std::vector<Method> methods{Method::t_learner, Method::dr_learner, Method::plugin_ranker,
                              Method::rank_learner};
  std::vector<std::size_t> n_grid{500, 2000};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> kappa_grid{0.25, 0.5, 1.0, 1.5, 3.0};
  double pair_fraction = 0.01;
  double alpha = 1.0;
  std::size_t test_size = 1000;
  std::uint64_t test_seed = 39;
  std::filesystem::path output_dir = "runs/benchmark";

  void validate() const;
};

/// Flat `key = value` text; lists are comma separated, `#` starts a comment.
std::map<std::string, std::string> parse_config(std::string_view text);
std::map<std::string, std::string> read_config(const std::filesystem::path& path);
/// Overwrites the fields named in `values`; unknown keys throw InvalidInput.
void apply_config(BenchmarkSpec& spec, const std::map<std::string, std::string>& values);
std::string to_config_text(const BenchmarkSpec& spec);

struct RunRecord {
  Method method = Method::oracle;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::optional<double> kappa_selected;
  double autoc = 0.0;
  double policy_value = 0.0;
  double spearman = 0.0;
  double wall_time_seconds = 0.0;
  std::optional<std::string> error;  // set when the cell failed

  bool ok() const { return !error.has_value(); }
};

void to_json(nlohmann::json& j, const RunRecord& r);

/// Everything the methods of one (n, seed) cell share.
struct CellData {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  dgp::Dataset train;  // stage-2 training split
  dgp::Dataset val;    // stage-2 validation split
  nuisance::NuisanceEstimates nuisances;
  nuisance::EtaTable train_eta;
  nuisance::EtaTable val_eta;
  std::vector<double> val_phi;
};

/// Draws the nuisance and stage-2 samples for (n, seed), fits the nuisances on the
/// first and splits the second 80/20.
CellData prepare_cell(std::size_t n, std::uint64_t seed, double alpha, const Hyperparameters& hp);

/// Pinned evaluation sample. Covariates depend only on test_seed.
dgp::Sample make_test_set(std::size_t size, std::uint64_t test_seed, double alpha);

struct MethodOptions {
  std::vector<double> kappa_grid{1.0};
  double pair_fraction = 0.01;
};

struct MethodResult {
  RunRecord record;
  std::vector<double> test_scores;
};

/// Trains one method on a prepared cell and scores the test set. Rankers are trained
/// once per kappa and the candidate with the best validation approximate AUTOC wins.
MethodResult run_method(Method method, const CellData& cell, const dgp::Sample& test,
                        const MethodOptions& options, const Hyperparameters& hp);

/// The ground-truth ranking of the test set.
RunRecord oracle_record(std::size_t n, std::uint64_t seed, const dgp::Sample& test);

/// Worker count from CAUSAL_RANK_THREADS, else the hardware concurrency; at least 1.
unsigned worker_threads();

/// Runs every (method, n, seed) cell plus one oracle record per (n, seed). Records are
/// returned in grid order; failed cells carry an error and do not stop the grid.
std::vector<RunRecord> run_benchmark(const BenchmarkSpec& spec, const Hyperparameters& hp,
                                     unsigned threads);

struct AggregateRow {
  Method method = Method::oracle;
  std::size_t n = 0;
  double autoc_mean = 0.0;
  double autoc_sd = 0.0;
  double pv_mean = 0.0;
  double pv_sd = 0.0;
  std::size_t n_seeds = 0;
};

/// Mean and sample sd per (method, n) over successful records, in first-seen order.
std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<RunRecord>& records);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);
/// config.txt, metrics.csv, aggregate.csv and runs/<method>_n<n>_seed<seed>.json.
void write_run_directory(const std::filesystem::path& dir, const BenchmarkSpec& spec,
                         const std::vector<RunRecord>& records);

struct SweepRow {
  double x = 0.0;  // pair fraction or alpha
  double overlap = 0.0;
  Method method = Method::rank_learner;
  double autoc_mean = 0.0;
  double autoc_se = 0.0;
  std::size_t n_seeds = 0;
};

struct PairSweepSpec {
  std::size_t n = 1000;
  std::vector<double> fractions{0.0001, 0.001, 0.01, 0.1, 0.5};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> kappa_grid{kTunedKappa};
  double alpha = 1.0;
  std::size_t test_size = 1000;
  std::uint64_t test_seed = 39;
};

struct OverlapSweepSpec {
  std::size_t n = 500;
  std::vector<double> alphas{0.05, 1.0, 2.5, 5.0, 15.0};
  std::vector<Method> methods{Method::t_learner, Method::dr_learner, Method::plugin_ranker,
                              Method::rank_learner};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<double> kappa_grid{0.25, 0.5, 1.0, 1.5, 3.0};
  double pair_fraction = 0.01;
  std::size_t test_size = 1000;
  std::uint64_t test_seed = 39;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<RunRecord> records;
};

/// Rank-Learner AUTOC against the pair fraction; the nuisances of each (n, seed)
/// are fitted once and shared by all fractions.
SweepResult sweep_pairs(const PairSweepSpec& spec, const Hyperparameters& hp, unsigned threads);
/// AUTOC of every method against the propensity sharpness alpha. Covariates and
/// outcome noise are shared across alphas; only treatment assignment changes.
SweepResult sweep_overlap(const OverlapSweepSpec& spec, const Hyperparameters& hp, unsigned threads);

void write_pair_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);
void write_overlap_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace orank::experiment

namespace orank::experiment {

/// One random-search draw for a model family, with the validation objective it scored
/// (lower is better for losses; AUTOC is stored negated so that lower is better too).
struct TuneTrial {
  std::string family;
  nn::TrainConfig config;
  std::optional<double> kappa;
  double objective = 0.0;
};

struct TuneResult {
  Hyperparameters best;
  std::optional<double> best_kappa;
  std::vector<TuneTrial> trials;
};

/// Seeded random search (`draws` per family) on a pinned tuning task over hidden
/// {64,128}, learning rate {1e-4,3e-4,5e-4,1e-3}, weight decay {0,1e-5,1e-4}, batch
/// {128,256} and, for rankers, kappa {0.25,0.5,1,1.5,3}. Every draw trains on n units
/// and is scored on a separate 5,000-unit holdout: outcome and propensity models by
/// their loss, the DR-learner by MSE on the DR scores, the rankers by the Rank-Learner's
/// approximate AUTOC.
TuneResult tune(std::uint64_t seed, std::size_t n = 500, int draws = 12);

void to_json(nlohmann::json& j, const TuneResult& r);

}  // namespace orank::experiment
