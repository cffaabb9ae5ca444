// Acceptance suite: one PASS/FAIL line per criterion. With arguments, runs only the
// listed criterion numbers, e.g. `acceptance 1 5 9`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "orank/dgp.hpp"
#include "orank/eval.hpp"
#include "orank/experiment.hpp"
#include "orank/nn.hpp"
#include "orank/nuisance.hpp"
#include "orank/orthocheck.hpp"
#include "orank/ranker.hpp"
#include "orank/rng.hpp"

using namespace orank;
namespace oc = orank::orthocheck;
namespace ex = orank::experiment;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> uniform_table(std::size_t k, Rng& rng, double lo, double hi) {
  std::vector<double> v(k);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

oracle::Kind to_oracle(oc::LossKind k) {
  switch (k) {
    case oc::LossKind::cate: return oracle::Kind::cate;
    case oc::LossKind::bin: return oracle::Kind::bin;
    case oc::LossKind::soft: return oracle::Kind::soft;
    case oc::LossKind::orth: return oracle::Kind::orth;
  }
  return oracle::Kind::cate;
}

Outcome orthogonality_contrast() {
  const auto r = oc::verify_orthogonality(oc::canonical_population(), 1.0, 20, 1e-3, 0);
  const bool ok = r.orth_max_abs <= 1e-4 && r.soft_median_abs >= 1e-2;
  return {ok, fmt("max|orth| = %.3g (<= 1e-4), median|soft| = %.3g (>= 1e-2), ratio %.3g", r.orth_max_abs,
                  r.soft_median_abs, r.soft_median_abs / std::max(r.orth_max_abs, 1e-300))};
}

Outcome minimizer_recovery() {
  bool ok = true;
  double worst_stat = 0.0, worst_slope = 0.0, worst_r2 = 1.0, worst_rho = 1.0;
  for (std::uint64_t seed : {1, 2}) {
    const auto pop = oc::random_population(4, seed);
    for (double kappa : {0.25, 0.5, 1.0, 2.0}) {
      const auto r = oc::verify_minimizer(pop, kappa, seed);
      const double slope_err = std::abs(r.slope * kappa - 1.0);
      worst_stat = std::max(worst_stat, r.stationarity_max_abs);
      worst_slope = std::max(worst_slope, slope_err);
      worst_r2 = std::min(worst_r2, r.r_squared);
      worst_rho = std::min(worst_rho, r.spearman);
      ok = ok && r.stationarity_max_abs <= 1e-10 && slope_err <= 0.02 && r.r_squared >= 0.999 && r.spearman == 1.0;
    }
  }
  return {ok, fmt("max||grad||inf = %.3g, max|a kappa - 1| = %.4f, min R2 = %.6f, min Spearman = %.3f", worst_stat,
                  worst_slope, worst_r2, worst_rho)};
}

Outcome oracle_equivalence() {
  Rng rng(1);
  double worst = 0.0;
  for (std::size_t k = 2; k <= 4; ++k) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto pop = oc::random_population(k, 100 * k + seed);
      auto eta = pop.eta();
      if (seed % 2 == 0) {
        for (std::size_t a = 0; a < k; ++a) {
          eta.mu0[a] += 0.6 * rng.uniform() - 0.3;
          eta.mu1[a] += 0.6 * rng.uniform() - 0.3;
          eta.e[a] = std::clamp(eta.e[a] + 0.2 * rng.uniform() - 0.1, 0.06, 0.94);
        }
      }
      const auto g = uniform_table(k, rng, -2.0, 2.0);
      const double kappa = 0.25 + 2.0 * rng.uniform();
      for (auto kind : {oc::LossKind::cate, oc::LossKind::bin, oc::LossKind::soft, oc::LossKind::orth}) {
        const double ref = oracle::population_loss(to_oracle(kind), g, {eta.mu0, eta.mu1, eta.e},
                                                   {pop.prob, pop.mu0, pop.mu1, pop.e}, kappa);
        worst = std::max(worst, std::abs(oc::population_loss(kind, g, eta, pop, kappa) - ref));
      }
    }
  }
  double orth_soft = 0.0;
  for (int r = 0; r < 100; ++r) {
    const auto pop = oc::random_population(2 + rng.below(3), 500 + static_cast<std::uint64_t>(r));
    const auto g = uniform_table(pop.size(), rng, -3.0, 3.0);
    const double kappa = 0.25 + 2.0 * rng.uniform();
    orth_soft = std::max(orth_soft, std::abs(oc::population_loss(oc::LossKind::orth, g, pop.eta(), pop, kappa) -
                                             oc::population_loss(oc::LossKind::soft, g, pop.eta(), pop, kappa)));
  }
  return {worst <= 1e-12 && orth_soft <= 1e-12,
          fmt("max |loss - brute force| = %.3g, max |L_orth - L_soft| at truth = %.3g", worst, orth_soft)};
}

Outcome gradient_checks() {
  Rng rng(2024);
  auto random_params = [&](std::size_t d, std::size_t h, nn::Task task) {
    nn::ModelParams p(d, h, task);
    for (Eigen::Index i = 0; i < p.theta().size(); ++i) p.theta()[i] = 2.0 * rng.uniform() - 1.0;
    return p;
  };
  auto random_matrix = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
    return m;
  };
  auto as_std = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  auto with_theta = [](nn::ModelParams q, const std::vector<double>& theta) {
    for (std::size_t i = 0; i < theta.size(); ++i) q.theta()[static_cast<Eigen::Index>(i)] = theta[i];
    return q;
  };

  double nn_worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto task = inst % 2 ? nn::Task::binary : nn::Task::regression;
    const std::size_t d = 1 + rng.below(6), hidden = 1 + rng.below(8), batch = 1 + rng.below(16);
    const auto p = random_params(d, hidden, task);
    const Matrix x = random_matrix(batch, d);
    Vector y(static_cast<Eigen::Index>(batch));
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = task == nn::Task::binary ? rng.uniform() : 2.0 * rng.uniform() - 1.0;
    const double wd = inst % 4 < 2 ? 0.0 : 0.05;
    const auto analytic = as_std(nn::loss_and_grad(p, x, y, wd).grad.theta());
    auto f = [&](const std::vector<double>& th) { return nn::loss_and_grad(with_theta(p, th), x, y, wd).loss; };
    nn_worst = std::max(nn_worst, oracle::max_relative_error(analytic, oracle::fd_gradient(f, as_std(p.theta()), 1e-5)));
  }

  double pair_worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t n = 2 + rng.below(10), d = 1 + rng.below(5), hidden = 1 + rng.below(6);
    const auto scorer = random_params(d, hidden, nn::Task::regression);
    const Matrix x = random_matrix(n, d);
    ranker::PairBatch batch;
    batch.pairs = ranker::sample_pair_count(n, 1 + rng.below(30), rng);
    for (std::size_t p = 0; p < batch.pairs.size(); ++p) batch.labels.push_back(rng.uniform());
    const double wd = inst % 2 ? 0.01 : 0.0;
    const auto analytic = as_std(ranker::pairwise_loss_and_grad(scorer, x, batch, wd).grad.theta());
    auto f = [&](const std::vector<double>& th) {
      return ranker::pairwise_loss_and_grad(with_theta(scorer, th), x, batch, wd).loss;
    };
    pair_worst = std::max(pair_worst,
                          oracle::max_relative_error(analytic, oracle::fd_gradient(f, as_std(scorer.theta()), 1e-5)));
  }
  return {nn_worst <= 1e-4 && pair_worst <= 1e-4,
          fmt("max relative error: nn %.3g, pairwise %.3g (<= 1e-4)", nn_worst, pair_worst)};
}

Outcome oracle_metrics() {
  const auto test = ex::make_test_set(1000, 39, 1.0);
  const auto r = eval::evaluate(test.truth.tau, test.truth);
  const bool ok = std::abs(r.autoc - 1.40) <= 0.05 && std::abs(r.mean_policy_value - 0.59) <= 0.03;
  return {ok, fmt("oracle AUTOC %.4f (1.40 +- 0.05), policy value %.4f (0.59 +- 0.03)", r.autoc, r.mean_policy_value)};
}

double mean_of(const std::vector<ex::AggregateRow>& rows, ex::Method m, std::size_t n) {
  for (const auto& r : rows) {
    if (r.method == m && r.n == n && r.n_seeds > 0) return r.autoc_mean;
  }
  return std::nan("");
}

Outcome benchmark_ordering() {
  ex::BenchmarkSpec spec;
  spec.n_grid = {500, 2000};
  spec.seeds = {0, 1, 2};
  const auto records = ex::run_benchmark(spec, ex::default_hyperparameters(), ex::worker_threads());
  const auto rows = ex::aggregate(records);
  const double rl500 = mean_of(rows, ex::Method::rank_learner, 500);
  const double pl500 = mean_of(rows, ex::Method::plugin_ranker, 500);
  bool ok = rl500 >= pl500 && std::abs(rl500 - 1.30) <= 0.10;
  std::string detail = fmt("n=500: RL %.4f, PL %.4f; n=2000:", rl500, pl500);
  for (ex::Method m : spec.methods) {
    const double v = mean_of(rows, m, 2000);
    ok = ok && v >= 1.26 && v <= 1.42;
    detail += fmt(" %s %.4f", std::string(ex::to_string(m)).c_str(), v);
  }
  for (const auto& r : records) ok = ok && r.ok();
  return {ok, detail};
}

Outcome pair_saturation() {
  ex::PairSweepSpec spec;
  spec.n = 1000;
  spec.fractions = {0.01, 0.5};
  spec.seeds = {0, 1, 2};
  const auto result = ex::sweep_pairs(spec, ex::default_hyperparameters(), ex::worker_threads());
  const double a = result.rows.at(0).autoc_mean, b = result.rows.at(1).autoc_mean;
  const bool ok = std::abs(a - b) <= 0.03 && result.rows[0].n_seeds == 3 && result.rows[1].n_seeds == 3;
  return {ok, fmt("fraction 0.01: %.4f, fraction 0.5: %.4f, |diff| %.4f (<= 0.03)", a, b, std::abs(a - b))};
}

Outcome overlap_degradation() {
  const ex::OverlapSweepSpec spec;
  const auto result = ex::sweep_overlap(spec, ex::default_hyperparameters(), ex::worker_threads());
  bool ok = spec.alphas.size() == 5;
  std::string detail;
  for (ex::Method m : spec.methods) {
    const ex::SweepRow *lo = nullptr, *hi = nullptr;
    for (const auto& r : result.rows) {
      if (r.method != m) continue;
      if (!lo || r.overlap < lo->overlap) lo = &r;
      if (!hi || r.overlap > hi->overlap) hi = &r;
    }
    ok = ok && lo && hi && lo->autoc_mean <= hi->autoc_mean;
    if (lo && hi) detail += fmt("%s %.3f->%.3f; ", std::string(ex::to_string(m)).c_str(), hi->autoc_mean, lo->autoc_mean);
  }
  int rl_best = 0;
  for (double alpha : spec.alphas) {
    double best = -INFINITY, rl = -INFINITY;
    for (const auto& r : result.rows) {
      if (r.x != alpha) continue;
      best = std::max(best, r.autoc_mean);
      if (r.method == ex::Method::rank_learner) rl = r.autoc_mean;
    }
    rl_best += rl >= best;
  }
  ok = ok && rl_best >= 3;
  for (const auto& r : result.records) ok = ok && r.ok();
  return {ok, detail + fmt("Rank-Learner best at %d of 5 alphas (>= 3)", rl_best)};
}

Outcome statistical_identities() {
  dgp::DgpConfig c;
  c.n = 50000;
  c.seed = 17;
  const auto s = dgp::generate(c);
  const auto phi = nuisance::dr_scores(s.data, {s.truth.mu0, s.truth.mu1, s.truth.e});
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double d = phi[i] - s.truth.tau[i];
    mean += d;
    sq += d * d;
  }
  const double n = static_cast<double>(phi.size());
  mean /= n;
  const double se = std::sqrt((sq / n - mean * mean) / (n - 1.0));

  Rng rng(3);
  double worst = 0.0;
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  for (int p = 0; p < 10000; ++p) {
    const nuisance::Eta a{u(-2, 2), u(-2, 2), u(0.02, 0.98)}, b{u(-2, 2), u(-2, 2), u(0.02, 0.98)};
    const int ti = static_cast<int>(rng.below(2)), tj = static_cast<int>(rng.below(2));
    const dgp::Observation wi{{0.0}, ti, u(-4, 4)}, wj{{0.0}, tj, u(-4, 4)};
    const double k = u(0.1, 3.0);
    worst = std::max(worst, std::abs(ranker::pseudo_label_unclipped(wi, wj, a, b, k) +
                                     ranker::pseudo_label_unclipped(wj, wi, b, a, k) - 1.0));
  }
  return {std::abs(mean) <= 3.0 * se && worst <= 1e-12,
          fmt("MC mean(phi - tau) = %.4g, 3 SE = %.4g; max |t(i,j) + t(j,i) - 1| = %.3g", mean, 3.0 * se, worst)};
}

struct Criterion {
  int id;
  const char* name;
  double max_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "orthogonality contrast", 10.0, orthogonality_contrast},
      {2, "minimizer recovery", 10.0, minimizer_recovery},
      {3, "exact-oracle equivalence", 1e9, oracle_equivalence},
      {4, "gradient checks", 30.0, gradient_checks},
      {5, "oracle metric reproduction", 5.0, oracle_metrics},
      {6, "benchmark ordering", 1800.0, benchmark_ordering},
      {7, "pair-subsampling saturation", 1200.0, pair_saturation},
      {8, "overlap degradation", 2700.0, overlap_degradation},
      {9, "statistical identities", 1e9, statistical_identities},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.max_seconds;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("%s C%d %s: %s [%.1fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(), secs,
                in_time ? "" : ", over time limit");
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
