#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "orank/nuisance.hpp"

namespace orank::orthocheck {

/// Finite-support population: support point k has probability prob[k] and true
/// nuisances mu0[k], mu1[k], e[k]. Covariates themselves never enter the losses.
struct DiscretePopulation {
  std::vector<double> prob;
  std::vector<double> mu0;
  std::vector<double> mu1;
  std::vector<double> e;

  std::size_t size() const { return prob.size(); }
  std::vector<double> tau() const;
  nuisance::EtaTable eta() const { return {mu0, mu1, e}; }

  /// Positive probabilities summing to 1, e in (0, 1), K >= 2, distinct tau.
  void validate() const;
};

/// Propensities must stay in this range along every finite-difference perturbation.
inline constexpr double kMinPropensity = 0.05;
inline constexpr double kMaxPropensity = 0.95;

/// The five-point population shipped as data/canonical_population.txt.
DiscretePopulation canonical_population();
/// Random K-point population with e in [0.1, 0.9] and distinct tau.
DiscretePopulation random_population(std::size_t k, std::uint64_t seed);

/// Text format: a line `orank-population 1`, a header `prob,mu0,mu1,e`, one row per point.
void save_population(const std::filesystem::path& path, const DiscretePopulation& pop);
DiscretePopulation load_population(const std::filesystem::path& path);

enum class LossKind { cate, bin, soft, orth };
std::string_view to_string(LossKind kind);

/// Exact population loss with nuisances `eta` plugged in.
///
/// Pairwise kinds average over ordered pairs of distinct support points with weight
/// prob[a] prob[b] / (1 - sum prob^2). The cross-entropy is affine in its label and
/// the pseudo label is affine in Y, so the expectation over (T, Y) given the pair is
/// the loss at the conditional-mean label, computed under the population's true
/// mu_t and e. `cate` is sum prob[a] (g[a] - tau_hat[a])^2.
double population_loss(LossKind kind, std::span<const double> g, const nuisance::EtaTable& eta,
                       const DiscretePopulation& pop, double kappa);

/// Analytic gradient of population_loss with respect to the g table.
std::vector<double> loss_gradient_g(LossKind kind, std::span<const double> g,
                                    const nuisance::EtaTable& eta, const DiscretePopulation& pop,
                                    double kappa);

/// Perturbation directions for g and each nuisance table.
struct Direction {
  std::vector<double> d_g;
  std::vector<double> d_mu0;
  std::vector<double> d_mu1;
  std::vector<double> d_e;
};

/// Uniform entries, scaled to unit sup-norm jointly, with d_e shrunk where needed so
/// that e0 +- h d_e stays inside [kMinPropensity, kMaxPropensity].
Direction random_direction(const DiscretePopulation& pop, const nuisance::EtaTable& eta0, double h,
                           std::uint64_t seed);

/// Mixed derivative d^2/ds du of L(g0 + u d_g, eta0 + s d_eta) at (0, 0) by the
/// four-point central stencil with step h. Throws StepTooLarge if a perturbed
/// propensity leaves [kMinPropensity, kMaxPropensity].
double cross_derivative(LossKind kind, std::span<const double> g0, const nuisance::EtaTable& eta0,
                        const Direction& dir, double h, const DiscretePopulation& pop, double kappa);

struct Thresholds {
  double orth_max_abs = 1e-4;
  double soft_median_abs = 1e-2;
};

struct OrthogonalityReport {
  double kappa = 1.0;
  double h = 1e-3;
  std::uint64_t seed = 0;
  std::vector<double> orth;  // one cross-derivative per direction
  std::vector<double> soft;
  double orth_max_abs = 0.0;
  double soft_median_abs = 0.0;
  Thresholds thresholds;
  bool pass = false;
};

/// Cross-derivatives of the soft and orthogonal losses at their shared minimizer
/// g0 = tau / kappa and the true nuisances, over seeded random directions.
OrthogonalityReport verify_orthogonality(const DiscretePopulation& pop, double kappa,
                                         int n_directions, double h, std::uint64_t seed);

struct MinimizerReport {
  double kappa = 1.0;
  std::uint64_t seed = 0;
  // (a) stationarity at tau / kappa + c for c in {-1, 0, 2}
  double stationarity_max_abs = 0.0;
  // (b) recovery from a random start
  long iterations = 0;
  double residual_grad = 0.0;
  bool converged = false;
  std::vector<double> g_hat;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double spearman = 0.0;
  // (c) mean p(1 - p) at the optimum for kappa in {0.25, 1, 3}
  std::vector<double> flatness_kappas;
  std::vector<double> flatness;
  bool pass = false;
};

MinimizerReport verify_minimizer(const DiscretePopulation& pop, double kappa, std::uint64_t seed);

void to_json(nlohmann::json& j, const OrthogonalityReport& r);
void from_json(const nlohmann::json& j, OrthogonalityReport& r);
void to_json(nlohmann::json& j, const MinimizerReport& r);
void from_json(const nlohmann::json& j, MinimizerReport& r);

}  // namespace orank::orthocheck
