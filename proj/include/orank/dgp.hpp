#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "orank/types.hpp"

namespace orank::dgp {

/// Covariate dimension of the synthetic benchmark.
inline constexpr std::size_t kDim = 10;

/// One unit W = (X, T, Y).
struct Observation {
  std::vector<double> x;
  int t = 0;
  double y = 0.0;
};

/// i.i.d. units stored column-wise: covariates as an n x d matrix.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Matrix x, std::vector<int> t, std::vector<double> y);
  explicit Dataset(std::span<const Observation> observations);

  std::size_t size() const { return t_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(x_.cols()); }
  bool empty() const { return t_.empty(); }

  const Matrix& x() const { return x_; }
  const std::vector<int>& t() const { return t_; }
  const std::vector<double>& y() const { return y_; }

  Observation observation(std::size_t i) const;

  Dataset subset(std::span<const std::size_t> rows) const;

  friend bool operator==(const Dataset&, const Dataset&);

 private:
  Matrix x_;
  std::vector<int> t_;
  std::vector<double> y_;
};

/// Oracle quantities per unit, row-aligned with a Dataset.
struct GroundTruth {
  std::vector<double> tau;
  std::vector<double> mu0;
  std::vector<double> mu1;
  std::vector<double> e;

  std::size_t size() const { return tau.size(); }
  GroundTruth subset(std::span<const std::size_t> rows) const;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct DgpConfig {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double alpha = 1.0;     // propensity sharpness; larger means less overlap
  double noise_sd = 0.6;

  void validate() const;
};

// Formulas below use 1-based covariate names X1..X10; x[0] holds X1.

/// s(X) = 0.8 X1 + 0.6 X2 + 0.4 X3 + 0.3 X1^2 - 0.2 X2 X3
double latent_score(std::span<const double> x);
/// tau(X) = s + 0.5 tanh(s)
double true_cate(std::span<const double> x);
/// e(X) = sigmoid(alpha (0.8 s + 0.6 (X6 - 0.5 X7)))
double true_propensity(std::span<const double> x, double alpha = 1.0);
/// mu0(X) = 0.5 X2 - 0.4 X3 + 0.3 sin(X4) + 0.2 (X5^2 - 1)
double true_mu0(std::span<const double> x);
double true_mu1(std::span<const double> x);

struct Sample {
  Dataset data;
  GroundTruth truth;
};

/// Draws X ~ N(0, I_10), T ~ Bernoulli(e(X)), Y = T mu1 + (1-T) mu0 + eps.
///
/// Covariates, treatment uniforms, and noise come from separate streams derived
/// from config.seed, so changing alpha alters only e and T, never X or eps.
Sample generate(const DgpConfig& config);

/// Oracle quantities for arbitrary covariates.
GroundTruth ground_truth(const Matrix& x, double alpha = 1.0);

/// Mean of min(e, 1 - e).
double overlap_measure(const GroundTruth& truth);

/// Index sets of an 80/20 split drawn uniformly without replacement.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Requires at least 10 rows. Index lists are sorted ascending.
Split partition(std::size_t n, std::uint64_t seed, double train_fraction = 0.8);

/// CSV with header x1..xd,t,y and 17 significant digits.
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
/// CSV with header tau,mu0,mu1,e.
void save_ground_truth(const std::filesystem::path& path, const GroundTruth& truth);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace orank::dgp
