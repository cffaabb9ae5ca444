#pragma once

#include <cstdint>
#include <vector>

#include "orank/dgp.hpp"
#include "orank/nn.hpp"
#include "orank/nuisance.hpp"
#include "orank/rng.hpp"
#include "orank/scorer.hpp"

namespace orank::ranker {

struct RankConfig {
  double kappa = 1.0;           // smoothness of the soft targets
  double pair_fraction = 0.01;  // ordered pairs per epoch, as a fraction of n^2
  double clip_eps_label = 1e-4;
  nn::TrainConfig train;

  void validate() const;
};

/// Ordered pair of unit indices, i != j.
struct Pair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  friend bool operator==(const Pair&, const Pair&) = default;
};

struct PairBatch {
  std::vector<Pair> pairs;
  std::vector<double> labels;
};

/// sigmoid((tau_i - tau_j) / kappa): probability that unit i has the larger effect.
double soft_target(double tau_i, double tau_j, double kappa);

/// t (1 - t) / kappa.
double correction_weight(double t, double kappa);

/// Soft target plus the orthogonal correction, before clipping:
///   t + omega * [(phi_i - tau_hat_i) - (phi_j - tau_hat_j)]
/// with tau_hat = mu1 - mu0 and phi the doubly robust score under eta.
double pseudo_label_unclipped(const dgp::Observation& w_i, const dgp::Observation& w_j,
                              const nuisance::Eta& eta_i, const nuisance::Eta& eta_j,
                              double kappa);
/// The same, clipped to [clip, 1 - clip].
double pseudo_label(const dgp::Observation& w_i, const dgp::Observation& w_j,
                    const nuisance::Eta& eta_i, const nuisance::Eta& eta_j, double kappa,
                    double clip);

/// round(fraction * n^2) ordered off-diagonal pairs, uniform with replacement (at least one).
std::vector<Pair> sample_pairs(std::size_t n, double pair_fraction, Rng& rng);
/// Exactly `count` ordered off-diagonal pairs, uniform with replacement.
std::vector<Pair> sample_pair_count(std::size_t n, std::size_t count, Rng& rng);

/// Mean binary cross-entropy between sigmoid(g(x_i) - g(x_j)) and the labels, plus
/// the L2 term, with its exact gradient.
nn::LossAndGrad pairwise_loss_and_grad(const nn::ModelParams& scorer, const Matrix& x,
                                       const PairBatch& batch, double weight_decay);
double pairwise_loss(const nn::ModelParams& scorer, const Matrix& x, const PairBatch& batch);

enum class LabelKind { orthogonal, plugin };

/// Per-unit label ingredients; a pair's label needs only these two numbers per unit.
struct UnitTargets {
  std::vector<double> tau_hat;   // mu1_hat - mu0_hat
  std::vector<double> residual;  // phi_hat - tau_hat (all zero for plug-in labels)
};

UnitTargets unit_targets(const dgp::Dataset& data, const nuisance::EtaTable& eta, LabelKind kind);

/// Label of pair (i, j) from precomputed unit targets, clipped.
double pair_label(const UnitTargets& units, std::size_t i, std::size_t j, double kappa, double clip);
void fill_labels(PairBatch& batch, const UnitTargets& units, double kappa, double clip);

struct RankFit {
  ScoringModel model;
  std::vector<double> val_loss;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

/// Second-stage training on resampled pairs each epoch, early-stopped on a fixed
/// validation pair sample of min(10 n_val, n_val^2 - n_val) pairs.
RankFit train_ranker(const dgp::Dataset& train, const nuisance::EtaTable& train_eta,
                     const dgp::Dataset& val, const nuisance::EtaTable& val_eta,
                     const RankConfig& config, LabelKind kind);

/// Orthogonal pseudo labels; stage-2 nuisances come from the fold-model average.
RankFit train_rank_learner(const dgp::Dataset& train, const dgp::Dataset& val,
                           const nuisance::NuisanceEstimates& nuisances, const RankConfig& config);

/// Soft targets from tau_hat, no correction.
RankFit train_plugin_ranker(const dgp::Dataset& train, const dgp::Dataset& val,
                            const nuisance::NuisanceEstimates& nuisances, const RankConfig& config);

}  // namespace orank::ranker
