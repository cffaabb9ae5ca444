#pragma once

#include <string_view>

#include "orank/dgp.hpp"
#include "orank/nn.hpp"
#include "orank/nuisance.hpp"
#include "orank/scorer.hpp"

namespace orank::baselines {

enum class BaselineKind { t_learner, dr_learner };

std::string_view to_string(BaselineKind kind);

/// score(x) = mu1_hat(x) - mu0_hat(x), each arm fit on the stage-2 sample.
class TLearner final : public Scorer {
 public:
  TLearner(nn::ModelParams mu0, nn::ModelParams mu1);
  using Scorer::score;
  Vector score(const Matrix& x) const override;
  const nn::ModelParams& mu0() const { return mu0_; }
  const nn::ModelParams& mu1() const { return mu1_; }

 private:
  nn::ModelParams mu0_;
  nn::ModelParams mu1_;
};

/// Fits mu1 on treated and mu0 on control units of `train`, early-stopping each on
/// the same arm of `val`. Throws DegenerateSplit on an empty arm.
TLearner train_t_learner(const dgp::Dataset& train, const dgp::Dataset& val,
                         const nn::TrainConfig& config);

/// DR-learner targets: doubly robust scores under the fold-averaged nuisances.
std::vector<double> dr_learner_targets(const dgp::Dataset& data,
                                       const nuisance::NuisanceEstimates& nuisances);

/// Regresses the doubly robust scores on X with squared error.
ScoringModel train_dr_learner(const dgp::Dataset& train, const dgp::Dataset& val,
                              const nuisance::NuisanceEstimates& nuisances,
                              const nn::TrainConfig& config);

}  // namespace orank::baselines
