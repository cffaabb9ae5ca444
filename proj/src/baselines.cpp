#include "orank/baselines.hpp"

#include <vector>

#include "orank/error.hpp"
#include "orank/rng.hpp"

namespace orank::baselines {

std::string_view to_string(BaselineKind kind) {
  return kind == BaselineKind::t_learner ? "t_learner" : "dr_learner";
}

TLearner::TLearner(nn::ModelParams mu0, nn::ModelParams mu1) : mu0_(std::move(mu0)), mu1_(std::move(mu1)) {}

Vector TLearner::score(const Matrix& x) const { return nn::predict(mu1_, x) - nn::predict(mu0_, x); }

namespace {

struct Arm {
  Matrix x;
  Vector y;
};

Arm select_arm(const dgp::Dataset& data, int t) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.t()[i] == t) rows.push_back(static_cast<Eigen::Index>(i));
  }
  Arm arm{Matrix(static_cast<Eigen::Index>(rows.size()), data.x().cols()),
          Vector(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    arm.x.row(static_cast<Eigen::Index>(k)) = data.x().row(rows[k]);
    arm.y[static_cast<Eigen::Index>(k)] = data.y()[static_cast<std::size_t>(rows[k])];
  }
  return arm;
}

}  // namespace

TLearner train_t_learner(const dgp::Dataset& train, const dgp::Dataset& val,
                         const nn::TrainConfig& config) {
  const Arm treated = select_arm(train, 1), treated_val = select_arm(val, 1);
  const Arm control = select_arm(train, 0), control_val = select_arm(val, 0);
  if (treated.y.size() == 0 || treated_val.y.size() == 0 || control.y.size() == 0 ||
      control_val.y.size() == 0) {
    throw DegenerateSplit("T-learner needs treated and control units in both train and validation");
  }
  nn::TrainConfig c1 = config, c0 = config;
  c1.seed = derive_seed(config.seed, "t-learner-mu1");
  c0.seed = derive_seed(config.seed, "t-learner-mu0");
  auto mu1 = nn::fit(treated.x, treated.y, treated_val.x, treated_val.y, nn::Task::regression, c1);
  auto mu0 = nn::fit(control.x, control.y, control_val.x, control_val.y, nn::Task::regression, c0);
  return TLearner(std::move(mu0.params), std::move(mu1.params));
}

std::vector<double> dr_learner_targets(const dgp::Dataset& data,
                                       const nuisance::NuisanceEstimates& nuisances) {
  return nuisance::dr_scores(data, nuisance::predict_nuisances(nuisances, data.x()));
}

ScoringModel train_dr_learner(const dgp::Dataset& train, const dgp::Dataset& val,
                              const nuisance::NuisanceEstimates& nuisances,
                              const nn::TrainConfig& config) {
  const auto train_phi = dr_learner_targets(train, nuisances);
  const auto val_phi = dr_learner_targets(val, nuisances);
  const Vector ty = Eigen::Map<const Vector>(train_phi.data(), static_cast<Eigen::Index>(train_phi.size()));
  const Vector vy = Eigen::Map<const Vector>(val_phi.data(), static_cast<Eigen::Index>(val_phi.size()));
  nn::TrainConfig c = config;
  c.seed = derive_seed(config.seed, "dr-learner");
  return ScoringModel(nn::fit(train.x(), ty, val.x(), vy, nn::Task::regression, c).params);
}

}  // namespace orank::baselines
