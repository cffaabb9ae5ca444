#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "orank/dgp.hpp"
#include "orank/nn.hpp"

namespace orank::nuisance {

/// eta = (mu0, mu1, e) at one point.
struct Eta {
  double mu0 = 0.0;
  double mu1 = 0.0;
  double e = 0.5;
};

/// Nuisance values for a set of units, one entry per unit.
struct EtaTable {
  std::vector<double> mu0;
  std::vector<double> mu1;
  std::vector<double> e;

  std::size_t size() const { return e.size(); }
  Eta at(std::size_t i) const { return {mu0[i], mu1[i], e[i]}; }
};

struct FoldModels {
  nn::ModelParams mu0;
  nn::ModelParams mu1;
  nn::ModelParams e;
  std::vector<std::size_t> train_rows;  // every row any of the three models saw
};

struct CrossFitConfig {
  int folds = 2;
  double clip_eps = 0.01;
  nn::TrainConfig outcome;
  nn::TrainConfig propensity;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cross-fitted estimates; predictions for unit i come from models that never saw fold(i).
struct NuisanceEstimates {
  EtaTable out_of_fold;
  std::vector<int> fold;
  std::vector<FoldModels> fold_models;
  double clip_eps = 0.01;
};

/// For each fold k: mu1 on treated units outside k, mu0 on controls outside k, e on
/// all units outside k, each with an 80/20 early-stopping split of the complement.
/// Throws DegenerateSplit if a training or validation split lacks an arm.
NuisanceEstimates cross_fit(const dgp::Dataset& data, const CrossFitConfig& config);

/// Sample-splitting variant for when predictions are only needed on independent units:
/// one set of models fit on the whole sample (80/20 early-stopping split). The result
/// has a single entry in fold_models and no out-of-fold table; `folds` is ignored.
NuisanceEstimates fit_split(const dgp::Dataset& data, const CrossFitConfig& config);

/// Average of the fold models at `x`; e is clipped to [clip_eps, 1 - clip_eps].
Eta predict_nuisances(const NuisanceEstimates& estimates, std::span<const double> x);
EtaTable predict_nuisances(const NuisanceEstimates& estimates, const Matrix& x);

/// (T/e)(Y - mu1) - ((1-T)/(1-e))(Y - mu0) + mu1 - mu0
double dr_score(int t, double y, double mu0, double mu1, double e);
std::vector<double> dr_scores(const dgp::Dataset& data, const EtaTable& eta);

/// CSV `mu0_hat,mu1_hat,e_hat,phi,fold`, row-aligned with the dataset.
void save_dump(const std::filesystem::path& path, const dgp::Dataset& data,
               const NuisanceEstimates& estimates);

}  // namespace orank::nuisance
