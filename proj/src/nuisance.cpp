#include "orank/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "orank/csv.hpp"
#include "orank/error.hpp"
#include "orank/rng.hpp"

namespace orank::nuisance {

void CrossFitConfig::validate() const {
  if (folds < 2) throw InvalidInput("cross-fitting needs at least 2 folds");
  if (!(clip_eps > 0.0 && clip_eps < 0.5)) throw InvalidInput("clip_eps must lie in (0, 0.5)");
  outcome.validate();
  propensity.validate();
}

namespace {

Matrix gather(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

template <class T>
Vector gather(const std::vector<T>& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Eigen::Index>(k)] = static_cast<double>(v[rows[k]]);
  return out;
}

std::vector<std::size_t> arm(const dgp::Dataset& data, std::span<const std::size_t> rows, int t) {
  std::vector<std::size_t> out;
  for (std::size_t r : rows) {
    if (data.t()[r] == t) out.push_back(r);
  }
  return out;
}

nn::ModelParams fit_on(const dgp::Dataset& data, std::span<const std::size_t> train,
                       std::span<const std::size_t> val, nn::Task task, nn::TrainConfig config,
                       std::uint64_t seed) {
  config.seed = seed;
  Vector ty, vy;
  if (task == nn::Task::binary) {
    ty = gather(data.t(), train);
    vy = gather(data.t(), val);
  } else {
    ty = gather(data.y(), train);
    vy = gather(data.y(), val);
  }
  return nn::fit(gather(data.x(), train), ty, gather(data.x(), val), vy, task, config).params;
}

/// mu1 on treated rows, mu0 on control rows and e on all rows, each early-stopped on an
/// 80/20 split of `rows`.
FoldModels fit_models(const dgp::Dataset& data, const std::vector<std::size_t>& rows,
                      const CrossFitConfig& config, std::uint64_t seed, const std::string& label) {
  const dgp::Split inner = dgp::partition(rows.size(), derive_seed(seed, "inner-split"));
  std::vector<std::size_t> inner_train, inner_val;
  for (std::size_t r : inner.train) inner_train.push_back(rows[r]);
  for (std::size_t r : inner.validation) inner_val.push_back(rows[r]);

  const auto treated_train = arm(data, inner_train, 1);
  const auto treated_val = arm(data, inner_val, 1);
  const auto control_train = arm(data, inner_train, 0);
  const auto control_val = arm(data, inner_val, 0);
  if (treated_train.empty() || treated_val.empty() || control_train.empty() || control_val.empty()) {
    throw DegenerateSplit(label + ": training rows lack treated or control units");
  }
  FoldModels models;
  models.mu1 = fit_on(data, treated_train, treated_val, nn::Task::regression, config.outcome,
                      derive_seed(seed, "mu1"));
  models.mu0 = fit_on(data, control_train, control_val, nn::Task::regression, config.outcome,
                      derive_seed(seed, "mu0"));
  models.e = fit_on(data, inner_train, inner_val, nn::Task::binary, config.propensity,
                    derive_seed(seed, "e"));
  models.train_rows = rows;
  return models;
}

}  // namespace

NuisanceEstimates cross_fit(const dgp::Dataset& data, const CrossFitConfig& config) {
  config.validate();
  const std::size_t n = data.size();
  const auto k_folds = static_cast<std::size_t>(config.folds);
  if (n < 10 * k_folds) throw InvalidInput("too few units for cross-fitting");

  NuisanceEstimates est;
  est.clip_eps = config.clip_eps;
  est.fold.assign(n, 0);
  {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = Rng(config.seed).derive("folds");
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    for (std::size_t i = 0; i < n; ++i) est.fold[perm[i]] = static_cast<int>(i % k_folds);
  }
  est.out_of_fold.mu0.assign(n, 0.0);
  est.out_of_fold.mu1.assign(n, 0.0);
  est.out_of_fold.e.assign(n, 0.0);

  for (std::size_t k = 0; k < k_folds; ++k) {
    std::vector<std::size_t> held, complement;
    for (std::size_t i = 0; i < n; ++i) (est.fold[i] == static_cast<int>(k) ? held : complement).push_back(i);

    FoldModels models = fit_models(data, complement, config,
                                   derive_seed(config.seed, "fold-" + std::to_string(k)),
                                   "fold " + std::to_string(k));

    const Matrix held_x = gather(data.x(), held);
    const Vector m0 = nn::predict(models.mu0, held_x);
    const Vector m1 = nn::predict(models.mu1, held_x);
    const Vector e = nn::predict(models.e, held_x);
    for (std::size_t h = 0; h < held.size(); ++h) {
      const auto hi = static_cast<Eigen::Index>(h);
      est.out_of_fold.mu0[held[h]] = m0[hi];
      est.out_of_fold.mu1[held[h]] = m1[hi];
      est.out_of_fold.e[held[h]] = std::clamp(e[hi], config.clip_eps, 1.0 - config.clip_eps);
    }
    est.fold_models.push_back(std::move(models));
  }
  return est;
}

NuisanceEstimates fit_split(const dgp::Dataset& data, const CrossFitConfig& config) {
  if (!(config.clip_eps > 0.0 && config.clip_eps < 0.5)) throw InvalidInput("clip_eps must lie in (0, 0.5)");
  config.outcome.validate();
  config.propensity.validate();
  if (data.size() < 10) throw InvalidInput("too few units for nuisance estimation");
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  NuisanceEstimates est;
  est.clip_eps = config.clip_eps;
  est.fold_models.push_back(fit_models(data, rows, config, derive_seed(config.seed, "split"), "nuisance sample"));
  return est;
}

Eta predict_nuisances(const NuisanceEstimates& estimates, std::span<const double> x) {
  Eta eta{0.0, 0.0, 0.0};
  for (const auto& m : estimates.fold_models) {
    eta.mu0 += nn::forward(m.mu0, x);
    eta.mu1 += nn::forward(m.mu1, x);
    eta.e += nn::forward(m.e, x);
  }
  const auto k = static_cast<double>(estimates.fold_models.size());
  eta.mu0 /= k;
  eta.mu1 /= k;
  eta.e = std::clamp(eta.e / k, estimates.clip_eps, 1.0 - estimates.clip_eps);
  return eta;
}

EtaTable predict_nuisances(const NuisanceEstimates& estimates, const Matrix& x) {
  const auto n = static_cast<Eigen::Index>(x.rows());
  Vector m0 = Vector::Zero(n), m1 = Vector::Zero(n), e = Vector::Zero(n);
  for (const auto& m : estimates.fold_models) {
    m0 += nn::predict(m.mu0, x);
    m1 += nn::predict(m.mu1, x);
    e += nn::predict(m.e, x);
  }
  const auto k = static_cast<double>(estimates.fold_models.size());
  EtaTable out;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.mu0.push_back(m0[i] / k);
    out.mu1.push_back(m1[i] / k);
    out.e.push_back(std::clamp(e[i] / k, estimates.clip_eps, 1.0 - estimates.clip_eps));
  }
  return out;
}

double dr_score(int t, double y, double mu0, double mu1, double e) {
  if (!(e > 0.0 && e < 1.0)) throw InvalidInput("propensity must lie in (0, 1)");
  if (t != 0 && t != 1) throw InvalidInput("treatment must be 0 or 1");
  const double treated = t == 1 ? (y - mu1) / e : 0.0;
  const double control = t == 0 ? (y - mu0) / (1.0 - e) : 0.0;
  return treated - control + mu1 - mu0;
}

std::vector<double> dr_scores(const dgp::Dataset& data, const EtaTable& eta) {
  if (eta.size() != data.size()) throw InvalidInput("nuisance table does not match dataset");
  std::vector<double> phi(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    phi[i] = dr_score(data.t()[i], data.y()[i], eta.mu0[i], eta.mu1[i], eta.e[i]);
  }
  return phi;
}

void save_dump(const std::filesystem::path& path, const dgp::Dataset& data,
               const NuisanceEstimates& estimates) {
  const auto phi = dr_scores(data, estimates.out_of_fold);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "mu0_hat,mu1_hat,e_hat,phi,fold\n";
  const auto& eta = estimates.out_of_fold;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << csv::format_double(eta.mu0[i]) << ',' << csv::format_double(eta.mu1[i]) << ','
        << csv::format_double(eta.e[i]) << ',' << csv::format_double(phi[i]) << ','
        << estimates.fold[i] << '\n';
  }
}

}  // namespace orank::nuisance
