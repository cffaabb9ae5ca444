#include "orank/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "orank/error.hpp"

namespace orank::ranker {

void RankConfig::validate() const {
  if (!(kappa > 0.0)) throw InvalidInput("kappa must be > 0");
  if (!(pair_fraction > 0.0 && pair_fraction <= 1.0)) throw InvalidInput("pair_fraction must lie in (0, 1]");
  if (!(clip_eps_label > 0.0 && clip_eps_label < 0.5)) throw InvalidInput("clip_eps_label must lie in (0, 0.5)");
  train.validate();
}

double soft_target(double tau_i, double tau_j, double kappa) {
  if (!(kappa > 0.0)) throw InvalidInput("kappa must be > 0");
  return nn::sigmoid((tau_i - tau_j) / kappa);
}

double correction_weight(double t, double kappa) { return t * (1.0 - t) / kappa; }

double pseudo_label_unclipped(const dgp::Observation& w_i, const dgp::Observation& w_j,
                              const nuisance::Eta& eta_i, const nuisance::Eta& eta_j,
                              double kappa) {
  const double tau_i = eta_i.mu1 - eta_i.mu0;
  const double tau_j = eta_j.mu1 - eta_j.mu0;
  const double phi_i = nuisance::dr_score(w_i.t, w_i.y, eta_i.mu0, eta_i.mu1, eta_i.e);
  const double phi_j = nuisance::dr_score(w_j.t, w_j.y, eta_j.mu0, eta_j.mu1, eta_j.e);
  const double t = soft_target(tau_i, tau_j, kappa);
  return t + correction_weight(t, kappa) * ((phi_i - tau_i) - (phi_j - tau_j));
}

double pseudo_label(const dgp::Observation& w_i, const dgp::Observation& w_j,
                    const nuisance::Eta& eta_i, const nuisance::Eta& eta_j, double kappa,
                    double clip) {
  return std::clamp(pseudo_label_unclipped(w_i, w_j, eta_i, eta_j, kappa), clip, 1.0 - clip);
}

std::vector<Pair> sample_pair_count(std::size_t n, std::size_t count, Rng& rng) {
  if (n < 2) throw InvalidInput("pair sampling needs at least 2 units");
  std::vector<Pair> pairs(count);
  for (auto& p : pairs) {
    // Uniform over the n(n-1) off-diagonal pairs: draw j from the n-1 indices != i.
    const auto i = rng.below(n);
    auto j = rng.below(n - 1);
    if (j >= i) ++j;
    p = {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)};
  }
  return pairs;
}

std::vector<Pair> sample_pairs(std::size_t n, double pair_fraction, Rng& rng) {
  if (!(pair_fraction > 0.0 && pair_fraction <= 1.0)) throw InvalidInput("pair_fraction must lie in (0, 1]");
  const double units = static_cast<double>(n);
  const auto count = static_cast<std::size_t>(std::llround(pair_fraction * units * units));
  return sample_pair_count(n, std::max<std::size_t>(count, 1), rng);
}

namespace {

/// Stacks the rows of the first and second members: [x_i ; x_j].
Matrix pair_rows(const Matrix& x, const std::vector<Pair>& pairs, std::size_t begin, std::size_t end) {
  const auto b = static_cast<Eigen::Index>(end - begin);
  Matrix out(2 * b, x.cols());
  for (std::size_t k = begin; k < end; ++k) {
    const auto r = static_cast<Eigen::Index>(k - begin);
    out.row(r) = x.row(pairs[k].i);
    out.row(b + r) = x.row(pairs[k].j);
  }
  return out;
}

double batch_loss_and_grad(const nn::ModelParams& scorer, const Matrix& x, const PairBatch& batch,
                           std::size_t begin, std::size_t end, nn::ModelParams* grad) {
  const Matrix rows = pair_rows(x, batch.pairs, begin, end);
  nn::ForwardCache cache;
  const Vector g = nn::logits(scorer, rows, grad ? &cache : nullptr);
  const auto b = static_cast<Eigen::Index>(end - begin);
  const double inv_b = 1.0 / static_cast<double>(b);
  Vector d_g(2 * b);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < b; ++r) {
    const double margin = g[r] - g[b + r];
    const double label = batch.labels[begin + static_cast<std::size_t>(r)];
    loss += nn::softplus(margin) - label * margin;
    const double d_margin = (nn::sigmoid(margin) - label) * inv_b;
    d_g[r] = d_margin;
    d_g[b + r] = -d_margin;
  }
  if (grad) nn::backward(scorer, rows, cache, d_g, *grad);
  return loss * inv_b;
}

void check_batch(const nn::ModelParams& scorer, const Matrix& x, const PairBatch& batch) {
  if (batch.pairs.empty()) throw InvalidInput("empty pair batch");
  if (batch.pairs.size() != batch.labels.size()) throw InvalidInput("pairs and labels differ in length");
  if (scorer.task() != nn::Task::regression) throw InvalidInput("scorer needs a regression head");
  for (const auto& p : batch.pairs) {
    if (p.i >= x.rows() || p.j >= x.rows()) throw InvalidInput("pair index out of range");
  }
}

}  // namespace

nn::LossAndGrad pairwise_loss_and_grad(const nn::ModelParams& scorer, const Matrix& x,
                                       const PairBatch& batch, double weight_decay) {
  check_batch(scorer, x, batch);
  nn::LossAndGrad out{0.0, scorer.zeros_like()};
  out.loss = batch_loss_and_grad(scorer, x, batch, 0, batch.pairs.size(), &out.grad);
  nn::add_weight_decay(scorer, weight_decay, out.loss, out.grad);
  return out;
}

double pairwise_loss(const nn::ModelParams& scorer, const Matrix& x, const PairBatch& batch) {
  check_batch(scorer, x, batch);
  // Scores are computed once per unit; the pair loss then only needs lookups.
  const Vector g = nn::logits(scorer, x);
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    const double margin = g[batch.pairs[k].i] - g[batch.pairs[k].j];
    loss += nn::softplus(margin) - batch.labels[k] * margin;
  }
  return loss / static_cast<double>(batch.pairs.size());
}

UnitTargets unit_targets(const dgp::Dataset& data, const nuisance::EtaTable& eta, LabelKind kind) {
  if (eta.size() != data.size()) throw InvalidInput("nuisance table does not match dataset");
  UnitTargets units;
  units.tau_hat.resize(data.size());
  units.residual.assign(data.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    units.tau_hat[i] = eta.mu1[i] - eta.mu0[i];
    if (kind == LabelKind::orthogonal) {
      const double phi = nuisance::dr_score(data.t()[i], data.y()[i], eta.mu0[i], eta.mu1[i], eta.e[i]);
      units.residual[i] = phi - units.tau_hat[i];
    }
  }
  return units;
}

double pair_label(const UnitTargets& units, std::size_t i, std::size_t j, double kappa, double clip) {
  const double t = soft_target(units.tau_hat[i], units.tau_hat[j], kappa);
  const double label = t + correction_weight(t, kappa) * (units.residual[i] - units.residual[j]);
  return std::clamp(label, clip, 1.0 - clip);
}

void fill_labels(PairBatch& batch, const UnitTargets& units, double kappa, double clip) {
  batch.labels.resize(batch.pairs.size());
  for (std::size_t k = 0; k < batch.pairs.size(); ++k) {
    batch.labels[k] = pair_label(units, batch.pairs[k].i, batch.pairs[k].j, kappa, clip);
  }
}

RankFit train_ranker(const dgp::Dataset& train, const nuisance::EtaTable& train_eta,
                     const dgp::Dataset& val, const nuisance::EtaTable& val_eta,
                     const RankConfig& config, LabelKind kind) {
  config.validate();
  if (train.size() < 2 || val.size() < 2) throw InvalidInput("ranker needs at least 2 training and 2 validation units");
  const auto& tc = config.train;
  const UnitTargets train_units = unit_targets(train, train_eta, kind);
  const UnitTargets val_units = unit_targets(val, val_eta, kind);

  const Rng root(tc.seed);
  Rng pair_stream = root.derive("train-pairs");
  Rng val_stream = root.derive("validation-pairs");

  const std::size_t n_val = val.size();
  PairBatch val_batch;
  val_batch.pairs = sample_pair_count(n_val, std::min(10 * n_val, n_val * n_val - n_val), val_stream);
  fill_labels(val_batch, val_units, config.kappa, config.clip_eps_label);

  nn::ModelParams params = nn::init(train.dim(), tc.hidden, nn::Task::regression, derive_seed(tc.seed, "init"));
  nn::AdamState adam(params.size());
  nn::EarlyStopping stopper(tc.patience);
  RankFit fit{ScoringModel(params), {}, 0, 0.0};

  PairBatch batch;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    batch.pairs = sample_pairs(train.size(), config.pair_fraction, pair_stream);
    fill_labels(batch, train_units, config.kappa, config.clip_eps_label);
    for (std::size_t start = 0; start < batch.pairs.size(); start += tc.batch_size) {
      const std::size_t end = std::min(batch.pairs.size(), start + tc.batch_size);
      nn::ModelParams grad = params.zeros_like();
      double loss = batch_loss_and_grad(params, train.x(), batch, start, end, &grad);
      nn::add_weight_decay(params, tc.weight_decay, loss, grad);
      if (!std::isfinite(loss)) throw TrainingError("non-finite pairwise loss", epoch);
      nn::adam_step(params, grad, adam, tc.learning_rate);
    }
    const double v = pairwise_loss(params, val.x(), val_batch);
    if (!std::isfinite(v)) throw TrainingError("non-finite validation loss", epoch);
    fit.val_loss.push_back(v);
    if (stopper.update(v)) fit.model = ScoringModel(params);
    if (stopper.should_stop()) break;
  }
  fit.best_epoch = stopper.best_epoch();
  fit.best_val_loss = stopper.best();
  return fit;
}

RankFit train_rank_learner(const dgp::Dataset& train, const dgp::Dataset& val,
                           const nuisance::NuisanceEstimates& nuisances, const RankConfig& config) {
  return train_ranker(train, nuisance::predict_nuisances(nuisances, train.x()), val,
                      nuisance::predict_nuisances(nuisances, val.x()), config, LabelKind::orthogonal);
}

RankFit train_plugin_ranker(const dgp::Dataset& train, const dgp::Dataset& val,
                            const nuisance::NuisanceEstimates& nuisances, const RankConfig& config) {
  return train_ranker(train, nuisance::predict_nuisances(nuisances, train.x()), val,
                      nuisance::predict_nuisances(nuisances, val.x()), config, LabelKind::plugin);
}

}  // namespace orank::ranker
