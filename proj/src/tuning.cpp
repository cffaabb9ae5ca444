#include <array>

#include "orank/baselines.hpp"
#include "orank/error.hpp"
#include "orank/eval.hpp"
#include "orank/experiment.hpp"
#include "orank/ranker.hpp"
#include "orank/rng.hpp"

namespace orank::experiment {

namespace {

constexpr std::array<std::size_t, 2> kHidden{64, 128};
constexpr std::array<double, 4> kLearningRate{1e-4, 3e-4, 5e-4, 1e-3};
constexpr std::array<double, 3> kWeightDecay{0.0, 1e-5, 1e-4};
constexpr std::array<std::size_t, 2> kBatch{128, 256};
constexpr std::array<double, 5> kKappa{0.25, 0.5, 1.0, 1.5, 3.0};
constexpr std::size_t kTuningHoldout = 5000;

template <typename T, std::size_t N>
T pick(const std::array<T, N>& values, Rng& rng) {
  return values[rng.below(N)];
}

nn::TrainConfig draw_config(Rng& rng) {
  nn::TrainConfig c;
  c.hidden = pick(kHidden, rng);
  c.learning_rate = pick(kLearningRate, rng);
  c.weight_decay = pick(kWeightDecay, rng);
  c.batch_size = pick(kBatch, rng);
  return c;
}

struct ArmData {
  Matrix x;
  Vector y;
};

ArmData rows_where(const dgp::Dataset& d, int t, bool all) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (all || d.t()[i] == t) rows.push_back(static_cast<Eigen::Index>(i));
  }
  ArmData out{Matrix(static_cast<Eigen::Index>(rows.size()), d.x().cols()),
              Vector(static_cast<Eigen::Index>(rows.size()))};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.x.row(static_cast<Eigen::Index>(k)) = d.x().row(rows[k]);
    out.y[static_cast<Eigen::Index>(k)] =
        all ? d.t()[static_cast<std::size_t>(rows[k])] : d.y()[static_cast<std::size_t>(rows[k])];
  }
  return out;
}

/// Returns the index of the lowest objective among `trials[first..]`; earliest wins ties.
std::size_t best_of(const std::vector<TuneTrial>& trials, std::size_t first) {
  std::size_t best = first;
  for (std::size_t k = first; k < trials.size(); ++k) {
    if (trials[k].objective < trials[best].objective) best = k;
  }
  return best;
}

}  // namespace

TuneResult tune(std::uint64_t seed, std::size_t n, int draws) {
  if (draws < 1) throw InvalidInput("draws must be >= 1");
  TuneResult result;
  result.best = default_hyperparameters();
  Hyperparameters& hp = result.best;

  // Models train and early-stop on an 80/20 split of n units, as in the benchmark. Each
  // draw is then scored on a large independent sample so that the comparison between
  // draws is not dominated by the noise of a 20% validation split.
  const auto sample = dgp::generate({n, derive_seed(seed, "tuning-sample"), 1.0, 0.6}).data;
  const auto holdout = dgp::generate({kTuningHoldout, derive_seed(seed, "tuning-holdout"), 1.0, 0.6}).data;
  const dgp::Split split = dgp::partition(n, derive_seed(seed, "tuning-split"));
  const dgp::Dataset train = sample.subset(split.train), val = sample.subset(split.validation);

  {
    Rng rng = Rng(seed).derive("outcome-draws");
    const auto tr1 = rows_where(train, 1, false), va1 = rows_where(val, 1, false), ho1 = rows_where(holdout, 1, false);
    const auto tr0 = rows_where(train, 0, false), va0 = rows_where(val, 0, false), ho0 = rows_where(holdout, 0, false);
    const std::size_t first = result.trials.size();
    for (int d = 0; d < draws; ++d) {
      nn::TrainConfig c = draw_config(rng);
      c.seed = derive_seed(seed, "outcome-" + std::to_string(d));
      const auto m1 = nn::fit(tr1.x, tr1.y, va1.x, va1.y, nn::Task::regression, c).params;
      const auto m0 = nn::fit(tr0.x, tr0.y, va0.x, va0.y, nn::Task::regression, c).params;
      const double loss = nn::data_loss(m1, ho1.x, ho1.y) + nn::data_loss(m0, ho0.x, ho0.y);
      result.trials.push_back({"outcome", c, std::nullopt, loss});
    }
    hp.outcome = result.trials[best_of(result.trials, first)].config;
  }
  {
    Rng rng = Rng(seed).derive("propensity-draws");
    const auto tr = rows_where(train, 0, true), va = rows_where(val, 0, true), ho = rows_where(holdout, 0, true);
    const std::size_t first = result.trials.size();
    for (int d = 0; d < draws; ++d) {
      nn::TrainConfig c = draw_config(rng);
      c.seed = derive_seed(seed, "propensity-" + std::to_string(d));
      const auto m = nn::fit(tr.x, tr.y, va.x, va.y, nn::Task::binary, c).params;
      result.trials.push_back({"propensity", c, std::nullopt, nn::data_loss(m, ho.x, ho.y)});
    }
    hp.propensity = result.trials[best_of(result.trials, first)].config;
  }
  for (auto* c : {&hp.outcome, &hp.propensity}) c->seed = 0;

  // Second stages use nuisances fitted with the tuned settings on a separate sample.
  const CellData cell = prepare_cell(n, derive_seed(seed, "tuning-cell"), 1.0, hp);
  const nuisance::EtaTable holdout_eta = nuisance::predict_nuisances(cell.nuisances, holdout.x());
  const std::vector<double> holdout_phi = nuisance::dr_scores(holdout, holdout_eta);
  {
    Rng rng = Rng(seed).derive("cate-draws");
    const Vector phi = Eigen::Map<const Vector>(holdout_phi.data(), static_cast<Eigen::Index>(holdout_phi.size()));
    const std::size_t first = result.trials.size();
    for (int d = 0; d < draws; ++d) {
      nn::TrainConfig c = draw_config(rng);
      c.seed = derive_seed(seed, "cate-" + std::to_string(d));
      const auto model = baselines::train_dr_learner(cell.train, cell.val, cell.nuisances, c);
      result.trials.push_back({"cate", c, std::nullopt, nn::data_loss(model.params(), holdout.x(), phi)});
    }
    hp.cate = result.trials[best_of(result.trials, first)].config;
    hp.cate.seed = 0;
  }
  {
    Rng rng = Rng(seed).derive("ranker-draws");
    const std::size_t first = result.trials.size();
    for (int d = 0; d < draws; ++d) {
      ranker::RankConfig rc;
      rc.train = draw_config(rng);
      rc.kappa = pick(kKappa, rng);
      rc.train.seed = derive_seed(seed, "ranker-" + std::to_string(d));
      const auto fit = ranker::train_ranker(cell.train, cell.train_eta, cell.val, cell.val_eta, rc,
                                            ranker::LabelKind::orthogonal);
      const Vector s = fit.model.score(holdout.x());
      const std::vector<double> scores(s.data(), s.data() + s.size());
      result.trials.push_back({"ranker", rc.train, rc.kappa, -eval::approx_autoc(scores, holdout_phi)});
    }
    const auto& best = result.trials[best_of(result.trials, first)];
    hp.ranker = best.config;
    hp.ranker.seed = 0;
    result.best_kappa = best.kappa;
  }
  return result;
}

namespace {

nlohmann::json config_json(const nn::TrainConfig& c) {
  return {{"hidden", c.hidden},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience}};
}

}  // namespace

void to_json(nlohmann::json& j, const TuneResult& r) {
  j = nlohmann::json::object();
  j["best"] = {{"outcome", config_json(r.best.outcome)},
               {"propensity", config_json(r.best.propensity)},
               {"cate", config_json(r.best.cate)},
               {"ranker", config_json(r.best.ranker)}};
  if (r.best_kappa) j["best"]["ranker"]["kappa"] = *r.best_kappa;
  auto& trials = j["trials"] = nlohmann::json::array();
  for (const auto& t : r.trials) {
    nlohmann::json row = config_json(t.config);
    row["family"] = t.family;
    row["objective"] = t.objective;
    if (t.kappa) row["kappa"] = *t.kappa;
    trials.push_back(row);
  }
}

}  // namespace orank::experiment
