#include "orank/orthocheck.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "orank/csv.hpp"
#include "orank/error.hpp"
#include "orank/eval.hpp"
#include "orank/nn.hpp"
#include "orank/rng.hpp"

namespace orank::orthocheck {

std::vector<double> DiscretePopulation::tau() const {
  std::vector<double> t(size());
  for (std::size_t k = 0; k < size(); ++k) t[k] = mu1[k] - mu0[k];
  return t;
}

void DiscretePopulation::validate() const {
  const std::size_t k = prob.size();
  if (k < 2) throw InvalidInput("population needs at least 2 support points");
  if (mu0.size() != k || mu1.size() != k || e.size() != k) throw InvalidInput("population tables differ in length");
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    if (!(prob[a] > 0.0)) throw InvalidInput("probabilities must be positive");
    if (!(e[a] > 0.0 && e[a] < 1.0)) throw InvalidInput("propensity must lie in (0, 1)");
    if (!std::isfinite(mu0[a]) || !std::isfinite(mu1[a])) throw InvalidInput("non-finite response surface");
    total += prob[a];
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("probabilities must sum to 1");
  auto t = tau();
  std::sort(t.begin(), t.end());
  if (std::adjacent_find(t.begin(), t.end()) != t.end()) throw InvalidInput("tau has ties");
}

DiscretePopulation canonical_population() {
  return {{0.15, 0.25, 0.20, 0.30, 0.10},
          {0.20, -0.50, 0.80, 0.00, -0.30},
          {1.00, -0.10, 0.50, 1.60, 0.90},
          {0.30, 0.60, 0.45, 0.70, 0.25}};
}

DiscretePopulation random_population(std::size_t k, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("population needs at least 2 support points");
  Rng rng = Rng(seed).derive("population");
  DiscretePopulation pop;
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    pop.prob.push_back(0.5 + rng.uniform());
    total += pop.prob.back();
    pop.mu0.push_back(2.0 * rng.uniform() - 1.0);
    // tau spread on a jittered grid keeps the support points tie-free
    const double tau = -1.0 + 2.0 * (static_cast<double>(a) + 0.2 + 0.6 * rng.uniform()) / static_cast<double>(k);
    pop.mu1.push_back(pop.mu0.back() + tau);
    pop.e.push_back(0.1 + 0.8 * rng.uniform());
  }
  for (double& p : pop.prob) p /= total;
  // Shuffle so tau order is unrelated to support index.
  for (std::size_t a = k - 1; a > 0; --a) {
    const auto b = rng.below(a + 1);
    std::swap(pop.prob[a], pop.prob[b]);
    std::swap(pop.mu0[a], pop.mu0[b]);
    std::swap(pop.mu1[a], pop.mu1[b]);
    std::swap(pop.e[a], pop.e[b]);
  }
  return pop;
}

void save_population(const std::filesystem::path& path, const DiscretePopulation& pop) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "orank-population 1\nprob,mu0,mu1,e\n";
  for (std::size_t a = 0; a < pop.size(); ++a) {
    out << csv::format_double(pop.prob[a]) << ',' << csv::format_double(pop.mu0[a]) << ','
        << csv::format_double(pop.mu1[a]) << ',' << csv::format_double(pop.e[a]) << '\n';
  }
}

DiscretePopulation load_population(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("orank-population 1", 0) != 0) {
    throw ParseError(path.string() + ": not a version-1 population file", 1, 0);
  }
  if (!std::getline(in, line) || line != "prob,mu0,mu1,e") {
    throw ParseError(path.string() + ": expected header prob,mu0,mu1,e", 2, 0);
  }
  DiscretePopulation pop;
  std::size_t row = 2;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> values;
    while (std::getline(ss, field, ',')) values.push_back(csv::to_double(field, row, values.size() + 1));
    if (values.size() != 4) throw ParseError("expected 4 fields", row, values.size());
    pop.prob.push_back(values[0]);
    pop.mu0.push_back(values[1]);
    pop.mu1.push_back(values[2]);
    pop.e.push_back(values[3]);
  }
  pop.validate();
  return pop;
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::cate: return "cate";
    case LossKind::bin: return "bin";
    case LossKind::soft: return "soft";
    case LossKind::orth: return "orth";
  }
  return "?";
}

namespace {

void check_inputs(std::span<const double> g, const nuisance::EtaTable& eta, const DiscretePopulation& pop,
                  LossKind kind, double kappa) {
  const std::size_t k = pop.size();
  if (g.size() != k || eta.size() != k || eta.mu0.size() != k || eta.mu1.size() != k) {
    throw InvalidInput("tables are not aligned with the support");
  }
  for (double e : eta.e) {
    if (!(e > 0.0 && e < 1.0)) throw InvalidInput("nuisance propensity must lie in (0, 1)");
  }
  if ((kind == LossKind::soft || kind == LossKind::orth) && !(kappa > 0.0)) {
    throw InvalidInput("kappa must be > 0");
  }
}

/// Conditional-mean label of the ordered pair (a, b) for a pairwise loss.
struct PairLabels {
  std::vector<double> label;  // row-major K x K; diagonal unused
  double pair_norm = 1.0;     // 1 / (1 - sum prob^2)
};

PairLabels pair_labels(LossKind kind, const nuisance::EtaTable& eta, const DiscretePopulation& pop,
                       double kappa) {
  const std::size_t k = pop.size();
  std::vector<double> tau_hat(k), residual(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    tau_hat[a] = eta.mu1[a] - eta.mu0[a];
    if (kind == LossKind::orth) {
      // E[phi_eta - tau_hat | X = a] under the true distribution of (T, Y).
      residual[a] = pop.e[a] / eta.e[a] * (pop.mu1[a] - eta.mu1[a]) -
                    (1.0 - pop.e[a]) / (1.0 - eta.e[a]) * (pop.mu0[a] - eta.mu0[a]);
    }
  }
  PairLabels out;
  out.label.assign(k * k, 0.0);
  double sq = 0.0;
  for (double p : pop.prob) sq += p * p;
  out.pair_norm = 1.0 / (1.0 - sq);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      double& l = out.label[a * k + b];
      if (kind == LossKind::bin) {
        l = tau_hat[a] > tau_hat[b] ? 1.0 : 0.0;
      } else {
        const double t = nn::sigmoid((tau_hat[a] - tau_hat[b]) / kappa);
        l = t + t * (1.0 - t) / kappa * (residual[a] - residual[b]);
      }
    }
  }
  return out;
}

}  // namespace

double population_loss(LossKind kind, std::span<const double> g, const nuisance::EtaTable& eta,
                       const DiscretePopulation& pop, double kappa) {
  check_inputs(g, eta, pop, kind, kappa);
  const std::size_t k = pop.size();
  if (kind == LossKind::cate) {
    double loss = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const double r = g[a] - (eta.mu1[a] - eta.mu0[a]);
      loss += pop.prob[a] * r * r;
    }
    return loss;
  }
  const PairLabels labels = pair_labels(kind, eta, pop, kappa);
  double loss = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const double margin = g[a] - g[b];
      loss += pop.prob[a] * pop.prob[b] * (nn::softplus(margin) - labels.label[a * k + b] * margin);
    }
  }
  return loss * labels.pair_norm;
}

std::vector<double> loss_gradient_g(LossKind kind, std::span<const double> g,
                                    const nuisance::EtaTable& eta, const DiscretePopulation& pop,
                                    double kappa) {
  check_inputs(g, eta, pop, kind, kappa);
  const std::size_t k = pop.size();
  std::vector<double> grad(k, 0.0);
  if (kind == LossKind::cate) {
    for (std::size_t a = 0; a < k; ++a) grad[a] = 2.0 * pop.prob[a] * (g[a] - (eta.mu1[a] - eta.mu0[a]));
    return grad;
  }
  const PairLabels labels = pair_labels(kind, eta, pop, kappa);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const double w = pop.prob[a] * pop.prob[b] * labels.pair_norm;
      const double d = w * (nn::sigmoid(g[a] - g[b]) - labels.label[a * k + b]);
      grad[a] += d;
      grad[b] -= d;
    }
  }
  return grad;
}

Direction random_direction(const DiscretePopulation& pop, const nuisance::EtaTable& eta0, double h,
                           std::uint64_t seed) {
  Rng rng = Rng(seed).derive("direction");
  const std::size_t k = pop.size();
  Direction dir;
  auto draw = [&](std::vector<double>& v) {
    v.resize(k);
    for (double& x : v) x = 2.0 * rng.uniform() - 1.0;
  };
  draw(dir.d_g);
  draw(dir.d_mu0);
  draw(dir.d_mu1);
  draw(dir.d_e);
  double sup = 0.0;
  for (const auto* v : {&dir.d_g, &dir.d_mu0, &dir.d_mu1, &dir.d_e}) {
    for (double x : *v) sup = std::max(sup, std::abs(x));
  }
  for (auto* v : {&dir.d_g, &dir.d_mu0, &dir.d_mu1, &dir.d_e}) {
    for (double& x : *v) x /= sup;
  }
  for (std::size_t a = 0; a < k; ++a) {
    const double room = std::min(eta0.e[a] - kMinPropensity, kMaxPropensity - eta0.e[a]) / h;
    dir.d_e[a] = std::clamp(dir.d_e[a], -std::max(room, 0.0), std::max(room, 0.0));
  }
  return dir;
}

double cross_derivative(LossKind kind, std::span<const double> g0, const nuisance::EtaTable& eta0,
                        const Direction& dir, double h, const DiscretePopulation& pop, double kappa) {
  const std::size_t k = pop.size();
  if (dir.d_g.size() != k || dir.d_mu0.size() != k || dir.d_mu1.size() != k || dir.d_e.size() != k) {
    throw InvalidInput("direction is not aligned with the support");
  }
  if (!(h > 0.0)) throw InvalidInput("step must be > 0");
  auto f = [&](double s, double u) {
    std::vector<double> g(k);
    nuisance::EtaTable eta = eta0;
    for (std::size_t a = 0; a < k; ++a) {
      g[a] = g0[a] + u * dir.d_g[a];
      eta.mu0[a] += s * dir.d_mu0[a];
      eta.mu1[a] += s * dir.d_mu1[a];
      eta.e[a] += s * dir.d_e[a];
      if (eta.e[a] < kMinPropensity || eta.e[a] > kMaxPropensity) {
        throw StepTooLarge("perturbed propensity " + std::to_string(eta.e[a]) + " leaves [" +
                           std::to_string(kMinPropensity) + ", " + std::to_string(kMaxPropensity) + "]");
      }
    }
    return population_loss(kind, g, eta, pop, kappa);
  };
  return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
}

namespace {

void check_admissible(const DiscretePopulation& pop) {
  pop.validate();
  for (double e : pop.e) {
    if (e < kMinPropensity || e > kMaxPropensity) {
      std::ostringstream msg;
      msg << "population propensity " << e << " outside [" << kMinPropensity << ", " << kMaxPropensity << "]";
      throw InvalidInput(msg.str());
    }
  }
}

std::vector<double> scaled_tau(const DiscretePopulation& pop, double kappa, double shift) {
  auto g = pop.tau();
  for (double& x : g) x = x / kappa + shift;
  return g;
}

double median_abs(std::vector<double> v) {
  for (double& x : v) x = std::abs(x);
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Probability-weighted mean of p (1 - p) over distinct pairs at g = tau / kappa.
double mean_curvature(const DiscretePopulation& pop, double kappa) {
  const auto tau = pop.tau();
  double num = 0.0, den = 0.0;
  for (std::size_t a = 0; a < pop.size(); ++a) {
    for (std::size_t b = 0; b < pop.size(); ++b) {
      if (a == b) continue;
      const double p = nn::sigmoid((tau[a] - tau[b]) / kappa);
      num += pop.prob[a] * pop.prob[b] * p * (1.0 - p);
      den += pop.prob[a] * pop.prob[b];
    }
  }
  return num / den;
}

}  // namespace

OrthogonalityReport verify_orthogonality(const DiscretePopulation& pop, double kappa,
                                         int n_directions, double h, std::uint64_t seed) {
  check_admissible(pop);
  if (n_directions < 1) throw InvalidInput("need at least one direction");
  OrthogonalityReport report;
  report.kappa = kappa;
  report.h = h;
  report.seed = seed;
  const auto eta0 = pop.eta();
  const auto g0 = scaled_tau(pop, kappa, 0.0);
  for (int d = 0; d < n_directions; ++d) {
    const Direction dir = random_direction(pop, eta0, h, derive_seed(seed, "direction-" + std::to_string(d)));
    report.orth.push_back(cross_derivative(LossKind::orth, g0, eta0, dir, h, pop, kappa));
    report.soft.push_back(cross_derivative(LossKind::soft, g0, eta0, dir, h, pop, kappa));
  }
  for (double v : report.orth) report.orth_max_abs = std::max(report.orth_max_abs, std::abs(v));
  report.soft_median_abs = median_abs(report.soft);
  report.pass = report.orth_max_abs <= report.thresholds.orth_max_abs &&
                report.soft_median_abs >= report.thresholds.soft_median_abs;
  return report;
}

MinimizerReport verify_minimizer(const DiscretePopulation& pop, double kappa, std::uint64_t seed) {
  check_admissible(pop);
  if (!(kappa > 0.0)) throw InvalidInput("kappa must be > 0");
  MinimizerReport report;
  report.kappa = kappa;
  report.seed = seed;
  const auto eta0 = pop.eta();
  const auto tau = pop.tau();
  const std::size_t k = pop.size();

  for (double c : {-1.0, 0.0, 2.0}) {
    for (LossKind kind : {LossKind::orth, LossKind::soft}) {
      for (double v : loss_gradient_g(kind, scaled_tau(pop, kappa, c), eta0, pop, kappa)) {
        report.stationarity_max_abs = std::max(report.stationarity_max_abs, std::abs(v));
      }
    }
  }

  // Full-batch gradient descent on the orthogonal loss. The Hessian is bounded by
  // sum_{a != b} w_ab * (1/4) * 2 = 1/2, so a unit step is stable.
  Rng rng = Rng(seed).derive("minimizer-init");
  std::vector<double> g(k);
  for (double& x : g) x = 2.0 * rng.uniform() - 1.0;
  constexpr long kMaxIterations = 5'000'000;
  constexpr double kGradTolerance = 1e-12;
  constexpr double kStep = 1.0;
  for (report.iterations = 0; report.iterations < kMaxIterations; ++report.iterations) {
    const auto grad = loss_gradient_g(LossKind::orth, g, eta0, pop, kappa);
    double norm = 0.0;
    for (double v : grad) norm = std::max(norm, std::abs(v));
    report.residual_grad = norm;
    if (norm <= kGradTolerance) {
      report.converged = true;
      break;
    }
    for (std::size_t a = 0; a < k; ++a) g[a] -= kStep * grad[a];
  }
  report.g_hat = g;

  // Unweighted least-squares fit g_hat ~ slope * tau + intercept.
  const double n = static_cast<double>(k);
  const double mt = std::accumulate(tau.begin(), tau.end(), 0.0) / n;
  const double mg = std::accumulate(g.begin(), g.end(), 0.0) / n;
  double stt = 0.0, stg = 0.0, sgg = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    stt += (tau[a] - mt) * (tau[a] - mt);
    stg += (tau[a] - mt) * (g[a] - mg);
    sgg += (g[a] - mg) * (g[a] - mg);
  }
  report.slope = stg / stt;
  report.intercept = mg - report.slope * mt;
  report.r_squared = sgg > 0.0 ? stg * stg / (stt * sgg) : 0.0;
  report.spearman = eval::spearman(g, tau);

  report.flatness_kappas = {0.25, 1.0, 3.0};
  for (double kp : report.flatness_kappas) report.flatness.push_back(mean_curvature(pop, kp));

  const double target = 1.0 / kappa;
  const bool flat_trend = report.flatness[0] < report.flatness[1] && report.flatness[1] < report.flatness[2];
  report.pass = report.stationarity_max_abs <= 1e-10 && report.converged &&
                std::abs(report.slope - target) <= 0.02 * target && report.r_squared >= 0.999 &&
                report.spearman == 1.0 && flat_trend;
  return report;
}

void to_json(nlohmann::json& j, const OrthogonalityReport& r) {
  j = nlohmann::json{{"kappa", r.kappa},
                     {"h", r.h},
                     {"seed", r.seed},
                     {"orth", r.orth},
                     {"soft", r.soft},
                     {"orth_max_abs", r.orth_max_abs},
                     {"soft_median_abs", r.soft_median_abs},
                     {"threshold_orth_max_abs", r.thresholds.orth_max_abs},
                     {"threshold_soft_median_abs", r.thresholds.soft_median_abs},
                     {"pass", r.pass}};
}

void from_json(const nlohmann::json& j, OrthogonalityReport& r) {
  j.at("kappa").get_to(r.kappa);
  j.at("h").get_to(r.h);
  j.at("seed").get_to(r.seed);
  j.at("orth").get_to(r.orth);
  j.at("soft").get_to(r.soft);
  j.at("orth_max_abs").get_to(r.orth_max_abs);
  j.at("soft_median_abs").get_to(r.soft_median_abs);
  j.at("threshold_orth_max_abs").get_to(r.thresholds.orth_max_abs);
  j.at("threshold_soft_median_abs").get_to(r.thresholds.soft_median_abs);
  j.at("pass").get_to(r.pass);
}

void to_json(nlohmann::json& j, const MinimizerReport& r) {
  j = nlohmann::json{{"kappa", r.kappa},
                     {"seed", r.seed},
                     {"stationarity_max_abs", r.stationarity_max_abs},
                     {"iterations", r.iterations},
                     {"residual_grad", r.residual_grad},
                     {"converged", r.converged},
                     {"g_hat", r.g_hat},
                     {"slope", r.slope},
                     {"intercept", r.intercept},
                     {"r_squared", r.r_squared},
                     {"spearman", r.spearman},
                     {"flatness_kappas", r.flatness_kappas},
                     {"flatness", r.flatness},
                     {"pass", r.pass}};
}

void from_json(const nlohmann::json& j, MinimizerReport& r) {
  j.at("kappa").get_to(r.kappa);
  j.at("seed").get_to(r.seed);
  j.at("stationarity_max_abs").get_to(r.stationarity_max_abs);
  j.at("iterations").get_to(r.iterations);
  j.at("residual_grad").get_to(r.residual_grad);
  j.at("converged").get_to(r.converged);
  j.at("g_hat").get_to(r.g_hat);
  j.at("slope").get_to(r.slope);
  j.at("intercept").get_to(r.intercept);
  j.at("r_squared").get_to(r.r_squared);
  j.at("spearman").get_to(r.spearman);
  j.at("flatness_kappas").get_to(r.flatness_kappas);
  j.at("flatness").get_to(r.flatness);
  j.at("pass").get_to(r.pass);
}

}  // namespace orank::orthocheck
