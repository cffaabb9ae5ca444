#include "orank/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include "orank/csv.hpp"
#include "orank/error.hpp"
#include "orank/rng.hpp"

namespace orank::dgp {

namespace {

void check_dim(std::span<const double> x) {
  if (x.size() != kDim) {
    throw InvalidInput("expected " + std::to_string(kDim) + " covariates, got " +
                       std::to_string(x.size()));
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::span<const double> row_span(const Matrix& m, Eigen::Index i) {
  return {m.data() + i * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace

Dataset::Dataset(Matrix x, std::vector<int> t, std::vector<double> y)
    : x_(std::move(x)), t_(std::move(t)), y_(std::move(y)) {
  if (static_cast<std::size_t>(x_.rows()) != t_.size() || t_.size() != y_.size()) {
    throw InvalidInput("dataset columns have different lengths");
  }
  for (std::size_t i = 0; i < t_.size(); ++i) {
    if (t_[i] != 0 && t_[i] != 1) throw InvalidInput("treatment must be 0 or 1");
    if (!std::isfinite(y_[i])) throw InvalidInput("non-finite outcome");
  }
  if (!x_.allFinite()) throw InvalidInput("non-finite covariate");
}

Dataset::Dataset(std::span<const Observation> observations) {
  const std::size_t n = observations.size();
  const std::size_t d = n ? observations.front().x.size() : 0;
  Matrix x(n, d);
  std::vector<int> t(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = observations[i];
    if (o.x.size() != d) throw InvalidInput("observations have different dimensions");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = o.x[j];
    t[i] = o.t;
    y[i] = o.y;
  }
  *this = Dataset(std::move(x), std::move(t), std::move(y));
}

Observation Dataset::observation(std::size_t i) const {
  auto r = row_span(x_, static_cast<Eigen::Index>(i));
  return {std::vector<double>(r.begin(), r.end()), t_.at(i), y_.at(i)};
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Matrix x(rows.size(), x_.cols());
  std::vector<int> t(rows.size());
  std::vector<double> y(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    x.row(k) = x_.row(rows[k]);
    t[k] = t_.at(rows[k]);
    y[k] = y_.at(rows[k]);
  }
  Dataset out;
  out.x_ = std::move(x);
  out.t_ = std::move(t);
  out.y_ = std::move(y);
  return out;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.x_.rows() == b.x_.rows() && a.x_.cols() == b.x_.cols() && a.x_ == b.x_ &&
         a.t_ == b.t_ && a.y_ == b.y_;
}

GroundTruth GroundTruth::subset(std::span<const std::size_t> rows) const {
  GroundTruth out;
  for (std::size_t r : rows) {
    out.tau.push_back(tau.at(r));
    out.mu0.push_back(mu0.at(r));
    out.mu1.push_back(mu1.at(r));
    out.e.push_back(e.at(r));
  }
  return out;
}

void DgpConfig::validate() const {
  if (n < 1) throw InvalidInput("n must be >= 1");
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be > 0");
  if (!(noise_sd >= 0.0)) throw InvalidInput("noise_sd must be >= 0");
}

double latent_score(std::span<const double> x) {
  check_dim(x);
  return 0.8 * x[0] + 0.6 * x[1] + 0.4 * x[2] + 0.3 * x[0] * x[0] - 0.2 * x[1] * x[2];
}

double true_cate(std::span<const double> x) {
  const double s = latent_score(x);
  return s + 0.5 * std::tanh(s);
}

double true_propensity(std::span<const double> x, double alpha) {
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be > 0");
  const double s = latent_score(x);
  return sigmoid(alpha * (0.8 * s + 0.6 * (x[5] - 0.5 * x[6])));
}

double true_mu0(std::span<const double> x) {
  check_dim(x);
  return 0.5 * x[1] - 0.4 * x[2] + 0.3 * std::sin(x[3]) + 0.2 * (x[4] * x[4] - 1.0);
}

double true_mu1(std::span<const double> x) { return true_mu0(x) + true_cate(x); }

GroundTruth ground_truth(const Matrix& x, double alpha) {
  GroundTruth truth;
  const auto n = static_cast<std::size_t>(x.rows());
  truth.tau.resize(n);
  truth.mu0.resize(n);
  truth.mu1.resize(n);
  truth.e.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = row_span(x, static_cast<Eigen::Index>(i));
    truth.mu0[i] = true_mu0(r);
    truth.mu1[i] = truth.mu0[i] + true_cate(r);
    // Stored as the difference (not the formula value) so mu1 - mu0 == tau bit-exactly.
    truth.tau[i] = truth.mu1[i] - truth.mu0[i];
    truth.e[i] = true_propensity(r, alpha);
  }
  return truth;
}

Sample generate(const DgpConfig& config) {
  config.validate();
  const Rng root(config.seed);
  Rng covariate_stream = root.derive("covariates");
  Rng treatment_stream = root.derive("treatment");
  Rng noise_stream = root.derive("noise");
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix x(config.n, kDim);
  for (std::size_t i = 0; i < config.n; ++i) {
    for (std::size_t j = 0; j < kDim; ++j) x(i, j) = normal(covariate_stream);
  }
  GroundTruth truth = ground_truth(x, config.alpha);

  std::vector<int> t(config.n);
  std::vector<double> y(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    t[i] = treatment_stream.uniform() < truth.e[i] ? 1 : 0;
    const double eps = config.noise_sd * normal(noise_stream);
    y[i] = (t[i] ? truth.mu1[i] : truth.mu0[i]) + eps;
  }
  return {Dataset(std::move(x), std::move(t), std::move(y)), std::move(truth)};
}

double overlap_measure(const GroundTruth& truth) {
  if (truth.e.empty()) throw InvalidInput("overlap of an empty sample");
  double sum = 0.0;
  for (double e : truth.e) sum += std::min(e, 1.0 - e);
  return sum / static_cast<double>(truth.e.size());
}

Split partition(std::size_t n, std::uint64_t seed, double train_fraction) {
  if (n < 10) throw InvalidInput("partition needs at least 10 rows, got " + std::to_string(n));
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng(seed).derive("partition");
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  Split split;
  split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'x' << (j + 1) << ',';
  out << "t,y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << csv::format_double(data.x()(i, j)) << ',';
    out << data.t()[i] << ',' << csv::format_double(data.y()[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  const std::size_t t_col = table.column("t");
  const std::size_t y_col = table.column("y");
  // Every other column must be x1..xd in order.
  std::vector<std::size_t> x_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == t_col || c == y_col) continue;
    const std::string expected = "x" + std::to_string(x_cols.size() + 1);
    if (table.header[c] != expected) {
      throw ParseError("unexpected column \"" + table.header[c] + "\" (expected \"" + expected +
                           "\")",
                       1, c + 1);
    }
    x_cols.push_back(c);
  }
  if (x_cols.empty()) throw ParseError("no covariate columns", 1, 0);

  const std::size_t n = table.rows.size();
  Matrix x(n, x_cols.size());
  std::vector<int> t(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x(i, j) = csv::to_double(row[x_cols[j]], line, x_cols[j] + 1);
      if (!std::isfinite(x(i, j))) throw ParseError("non-finite covariate", line, x_cols[j] + 1);
    }
    const std::string& tf = row[t_col];
    if (tf != "0" && tf != "1") throw ParseError("treatment must be 0 or 1", line, t_col + 1);
    t[i] = tf == "1";
    y[i] = csv::to_double(row[y_col], line, y_col + 1);
    if (!std::isfinite(y[i])) throw ParseError("non-finite outcome", line, y_col + 1);
  }
  return Dataset(std::move(x), std::move(t), std::move(y));
}

void save_ground_truth(const std::filesystem::path& path, const GroundTruth& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "tau,mu0,mu1,e\n";
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out << csv::format_double(truth.tau[i]) << ',' << csv::format_double(truth.mu0[i]) << ','
        << csv::format_double(truth.mu1[i]) << ',' << csv::format_double(truth.e[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  const std::vector<std::string> expected = {"tau", "mu0", "mu1", "e"};
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (std::find(expected.begin(), expected.end(), table.header[c]) == expected.end()) {
      throw ParseError("unexpected column \"" + table.header[c] + "\"", 1, c + 1);
    }
  }
  const std::size_t cols[4] = {table.column("tau"), table.column("mu0"), table.column("mu1"),
                               table.column("e")};
  GroundTruth truth;
  std::vector<double>* dest[4] = {&truth.tau, &truth.mu0, &truth.mu1, &truth.e};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      dest[k]->push_back(csv::to_double(table.rows[i][cols[k]], i + 2, cols[k] + 1));
    }
    if (!(truth.e.back() > 0.0 && truth.e.back() < 1.0)) {
      throw ParseError("propensity outside (0, 1)", i + 2, cols[3] + 1);
    }
  }
  return truth;
}

}  // namespace orank::dgp
