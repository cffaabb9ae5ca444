#include "orank/nn.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "orank/csv.hpp"
#include "orank/error.hpp"
#include "orank/rng.hpp"

namespace orank::nn {

std::string_view to_string(Task task) {
  return task == Task::binary ? "binary" : "regression";
}

Task task_from_string(std::string_view name) {
  if (name == "regression") return Task::regression;
  if (name == "binary") return Task::binary;
  throw InvalidInput("unknown task \"" + std::string(name) + "\"");
}

ModelParams::ModelParams(std::size_t dim, std::size_t hidden, Task task)
    : dim_(dim), hidden_(hidden), task_(task), theta_(Vector::Zero(hidden * dim + 2 * hidden + 1)) {
  if (dim < 1 || hidden < 1) throw InvalidInput("network dimensions must be >= 1");
}

void TrainConfig::validate() const {
  if (hidden < 1) throw InvalidInput("hidden must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidInput("weight_decay must be >= 0");
  if (batch_size < 1) throw InvalidInput("batch_size must be >= 1");
  if (max_epochs < 1) throw InvalidInput("max_epochs must be >= 1");
  if (patience < 1) throw InvalidInput("patience must be >= 1");
}

ModelParams init(std::size_t dim, std::size_t hidden, Task task, std::uint64_t seed) {
  ModelParams p(dim, hidden, task);
  Rng rng = Rng(seed).derive("glorot");
  const double limit1 = std::sqrt(6.0 / static_cast<double>(dim + hidden));
  const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  auto w1 = p.w1();
  for (Eigen::Index r = 0; r < w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < w1.cols(); ++c) w1(r, c) = limit1 * (2.0 * rng.uniform() - 1.0);
  }
  auto w2 = p.w2();
  for (Eigen::Index r = 0; r < w2.size(); ++r) w2[r] = limit2 * (2.0 * rng.uniform() - 1.0);
  return p;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

namespace {

double to_probability(double z) {
  constexpr double lo = std::numeric_limits<double>::denorm_min();
  constexpr double hi = 1.0 - 0x1.0p-53;
  return std::clamp(sigmoid(z), lo, hi);
}

void check_input(const ModelParams& params, std::size_t cols) {
  if (cols != params.dim()) {
    throw InvalidInput("input has " + std::to_string(cols) + " features, model expects " +
                       std::to_string(params.dim()));
  }
}

}  // namespace

double logit(const ModelParams& params, std::span<const double> x) {
  check_input(params, x.size());
  Eigen::Map<const Vector> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Vector h = (params.w1() * xv + params.b1()).cwiseMax(0.0);
  return h.dot(params.w2()) + params.b2();
}

double forward(const ModelParams& params, std::span<const double> x) {
  const double z = logit(params, x);
  return params.task() == Task::binary ? to_probability(z) : z;
}

Vector logits(const ModelParams& params, const Matrix& x, ForwardCache* cache) {
  check_input(params, static_cast<std::size_t>(x.cols()));
  Matrix pre = x * params.w1().transpose();
  pre.rowwise() += params.b1().transpose();
  Matrix active = pre.cwiseMax(0.0);
  Vector out = active * params.w2();
  out.array() += params.b2();
  if (cache) {
    cache->pre = std::move(pre);
    cache->active = std::move(active);
  }
  return out;
}

Vector predict(const ModelParams& params, const Matrix& x) {
  Vector z = logits(params, x);
  if (params.task() == Task::binary) {
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = to_probability(z[i]);
  }
  return z;
}

void backward(const ModelParams& params, const Matrix& x, const ForwardCache& cache,
              const Vector& d_logits, ModelParams& grad) {
  grad.w2() += cache.active.transpose() * d_logits;
  grad.b2() += d_logits.sum();
  Matrix d_pre = d_logits * params.w2().transpose();
  d_pre.array() *= (cache.pre.array() > 0.0).cast<double>();
  grad.w1() += d_pre.transpose() * x;
  grad.b1() += d_pre.colwise().sum().transpose();
}

void add_weight_decay(const ModelParams& params, double weight_decay, double& loss,
                      ModelParams& grad) {
  if (weight_decay == 0.0) return;
  loss += 0.5 * weight_decay * (params.w1().squaredNorm() + params.w2().squaredNorm());
  grad.w1() += weight_decay * params.w1();
  grad.w2() += weight_decay * params.w2();
}

namespace {

/// Mean loss and d(mean loss)/d(logit) per row.
double pointwise_loss(Task task, const Vector& z, const Vector& y, Vector* d_z) {
  const auto n = static_cast<double>(z.size());
  double loss = 0.0;
  if (d_z) d_z->resize(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (task == Task::regression) {
      const double r = z[i] - y[i];
      loss += r * r;
      if (d_z) (*d_z)[i] = 2.0 * r / n;
    } else {
      // -y log s(z) - (1-y) log(1 - s(z)) = softplus(z) - y z
      loss += softplus(z[i]) - y[i] * z[i];
      if (d_z) (*d_z)[i] = (sigmoid(z[i]) - y[i]) / n;
    }
  }
  return loss / n;
}

void check_batch(const Matrix& x, const Vector& y, Task task) {
  if (x.rows() == 0) throw InvalidInput("empty batch");
  if (x.rows() != y.size()) throw InvalidInput("batch inputs and targets differ in length");
  if (!x.allFinite() || !y.allFinite()) throw NumericError("non-finite value in batch");
  if (task == Task::binary && ((y.array() < 0.0).any() || (y.array() > 1.0).any())) {
    throw InvalidInput("binary targets must lie in [0, 1]");
  }
}

}  // namespace

LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& x, const Vector& y,
                          double weight_decay) {
  check_batch(x, y, params.task());
  ForwardCache cache;
  const Vector z = logits(params, x, &cache);
  Vector d_z;
  LossAndGrad out{pointwise_loss(params.task(), z, y, &d_z), params.zeros_like()};
  backward(params, x, cache, d_z, out.grad);
  add_weight_decay(params, weight_decay, out.loss, out.grad);
  return out;
}

double data_loss(const ModelParams& params, const Matrix& x, const Vector& y) {
  check_batch(x, y, params.task());
  return pointwise_loss(params.task(), logits(params, x), y, nullptr);
}

void adam_update(Eigen::Ref<Vector> theta, const Vector& grad, AdamState& state, double lr) {
  if (state.m.size() != theta.size()) {
    state.m = Vector::Zero(theta.size());
    state.v = Vector::Zero(theta.size());
  }
  ++state.step;
  state.m = AdamState::beta1 * state.m + (1.0 - AdamState::beta1) * grad;
  state.v = AdamState::beta2 * state.v + (1.0 - AdamState::beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(AdamState::beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(AdamState::beta2, static_cast<double>(state.step));
  theta.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + AdamState::eps);
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  if (grads.size() != params.size()) throw InvalidInput("gradient shape mismatch");
  adam_update(params.theta(), grads.theta(), state, lr);
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  if (val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

FitResult fit(const Matrix& train_x, const Vector& train_y, const Matrix& val_x,
              const Vector& val_y, Task task, const TrainConfig& config) {
  config.validate();
  if (train_x.rows() == 0 || val_x.rows() == 0) throw InvalidInput("empty training or validation set");
  check_batch(train_x, train_y, task);
  check_batch(val_x, val_y, task);

  const Rng root(config.seed);
  ModelParams params = init(static_cast<std::size_t>(train_x.cols()), config.hidden, task,
                            derive_seed(config.seed, "init"));
  AdamState adam(params.size());
  Rng shuffle = root.derive("shuffle");
  EarlyStopping stopper(config.patience);

  FitResult result;
  result.params = params;
  const auto n = static_cast<std::size_t>(train_x.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix bx;
  Vector by;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      bx.resize(static_cast<Eigen::Index>(end - start), train_x.cols());
      by.resize(static_cast<Eigen::Index>(end - start));
      for (std::size_t k = start; k < end; ++k) {
        bx.row(static_cast<Eigen::Index>(k - start)) = train_x.row(static_cast<Eigen::Index>(order[k]));
        by[static_cast<Eigen::Index>(k - start)] = train_y[static_cast<Eigen::Index>(order[k])];
      }
      auto lg = loss_and_grad(params, bx, by, config.weight_decay);
      if (!std::isfinite(lg.loss)) throw TrainingError("non-finite training loss", epoch);
      epoch_loss += lg.loss * static_cast<double>(end - start);
      adam_step(params, lg.grad, adam, config.learning_rate);
    }
    const double val = data_loss(params, val_x, val_y);
    if (!std::isfinite(val)) throw TrainingError("non-finite validation loss", epoch);
    result.train_loss.push_back(epoch_loss / static_cast<double>(n));
    result.val_loss.push_back(val);
    if (stopper.update(val)) result.params = params;
    if (stopper.should_stop()) break;
  }
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best();
  return result;
}

void save_model(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "orank-model 1\n"
      << "task " << to_string(params.task()) << '\n'
      << "dims " << params.dim() << ' ' << params.hidden() << '\n'
      << "theta " << params.size() << '\n';
  for (Eigen::Index i = 0; i < params.theta().size(); ++i) {
    out << csv::format_double(params.theta()[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string magic, key, task_name;
  int version = 0;
  std::size_t dim = 0, hidden = 0, count = 0;
  if (!(in >> magic >> version) || magic != "orank-model" || version != 1) {
    throw ParseError(path.string() + ": not a version-1 model file", 1, 0);
  }
  if (!(in >> key >> task_name) || key != "task") throw ParseError("expected task line", 2, 0);
  if (!(in >> key >> dim >> hidden) || key != "dims") throw ParseError("expected dims line", 3, 0);
  if (!(in >> key >> count) || key != "theta") throw ParseError("expected theta line", 4, 0);
  ModelParams params(dim, hidden, task_from_string(task_name));
  if (count != params.size()) throw ParseError("parameter count does not match dims", 4, 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::string field;
    if (!(in >> field)) throw ParseError("truncated parameter list", 5 + i, 0);
    params.theta()[static_cast<Eigen::Index>(i)] = csv::to_double(field, 5 + i, 1);
  }
  return params;
}

}  // namespace orank::nn
