#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "orank/types.hpp"

namespace orank::nn {

enum class Task { regression, binary };

std::string_view to_string(Task task);
Task task_from_string(std::string_view name);

/// Single-hidden-layer ReLU network. All parameters live in one flat vector
/// laid out as [w1 (hidden x d, row-major) | b1 | w2 | b2]; the accessors are views.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::size_t dim, std::size_t hidden, Task task);

  std::size_t dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }
  Task task() const { return task_; }
  std::size_t size() const { return static_cast<std::size_t>(theta_.size()); }

  Vector& theta() { return theta_; }
  const Vector& theta() const { return theta_; }

  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  MatrixMap w1() { return {theta_.data(), rows(), cols()}; }
  ConstMatrixMap w1() const { return {theta_.data(), rows(), cols()}; }
  Eigen::Map<Vector> b1() { return {theta_.data() + b1_offset(), rows()}; }
  Eigen::Map<const Vector> b1() const { return {theta_.data() + b1_offset(), rows()}; }
  Eigen::Map<Vector> w2() { return {theta_.data() + w2_offset(), rows()}; }
  Eigen::Map<const Vector> w2() const { return {theta_.data() + w2_offset(), rows()}; }
  double& b2() { return theta_[theta_.size() - 1]; }
  double b2() const { return theta_[theta_.size() - 1]; }

  /// Zero-valued parameters of the same shape (gradient accumulator).
  ModelParams zeros_like() const { return ModelParams(dim_, hidden_, task_); }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    return a.dim_ == b.dim_ && a.hidden_ == b.hidden_ && a.task_ == b.task_ &&
           a.theta_ == b.theta_;
  }

 private:
  Eigen::Index rows() const { return static_cast<Eigen::Index>(hidden_); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(dim_); }
  Eigen::Index b1_offset() const { return rows() * cols(); }
  Eigen::Index w2_offset() const { return b1_offset() + rows(); }

  std::size_t dim_ = 0;
  std::size_t hidden_ = 0;
  Task task_ = Task::regression;
  Vector theta_;
};

struct TrainConfig {
  std::size_t hidden = 64;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  std::size_t batch_size = 128;
  int max_epochs = 50;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
struct AdamState {
  Vector m;
  Vector v;
  long step = 0;

  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

  explicit AdamState(std::size_t size = 0) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

/// Glorot-uniform weights, zero biases.
ModelParams init(std::size_t dim, std::size_t hidden, Task task, std::uint64_t seed);

double sigmoid(double z);
/// log(1 + exp(z)) without overflow.
double softplus(double z);

/// Output-layer pre-activation w2 . relu(w1 x + b1) + b2.
double logit(const ModelParams& params, std::span<const double> x);
/// Regression: the logit. Binary: sigmoid of the logit, kept strictly inside (0, 1).
double forward(const ModelParams& params, std::span<const double> x);

/// Activations kept for the backward pass.
struct ForwardCache {
  Matrix pre;     // batch x hidden, w1 x + b1
  Matrix active;  // relu(pre)
};

/// Logits for every row of `x`.
Vector logits(const ModelParams& params, const Matrix& x, ForwardCache* cache = nullptr);
/// forward() applied row-wise.
Vector predict(const ModelParams& params, const Matrix& x);

/// Accumulates d(loss)/d(theta) into `grad` given d(loss)/d(logit) per row.
void backward(const ModelParams& params, const Matrix& x, const ForwardCache& cache,
              const Vector& d_logits, ModelParams& grad);

/// Adds weight_decay * ||weights||^2 / 2 (biases excluded) and its gradient.
void add_weight_decay(const ModelParams& params, double weight_decay, double& loss,
                      ModelParams& grad);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grad;
};

/// Mean data loss over the batch plus the L2 term. Regression uses squared error;
/// binary uses cross-entropy from logits and accepts soft targets in [0, 1].
LossAndGrad loss_and_grad(const ModelParams& params, const Matrix& x, const Vector& y,
                          double weight_decay);

/// Mean data loss (no penalty); the early-stopping criterion.
double data_loss(const ModelParams& params, const Matrix& x, const Vector& y);

/// Bias-corrected Adam update in place.
void adam_update(Eigen::Ref<Vector> theta, const Vector& grad, AdamState& state, double lr);
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

/// Patience-based stopping with best-value tracking.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records one epoch's validation loss; returns true if it is a new best.
  bool update(double val_loss);
  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct FitResult {
  ModelParams params;  // best checkpoint
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  // 1-based
  double best_val_loss = 0.0;
};

/// Shuffled mini-batch Adam with early stopping; returns the checkpoint with the
/// lowest validation loss. Throws TrainingError on a non-finite loss.
FitResult fit(const Matrix& train_x, const Vector& train_y, const Matrix& val_x,
              const Vector& val_y, Task task, const TrainConfig& config);

void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace orank::nn
