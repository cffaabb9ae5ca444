#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "orank/error.hpp"
#include "orank/nn.hpp"
#include "orank/rng.hpp"

using namespace orank;
using namespace orank::nn;

namespace {

ModelParams random_params(std::size_t dim, std::size_t hidden, Task task, Rng& rng) {
  ModelParams p(dim, hidden, task);
  for (Eigen::Index i = 0; i < p.theta().size(); ++i) p.theta()[i] = 2.0 * rng.uniform() - 1.0;
  return p;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
  return m;
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST_CASE("init is seeded, Glorot-bounded, with zero biases") {
  const auto a = init(10, 64, Task::regression, 3);
  CHECK(a == init(10, 64, Task::regression, 3));
  CHECK_FALSE(a == init(10, 64, Task::regression, 4));
  CHECK(a.b1().isZero());
  CHECK(a.b2() == 0.0);
  CHECK(a.w1().cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 74.0));
  CHECK(a.w2().cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 65.0));
  const std::vector<double> zero(10, 0.0);
  CHECK(forward(a, zero) == 0.0);
  CHECK_THROWS_AS(init(0, 4, Task::regression, 0), InvalidInput);
}

TEST_CASE("forward on a hand-built one-unit network") {
  ModelParams p(1, 1, Task::regression);
  p.w1()(0, 0) = 1.0;
  p.b1()[0] = 0.0;
  p.w2()[0] = 2.0;
  p.b2() = 1.0;
  CHECK(forward(p, std::vector<double>{3.0}) == 7.0);
  CHECK(forward(p, std::vector<double>{-3.0}) == 1.0);
  CHECK_THROWS_AS(forward(p, std::vector<double>{1.0, 2.0}), InvalidInput);

  ModelParams b(1, 1, Task::binary);
  CHECK(forward(b, std::vector<double>{5.0}) == 0.5);
  b.b2() = 800.0;
  const double high = forward(b, std::vector<double>{0.0});
  CHECK(high < 1.0);
  b.b2() = -800.0;
  const double low = forward(b, std::vector<double>{0.0});
  CHECK(low > 0.0);
}

TEST_CASE("loss at a perfect fit has zero data gradient") {
  Rng rng(1);
  auto p = random_params(3, 5, Task::regression, rng);
  const Matrix x = random_matrix(8, 3, rng);
  const Vector y = predict(p, x);
  const auto lg = loss_and_grad(p, x, y, 0.0);
  CHECK(lg.loss == doctest::Approx(0.0).scale(1.0).epsilon(1e-28));
  CHECK(lg.grad.theta().cwiseAbs().maxCoeff() == 0.0);

  const double wd = 0.3;
  const auto with_decay = loss_and_grad(p, x, y, wd);
  const double l2 = 0.5 * wd * (p.w1().squaredNorm() + p.w2().squaredNorm());
  CHECK(with_decay.loss == doctest::Approx(l2).epsilon(1e-14));

  auto q = random_params(3, 5, Task::binary, rng);
  const auto lgb = loss_and_grad(q, x, predict(q, x), 0.0);
  CHECK(lgb.grad.theta().cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("analytic gradients match central differences on 50 instances per task") {
  Rng rng(2024);
  for (Task task : {Task::regression, Task::binary}) {
    double worst = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
      const std::size_t d = 1 + rng.below(6), hidden = 1 + rng.below(8), batch = 1 + rng.below(16);
      const auto p = random_params(d, hidden, task, rng);
      const Matrix x = random_matrix(batch, d, rng);
      Vector y(batch);
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        y[i] = task == Task::binary ? rng.uniform() : 2.0 * rng.uniform() - 1.0;
      }
      const double wd = inst % 2 == 0 ? 0.0 : 0.05;
      const auto analytic = to_std(loss_and_grad(p, x, y, wd).grad.theta());
      auto f = [&](const std::vector<double>& theta) {
        ModelParams q = p;
        for (std::size_t i = 0; i < theta.size(); ++i) q.theta()[static_cast<Eigen::Index>(i)] = theta[i];
        return loss_and_grad(q, x, y, wd).loss;
      };
      const auto numeric = oracle::fd_gradient(f, to_std(p.theta()), 1e-5);
      worst = std::max(worst, oracle::max_relative_error(analytic, numeric));
    }
    INFO("task " << to_string(task));
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("loss input validation") {
  Rng rng(3);
  auto p = random_params(2, 3, Task::binary, rng);
  Matrix x = random_matrix(4, 2, rng);
  Vector y = Vector::Constant(4, 0.5);
  y[0] = 1.5;
  CHECK_THROWS_AS(loss_and_grad(p, x, y, 0.0), InvalidInput);
  y[0] = std::nan("");
  CHECK_THROWS_AS(loss_and_grad(p, x, y, 0.0), NumericError);
  CHECK_THROWS_AS(loss_and_grad(p, Matrix(0, 2), Vector(0), 0.0), InvalidInput);
}

TEST_CASE("Adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Vector theta = Vector::LinSpaced(4, -1.0, 1.0);
    const Vector keep = theta;
    AdamState state(4);
    adam_update(theta, Vector::Zero(4), state, 0.1);
    CHECK(theta == keep);
    CHECK(state.step == 1);
  }
  SUBCASE("first step moves each coordinate by about lr against the gradient sign") {
    Vector theta = Vector::Zero(3);
    Vector g(3);
    g << 0.5, -2.0, 1e-3;
    AdamState state(3);
    adam_update(theta, g, state, 0.01);
    CHECK(theta[0] == doctest::Approx(-0.01).epsilon(1e-4));
    CHECK(theta[1] == doctest::Approx(0.01).epsilon(1e-4));
    CHECK(theta[2] == doctest::Approx(-0.01).epsilon(1e-4));
  }
  SUBCASE("minimizes (w - 3)^2") {
    Vector w = Vector::Zero(1);
    AdamState state(1);
    for (int i = 0; i < 500; ++i) {
      Vector g(1);
      g[0] = 2.0 * (w[0] - 3.0);
      adam_update(w, g, state, 0.1);
    }
    CHECK(std::abs(w[0] - 3.0) <= 0.01);
  }
}

TEST_CASE("early stopping rule") {
  EarlyStopping stop(5);
  CHECK(stop.update(1.0));
  int epochs = 1;
  while (!stop.should_stop()) {
    CHECK_FALSE(stop.update(2.0));
    ++epochs;
  }
  CHECK(epochs == 6);
  CHECK(stop.best_epoch() == 1);
  CHECK(stop.best() == 1.0);
}

TEST_CASE("fit on constant targets") {
  Rng rng(7);
  const Matrix tx = random_matrix(2000, 3, rng), vx = random_matrix(100, 3, rng);
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  cfg.seed = 5;
  const auto fit_reg = fit(tx, Vector::Constant(2000, 2.5), vx, Vector::Constant(100, 2.5), Task::regression, cfg);
  CHECK((predict(fit_reg.params, vx).array() - 2.5).abs().maxCoeff() <= 0.05);

  const auto fit_bin = fit(tx, Vector::Constant(2000, 0.3), vx, Vector::Constant(100, 0.3), Task::binary, cfg);
  CHECK((predict(fit_bin.params, vx).array() - 0.3).abs().maxCoeff() <= 0.05);
}

TEST_CASE("fit keeps the best checkpoint and is deterministic") {
  Rng rng(8);
  const Matrix tx = random_matrix(300, 4, rng), vx = random_matrix(80, 4, rng);
  Vector ty(300), vy(80);
  for (Eigen::Index i = 0; i < 300; ++i) ty[i] = std::sin(3.0 * tx(i, 0)) + 0.3 * (2.0 * rng.uniform() - 1.0);
  for (Eigen::Index i = 0; i < 80; ++i) vy[i] = std::sin(3.0 * vx(i, 0)) + 0.3 * (2.0 * rng.uniform() - 1.0);
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.learning_rate = 3e-2;
  cfg.batch_size = 32;
  cfg.seed = 1;
  const auto r = fit(tx, ty, vx, vy, Task::regression, cfg);
  CHECK(data_loss(r.params, vx, vy) == doctest::Approx(r.best_val_loss).epsilon(1e-12));
  for (double v : r.val_loss) CHECK(r.best_val_loss <= v);
  CHECK(r.val_loss.size() <= static_cast<std::size_t>(cfg.max_epochs));
  CHECK(r.val_loss[static_cast<std::size_t>(r.best_epoch - 1)] == r.best_val_loss);
  if (r.val_loss.size() < static_cast<std::size_t>(cfg.max_epochs)) {
    CHECK(r.val_loss.size() == static_cast<std::size_t>(r.best_epoch + cfg.patience));
  }
  CHECK(fit(tx, ty, vx, vy, Task::regression, cfg).params == r.params);
}

TEST_CASE("divergence is reported with its epoch") {
  Rng rng(9);
  const Matrix tx = random_matrix(64, 2, rng), vx = random_matrix(16, 2, rng);
  TrainConfig cfg;
  try {
    // squared residuals overflow to inf on the first batch
    fit(tx, Vector::Constant(64, 1e200), vx, Vector::Zero(16), Task::regression, cfg);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.epoch >= 1);
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
  c = {};
  c.max_epochs = 0;
  CHECK_THROWS_AS(c.validate(), InvalidInput);
}

TEST_CASE("model checkpoints round-trip exactly") {
  Rng rng(10);
  const auto p = random_params(10, 7, Task::binary, rng);
  const auto path = std::filesystem::temp_directory_path() / "orank_nn_model.txt";
  save_model(path, p);
  CHECK(load_model(path) == p);
}
