#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "orank/dgp.hpp"
#include "orank/error.hpp"
#include "orank/eval.hpp"
#include "orank/nuisance.hpp"
#include "orank/rng.hpp"

using namespace orank;
using namespace orank::eval;

namespace {

std::vector<double> uniform_vector(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

/// A fixed, imperfect scorer: the first two covariates only.
std::vector<double> partial_scores(const dgp::Dataset& d) {
  std::vector<double> s(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) s[i] = 0.8 * d.x()(static_cast<Eigen::Index>(i), 0) + 0.6 * d.x()(static_cast<Eigen::Index>(i), 1);
  return s;
}

}  // namespace

TEST_CASE("TOC on two points") {
  const std::vector<double> effects{1.0, 0.0};
  CHECK(toc(std::vector<double>{2.0, 1.0}, effects) == std::vector<double>{0.5, 0.0});
  CHECK(toc(std::vector<double>{1.0, 2.0}, effects) == std::vector<double>{-0.5, 0.0});
  CHECK(autoc(std::vector<double>{2.0, 1.0}, effects) == 0.25);
  CHECK(autoc(std::vector<double>{1.0, 2.0}, effects) == -0.25);
  const auto flat = toc(std::vector<double>{0.3, 0.1, 0.2}, std::vector<double>{2.0, 2.0, 2.0});
  for (double v : flat) CHECK(v == 0.0);
  CHECK_THROWS_AS(toc(std::vector<double>{1.0}, effects), InvalidInput);
}

TEST_CASE("ranking breaks ties by index") {
  CHECK(ranking(std::vector<double>{1.0, 3.0, 1.0, 3.0}) == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("AUTOC and policy value agree with the definition oracle") {
  Rng rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 1 + rng.below(60);
    auto scores = uniform_vector(m, rng);
    if (rep % 3 == 0) {
      for (double& s : scores) s = std::round(4.0 * s);  // many ties
    }
    const auto tau = uniform_vector(m, rng, -2.0, 2.0), mu0 = uniform_vector(m, rng);
    CHECK(autoc(scores, tau) == doctest::Approx(oracle::autoc(scores, tau)).epsilon(1e-12).scale(1.0));
    CHECK(mean_policy_value(scores, tau, mu0) ==
          doctest::Approx(oracle::policy_value(scores, tau, mu0)).epsilon(1e-12).scale(1.0));
    const auto curve = toc(scores, tau);
    CHECK(std::abs(curve.back()) <= 1e-14);
  }
}

TEST_CASE("constant scores rank by index") {
  Rng rng(2);
  const auto phi = uniform_vector(30, rng);
  const std::vector<double> constant(30, 0.7);
  std::vector<double> descending(30);
  for (std::size_t i = 0; i < 30; ++i) descending[i] = 30.0 - static_cast<double>(i);
  CHECK(approx_autoc(constant, phi) == autoc(descending, phi));
}

TEST_CASE("policy value examples") {
  const std::vector<double> scores{2.0, 1.0};
  CHECK(mean_policy_value(scores, std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 0.0}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Rng rng(3);
  const auto mu0 = uniform_vector(10, rng);
  const double base = std::accumulate(mu0.begin(), mu0.end(), 0.0) / 10.0;
  CHECK(mean_policy_value(uniform_vector(10, rng), std::vector<double>(10, 0.0), mu0) ==
        doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("ranking by effect maximises AUTOC and policy value over all 720 orderings") {
  Rng rng(4);
  const auto tau = uniform_vector(6, rng, -1.0, 2.0), mu0 = uniform_vector(6, rng);
  const double best_autoc = autoc(tau, tau), best_value = mean_policy_value(tau, tau, mu0);
  std::vector<int> perm{0, 1, 2, 3, 4, 5};
  int count = 0;
  do {
    std::vector<double> scores(6);
    for (int i = 0; i < 6; ++i) scores[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = 6.0 - i;
    CHECK(autoc(scores, tau) <= best_autoc + 1e-15);
    CHECK(mean_policy_value(scores, tau, mu0) <= best_value + 1e-15);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(count == 720);
}

TEST_CASE("AUTOC depends only on the ordering") {
  Rng rng(5);
  const auto scores = uniform_vector(200, rng), tau = uniform_vector(200, rng);
  std::vector<double> transformed(200);
  std::transform(scores.begin(), scores.end(), transformed.begin(), [](double s) { return std::exp(2.0 * s) - 7.0; });
  CHECK(autoc(transformed, tau) == autoc(scores, tau));
}

TEST_CASE("approximate AUTOC") {
  Rng rng(6);
  const auto scores = uniform_vector(50, rng), tau = uniform_vector(50, rng);
  CHECK(approx_autoc(scores, tau) == autoc(scores, tau));

  dgp::DgpConfig c;
  c.n = 20000;
  c.seed = 7;
  const auto s = dgp::generate(c);
  const auto phi = nuisance::dr_scores(s.data, {s.truth.mu0, s.truth.mu1, s.truth.e});
  const auto fixed = partial_scores(s.data);
  CHECK(std::abs(approx_autoc(fixed, phi) - autoc(fixed, s.truth.tau)) <= 0.05);
}

TEST_CASE("approximate AUTOC error shrinks with the sample size") {
  auto spread = [](std::size_t m) {
    double sum = 0.0, sq = 0.0;
    const int reps = 30;
    for (int r = 0; r < reps; ++r) {
      dgp::DgpConfig c;
      c.n = m;
      c.seed = 1000 + static_cast<std::uint64_t>(r);
      const auto s = dgp::generate(c);
      const auto phi = nuisance::dr_scores(s.data, {s.truth.mu0, s.truth.mu1, s.truth.e});
      const auto fixed = partial_scores(s.data);
      const double d = approx_autoc(fixed, phi) - autoc(fixed, s.truth.tau);
      sum += d;
      sq += d * d;
    }
    return sq / reps - (sum / reps) * (sum / reps);
  };
  const double small = spread(1000), large = spread(10000);
  MESSAGE("variance at m=1000: " << small << ", m=10000: " << large);
  CHECK(large < small);
}

TEST_CASE("spearman") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  CHECK(spearman(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(a, std::vector<double>{-1.0, -2.0, -3.0}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(spearman(a, std::vector<double>{1.0, 3.0, 2.0}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(spearman(a, std::vector<double>{4.0, 4.0, 4.0}) == 0.0);
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1.0, 2.0}), InvalidInput);
}

TEST_CASE("select_best") {
  Rng rng(8);
  const auto phi = uniform_vector(100, rng);
  const std::vector<std::vector<double>> single{uniform_vector(100, rng)};
  CHECK(select_best(single, phi) == 0);
  const std::vector<std::vector<double>> pair{std::vector<double>(100, 1.0), phi};
  CHECK(select_best(pair, phi) == 1);
  const std::vector<std::vector<double>> tied{phi, phi};
  CHECK(select_best(tied, phi) == 0);
  CHECK(select_best(pair, phi) == select_best(pair, phi));
  CHECK_THROWS_AS(select_best(std::vector<std::vector<double>>{}, phi), InvalidInput);
}

TEST_CASE("evaluate bundles the three metrics") {
  dgp::GroundTruth t{{1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}, {0.5, 0.5}};
  const auto r = evaluate(std::vector<double>{2.0, 1.0}, t);
  CHECK(r.autoc == 0.25);
  CHECK(r.mean_policy_value == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.spearman_vs_truth == doctest::Approx(1.0).epsilon(1e-15));
}
