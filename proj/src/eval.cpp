#include "orank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "orank/error.hpp"

namespace orank::eval {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw InvalidInput("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (a == 0) throw InvalidInput("empty input");
}

/// cum[k] = sum of effects over the top-k units, k = 0..m.
std::vector<double> cumulative_effects(std::span<const double> scores, std::span<const double> effects) {
  const auto order = ranking(scores);
  std::vector<double> cum(order.size() + 1, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) cum[k + 1] = cum[k] + effects[order[k]];
  return cum;
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && v[order[end]] == v[order[start]]) ++end;
    const double avg = 0.5 * static_cast<double>(start + end - 1) + 1.0;
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = avg;
    start = end;
  }
  return ranks;
}

}  // namespace

std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<double> toc(std::span<const double> scores, std::span<const double> effects) {
  check_lengths(scores.size(), effects.size());
  const auto cum = cumulative_effects(scores, effects);
  const std::size_t m = scores.size();
  // Overall mean taken from the same running sum, so TOC(1) == 0 exactly.
  const double overall = cum[m] / static_cast<double>(m);
  std::vector<double> curve(m);
  for (std::size_t k = 1; k <= m; ++k) curve[k - 1] = cum[k] / static_cast<double>(k) - overall;
  return curve;
}

double autoc(std::span<const double> scores, std::span<const double> effects) {
  const auto curve = toc(scores, effects);
  return std::accumulate(curve.begin(), curve.end(), 0.0) / static_cast<double>(curve.size());
}

double approx_autoc(std::span<const double> scores, std::span<const double> dr_scores) {
  return autoc(scores, dr_scores);
}

double mean_policy_value(std::span<const double> scores, std::span<const double> tau,
                         std::span<const double> mu0) {
  check_lengths(scores.size(), tau.size());
  check_lengths(scores.size(), mu0.size());
  const auto m = static_cast<double>(scores.size());
  const double base = std::accumulate(mu0.begin(), mu0.end(), 0.0) / m;
  const auto cum = cumulative_effects(scores, tau);
  double total = 0.0;
  for (double c : cum) total += base + c / m;
  return total / static_cast<double>(cum.size());
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_lengths(a.size(), b.size());
  if (a.size() < 2) throw InvalidInput("spearman needs at least 2 points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(a.size() + 1);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

EvalReport evaluate(std::span<const double> scores, const dgp::GroundTruth& truth) {
  return {autoc(scores, truth.tau), mean_policy_value(scores, truth.tau, truth.mu0),
          spearman(scores, truth.tau)};
}

std::size_t select_best(std::span<const std::vector<double>> candidate_scores,
                        std::span<const double> val_dr_scores) {
  if (candidate_scores.empty()) throw InvalidInput("no candidates to select from");
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidate_scores.size(); ++c) {
    const double v = approx_autoc(candidate_scores[c], val_dr_scores);
    if (v > best_value) {
      best_value = v;
      best = c;
    }
  }
  return best;
}

}  // namespace orank::eval
