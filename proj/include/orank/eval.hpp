#pragma once

#include <span>
#include <vector>

#include "orank/dgp.hpp"

namespace orank::eval {

/// Unit indices ordered by descending score; equal scores keep ascending index order.
std::vector<std::size_t> ranking(std::span<const double> scores);

/// TOC(k/m) = mean effect of the top-k units by score minus the mean effect, k = 1..m.
/// The last entry is exactly 0.
std::vector<double> toc(std::span<const double> scores, std::span<const double> effects);

/// Uniform average of the TOC curve over k = 1..m.
double autoc(std::span<const double> scores, std::span<const double> effects);

/// AUTOC with doubly robust scores standing in for the unobserved effects.
double approx_autoc(std::span<const double> scores, std::span<const double> dr_scores);

/// Average over budgets k = 0..m of mean(mu0) + (1/m) * sum of tau over the top-k.
double mean_policy_value(std::span<const double> scores, std::span<const double> tau,
                         std::span<const double> mu0);

/// Rank correlation with average ranks for ties. Returns 0 when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

struct EvalReport {
  double autoc = 0.0;
  double mean_policy_value = 0.0;
  double spearman_vs_truth = 0.0;
};

EvalReport evaluate(std::span<const double> scores, const dgp::GroundTruth& truth);

/// Index of the candidate whose validation scores maximise approx_autoc; the earliest wins ties.
std::size_t select_best(std::span<const std::vector<double>> candidate_scores,
                        std::span<const double> val_dr_scores);

}  // namespace orank::eval
