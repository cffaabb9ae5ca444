#pragma once

// Independent reference implementations. None of these call into the library's
// metric or loss code, so agreement is evidence rather than tautology.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Effects sorted by descending score, ties by ascending index, via a stable sort.
inline std::vector<double> ordered_effects(const std::vector<double>& scores, const std::vector<double>& effects) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> out;
  for (auto i : idx) out.push_back(effects[i]);
  return out;
}

/// Area under the TOC by the definition: average over k of (top-k mean - overall mean).
inline double autoc(const std::vector<double>& scores, const std::vector<double>& effects) {
  const auto ordered = ordered_effects(scores, effects);
  const double m = static_cast<double>(ordered.size());
  double overall = 0.0;
  for (double v : ordered) overall += v;
  overall /= m;
  double area = 0.0, running = 0.0;
  for (std::size_t k = 1; k <= ordered.size(); ++k) {
    running += ordered[k - 1];
    area += running / static_cast<double>(k) - overall;
  }
  return area / m;
}

/// Mean over k = 0..m of the value of treating the top k.
inline double policy_value(const std::vector<double>& scores, const std::vector<double>& tau,
                           const std::vector<double>& mu0) {
  const auto ordered = ordered_effects(scores, tau);
  const double m = static_cast<double>(ordered.size());
  const double base = std::accumulate(mu0.begin(), mu0.end(), 0.0) / m;
  double total = 0.0, gain = 0.0;
  for (std::size_t k = 0; k <= ordered.size(); ++k) {
    if (k > 0) gain += ordered[k - 1];
    total += base + gain / m;
  }
  return total / (m + 1.0);
}

/// Central finite difference of f along every coordinate of x.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|): the sup-norm relative error.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale > 0.0 ? diff / scale : diff;
}

struct Pop {
  std::vector<double> prob, mu0, mu1, e;
};

struct Nuis {
  std::vector<double> mu0, mu1, e;
};

enum class Kind { cate, bin, soft, orth };

/// Population loss by explicit enumeration over ordered support pairs (a != b), both
/// treatment draws and a two-point outcome noise Y = mu_T +- sd. Expectation over Y is
/// computed by summation rather than by substituting conditional means.
inline double population_loss(Kind kind, const std::vector<double>& g, const Nuis& eta, const Pop& pop,
                              double kappa, double sd = 0.7) {
  const std::size_t k = pop.prob.size();
  if (kind == Kind::cate) {
    double s = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const double r = g[a] - (eta.mu1[a] - eta.mu0[a]);
      s += pop.prob[a] * r * r;
    }
    return s;
  }
  double same = 0.0;
  for (double p : pop.prob) same += p * p;
  auto phi = [&](std::size_t a, int t, double y) {
    const double mu1 = eta.mu1[a], mu0 = eta.mu0[a], e = eta.e[a];
    return (t == 1 ? (y - mu1) / e : -(y - mu0) / (1.0 - e)) + mu1 - mu0;
  };
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const double w_pair = pop.prob[a] * pop.prob[b] / (1.0 - same);
      const double th_a = eta.mu1[a] - eta.mu0[a];
      const double th_b = eta.mu1[b] - eta.mu0[b];
      const double p = logistic(g[a] - g[b]);
      double expected = 0.0;
      for (int ta = 0; ta < 2; ++ta) {
        for (int tb = 0; tb < 2; ++tb) {
          for (int sa = -1; sa <= 1; sa += 2) {
            for (int sb = -1; sb <= 1; sb += 2) {
              const double w = (ta ? pop.e[a] : 1.0 - pop.e[a]) * (tb ? pop.e[b] : 1.0 - pop.e[b]) * 0.25;
              const double ya = (ta ? pop.mu1[a] : pop.mu0[a]) + sa * sd;
              const double yb = (tb ? pop.mu1[b] : pop.mu0[b]) + sb * sd;
              double label;
              if (kind == Kind::bin) {
                label = th_a > th_b ? 1.0 : 0.0;
              } else {
                const double t = logistic((th_a - th_b) / kappa);
                label = t;
                if (kind == Kind::orth) {
                  label += t * (1.0 - t) / kappa * ((phi(a, ta, ya) - th_a) - (phi(b, tb, yb) - th_b));
                }
              }
              expected += w * (-label * std::log(p) - (1.0 - label) * std::log(1.0 - p));
            }
          }
        }
      }
      total += w_pair * expected;
    }
  }
  return total;
}

}  // namespace oracle
