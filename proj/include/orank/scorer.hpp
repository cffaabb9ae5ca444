#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "orank/nn.hpp"
#include "orank/types.hpp"

namespace orank {

/// Anything that maps covariates to a real-valued priority; larger ranks first.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual Vector score(const Matrix& x) const = 0;
  double score(std::span<const double> x) const;
};

/// A regression-head network used directly as the scoring function g(x).
class ScoringModel final : public Scorer {
 public:
  explicit ScoringModel(nn::ModelParams params);
  using Scorer::score;
  Vector score(const Matrix& x) const override;
  const nn::ModelParams& params() const { return params_; }

 private:
  nn::ModelParams params_;
};

/// CSV `index,score`.
void save_scores(const std::filesystem::path& path, std::span<const double> scores);
std::vector<double> load_scores(const std::filesystem::path& path);

}  // namespace orank
