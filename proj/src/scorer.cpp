#include "orank/scorer.hpp"

#include <fstream>

#include "orank/csv.hpp"
#include "orank/error.hpp"

namespace orank {

double Scorer::score(std::span<const double> x) const {
  Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  return score(row)[0];
}

ScoringModel::ScoringModel(nn::ModelParams params) : params_(std::move(params)) {
  if (params_.task() != nn::Task::regression) {
    throw InvalidInput("a scoring model needs a regression (unbounded) head");
  }
}

Vector ScoringModel::score(const Matrix& x) const { return nn::logits(params_, x); }

void save_scores(const std::filesystem::path& path, std::span<const double> scores) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "index,score\n";
  for (std::size_t i = 0; i < scores.size(); ++i) out << i << ',' << csv::format_double(scores[i]) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<double> load_scores(const std::filesystem::path& path) {
  const csv::Table table = csv::read(path);
  if (table.header.size() != 2) throw ParseError("scores file must have columns index,score", 1, 0);
  const std::size_t idx = table.column("index");
  const std::size_t sc = table.column("score");
  std::vector<double> scores;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double index = csv::to_double(table.rows[r][idx], r + 2, idx + 1);
    if (index != static_cast<double>(r)) throw ParseError("index column out of order", r + 2, idx + 1);
    scores.push_back(csv::to_double(table.rows[r][sc], r + 2, sc + 1));
  }
  return scores;
}

}  // namespace orank
