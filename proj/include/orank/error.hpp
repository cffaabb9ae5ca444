#pragma once

#include <stdexcept>
#include <string>

namespace orank {

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. `row` and `column` are 1-based; 0 means "not applicable".
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
      : std::runtime_error(what), row(row), column(column) {}
  std::size_t row;
  std::size_t column;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A training split is missing treated or control units.
struct DegenerateSplit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch(epoch) {}
  int epoch;
};

/// A finite-difference step pushed a propensity outside its admissible range.
struct StepTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace orank
