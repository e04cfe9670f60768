#pragma once

#include <stdexcept>
#include <string>

namespace aqr {

// Formula text could not be parsed. Carries the 0-based character position
// of the offending token so callers can point at it.
class FormulaError : public std::runtime_error {
 public:
  FormulaError(std::string msg, std::size_t position)
      : std::runtime_error(std::move(msg)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Bad or inconsistent input data (missing column, NA cell, ragged row, ...).
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical routine failed to converge or produced a singular system.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace aqr
