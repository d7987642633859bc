#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcpca {

// Bad arguments, malformed files, shape mismatches. The CLI maps these to exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failures of the numerics on otherwise valid input. The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested rank exceeds the numerical rank of the flattening.
class RankDeficiencyError : public NumericalError {
 public:
  RankDeficiencyError(std::size_t requested, std::size_t max_admissible)
      : NumericalError("requested rank " + std::to_string(requested) +
                       " exceeds the numerical rank of the flattening; largest admissible rank is " +
                       std::to_string(max_admissible)),
        requested_(requested),
        max_admissible_(max_admissible) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t max_admissible() const noexcept { return max_admissible_; }

 private:
  std::size_t requested_;
  std::size_t max_admissible_;
};

// T_A(a, b, *) vanished during a power iteration; the caller should restart.
class DegenerateStartError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// The Gram matrix of {a_j a_j^T} is numerically singular.
class GramSingularError : public NumericalError {
 public:
  GramSingularError(std::size_t col_i, std::size_t col_j, double condition)
      : NumericalError("Gram matrix of component outer products is singular (condition " +
                       std::to_string(condition) + "); columns " + std::to_string(col_i) + " and " +
                       std::to_string(col_j) + " are (near-)duplicates"),
        col_i_(col_i),
        col_j_(col_j) {}

  std::size_t first() const noexcept { return col_i_; }
  std::size_t second() const noexcept { return col_j_; }

 private:
  std::size_t col_i_;
  std::size_t col_j_;
};

}  // namespace mcpca
