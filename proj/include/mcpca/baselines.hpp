#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpca/tensor.hpp"

namespace mcpca {

enum class BaselineMethod { pca_stack, jennrich };

struct BaselineResult {
  BaselineMethod method;
  Matrix A;  // p x r, unit columns, sign-fixed
  bool degenerate = false;
  std::vector<std::string> notes;
};

/// Top-r eigenvectors of sum_i w_i S_i. Flags a tie at the r / r+1 boundary.
BaselineResult pca_stack(const CovarianceTensor& t, const Vector& weights, Eigen::Index r);

/// pca_stack with equal weights.
BaselineResult pca_stack(const CovarianceTensor& t, Eigen::Index r);

/// Jennrich's algorithm on two random mode-3 contractions, reduced to the
/// top-r left singular subspace of the flattening. Redraws the contraction
/// vectors up to twice on an eigenvalue collision, then returns the last
/// attempt flagged degenerate.
BaselineResult jennrich(const CovarianceTensor& t, Eigen::Index r, std::uint64_t seed);

std::string to_string(BaselineMethod m);

}  // namespace mcpca
