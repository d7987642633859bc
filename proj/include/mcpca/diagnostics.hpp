#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpca/decompose.hpp"

namespace mcpca {

/// A^+ = (A^T A)^{-1} A^T. Throws NumericalError if cond(A) > 1e12.
Matrix projection_matrix(const McpcaModel& m);
Matrix projection_matrix(const Matrix& A);

/// X (A^+)^T for centered X (n x p).
Matrix score_samples(const McpcaModel& m, const Matrix& X);

/// |offdiag(A^+ S_i (A^+)^T)|_F per context.
std::vector<double> uncorrelatedness_score(const CovarianceTensor& t, const McpcaModel& m);

struct KlEntry {
  std::optional<double> value;  // empty when the projected covariance is not PD
  std::string error;
};

/// log det Diag(C) - log det C for a symmetric C. Empty when
/// min eigenvalue <= 1e-12 trace(C).
KlEntry log_det_gap(const Matrix& C);

/// log_det_gap of A^+ S_i (A^+)^T per context.
std::vector<KlEntry> kl_loss(const CovarianceTensor& t, const McpcaModel& m);

struct VarianceExplained {
  Matrix per_component;        // k x r, b_ij^2 |a_j a_j^T|_F^2
  std::vector<double> explained;       // |A B_i A^T|_F^2 via the Gram quadratic form
  std::vector<double> total;           // |S_i|_F^2
  std::vector<double> ratio;           // explained / total (0 if total == 0)
  std::vector<double> naive_ratio;     // row sum of per_component / total
  std::vector<double> residual_ratio;  // 1 - |S_i - A B_i A^T|^2 / |S_i|^2
};

/// Explained variance of the model's loadings. With NNLS loadings the
/// Pythagorean split of |S_i|^2 only holds where no constraint is active, so
/// the quadratic form and the residual-based ratio are both reported.
VarianceExplained variance_explained(const CovarianceTensor& t, const McpcaModel& m);

/// r (p + k - 1). Throws InputError for r > p or negative arguments.
long long model_dimension(long long p, long long k, long long r);

}  // namespace mcpca
