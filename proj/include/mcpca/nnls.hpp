#pragma once

#include <Eigen/Dense>

namespace mcpca {

inline constexpr double kNnlsTolerance = 1e-10;
inline constexpr double kMaxGramCondition = 1e12;

struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
};

/// Lawson-Hanson active set on the normal equations:
///   minimize x^T G x - 2 h^T x  subject to x >= 0
/// with G symmetric positive definite. Terminates when the dual
/// w = h - G x satisfies w_j <= tol * scale on the zero set, where
/// scale = max(1, max|h|). Entries outside the passive set are exactly 0.
NnlsResult nnls_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& h,
                       double tol = kNnlsTolerance);

/// Max KKT violation of x for the problem above: max over j of
/// negative x_j, positive dual on the zero set, |dual| on the support.
double nnls_kkt_violation(const Eigen::MatrixXd& gram, const Eigen::VectorXd& h,
                          const Eigen::VectorXd& x);

}  // namespace mcpca
