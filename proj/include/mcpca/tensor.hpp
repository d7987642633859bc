#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mcpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTolerance = 1e-12;

/// p x p x k stack of symmetric covariance slices, one per context.
///
/// Slices are validated symmetric to a relative tolerance of 1e-12 and then
/// stored as (S + S^T) / 2. Immutable after construction.
class CovarianceTensor {
 public:
  CovarianceTensor() = default;

  Eigen::Index p() const noexcept { return p_; }
  Eigen::Index k() const noexcept { return static_cast<Eigen::Index>(slices_.size()); }
  const Matrix& slice(Eigen::Index i) const { return slices_.at(static_cast<std::size_t>(i)); }
  const std::vector<Matrix>& slices() const noexcept { return slices_; }

  // Frobenius norm of the whole tensor.
  double norm() const;

  CovarianceTensor scaled(double c) const;
  CovarianceTensor permuted(std::span<const Eigen::Index> order) const;

 private:
  friend CovarianceTensor stack_covariances(std::vector<Matrix> matrices);
  Eigen::Index p_ = 0;
  std::vector<Matrix> slices_;
};

/// Horizontal concatenation M = [S_1 ... S_k] with its singular values.
struct Flattening {
  Matrix matrix;           // p x (p*k)
  Vector singular_values;  // nonincreasing, length min(p, p*k)
  Eigen::Index p = 0;
  Eigen::Index k = 0;
};

/// a (x) a (x) b with unit a and non-negative b.
struct RankOneTerm {
  Vector a;
  Vector b;
};

/// Validates and stacks k symmetric p x p matrices. Throws InputError on
/// empty input, dimension mismatch, non-finite entries or asymmetry.
CovarianceTensor stack_covariances(std::vector<Matrix> matrices);

/// Builds sum_j a_j (x) a_j (x) b_j. All terms must share p and k.
CovarianceTensor tensor_from_terms(std::span<const RankOneTerm> terms);

/// Same as tensor_from_terms with A (p x r) and B (k x r).
CovarianceTensor tensor_from_factors(const Matrix& A, const Matrix& B);

Flattening flatten(const CovarianceTensor& t);

/// Inverse of flatten's block layout.
CovarianceTensor unflatten(const Matrix& m, Eigen::Index k);

/// sum_i v_i S_i.
Matrix contract_mode3(const CovarianceTensor& t, const Vector& v);

/// True when |m - m^T| <= tol * max(1, max|m|) entrywise.
bool is_symmetric(const Matrix& m, double tol = kSymmetryTolerance);

}  // namespace mcpca
