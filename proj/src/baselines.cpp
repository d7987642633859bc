#include "mcpca/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mcpca/error.hpp"
#include "mcpca/random.hpp"

namespace mcpca {

namespace {

void normalize_and_fix_signs(Matrix& A) {
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    A.col(j).normalize();
    Eigen::Index imax = 0;
    A.col(j).cwiseAbs().maxCoeff(&imax);
    if (A(imax, j) < 0) A.col(j) = -A.col(j);
  }
}

void check_rank(const CovarianceTensor& t, Eigen::Index r) {
  if (r < 1 || r > t.p())
    throw InputError("rank must be in [1, p = " + std::to_string(t.p()) + "], got " + std::to_string(r));
}

}  // namespace

std::string to_string(BaselineMethod m) { return m == BaselineMethod::pca_stack ? "pca_stack" : "jennrich"; }

BaselineResult pca_stack(const CovarianceTensor& t, const Vector& weights, Eigen::Index r) {
  check_rank(t, r);
  if (weights.size() != t.k()) throw InputError("pca_stack: need one weight per context");
  if ((weights.array() <= 0.0).any()) throw InputError("pca_stack: weights must be positive");
  if (std::abs(weights.sum() - 1.0) > 1e-9) throw InputError("pca_stack: weights must sum to 1");

  Matrix pooled = Matrix::Zero(t.p(), t.p());
  for (Eigen::Index i = 0; i < t.k(); ++i) pooled += weights(i) * t.slice(i);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(pooled);
  const Vector& lambda = eig.eigenvalues();  // ascending
  const Eigen::Index p = t.p();
  BaselineResult res{BaselineMethod::pca_stack, Matrix(p, r), false, {}};
  for (Eigen::Index c = 0; c < r; ++c) res.A.col(c) = eig.eigenvectors().col(p - 1 - c);
  normalize_and_fix_signs(res.A);
  if (r < p) {
    const double scale = std::max(std::abs(lambda(p - 1)), 1e-300);
    if (std::abs(lambda(p - r) - lambda(p - r - 1)) <= 1e-12 * scale) {
      res.degenerate = true;
      res.notes.push_back("eigenvalue tie between positions r and r+1; basis is not unique");
    }
  }
  return res;
}

BaselineResult pca_stack(const CovarianceTensor& t, Eigen::Index r) {
  return pca_stack(t, Vector::Constant(t.k(), 1.0 / static_cast<double>(t.k())), r);
}

BaselineResult jennrich(const CovarianceTensor& t, Eigen::Index r, std::uint64_t seed) {
  check_rank(t, r);
  const Flattening f = flatten(t);
  Eigen::BDCSVD<Matrix> svd(f.matrix, Eigen::ComputeThinU);
  const Matrix U = svd.matrixU().leftCols(r);

  BaselineResult res{BaselineMethod::jennrich, Matrix(t.p(), r), false, {}};
  Rng rng(seed);
  constexpr int kAttempts = 3;  // first draw plus two redraws
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const Vector u = rng.sphere(t.k());
    const Vector v = rng.sphere(t.k());
    const Matrix M1 = U.transpose() * contract_mode3(t, u) * U;
    const Matrix M2 = U.transpose() * contract_mode3(t, v) * U;
    const Matrix op = M1 * M2.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::EigenSolver<Matrix> eig(op);
    if (eig.info() != Eigen::Success) {
      res.notes.push_back("eigendecomposition failed on attempt " + std::to_string(attempt + 1));
      res.degenerate = true;
      continue;
    }
    const Eigen::VectorXcd lambda = eig.eigenvalues();
    const double scale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    bool collision = false;
    for (Eigen::Index i = 0; i < r && !collision; ++i)
      for (Eigen::Index j = i + 1; j < r; ++j)
        if (std::abs(lambda(i) - lambda(j)) <= 1e-10 * scale) {
          collision = true;
          break;
        }
    res.A = U * eig.eigenvectors().real();
    for (Eigen::Index j = 0; j < r; ++j)
      if (res.A.col(j).norm() == 0.0) res.A.col(j) = U * eig.eigenvectors().col(j).imag();
    normalize_and_fix_signs(res.A);
    if (!collision) {
      res.degenerate = false;
      return res;
    }
    res.degenerate = true;
    res.notes.push_back("eigenvalue collision on attempt " + std::to_string(attempt + 1));
  }
  return res;
}

}  // namespace mcpca
