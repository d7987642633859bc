#include "mcpca/diagnostics.hpp"

#include <cmath>

#include "mcpca/error.hpp"

namespace mcpca {

Matrix projection_matrix(const Matrix& A) {
  if (A.cols() == 0) return Matrix(0, A.rows());
  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (!(s(s.size() - 1) > 0.0) || s(0) / s(s.size() - 1) > 1e12)
    throw NumericalError("component matrix A is rank deficient (condition > 1e12)");
  const Matrix gram = A.transpose() * A;
  return gram.ldlt().solve(A.transpose());
}

Matrix projection_matrix(const McpcaModel& m) { return projection_matrix(m.A); }

Matrix score_samples(const McpcaModel& m, const Matrix& X) {
  if (X.cols() != m.p())
    throw InputError("score_samples: data has " + std::to_string(X.cols()) + " columns, model expects " +
                     std::to_string(m.p()));
  return X * projection_matrix(m).transpose();
}

namespace {

Matrix projected(const Matrix& P, const Matrix& S) {
  Matrix C = P * S * P.transpose();
  return (0.5 * (C + C.transpose())).eval();
}

void check_shape(const CovarianceTensor& t, const McpcaModel& m) {
  if (m.p() != t.p() || m.k() != t.k())
    throw InputError("model shape (p=" + std::to_string(m.p()) + ", k=" + std::to_string(m.k()) +
                     ") does not match tensor (p=" + std::to_string(t.p()) + ", k=" + std::to_string(t.k()) + ")");
}

}  // namespace

std::vector<double> uncorrelatedness_score(const CovarianceTensor& t, const McpcaModel& m) {
  check_shape(t, m);
  const Matrix P = projection_matrix(m);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < t.k(); ++i) {
    Matrix C = projected(P, t.slice(i));
    C.diagonal().setZero();
    out.push_back(C.norm());
  }
  return out;
}

KlEntry log_det_gap(const Matrix& C) {
  KlEntry e;
  const double trace = C.trace();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(C, Eigen::EigenvaluesOnly);
  const Vector& lambda = eig.eigenvalues();
  if (!(trace > 0.0) || !(lambda.minCoeff() > 1e-12 * trace)) {
    e.error = "projected covariance is not positive definite";
    return e;
  }
  double gap = 0.0;
  for (Eigen::Index j = 0; j < C.rows(); ++j) gap += std::log(C(j, j)) - std::log(lambda(j));
  e.value = gap;
  return e;
}

std::vector<KlEntry> kl_loss(const CovarianceTensor& t, const McpcaModel& m) {
  check_shape(t, m);
  const Matrix P = projection_matrix(m);
  std::vector<KlEntry> out;
  for (Eigen::Index i = 0; i < t.k(); ++i) out.push_back(log_det_gap(projected(P, t.slice(i))));
  return out;
}

VarianceExplained variance_explained(const CovarianceTensor& t, const McpcaModel& m) {
  check_shape(t, m);
  const Matrix inner = m.A.transpose() * m.A;
  const Matrix gram = inner.cwiseProduct(inner);
  VarianceExplained v;
  v.per_component.resize(t.k(), m.r());
  for (Eigen::Index i = 0; i < t.k(); ++i) {
    const Vector b = m.B.row(i).transpose();
    for (Eigen::Index j = 0; j < m.r(); ++j) v.per_component(i, j) = b(j) * b(j) * gram(j, j);
    const double explained = b.dot(gram * b);
    const double total = t.slice(i).squaredNorm();
    const Matrix fit = m.A * b.asDiagonal() * m.A.transpose();
    const double resid = (t.slice(i) - fit).squaredNorm();
    v.explained.push_back(explained);
    v.total.push_back(total);
    v.ratio.push_back(total > 0.0 ? explained / total : 0.0);
    v.naive_ratio.push_back(total > 0.0 ? v.per_component.row(i).sum() / total : 0.0);
    v.residual_ratio.push_back(total > 0.0 ? 1.0 - resid / total : 0.0);
  }
  return v;
}

long long model_dimension(long long p, long long k, long long r) {
  if (p < 0 || k < 0 || r < 0) throw InputError("model_dimension: arguments must be non-negative");
  if (r > p) throw InputError("model_dimension: requires r <= p");
  return r * (p + k - 1);
}

}  // namespace mcpca
