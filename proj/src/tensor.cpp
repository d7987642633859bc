#include "mcpca/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcpca/error.hpp"
#include "mcpca/kernels.hpp"

namespace mcpca {

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1e-300, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

double CovarianceTensor::norm() const {
  double sq = 0.0;
  for (const auto& s : slices_) sq += s.squaredNorm();
  return std::sqrt(sq);
}

CovarianceTensor CovarianceTensor::scaled(double c) const {
  CovarianceTensor out = *this;
  for (auto& s : out.slices_) s *= c;
  return out;
}

CovarianceTensor CovarianceTensor::permuted(std::span<const Eigen::Index> order) const {
  if (static_cast<Eigen::Index>(order.size()) != k())
    throw InputError("permutation length does not match context count");
  std::vector<Matrix> out;
  out.reserve(order.size());
  for (auto i : order) out.push_back(slice(i));
  return stack_covariances(std::move(out));
}

CovarianceTensor stack_covariances(std::vector<Matrix> matrices) {
  if (matrices.empty()) throw InputError("no covariance matrices to stack");
  const Eigen::Index p = matrices.front().rows();
  if (p < 1) throw InputError("covariance matrices must be at least 1 x 1");
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    auto& s = matrices[i];
    if (s.rows() != p || s.cols() != p)
      throw InputError("dimension mismatch: slice " + std::to_string(i) + " is " +
                       std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                       ", expected " + std::to_string(p) + "x" + std::to_string(p));
    if (!s.allFinite()) throw InputError("slice " + std::to_string(i) + " has non-finite entries");
    if (!is_symmetric(s))
      throw InputError("slice " + std::to_string(i) + " is not symmetric within tolerance");
    s = (0.5 * (s + s.transpose())).eval();
  }
  CovarianceTensor t;
  t.p_ = p;
  t.slices_ = std::move(matrices);
  return t;
}

CovarianceTensor tensor_from_factors(const Matrix& A, const Matrix& B) {
  if (A.cols() != B.cols()) throw InputError("A and B must have the same number of columns");
  std::vector<Matrix> slices;
  slices.reserve(static_cast<std::size_t>(B.rows()));
  for (Eigen::Index i = 0; i < B.rows(); ++i)
    slices.push_back(A * B.row(i).transpose().asDiagonal() * A.transpose());
  return stack_covariances(std::move(slices));
}

CovarianceTensor tensor_from_terms(std::span<const RankOneTerm> terms) {
  if (terms.empty()) throw InputError("no rank-one terms");
  const Eigen::Index p = terms.front().a.size();
  const Eigen::Index k = terms.front().b.size();
  Matrix A(p, static_cast<Eigen::Index>(terms.size()));
  Matrix B(k, static_cast<Eigen::Index>(terms.size()));
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (terms[j].a.size() != p || terms[j].b.size() != k)
      throw InputError("rank-one terms disagree in dimension");
    A.col(static_cast<Eigen::Index>(j)) = terms[j].a;
    B.col(static_cast<Eigen::Index>(j)) = terms[j].b;
  }
  return tensor_from_factors(A, B);
}

Flattening flatten(const CovarianceTensor& t) {
  Flattening f;
  f.p = t.p();
  f.k = t.k();
  f.matrix.resize(f.p, f.p * f.k);
  for (Eigen::Index i = 0; i < f.k; ++i) f.matrix.middleCols(i * f.p, f.p) = t.slice(i);
  Eigen::BDCSVD<Matrix> svd(f.matrix);
  f.singular_values = svd.singularValues();
  return f;
}

CovarianceTensor unflatten(const Matrix& m, Eigen::Index k) {
  if (k < 1 || m.cols() != m.rows() * k) throw InputError("matrix is not a p x (p*k) flattening");
  const Eigen::Index p = m.rows();
  std::vector<Matrix> slices;
  slices.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) slices.push_back(m.middleCols(i * p, p));
  return stack_covariances(std::move(slices));
}

Matrix contract_mode3(const CovarianceTensor& t, const Vector& v) {
  if (v.size() != t.k())
    throw InputError("contraction vector has length " + std::to_string(v.size()) + ", expected " +
                     std::to_string(t.k()));
  if (!v.allFinite()) throw InputError("contraction vector has non-finite entries");
  return kernels::serial::contract_mode3(t.slices(), v);
}

}  // namespace mcpca
