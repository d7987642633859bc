#include "mcpca/kernels.hpp"

#include <cstdlib>
#include <exception>
#include <string>

#include <omp.h>

#include "mcpca/error.hpp"
#include "mcpca/nnls.hpp"

namespace mcpca::kernels {

int configure_threads_from_env() {
  if (const char* env = std::getenv("MCPCA_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 0)
      throw InputError(std::string("MCPCA_THREADS must be a non-negative integer, got '") + env + "'");
    if (n > 0) omp_set_num_threads(static_cast<int>(n));
  }
  return omp_get_max_threads();
}

int max_threads() { return omp_get_max_threads(); }

namespace {

Matrix covariance_of(const Matrix& X) {
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Matrix centered = X.rowwise() - mean;
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);
  return (0.5 * (cov + cov.transpose())).eval();
}

Vector projections_row(const Matrix& S, const Matrix& A) {
  Vector row(A.cols());
  for (Eigen::Index j = 0; j < A.cols(); ++j) row(j) = A.col(j).dot(S * A.col(j));
  return row;
}

}  // namespace

namespace serial {

std::vector<Matrix> sample_covariances(std::span<const Matrix> data) {
  std::vector<Matrix> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = covariance_of(data[i]);
  return out;
}

Matrix contract_mode3(std::span<const Matrix> slices, const Vector& v) {
  const Eigen::Index p = slices.empty() ? 0 : slices.front().rows();
  Matrix out = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < slices.size(); ++i)
    out.noalias() += v(static_cast<Eigen::Index>(i)) * slices[i];
  return out;
}

Matrix diagonal_projections(std::span<const Matrix> slices, const Matrix& A) {
  Matrix H(static_cast<Eigen::Index>(slices.size()), A.cols());
  for (std::size_t i = 0; i < slices.size(); ++i)
    H.row(static_cast<Eigen::Index>(i)) = projections_row(slices[i], A).transpose();
  return H;
}

Matrix nnls_rows(const Matrix& gram, const Matrix& H, double tol) {
  Matrix B(H.rows(), H.cols());
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    B.row(i) = nnls_normal(gram, H.row(i).transpose(), tol).x.transpose();
  return B;
}

std::optional<std::size_t> best_of(std::size_t n, const CandidateFn& fn,
                                   std::vector<Candidate>* all) {
  std::vector<Candidate> results(n);
  for (std::size_t i = 0; i < n; ++i) results[i] = fn(i);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < n; ++i)
    if (results[i].valid && (!best || results[i].score > results[*best].score)) best = i;
  if (all) *all = std::move(results);
  return best;
}

}  // namespace serial

namespace omp {

std::vector<Matrix> sample_covariances(std::span<const Matrix> data) {
  std::vector<Matrix> out(data.size());
  const auto n = static_cast<long>(data.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = covariance_of(data[static_cast<std::size_t>(i)]);
  return out;
}

// Parallel over output columns; each column sums slices in context order, as
// in the serial loop.
Matrix contract_mode3(std::span<const Matrix> slices, const Vector& v) {
  const Eigen::Index p = slices.empty() ? 0 : slices.front().rows();
  Matrix out = Matrix::Zero(p, p);
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < p; ++c)
    for (std::size_t i = 0; i < slices.size(); ++i)
      out.col(c).noalias() += v(static_cast<Eigen::Index>(i)) * slices[i].col(c);
  return out;
}

Matrix diagonal_projections(std::span<const Matrix> slices, const Matrix& A) {
  Matrix H(static_cast<Eigen::Index>(slices.size()), A.cols());
  const auto n = static_cast<long>(slices.size());
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i)
    H.row(i) = projections_row(slices[static_cast<std::size_t>(i)], A).transpose();
  return H;
}

Matrix nnls_rows(const Matrix& gram, const Matrix& H, double tol) {
  Matrix B(H.rows(), H.cols());
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    B.row(i) = nnls_normal(gram, H.row(i).transpose(), tol).x.transpose();
  return B;
}

std::optional<std::size_t> best_of(std::size_t n, const CandidateFn& fn,
                                   std::vector<Candidate>* all) {
  std::vector<Candidate> results(n);
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    const auto slot = static_cast<std::size_t>(i);
    try {
      results[slot] = fn(slot);
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  // Sequential reduction keeps the lowest-index tie-break independent of scheduling.
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < n; ++i)
    if (results[i].valid && (!best || results[i].score > results[*best].score)) best = i;
  if (all) *all = std::move(results);
  return best;
}

}  // namespace omp

std::vector<Matrix> sample_covariances(std::span<const Matrix> data, Exec exec) {
  return exec == Exec::parallel ? omp::sample_covariances(data) : serial::sample_covariances(data);
}

Matrix diagonal_projections(std::span<const Matrix> slices, const Matrix& A, Exec exec) {
  return exec == Exec::parallel ? omp::diagonal_projections(slices, A)
                                : serial::diagonal_projections(slices, A);
}

Matrix nnls_rows(const Matrix& gram, const Matrix& H, double tol, Exec exec) {
  return exec == Exec::parallel ? omp::nnls_rows(gram, H, tol) : serial::nnls_rows(gram, H, tol);
}

std::optional<std::size_t> best_of(std::size_t n, const CandidateFn& fn, Exec exec,
                                   std::vector<Candidate>* all) {
  return exec == Exec::parallel ? omp::best_of(n, fn, all) : serial::best_of(n, fn, all);
}

}  // namespace mcpca::kernels
