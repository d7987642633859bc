#pragma once

// Data-parallel kernels. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp with identical
// per-element arithmetic, so the two agree bit-for-bit. The serial versions
// are what the tests compare against; the library calls through dispatch().

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mcpca {

enum class Exec { serial, parallel };

namespace kernels {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Reads MCPCA_THREADS and caps the OpenMP team size (0 or unset keeps the
/// runtime default). Returns the resulting maximum thread count.
int configure_threads_from_env();
int max_threads();

// Result of one candidate in a best-of sweep.
struct Candidate {
  double score = -std::numeric_limits<double>::infinity();
  bool valid = false;
};

// fn(i) fills slot i; returns the index of the valid slot with the highest
// score, lowest index on ties, or nullopt if none is valid.
using CandidateFn = std::function<Candidate(std::size_t)>;

namespace serial {
std::vector<Matrix> sample_covariances(std::span<const Matrix> data);
Matrix contract_mode3(std::span<const Matrix> slices, const Vector& v);
// H(i, j) = a_j^T S_i a_j.
Matrix diagonal_projections(std::span<const Matrix> slices, const Matrix& A);
// Row i of the result solves the NNLS normal-equation problem (gram, H.row(i)).
Matrix nnls_rows(const Matrix& gram, const Matrix& H, double tol);
std::optional<std::size_t> best_of(std::size_t n, const CandidateFn& fn,
                                   std::vector<Candidate>* all = nullptr);
}  // namespace serial

namespace omp {
std::vector<Matrix> sample_covariances(std::span<const Matrix> data);
Matrix contract_mode3(std::span<const Matrix> slices, const Vector& v);
Matrix diagonal_projections(std::span<const Matrix> slices, const Matrix& A);
Matrix nnls_rows(const Matrix& gram, const Matrix& H, double tol);
std::optional<std::size_t> best_of(std::size_t n, const CandidateFn& fn,
                                   std::vector<Candidate>* all = nullptr);
}  // namespace omp

// Dispatch helpers used by the library.
std::vector<Matrix> sample_covariances(std::span<const Matrix> data, Exec exec);
Matrix diagonal_projections(std::span<const Matrix> slices, const Matrix& A, Exec exec);
Matrix nnls_rows(const Matrix& gram, const Matrix& H, double tol, Exec exec);
std::optional<std::size_t> best_of(std::size_t n, const CandidateFn& fn, Exec exec,
                                   std::vector<Candidate>* all = nullptr);

}  // namespace kernels
}  // namespace mcpca
