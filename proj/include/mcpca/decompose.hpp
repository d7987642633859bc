#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcpca/kernels.hpp"
#include "mcpca/tensor.hpp"

namespace mcpca {

inline constexpr double kNumericalRankTolerance = 1e-12;

/// Orthonormal basis of the top-r right singular subspace of the flattening,
/// each basis vector read as a p x k matrix (variable index fastest, matching
/// the block order of flatten).
struct SubspaceTensor {
  Eigen::Index p = 0;
  Eigen::Index k = 0;
  Matrix basis;                  // (p*k) x r, orthonormal columns
  Vector source_singular_values; // top r singular values of M

  Eigen::Index rank() const { return basis.cols(); }
  // The l-th basis vector as a p x k matrix view.
  Eigen::Map<const Matrix> slice(Eigen::Index l) const {
    return Eigen::Map<const Matrix>(basis.col(l).data(), p, k);
  }
};

/// Number of singular values above kNumericalRankTolerance * sigma_1.
Eigen::Index numerical_rank(const Vector& singular_values);

/// Top-r right singular vectors of M. Throws RankDeficiencyError when
/// sigma_r <= 1e-12 sigma_1, InputError when r is outside [1, min(p, pk)].
SubspaceTensor extract_subspace(const Flattening& f, Eigen::Index r);

/// T_A(a, b, *): entry l is a^T V_l b.
Vector contract_pair(const SubspaceTensor& ts, const Vector& a, const Vector& b);

/// F_A(a, b) = |T_A(a, b, *)|^2, in [0, 1] for unit a, b.
double subspace_objective(const SubspaceTensor& ts, const Vector& a, const Vector& b);

struct PowerResult {
  Vector a;
  Vector b;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // F_A at the start and after every iteration
};

/// Alternating normalized contractions
///   c <- T_A(a,b,*)/|.|,  a <- T_A(*,b,c)/|.|,  b <- T_A(a,*,c)/|.|
/// until 1 - |<a_new, a_old>| < tol and 1 - |<b_new, b_old>| < tol or
/// max_iter is hit. Each step maximizes the trilinear form in one argument,
/// so F_A is nondecreasing along the run. Throws DegenerateStartError when a
/// contraction vanishes.
PowerResult power_iterate(const SubspaceTensor& ts, const Vector& a0, const Vector& b0,
                          double tol, int max_iter);

inline constexpr double kRefineGradient = 1e-13;

/// Riemannian Newton steps on F_A from a power-iteration result, accepted
/// while the gradient norm decreases at a strict local maximum. Returns true
/// if the gradient ends below kRefineGradient.
bool refine_stationary_point(const SubspaceTensor& ts, PowerResult& run, int max_steps = 8);

enum class DeflationRule {
  // Rank-one reduction of the truncated flattening U S V^T. Keeps the span of
  // the remaining planted terms when they are not orthogonal.
  rank_reduction,
  // Orthogonal projection of vec(a b^T) out of the working subspace. Exact
  // only when the planted terms are mutually orthogonal.
  orthogonal_projection,
};

struct FitConfig {
  std::uint64_t seed = 0;
  int restarts_per_component = 10;
  double tol = 1e-15;
  int max_iter = 500;
  DeflationRule deflation = DeflationRule::rank_reduction;
  Exec exec = Exec::parallel;
};

inline constexpr const char* kOrderingRule =
    "descending column sums of B; ties by ascending row index of largest |a_j| entry";
inline constexpr const char* kSignRule = "largest-magnitude entry of each a_j positive";

/// Shared components A (p x r, unit columns) and non-negative loadings B (k x r).
struct McpcaModel {
  Matrix A;
  Matrix B;
  std::vector<std::string> context_ids;
  std::string ordering_rule = kOrderingRule;
  std::string sign_rule = kSignRule;
  std::uint64_t seed = 0;
  std::vector<bool> converged;

  Eigen::Index p() const { return A.rows(); }
  Eigen::Index k() const { return B.rows(); }
  Eigen::Index r() const { return A.cols(); }
};

struct FitReport {
  double reconstruction_error = 0.0;
  std::vector<double> per_context_error;
  std::vector<std::vector<double>> objective_trace;  // per component, best restart
  std::vector<double> objective;                     // per component, final F_A
  std::vector<int> iterations;
  std::vector<int> restarts_used;                    // non-degenerate restarts per component
  std::vector<double> singular_values;               // scree of the flattening
  // Pairs of loading columns with cosine >= kCollinearLoadingCosine. Such
  // pairs are not identifiable; their components vary across seeds.
  std::vector<std::pair<int, int>> collinear_loading_pairs;
  bool non_identifiable_suspect = false;
  double elapsed_seconds = 0.0;
};

inline constexpr double kCollinearLoadingCosine = 0.999;

/// Solves for B >= 0 given unit-column A, one NNLS problem per context.
/// Throws GramSingularError when cond(G) > 1e12, G_jl = <a_j, a_l>^2.
Matrix solve_nnls(const CovarianceTensor& t, const Matrix& A, Exec exec = Exec::parallel);

/// Per-context |S_i - A B_i A^T|_F and their root-sum-square.
std::pair<double, std::vector<double>> reconstruction_error(const CovarianceTensor& t,
                                                            const McpcaModel& m);
std::pair<double, std::vector<double>> reconstruction_error(const CovarianceTensor& t,
                                                            const Matrix& A, const Matrix& B);

/// Sign-fixes and orders the columns of (A, B) per kSignRule and kOrderingRule.
/// Returns the applied column order (new column c came from old column order[c]).
std::vector<Eigen::Index> canonicalize(Matrix& A, Matrix& B);

/// The full pipeline: one subspace extraction, r rounds of multi-start power
/// iteration with deflation, then a global NNLS solve for B.
std::pair<McpcaModel, FitReport> fit_mcpca(const CovarianceTensor& t, Eigen::Index r,
                                           const FitConfig& cfg = {});

}  // namespace mcpca
