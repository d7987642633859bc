#include <doctest.h>

#include "mcpca/decompose.hpp"
#include "mcpca/error.hpp"
#include "mcpca/kernels.hpp"
#include "mcpca/nnls.hpp"
#include "oracles.hpp"

using namespace mcpca;

namespace {

// Exhaustive search over active sets: the NNLS optimum is the feasible
// unconstrained solution on some support that satisfies the KKT sign test.
Vector brute_force_nnls(const Matrix& G, const Vector& h) {
  const Eigen::Index n = G.rows();
  Vector best = Vector::Zero(n);
  double best_val = 0.0;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const auto m = static_cast<Eigen::Index>(idx.size());
    Matrix Gs(m, m);
    Vector hs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      hs(a) = h(idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < m; ++b) Gs(a, b) = G(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    const Vector xs = Gs.ldlt().solve(hs);
    if (xs.minCoeff() < 0) continue;
    Vector x = Vector::Zero(n);
    for (Eigen::Index a = 0; a < m; ++a) x(idx[static_cast<std::size_t>(a)]) = xs(a);
    const double val = 0.5 * x.dot(G * x) - h.dot(x);
    if (val < best_val) {
      best_val = val;
      best = x;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("nnls_normal agrees with exhaustive active-set search") {
  for (std::uint64_t s = 0; s < 60; ++s) {
    oracle::Gen gen(s);
    const Eigen::Index n = gen.integer(1, 6);
    const Matrix R = gen.gaussian(n + 3, n);
    const Matrix G = R.transpose() * R;
    const Vector h = gen.gaussian(n, 1);
    const auto res = nnls_normal(G, h);
    const Vector ref = brute_force_nnls(G, h);
    CHECK(res.x.minCoeff() >= 0.0);
    CHECK(oracle::max_abs_diff(res.x, ref) <= 1e-8 * std::max(1.0, ref.norm()));
    CHECK(nnls_kkt_violation(G, h, res.x) <= 1e-9 * std::max(1.0, h.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("nnls_normal on simple cases") {
  const Matrix I = Matrix::Identity(3, 3);
  CHECK(nnls_normal(I, Vector{{1.0, -2.0, 3.0}}).x == Vector{{1.0, 0.0, 3.0}});
  CHECK(nnls_normal(I, Vector::Zero(3)).x == Vector::Zero(3));
}

TEST_CASE("solve_nnls examples") {
  oracle::Gen gen(20);
  const Matrix Q = gen.gaussian(5, 3).householderQr().householderQ() * Matrix::Identity(5, 3);
  const Vector d{{3.0, 0.5, 1.25}};
  const auto t = stack_covariances({Q * d.asDiagonal() * Q.transpose()});
  const Matrix B = solve_nnls(t, Q);
  CHECK(oracle::max_abs_diff(B.row(0).transpose(), d) <= 1e-12);

  const Vector a = gen.unit(4);
  const Matrix S = -a * a.transpose();
  const auto neg = stack_covariances({S});
  CHECK(solve_nnls(neg, a) == Matrix::Zero(1, 1));
}

TEST_CASE("solve_nnls recovers planted loadings") {
  oracle::Gen gen(21);
  const Matrix A = gen.unit_columns(7, 4), B = gen.loadings(6, 4);
  const auto s = oracle::slices(A, B);
  const auto t = stack_covariances(s);
  const Matrix Bhat = solve_nnls(t, A);
  const Matrix ls = oracle::least_squares_loadings(s, A);
  CHECK(ls.minCoeff() >= 0.0);
  CHECK(oracle::max_abs_diff(Bhat, ls) <= 1e-8);
  CHECK(oracle::max_abs_diff(Bhat, B) <= 1e-8);
  CHECK(Bhat.minCoeff() >= 0.0);
}

TEST_CASE("solve_nnls reports the offending pair on a singular Gram matrix") {
  oracle::Gen gen(22);
  Matrix A = gen.unit_columns(5, 3);
  A.col(2) = A.col(0);
  const auto t = tensor_from_factors(A, gen.loadings(4, 3));
  try {
    solve_nnls(t, A);
    FAIL("expected GramSingularError");
  } catch (const GramSingularError& e) {
    CHECK(e.first() == 0);
    CHECK(e.second() == 2);
  }
}

TEST_CASE("nnls_rows serial and parallel agree bit for bit") {
  oracle::Gen gen(23);
  const Matrix R = gen.gaussian(9, 5);
  const Matrix G = R.transpose() * R;
  const Matrix H = gen.gaussian(40, 5);
  CHECK(kernels::nnls_rows(G, H, kNnlsTolerance, Exec::serial) == kernels::nnls_rows(G, H, kNnlsTolerance, Exec::parallel));
}
