#include "mcpca/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mcpca/error.hpp"

namespace mcpca {

namespace {

// Solves G_PP z_P = h_P for the passive set, zero elsewhere.
Eigen::VectorXd passive_solve(const Eigen::MatrixXd& gram, const Eigen::VectorXd& h,
                              const std::vector<bool>& passive) {
  const Eigen::Index n = h.size();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < n; ++j)
    if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (idx.empty()) return z;
  const auto m = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd g(m, m);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    rhs(a) = h(idx[a]);
    for (Eigen::Index b = 0; b < m; ++b) g(a, b) = gram(idx[a], idx[b]);
  }
  Eigen::VectorXd sol = g.ldlt().solve(rhs);
  for (Eigen::Index a = 0; a < m; ++a) z(idx[a]) = sol(a);
  return z;
}

}  // namespace

NnlsResult nnls_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& h, double tol) {
  const Eigen::Index n = h.size();
  if (gram.rows() != n || gram.cols() != n) throw InputError("NNLS: Gram/rhs size mismatch");

  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  if (n == 0) return res;

  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  const double dual_tol = tol * scale;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Eigen::VectorXd& x = res.x;
  const int max_outer = static_cast<int>(3 * n + 10);

  for (int outer = 0; outer < max_outer; ++outer) {
    Eigen::VectorXd w = h - gram * x;
    Eigen::Index enter = -1;
    double best = dual_tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best) {
        best = w(j);
        enter = j;
      }
    }
    if (enter < 0) break;
    passive[static_cast<std::size_t>(enter)] = true;
    ++res.iterations;

    for (int inner = 0; inner <= n; ++inner) {
      Eigen::VectorXd z = passive_solve(gram, h, passive);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      if (feasible) {
        x = z;
        break;
      }
      // Step from x toward z until the first passive coordinate hits zero.
      double alpha = 1.0;
      Eigen::Index blocking = -1;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          const double denom = x(j) - z(j);
          const double a = denom > 0.0 ? x(j) / denom : 0.0;
          if (a < alpha || blocking < 0) {
            alpha = a;
            blocking = j;
          }
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && (j == blocking || x(j) <= 0.0)) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }

  for (Eigen::Index j = 0; j < n; ++j)
    if (!passive[static_cast<std::size_t>(j)] || x(j) < 0.0) x(j) = 0.0;
  return res;
}

double nnls_kkt_violation(const Eigen::MatrixXd& gram, const Eigen::VectorXd& h,
                          const Eigen::VectorXd& x) {
  const Eigen::VectorXd w = h - gram * x;
  double v = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    v = std::max(v, -x(j));
    if (x(j) > 0.0)
      v = std::max(v, std::abs(w(j)));
    else
      v = std::max(v, w(j));
  }
  return v;
}

}  // namespace mcpca
