#include "mcpca/decompose.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "mcpca/error.hpp"
#include "mcpca/nnls.hpp"
#include "mcpca/random.hpp"

namespace mcpca {

namespace {

constexpr double kDegenerateNorm = 1e-14;

// vec(a b^T) in the flattening's column order (variable index fastest).
Vector outer_vec(const Vector& a, const Vector& b) {
  Vector w(a.size() * b.size());
  for (Eigen::Index i = 0; i < b.size(); ++i) w.segment(i * a.size(), a.size()) = b(i) * a;
  return w;
}

double normalize_or_throw(Vector& v, const char* what) {
  const double n = v.norm();
  if (!(n > kDegenerateNorm)) throw DegenerateStartError(std::string("vanishing contraction ") + what);
  v /= n;
  return n;
}

// 1 - |<x, y>| for unit x, y, evaluated as |x -+ y|^2 / 2 so that gaps far
// below machine epsilon are still resolved.
double cosine_gap(const Vector& x, const Vector& y) {
  const double s = x.dot(y) < 0.0 ? -1.0 : 1.0;
  return 0.5 * (x - s * y).squaredNorm();
}

// Truncated flattening U diag(S) V^T restricted to the working subspace.
struct WorkingFactor {
  Matrix U;  // p x m
  Vector S;  // m
  Matrix V;  // pk x m
};

// Removes the rank-one piece a vec(a b^T)^T from U S V^T, leaving rank m - 1.
void deflate(WorkingFactor& wf, const Vector& a, const Vector& b, DeflationRule rule) {
  const Eigen::Index m = wf.S.size();
  const Vector y = wf.V.transpose() * outer_vec(a, b);
  Matrix core = wf.S.asDiagonal();
  bool reduced = false;
  if (rule == DeflationRule::rank_reduction) {
    // Wedderburn rank reduction: C - C_x y^T / (y^T S^-1 x) with x = U^T a.
    const Vector x = wf.U.transpose() * a;
    const double denom = y.dot(x.cwiseQuotient(wf.S));
    const double scale = x.norm() * y.norm() / wf.S.minCoeff();
    if (std::abs(denom) > 1e-12 * scale && std::isfinite(denom)) {
      core -= (x * y.transpose()) / denom;
      reduced = true;
    }
  }
  if (!reduced) {
    const double yn = y.norm();
    if (yn > 0.0) {
      const Vector u = y / yn;
      core -= (core * u) * u.transpose();
    }
  }
  Eigen::JacobiSVD<Matrix> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Index keep = m - 1;
  wf.U = wf.U * svd.matrixU().leftCols(keep);
  wf.V = wf.V * svd.matrixV().leftCols(keep);
  wf.S = svd.singularValues().head(keep);
}

}  // namespace

Eigen::Index numerical_rank(const Vector& singular_values) {
  if (singular_values.size() == 0 || !(singular_values(0) > 0.0)) return 0;
  const double cut = kNumericalRankTolerance * singular_values(0);
  Eigen::Index r = 0;
  while (r < singular_values.size() && singular_values(r) > cut) ++r;
  return r;
}

namespace {

WorkingFactor top_factor(const Flattening& f, Eigen::Index r) {
  if (r < 1 || r > std::min(f.p, f.p * f.k))
    throw InputError("rank must be in [1, " + std::to_string(std::min(f.p, f.p * f.k)) + "], got " +
                     std::to_string(r));
  Eigen::BDCSVD<Matrix> svd(f.matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const Eigen::Index nr = numerical_rank(sv);
  if (r > nr) throw RankDeficiencyError(static_cast<std::size_t>(r), static_cast<std::size_t>(nr));
  return {svd.matrixU().leftCols(r), sv.head(r), svd.matrixV().leftCols(r)};
}

SubspaceTensor subspace_of(const WorkingFactor& wf, Eigen::Index p, Eigen::Index k) {
  return {p, k, wf.V, wf.S};
}

}  // namespace

SubspaceTensor extract_subspace(const Flattening& f, Eigen::Index r) {
  return subspace_of(top_factor(f, r), f.p, f.k);
}

Vector contract_pair(const SubspaceTensor& ts, const Vector& a, const Vector& b) {
  if (a.size() != ts.p || b.size() != ts.k)
    throw InputError("contract_pair: expected vectors of length " + std::to_string(ts.p) + " and " +
                     std::to_string(ts.k));
  return ts.basis.transpose() * outer_vec(a, b);
}

double subspace_objective(const SubspaceTensor& ts, const Vector& a, const Vector& b) {
  return contract_pair(ts, a, b).squaredNorm();
}

PowerResult power_iterate(const SubspaceTensor& ts, const Vector& a0, const Vector& b0, double tol,
                          int max_iter) {
  if (a0.size() != ts.p || b0.size() != ts.k) throw InputError("power_iterate: start vector size mismatch");
  if (!(tol > 0.0)) throw InputError("power_iterate: tol must be positive");
  if (std::abs(a0.norm() - 1.0) > 1e-8 || std::abs(b0.norm() - 1.0) > 1e-8)
    throw InputError("power_iterate: start vectors must be unit norm");

  PowerResult res;
  res.a = a0;
  res.b = b0;
  Vector c = contract_pair(ts, res.a, res.b);
  res.trace.push_back(c.squaredNorm());

  for (int it = 1; it <= max_iter; ++it) {
    normalize_or_throw(c, "T_A(a, b, *)");
    const Vector mixed = ts.basis * c;  // vec of T_A(*, *, c)
    const Eigen::Map<const Matrix> W(mixed.data(), ts.p, ts.k);
    Vector a = W * res.b;
    normalize_or_throw(a, "T_A(*, b, c)");
    Vector b = W.transpose() * a;
    normalize_or_throw(b, "T_A(a, *, c)");
    const double gap_a = cosine_gap(a, res.a);
    const double gap_b = cosine_gap(b, res.b);
    res.a = std::move(a);
    res.b = std::move(b);
    c = contract_pair(ts, res.a, res.b);
    res.trace.push_back(c.squaredNorm());
    res.iterations = it;
    if (gap_a < tol && gap_b < tol) {
      res.converged = true;
      break;
    }
  }
  res.objective = res.trace.back();
  return res;
}

namespace {

// Orthonormal basis of the complement of unit x.
Matrix tangent_basis(const Vector& x) {
  Eigen::HouseholderQR<Matrix> qr(x);
  const Matrix Q = qr.householderQ();
  return Q.rightCols(x.size() - 1);
}

struct Derivatives {
  double f = 0.0;
  Vector grad;   // reduced Riemannian gradient
  Matrix hess;   // reduced Riemannian Hessian
  Matrix Qa, Qb;
};

// F(a, b) = sum_l (a^T M_l b)^2 with M_l the p x k basis slices.
Derivatives derivatives(const SubspaceTensor& ts, const Vector& a, const Vector& b) {
  const Eigen::Index p = ts.p, k = ts.k, r = ts.rank();
  Matrix Ga(p, r), Gb(k, r);
  for (Eigen::Index l = 0; l < r; ++l) {
    Ga.col(l) = ts.slice(l) * b;
    Gb.col(l) = ts.slice(l).transpose() * a;
  }
  const Vector c = Ga.transpose() * a;
  const Vector mixed = ts.basis * c;
  const Eigen::Map<const Matrix> W(mixed.data(), p, k);

  Derivatives d;
  d.f = c.squaredNorm();
  d.Qa = tangent_basis(a);
  d.Qb = tangent_basis(b);
  const Eigen::Index na = p - 1, nb = k - 1;
  d.grad.resize(na + nb);
  d.grad.head(na) = 2.0 * d.Qa.transpose() * (Ga * c);
  d.grad.tail(nb) = 2.0 * d.Qb.transpose() * (Gb * c);
  d.hess.resize(na + nb, na + nb);
  const Matrix GaQ = d.Qa.transpose() * Ga;
  const Matrix GbQ = d.Qb.transpose() * Gb;
  d.hess.topLeftCorner(na, na) = 2.0 * GaQ * GaQ.transpose() - 2.0 * d.f * Matrix::Identity(na, na);
  d.hess.bottomRightCorner(nb, nb) = 2.0 * GbQ * GbQ.transpose() - 2.0 * d.f * Matrix::Identity(nb, nb);
  const Matrix cross = 2.0 * (GaQ * GbQ.transpose() + d.Qa.transpose() * W * d.Qb);
  d.hess.topRightCorner(na, nb) = cross;
  d.hess.bottomLeftCorner(nb, na) = cross.transpose();
  return d;
}

}  // namespace

bool refine_stationary_point(const SubspaceTensor& ts, PowerResult& run, int max_steps) {
  if (ts.p < 2 || ts.k < 2) return true;  // a sphere of dimension 0 has nothing to refine
  Derivatives d = derivatives(ts, run.a, run.b);
  for (int step = 0; step < max_steps; ++step) {
    const double gnorm = d.grad.norm();
    if (gnorm <= kRefineGradient) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(d.hess);
    const Vector& ev = eig.eigenvalues();
    // Only a strict local maximum is refined.
    if (!(ev.maxCoeff() < -1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff()))) return false;
    const Vector coeff = eig.eigenvectors().transpose() * d.grad;
    const Vector xi = -(eig.eigenvectors() * coeff.cwiseQuotient(ev));
    Vector a = run.a + d.Qa * xi.head(ts.p - 1);
    Vector b = run.b + d.Qb * xi.tail(ts.k - 1);
    a.normalize();
    b.normalize();
    Derivatives next = derivatives(ts, a, b);
    if (!(next.grad.norm() < gnorm) || next.f < d.f - 1e-12 * std::max(1.0, d.f)) return false;
    run.a = std::move(a);
    run.b = std::move(b);
    run.trace.push_back(next.f);
    run.objective = next.f;
    d = std::move(next);
  }
  return d.grad.norm() <= kRefineGradient;
}

Matrix solve_nnls(const CovarianceTensor& t, const Matrix& A, Exec exec) {
  if (A.rows() != t.p()) throw InputError("solve_nnls: A has " + std::to_string(A.rows()) + " rows, expected " + std::to_string(t.p()));
  const Eigen::Index r = A.cols();
  if (r == 0) return Matrix(t.k(), 0);
  const Matrix inner = A.transpose() * A;
  const Matrix gram = inner.cwiseProduct(inner);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxGramCondition)) {
    Eigen::Index bi = 0, bj = std::min<Eigen::Index>(1, r - 1);
    double worst = -1.0;
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = i + 1; j < r; ++j)
        if (std::abs(inner(i, j)) > worst) {
          worst = std::abs(inner(i, j));
          bi = i;
          bj = j;
        }
    throw GramSingularError(static_cast<std::size_t>(bi), static_cast<std::size_t>(bj), cond);
  }
  const Matrix H = kernels::diagonal_projections(t.slices(), A, exec);
  return kernels::nnls_rows(gram, H, kNnlsTolerance, exec);
}

std::pair<double, std::vector<double>> reconstruction_error(const CovarianceTensor& t, const Matrix& A,
                                                            const Matrix& B) {
  if (A.rows() != t.p() || B.rows() != t.k() || A.cols() != B.cols())
    throw InputError("reconstruction_error: model shape does not match tensor");
  std::vector<double> per(static_cast<std::size_t>(t.k()));
  double sq = 0.0;
  for (Eigen::Index i = 0; i < t.k(); ++i) {
    const double e = (t.slice(i) - A * B.row(i).transpose().asDiagonal() * A.transpose()).norm();
    per[static_cast<std::size_t>(i)] = e;
    sq += e * e;
  }
  return {std::sqrt(sq), per};
}

std::pair<double, std::vector<double>> reconstruction_error(const CovarianceTensor& t, const McpcaModel& m) {
  return reconstruction_error(t, m.A, m.B);
}

std::vector<Eigen::Index> canonicalize(Matrix& A, Matrix& B) {
  const Eigen::Index r = A.cols();
  std::vector<Eigen::Index> peak(static_cast<std::size_t>(r));
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::Index imax = 0;
    A.col(j).cwiseAbs().maxCoeff(&imax);
    if (A(imax, j) < 0) A.col(j) = -A.col(j);
    peak[static_cast<std::size_t>(j)] = imax;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  const Eigen::RowVectorXd sums = B.colwise().sum();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (sums(x) != sums(y)) return sums(x) > sums(y);
    return peak[static_cast<std::size_t>(x)] < peak[static_cast<std::size_t>(y)];
  });
  Matrix A2(A.rows(), r), B2(B.rows(), r);
  for (Eigen::Index c = 0; c < r; ++c) {
    A2.col(c) = A.col(order[static_cast<std::size_t>(c)]);
    B2.col(c) = B.col(order[static_cast<std::size_t>(c)]);
  }
  A = std::move(A2);
  B = std::move(B2);
  return order;
}

std::pair<McpcaModel, FitReport> fit_mcpca(const CovarianceTensor& t, Eigen::Index r, const FitConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (r < 1) throw InputError("rank must be at least 1");
  if (r > t.p())
    throw InputError("rank " + std::to_string(r) + " exceeds p = " + std::to_string(t.p()) +
                     "; MCPCA requires r ≤ p");
  if (cfg.restarts_per_component < 1) throw InputError("restarts_per_component must be at least 1");
  if (!(cfg.tol > 0.0)) throw InputError("tol must be positive");
  if (cfg.max_iter < 1) throw InputError("max_iter must be at least 1");

  const Eigen::Index p = t.p();
  const Eigen::Index k = t.k();
  const Flattening flat = flatten(t);
  WorkingFactor wf = top_factor(flat, r);

  FitReport report;
  report.singular_values.assign(flat.singular_values.data(),
                                flat.singular_values.data() + flat.singular_values.size());
  Matrix A(p, r);
  std::vector<bool> converged(static_cast<std::size_t>(r));
  const auto restarts = static_cast<std::size_t>(cfg.restarts_per_component);

  for (Eigen::Index j = 0; j < r; ++j) {
    const SubspaceTensor ts = subspace_of(wf, p, k);
    std::vector<PowerResult> runs(restarts);
    auto attempt = [&](std::size_t s) -> kernels::Candidate {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(j), s));
      const Vector a0 = rng.sphere(p);
      const Vector b0 = rng.sphere(k);
      try {
        runs[s] = power_iterate(ts, a0, b0, cfg.tol, cfg.max_iter);
      } catch (const DegenerateStartError&) {
        return {};
      }
      return {runs[s].objective, true};
    };
    std::vector<kernels::Candidate> all;
    const auto best = kernels::best_of(restarts, attempt, cfg.exec, &all);
    if (!best)
      throw NumericalError("all " + std::to_string(restarts) + " restarts were degenerate for component " +
                           std::to_string(j + 1));
    PowerResult& run = runs[*best];
    const bool refined = refine_stationary_point(ts, run);
    A.col(j) = run.a;
    converged[static_cast<std::size_t>(j)] = run.converged || refined;
    report.objective_trace.push_back(run.trace);
    report.objective.push_back(run.objective);
    report.iterations.push_back(run.iterations);
    report.restarts_used.push_back(
        static_cast<int>(std::count_if(all.begin(), all.end(), [](const auto& c) { return c.valid; })));
    if (j + 1 < r) deflate(wf, run.a, run.b, cfg.deflation);
  }

  Matrix B = solve_nnls(t, A, cfg.exec);
  const auto order = canonicalize(A, B);

  McpcaModel model;
  model.A = std::move(A);
  model.B = std::move(B);
  model.seed = cfg.seed;
  model.converged.resize(static_cast<std::size_t>(r));
  for (Eigen::Index c = 0; c < r; ++c)
    model.converged[static_cast<std::size_t>(c)] = converged[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])];
  for (Eigen::Index i = 0; i < k; ++i) model.context_ids.push_back("context" + std::to_string(i + 1));

  // Report arrays follow the final column order.
  auto reorder = [&](auto& v) {
    auto copy = v;
    for (std::size_t c = 0; c < v.size(); ++c) v[c] = copy[static_cast<std::size_t>(order[c])];
  };
  reorder(report.objective_trace);
  reorder(report.objective);
  reorder(report.iterations);
  reorder(report.restarts_used);

  for (Eigen::Index x = 0; x < r; ++x) {
    for (Eigen::Index y = x + 1; y < r; ++y) {
      const double nx = model.B.col(x).norm(), ny = model.B.col(y).norm();
      if (nx == 0.0 || ny == 0.0) continue;
      if (model.B.col(x).dot(model.B.col(y)) / (nx * ny) >= kCollinearLoadingCosine)
        report.collinear_loading_pairs.emplace_back(static_cast<int>(x), static_cast<int>(y));
    }
  }
  report.non_identifiable_suspect = !report.collinear_loading_pairs.empty();

  auto [total, per] = reconstruction_error(t, model);
  report.reconstruction_error = total;
  report.per_context_error = std::move(per);
  report.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(model), std::move(report)};
}

}  // namespace mcpca
