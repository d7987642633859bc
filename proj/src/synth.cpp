#include "mcpca/synth.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "mcpca/baselines.hpp"
#include "mcpca/error.hpp"
#include "mcpca/model_io.hpp"
#include "mcpca/model_select.hpp"
#include "mcpca/random.hpp"

namespace mcpca {

PlantedModel generate_planted(Eigen::Index p, Eigen::Index k, Eigen::Index r, double density,
                              bool orthonormal, std::uint64_t seed) {
  if (p < 1 || k < 1 || r < 1) throw InputError("p, k and r must be positive");
  if (r > p) throw InputError("planted rank must satisfy r <= p");
  if (!(density > 0.0 && density <= 1.0)) throw InputError("density must be in (0, 1]");

  Rng rng(seed);
  PlantedModel pm;
  pm.density = density;
  pm.orthonormal = orthonormal;
  pm.seed = seed;
  Matrix G = rng.normal_matrix(p, r);
  if (orthonormal) {
    Eigen::HouseholderQR<Matrix> qr(G);
    pm.A_true = qr.householderQ() * Matrix::Identity(p, r);
  } else {
    pm.A_true = G;
  }
  for (Eigen::Index j = 0; j < r; ++j) pm.A_true.col(j).normalize();

  pm.B_true = Matrix::Zero(k, r);
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index i = 0; i < k; ++i) {
      const bool nonzero = density >= 1.0 || rng.uniform() < density;
      const double magnitude = std::abs(rng.normal());
      if (nonzero) pm.B_true(i, j) = magnitude;
    }
  return pm;
}

double max_loading_collinearity(const Matrix& B) {
  double worst = 0.0;
  for (Eigen::Index x = 0; x < B.cols(); ++x) {
    const double nx = B.col(x).norm();
    if (nx == 0.0) return 1.0;
    for (Eigen::Index y = x + 1; y < B.cols(); ++y) {
      const double ny = B.col(y).norm();
      if (ny == 0.0) return 1.0;
      worst = std::max(worst, std::abs(B.col(x).dot(B.col(y))) / (nx * ny));
    }
  }
  return worst;
}

PlantedModel generate_generic_planted(Eigen::Index p, Eigen::Index k, Eigen::Index r, double density,
                                      bool orthonormal, std::uint64_t seed, double max_cosine) {
  for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
    PlantedModel pm =
        generate_planted(p, k, r, density, orthonormal, attempt == 0 ? seed : derive_seed(seed, attempt));
    if (max_loading_collinearity(pm.B_true) < max_cosine) return pm;
  }
  throw InputError("could not draw a planted model with non-collinear loadings; raise density or k");
}

CovarianceTensor exact_tensor(const PlantedModel& pm) { return tensor_from_factors(pm.A_true, pm.B_true); }

ContextDataset sample_dataset(const PlantedModel& pm, Eigen::Index N, std::uint64_t seed) {
  if (N < 2) throw InputError("sample size N must be at least 2");
  Rng rng(seed);
  ContextDataset d;
  for (Eigen::Index i = 0; i < pm.k(); ++i) {
    const Matrix Z = rng.normal_matrix(N, pm.r());
    const Vector root = pm.B_true.row(i).transpose().cwiseSqrt();
    d.contexts.push_back({"context" + std::to_string(i + 1), Z * root.asDiagonal() * pm.A_true.transpose()});
  }
  return d;
}

ContextDataset exact_dataset(const PlantedModel& pm) {
  const Eigen::Index r = pm.r();
  const Eigen::Index n = 2 * r;
  const double c = std::sqrt(static_cast<double>(n - 1) / 2.0);
  ContextDataset d;
  for (Eigen::Index i = 0; i < pm.k(); ++i) {
    Matrix X(n, pm.p());
    for (Eigen::Index j = 0; j < r; ++j) {
      const Vector row = c * std::sqrt(pm.B_true(i, j)) * pm.A_true.col(j);
      X.row(2 * j) = row.transpose();
      X.row(2 * j + 1) = -row.transpose();
    }
    d.contexts.push_back({"context" + std::to_string(i + 1), std::move(X)});
  }
  return d;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::mcpca: return "mcpca";
    case Method::pca_stack: return "pca_stack";
    case Method::jennrich: return "jennrich";
    case Method::external: return "external";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "mcpca") return Method::mcpca;
  if (name == "pca_stack" || name == "pca-stack") return Method::pca_stack;
  if (name == "jennrich") return Method::jennrich;
  if (name == "external") return Method::external;
  throw InputError("unknown method '" + name + "' (mcpca, pca_stack, jennrich, external)");
}

namespace {

// Fits one method on a tensor and scores it against the planted components.
TrialRecord run_method(Method method, const CovarianceTensor& t, const PlantedModel& pm,
                       const FitConfig& fit, std::uint64_t seed, int trial, const ExternalResults& external) {
  TrialRecord rec;
  rec.method = to_string(method);
  rec.p = pm.p();
  rec.k = pm.k();
  rec.r = pm.r();
  rec.trial = trial;
  rec.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    std::optional<Matrix> A;
    switch (method) {
      case Method::mcpca: {
        FitConfig cfg = fit;
        cfg.seed = seed;
        auto [model, report] = fit_mcpca(t, pm.r(), cfg);
        rec.converged = std::all_of(model.converged.begin(), model.converged.end(), [](bool b) { return b; });
        A = std::move(model.A);
        break;
      }
      case Method::pca_stack: {
        auto res = pca_stack(t, pm.r());
        rec.converged = !res.degenerate;
        A = std::move(res.A);
        break;
      }
      case Method::jennrich: {
        auto res = jennrich(t, pm.r(), seed);
        rec.converged = !res.degenerate;
        A = std::move(res.A);
        break;
      }
      case Method::external: {
        if (external) A = external(trial);
        rec.converged = A.has_value();
        break;
      }
    }
    rec.runtime_seconds =
        method == Method::external ? 0.0
                                   : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (A) {
      if (A->rows() != pm.p() || A->cols() != pm.r())
        throw InputError("component matrix for trial " + std::to_string(trial) + " is " +
                         std::to_string(A->rows()) + "x" + std::to_string(A->cols()) + ", expected " +
                         std::to_string(pm.p()) + "x" + std::to_string(pm.r()));
      Matrix unit = *A;
      for (Eigen::Index j = 0; j < unit.cols(); ++j) {
        const double n = unit.col(j).norm();
        if (n > 0.0) unit.col(j) /= n;
      }
      rec.ascore = ascore(pm.A_true, unit).ascore;
    }
  } catch (const NumericalError&) {
    rec.converged = false;
    rec.ascore = 0.0;
    rec.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return rec;
}

}  // namespace

std::vector<TrialRecord> run_accuracy_trials(const AccuracyConfig& config) {
  if (config.n_trials < 1) throw InputError("n_trials must be at least 1");
  if (!config.noiseless && config.N < 2) throw InputError("sample size N must be at least 2");
  std::vector<TrialRecord> out;
  if (config.methods.empty()) return out;
  for (int trial = 0; trial < config.n_trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(config.seed, static_cast<std::uint64_t>(trial));
    const PlantedModel pm = generate_planted(config.p, config.k, config.r, config.density, config.orthonormal,
                                             derive_seed(trial_seed, 0));
    const CovarianceTensor t = config.noiseless
                                   ? exact_tensor(pm)
                                   : build_tensor(sample_dataset(pm, config.N, derive_seed(trial_seed, 1)),
                                                  config.fit.exec);
    if (config.on_trial) config.on_trial(trial, pm, t);
    for (auto method : config.methods) {
      TrialRecord rec = run_method(method, t, pm, config.fit, derive_seed(trial_seed, 2), trial, config.external);
      rec.N = config.noiseless ? 0 : config.N;
      rec.seed = trial_seed;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<TrialRecord> run_sample_sweep(const SweepConfig& config) {
  if (config.N_grid.empty()) throw InputError("N grid is empty");
  if (config.repetitions < 1) throw InputError("repetitions must be at least 1");
  for (std::size_t i = 0; i < config.N_grid.size(); ++i) {
    if (config.N_grid[i] < 2) throw InputError("every N in the grid must be at least 2");
    if (i > 0 && config.N_grid[i] < config.N_grid[i - 1]) throw InputError("N grid must be ascending");
  }
  std::vector<TrialRecord> out;
  if (config.methods.empty()) return out;
  const PlantedModel pm =
      generate_planted(config.p, config.k, config.r, config.density, config.orthonormal, derive_seed(config.seed, 0));
  for (int rep = 0; rep < config.repetitions; ++rep) {
    for (auto N : config.N_grid) {
      const std::uint64_t run_seed =
          derive_seed(derive_seed(config.seed, 1), static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(N));
      const CovarianceTensor t = build_tensor(sample_dataset(pm, N, derive_seed(run_seed, 1)), config.fit.exec);
      for (auto method : config.methods) {
        TrialRecord rec = run_method(method, t, pm, config.fit, derive_seed(run_seed, 2), rep, {});
        rec.N = N;
        rec.seed = run_seed;
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

void write_records(std::ostream& out, const std::vector<TrialRecord>& records) {
  out << kTrialHeader << '\n';
  for (const auto& r : records) {
    out << r.method << ',' << r.p << ',' << r.k << ',' << r.r << ',' << r.N << ',' << r.trial << ',' << r.seed
        << ',' << format_double(r.ascore) << ',' << format_double(r.runtime_seconds) << ','
        << (r.converged ? "true" : "false") << '\n';
  }
}

}  // namespace mcpca
