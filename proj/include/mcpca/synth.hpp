#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpca/decompose.hpp"
#include "mcpca/ingest.hpp"

namespace mcpca {

struct PlantedModel {
  Matrix A_true;  // p x r, unit (or orthonormal) columns
  Matrix B_true;  // k x r, non-negative
  double density = 1.0;
  bool orthonormal = false;
  std::uint64_t seed = 0;

  Eigen::Index p() const { return A_true.rows(); }
  Eigen::Index k() const { return B_true.rows(); }
  Eigen::Index r() const { return A_true.cols(); }
};

/// A: iid Gaussian columns normalized (or the Q factor of a Gaussian matrix
/// when orthonormal). B: each entry nonzero with probability `density`,
/// magnitude |N(0,1)|. Draw order: A column-major, then B column-major.
PlantedModel generate_planted(Eigen::Index p, Eigen::Index k, Eigen::Index r, double density,
                              bool orthonormal, std::uint64_t seed);

/// Largest |cosine| between two distinct B columns (1 if a column is zero).
double max_loading_collinearity(const Matrix& B);

/// Redraws generate_planted with derived seeds until no B column is zero and
/// no pair of B columns has |cosine| >= max_cosine.
PlantedModel generate_generic_planted(Eigen::Index p, Eigen::Index k, Eigen::Index r,
                                      double density, bool orthonormal, std::uint64_t seed,
                                      double max_cosine = 0.99);

/// Exact covariances A diag(b_i) A^T.
CovarianceTensor exact_tensor(const PlantedModel& pm);

/// N draws per context of A B_i^{1/2} z, z ~ N(0, I_r).
ContextDataset sample_dataset(const PlantedModel& pm, Eigen::Index N, std::uint64_t seed);

/// 2r rows per context, +-c sqrt(b_ij) a_j, whose sample covariance is
/// exactly A diag(b_i) A^T up to rounding.
ContextDataset exact_dataset(const PlantedModel& pm);

enum class Method { mcpca, pca_stack, jennrich, external };

std::string to_string(Method m);
Method parse_method(const std::string& name);

struct TrialRecord {
  std::string method;
  Eigen::Index p = 0, k = 0, r = 0;
  Eigen::Index N = 0;  // 0 marks a noiseless (exact covariance) trial
  int trial = 0;
  std::uint64_t seed = 0;
  double ascore = 0.0;
  double runtime_seconds = 0.0;
  bool converged = false;
};

// Supplies a p x r component matrix for the given trial, or nullopt if the
// external method has no result for it.
using ExternalResults = std::function<std::optional<Matrix>(int trial)>;

struct AccuracyConfig {
  Eigen::Index p = 100, k = 50, r = 60;
  double density = 0.2;
  Eigen::Index N = 1000;
  int n_trials = 40;
  std::vector<Method> methods{Method::mcpca, Method::pca_stack, Method::jennrich};
  std::uint64_t seed = 0;
  bool noiseless = false;
  bool orthonormal = false;
  FitConfig fit{};
  ExternalResults external;
  // Invoked with each trial's planted model and tensor before fitting.
  std::function<void(int, const PlantedModel&, const CovarianceTensor&)> on_trial;
};

struct SweepConfig {
  Eigen::Index p = 100, k = 50, r = 60;
  double density = 0.2;
  std::vector<Eigen::Index> N_grid{10, 100, 1000, 10000, 100000};
  int repetitions = 1;
  std::vector<Method> methods{Method::mcpca, Method::pca_stack, Method::jennrich};
  std::uint64_t seed = 0;
  bool orthonormal = false;
  FitConfig fit{};
};

/// Seeds for trial t: planted model, samples and fits are each derived from (seed, t).
std::vector<TrialRecord> run_accuracy_trials(const AccuracyConfig& config);

/// One planted model for the whole sweep; for each repetition and N one
/// dataset whose seed depends on (seed, repetition, N). Records are emitted
/// repetition-major, then in grid order, then method order.
std::vector<TrialRecord> run_sample_sweep(const SweepConfig& config);

inline constexpr const char* kTrialHeader =
    "method,p,k,r,N,trial,seed,ascore,runtime_seconds,converged";

void write_records(std::ostream& out, const std::vector<TrialRecord>& records);

}  // namespace mcpca
