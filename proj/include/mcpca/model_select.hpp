#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "mcpca/decompose.hpp"

namespace mcpca {

inline constexpr double kDefaultStabilityThreshold = 0.8;
inline constexpr int kDefaultSeedPairs = 5;

/// Greedy matching of recovered to true columns. Every field is indexed by
/// recovered column j: permutation[j] is the true column it was matched to,
/// signs[j] the flip that makes the matched cosine positive.
struct MatchResult {
  std::vector<Eigen::Index> permutation;
  std::vector<int> signs;
  std::vector<double> per_pair_cosines;
  double ascore = 0.0;
};

/// Mean absolute cosine over greedily matched pairs. True columns are visited
/// in order; each takes the remaining recovered column with the largest
/// |cosine| (ties within 1e-12 go to the lowest index).
MatchResult ascore(const Matrix& A_true, const Matrix& A_rec);

/// Seed for run `run` (0 or 1) of seed pair `pair`.
std::uint64_t pair_seed(std::uint64_t seed, int pair, int run);

/// Mean over n_seed_pairs of ascore between two fits with different seeds.
double stability_score(const CovarianceTensor& t, Eigen::Index r, int n_seed_pairs,
                       const FitConfig& cfg = {});

struct RankSelectionReport {
  std::vector<Eigen::Index> candidates;
  std::vector<double> stability;  // 0 for candidates whose fits failed
  std::vector<std::string> failures;  // empty string where the fit succeeded
  std::optional<Eigen::Index> chosen;
  double threshold = kDefaultStabilityThreshold;
  int n_seed_pairs = kDefaultSeedPairs;
  std::vector<double> scree;
};

/// Largest candidate whose stability reaches the threshold.
RankSelectionReport select_rank(const CovarianceTensor& t, std::vector<Eigen::Index> candidates,
                                double threshold = kDefaultStabilityThreshold,
                                int n_seed_pairs = kDefaultSeedPairs, const FitConfig& cfg = {});

}  // namespace mcpca
