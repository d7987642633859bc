#include "mcpca/model_select.hpp"

#include <algorithm>
#include <cmath>

#include "mcpca/error.hpp"
#include "mcpca/random.hpp"

namespace mcpca {

MatchResult ascore(const Matrix& A_true, const Matrix& A_rec) {
  if (A_true.rows() != A_rec.rows() || A_true.cols() != A_rec.cols())
    throw InputError("ascore: shape mismatch (" + std::to_string(A_true.rows()) + "x" +
                     std::to_string(A_true.cols()) + " vs " + std::to_string(A_rec.rows()) + "x" +
                     std::to_string(A_rec.cols()) + ")");
  const Eigen::Index r = A_true.cols();
  MatchResult m;
  m.permutation.assign(static_cast<std::size_t>(r), -1);
  m.signs.assign(static_cast<std::size_t>(r), 1);
  m.per_pair_cosines.assign(static_cast<std::size_t>(r), 0.0);
  if (r == 0) return m;

  const Matrix cos = A_true.transpose() * A_rec;  // (true, recovered)
  std::vector<bool> taken(static_cast<std::size_t>(r), false);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < r; ++i) {
    Eigen::Index pick = -1;
    double best = -1.0;
    for (Eigen::Index j = 0; j < r; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      const double c = std::abs(cos(i, j));
      if (pick < 0 || c > best + 1e-12) {
        best = c;
        pick = j;
      }
    }
    const auto slot = static_cast<std::size_t>(pick);
    taken[slot] = true;
    m.permutation[slot] = i;
    m.signs[slot] = cos(i, pick) < 0.0 ? -1 : 1;
    m.per_pair_cosines[slot] = std::min(1.0, best);
    sum += m.per_pair_cosines[slot];
  }
  m.ascore = sum / static_cast<double>(r);
  return m;
}

std::uint64_t pair_seed(std::uint64_t seed, int pair, int run) {
  return derive_seed(seed, 0x5EEDULL + static_cast<std::uint64_t>(pair), static_cast<std::uint64_t>(run));
}

double stability_score(const CovarianceTensor& t, Eigen::Index r, int n_seed_pairs, const FitConfig& cfg) {
  if (n_seed_pairs < 1) throw InputError("n_seed_pairs must be at least 1");
  double sum = 0.0;
  for (int q = 0; q < n_seed_pairs; ++q) {
    FitConfig c0 = cfg, c1 = cfg;
    c0.seed = pair_seed(cfg.seed, q, 0);
    c1.seed = pair_seed(cfg.seed, q, 1);
    const auto first = fit_mcpca(t, r, c0).first;
    const auto second = fit_mcpca(t, r, c1).first;
    sum += ascore(first.A, second.A).ascore;
  }
  return sum / n_seed_pairs;
}

RankSelectionReport select_rank(const CovarianceTensor& t, std::vector<Eigen::Index> candidates,
                                double threshold, int n_seed_pairs, const FitConfig& cfg) {
  if (candidates.empty()) throw InputError("select_rank: no candidate ranks");
  if (n_seed_pairs < 1) throw InputError("n_seed_pairs must be at least 1");
  for (auto c : candidates)
    if (c < 1 || c > t.p())
      throw InputError("candidate rank " + std::to_string(c) + " outside [1, " + std::to_string(t.p()) + "]");

  RankSelectionReport rep;
  rep.candidates = std::move(candidates);
  rep.threshold = threshold;
  rep.n_seed_pairs = n_seed_pairs;
  const Flattening f = flatten(t);
  rep.scree.assign(f.singular_values.data(), f.singular_values.data() + f.singular_values.size());

  for (auto c : rep.candidates) {
    double s = 0.0;
    std::string failure;
    try {
      s = stability_score(t, c, n_seed_pairs, cfg);
    } catch (const NumericalError& e) {
      failure = e.what();
    }
    rep.stability.push_back(s);
    rep.failures.push_back(failure);
    if (failure.empty() && s >= threshold && (!rep.chosen || c > *rep.chosen)) rep.chosen = c;
  }
  return rep;
}

}  // namespace mcpca
