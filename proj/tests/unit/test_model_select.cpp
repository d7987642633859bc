#include <doctest.h>

#include "mcpca/error.hpp"
#include "mcpca/model_select.hpp"
#include "mcpca/synth.hpp"
#include "oracles.hpp"

#include <set>

using namespace mcpca;

TEST_CASE("ascore examples") {
  const Matrix I = Matrix::Identity(3, 3);
  const auto same = ascore(I, I);
  CHECK(same.ascore == 1.0);
  CHECK(same.permutation == std::vector<Eigen::Index>{0, 1, 2});

  Matrix At(2, 2), Ar(2, 2);
  At << 1, 0, 0, 1;
  Ar << 0, -1, 1, 0;  // [e2, -e1]
  const auto m = ascore(At, Ar);
  CHECK(m.ascore == 1.0);
  // Recovered column 0 (e2) matches true column 1; column 1 (-e1) matches true 0.
  CHECK(m.permutation == std::vector<Eigen::Index>{1, 0});
  CHECK(m.signs == std::vector<int>{1, -1});

  const Matrix e1 = Vector::Unit(2, 0);
  const Matrix d = Vector{{1.0, 1.0}}.normalized();
  CHECK(ascore(e1, d).ascore == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(ascore(Matrix::Identity(3, 2), Matrix::Identity(3, 3)), InputError);
}

TEST_CASE("property: ascore invariances and bounds") {
  for (std::uint64_t s = 0; s < 40; ++s) {
    oracle::Gen gen(800 + s);
    const Eigen::Index p = gen.integer(2, 8), r = gen.integer(1, static_cast<int>(p));
    const Matrix X = gen.unit_columns(p, r), Y = gen.unit_columns(p, r);
    const auto base = ascore(X, Y);
    CHECK(base.ascore >= 0.0);
    CHECK(base.ascore <= 1.0);
    CHECK(base.ascore == doctest::Approx(oracle::greedy_ascore(X, Y)).epsilon(1e-12));
    CHECK(ascore(X, X).ascore == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<bool> seen(static_cast<std::size_t>(r), false);
    for (auto j : base.permutation) seen[static_cast<std::size_t>(j)] = true;
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));

    const auto order = gen.permutation(r);
    Matrix Yp(p, r);
    for (Eigen::Index j = 0; j < r; ++j) Yp.col(j) = (gen.uniform() < 0.5 ? -1.0 : 1.0) * Y.col(order[static_cast<std::size_t>(j)]);
    CHECK(std::abs(ascore(X, Yp).ascore - base.ascore) <= 1e-12);
  }
}

TEST_CASE("ascore ties go to the lowest recovered index") {
  Matrix X(2, 2), Y(2, 2);
  X << 1, 0, 0, 1;
  const double c = 1.0 / std::sqrt(2.0);
  Y << c, c, c, -c;
  const auto m = ascore(X, Y);
  CHECK(m.permutation == std::vector<Eigen::Index>{0, 1});
}

namespace {
CovarianceTensor generic_rank3(std::uint64_t seed) {
  return exact_tensor(generate_generic_planted(8, 6, 3, 1.0, false, seed));
}
}  // namespace

TEST_CASE("stability_score examples") {
  const auto t = generic_rank3(1);
  CHECK(stability_score(t, 3, 2) >= 0.99);

  const auto rep = select_rank(t, {5}, 0.8, 2);
  CHECK(rep.stability[0] == 0.0);
  CHECK(!rep.failures[0].empty());

  // All loading columns equal: only the span of A is determined.
  oracle::Gen gen(40);
  const Matrix A = gen.unit_columns(10, 5);
  Matrix B = gen.loadings(6, 5);
  for (Eigen::Index j = 1; j < 5; ++j) B.col(j) = B.col(0);
  CHECK(stability_score(tensor_from_factors(A, B), 5, 5) < 0.8);
}

TEST_CASE("select_rank examples") {
  const auto t = generic_rank3(2);
  const auto rep = select_rank(t, {2, 3, 4, 5});
  CHECK(rep.chosen == 3);
  CHECK(rep.threshold == 0.8);
  CHECK(rep.n_seed_pairs == 5);
  CHECK(rep.scree.size() == 8);

  CHECK(select_rank(t, {1}).chosen == 1);
  CHECK(!select_rank(t, {2, 3}, 1.01, 1).chosen.has_value());
}

TEST_CASE("property: selection chooses the largest qualifying candidate") {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto t = generic_rank3(10 + s);
    const auto rep = select_rank(t, {1, 2, 3, 4}, 0.8, 2);
    std::optional<Eigen::Index> expect;
    for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
      CHECK(rep.stability[i] >= 0.0);
      CHECK(rep.stability[i] <= 1.0 + 1e-12);
      if (rep.stability[i] >= rep.threshold) expect = std::max(expect.value_or(0), rep.candidates[i]);
    }
    CHECK(rep.chosen == expect);
    CHECK(select_rank(t, {1, 2, 3, 4}, 0.8, 2).stability == rep.stability);
  }
}

TEST_CASE("pair seeds are distinct") {
  std::set<std::uint64_t> seeds;
  for (int pair = 0; pair < 5; ++pair)
    for (int run = 0; run < 2; ++run) seeds.insert(pair_seed(0, pair, run));
  CHECK(seeds.size() == 10);
}
