#include <doctest.h>

#include "mcpca/kernels.hpp"
#include "oracles.hpp"

#include <cstdlib>

using namespace mcpca;
using kernels::Matrix;
using kernels::Vector;

TEST_CASE("serial and parallel kernels agree bit for bit") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    oracle::Gen gen(1400 + s);
    const Eigen::Index p = gen.integer(1, 12), k = gen.integer(1, 20);
    std::vector<Matrix> data, slices;
    for (Eigen::Index i = 0; i < k; ++i) {
      data.push_back(gen.gaussian(gen.integer(2, 30), p));
      const Matrix X = gen.gaussian(p, p);
      slices.push_back(X + X.transpose());
    }
    const auto cs = kernels::serial::sample_covariances(data);
    const auto cp = kernels::omp::sample_covariances(data);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      CHECK(cs[i] == cp[i]);
      CHECK(oracle::max_abs_diff(cs[i], oracle::sample_covariance(data[i])) <= 1e-12 * std::max(1.0, cs[i].norm()));
    }

    const Vector v = gen.gaussian(k, 1);
    const Matrix ms = kernels::serial::contract_mode3(slices, v);
    CHECK(ms == kernels::omp::contract_mode3(slices, v));
    CHECK(oracle::max_abs_diff(ms, oracle::contract(slices, v)) <= 1e-12 * std::max(1.0, ms.norm()));

    const Matrix A = gen.unit_columns(p, 3);
    const Matrix hs = kernels::serial::diagonal_projections(slices, A);
    CHECK(hs == kernels::omp::diagonal_projections(slices, A));
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < 3; ++j)
        CHECK(hs(i, j) == doctest::Approx(A.col(j).dot(slices[static_cast<std::size_t>(i)] * A.col(j))).epsilon(1e-12));
  }
}

TEST_CASE("best_of picks the best score with the lowest index on ties") {
  const std::vector<double> scores{0.3, 0.9, 0.1, 0.9, 0.5};
  auto fn = [&](std::size_t i) { return kernels::Candidate{scores[i], true}; };
  CHECK(kernels::serial::best_of(scores.size(), fn) == 1u);
  CHECK(kernels::omp::best_of(scores.size(), fn) == 1u);

  auto none = [](std::size_t) { return kernels::Candidate{}; };
  CHECK(!kernels::omp::best_of(4, none).has_value());

  auto some = [](std::size_t i) { return kernels::Candidate{static_cast<double>(i), i % 2 == 0}; };
  std::vector<kernels::Candidate> all;
  CHECK(kernels::omp::best_of(5, some, &all) == 4u);
  CHECK(all.size() == 5);
  CHECK(!all[3].valid);
}

TEST_CASE("exceptions inside parallel candidates propagate") {
  auto boom = [](std::size_t i) -> kernels::Candidate {
    if (i == 2) throw std::runtime_error("boom");
    return {1.0, true};
  };
  CHECK_THROWS_AS(kernels::omp::best_of(4, boom), std::runtime_error);
}

TEST_CASE("thread cap from the environment") {
  ::setenv("MCPCA_THREADS", "1", 1);
  CHECK(kernels::configure_threads_from_env() == 1);
  CHECK(kernels::max_threads() == 1);
  ::unsetenv("MCPCA_THREADS");
  CHECK(kernels::configure_threads_from_env() >= 1);
}
