#include <doctest.h>

#include "mcpca/decompose.hpp"
#include "mcpca/error.hpp"
#include "mcpca/model_io.hpp"
#include "mcpca/model_select.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

#include <json.hpp>

#include <charconv>
#include <sstream>

using namespace mcpca;

namespace {
ModelFile fitted(std::uint64_t seed) {
  oracle::Gen gen(seed);
  const auto t = tensor_from_factors(gen.unit_columns(5, 2), gen.loadings(3, 2));
  ModelFile mf;
  mf.model = fit_mcpca(t, 2).first;
  return mf;
}
}  // namespace

TEST_CASE("serialize, parse and serialize again is byte identical") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    ModelFile mf = fitted(1200 + s);
    if (s % 2) {
      oracle::Gen gen(s);
      mf.preprocessing.pca_components = 5;
      mf.preprocessing.projection = gen.gaussian(5, 7);
      mf.preprocessing.pooled_mean = gen.gaussian(7, 1);
    }
    const std::string a = serialize_model(mf);
    const ModelFile back = parse_model(a);
    CHECK(back.model.A == mf.model.A);
    CHECK(back.model.B == mf.model.B);
    CHECK(serialize_model(back) == a);
  }
}

TEST_CASE("model file layout") {
  const ModelFile mf = fitted(1300);
  const auto j = nlohmann::json::parse(serialize_model(mf));
  CHECK(j["format_version"] == 1);
  CHECK(j["p"] == 5);
  CHECK(j["k"] == 3);
  CHECK(j["r"] == 2);
  CHECK(j["A"].size() == 5);
  CHECK(j["A"][0].size() == 2);
  CHECK(j["A"][1][0].get<double>() == mf.model.A(1, 0));
  CHECK(j["B"].size() == 3);
  CHECK(j["context_ids"].size() == 3);
  CHECK(j["preprocessing"]["centering"] == "per-context");
}

TEST_CASE("invalid model files are rejected") {
  const std::string text = serialize_model(fitted(1301));
  auto j = nlohmann::json::parse(text);
  auto bad_version = j;
  bad_version["format_version"] = 2;
  CHECK_THROWS_AS(parse_model(bad_version.dump()), InputError);
  auto negative = j;
  negative["B"][0][0] = -1.0;
  CHECK_THROWS_AS(parse_model(negative.dump()), InputError);
  auto not_unit = j;
  not_unit["A"][0][0] = 3.0;
  CHECK_THROWS_AS(parse_model(not_unit.dump()), InputError);
  CHECK_THROWS_AS(parse_model("{"), InputError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), InputError);
}

TEST_CASE("save and load through a file") {
  testing::TempDir dir;
  const ModelFile mf = fitted(1302);
  save_model(dir / "m.json", mf);
  CHECK(testing::slurp(dir / "m.json") == serialize_model(mf));
  CHECK(serialize_model(load_model(dir / "m.json")) == serialize_model(mf));
}

TEST_CASE("format_double is shortest round trip") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e21, 0.0, 123456789.125}) {
    const std::string s = format_double(x);
    double y = 0;
    std::from_chars(s.data(), s.data() + s.size(), y);
    CHECK(y == x);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("csv writer") {
  std::ostringstream out;
  write_csv(out, Matrix{{1, 0.5}, {-2, 3}}, {"x", "y"});
  CHECK(out.str() == "x,y\n1,0.5\n-2,3\n");
}

TEST_CASE("reports are valid JSON") {
  oracle::Gen gen(1303);
  const auto t = tensor_from_factors(gen.unit_columns(5, 2), gen.loadings(3, 2));
  const auto [m, rep] = fit_mcpca(t, 2);
  const auto j = nlohmann::json::parse(serialize_report(rep, {}));
  CHECK(j.contains("reconstruction_error"));
  CHECK(j["objective_trace"].size() == 2);
  const auto sel = nlohmann::json::parse(serialize_rank_report(select_rank(t, {1, 2}, 0.8, 1)));
  CHECK(sel["scree"].size() == 5);
  CHECK(sel["chosen"] == 2);
}
