#include <doctest.h>

#include "cli.hpp"
#include "mcpca/diagnostics.hpp"
#include "mcpca/ingest.hpp"
#include "mcpca/model_io.hpp"
#include "mcpca/model_select.hpp"
#include "tempdir.hpp"

#include <json.hpp>

#include <sstream>

using namespace mcpca;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mcpca");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Planted noiseless dataset written by the generate command.
struct Planted {
  testing::TempDir dir;
  explicit Planted(Eigen::Index r = 3, const std::string& seed = "1") {
    const auto res = run({"generate", "--p", "10", "--k", "6", "--r", std::to_string(r), "--density", "1", "--seed",
                          seed, "--exact", "--output-dir", dir.path().string()});
    REQUIRE(res.code == 0);
  }
  std::string contexts() const { return (dir / "contexts").string(); }
};

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"fit", "--help"}).code == cli::kExitOk);
  CHECK(run({}).code == cli::kExitInput);
  CHECK(run({"frobnicate"}).code == cli::kExitInput);
}

TEST_CASE("fit end to end") {
  Planted data;
  const auto model = (data.dir / "model.json").string();
  const auto res = run({"fit", "--input", data.contexts(), "--rank", "3", "--output", model});
  REQUIRE(res.code == 0);
  const ModelFile mf = load_model(model);
  const Matrix A_true = read_matrix(data.dir / "A_true.csv");
  CHECK(ascore(A_true, mf.model.A).ascore >= 0.999);
  CHECK(mf.model.context_ids.front() == "context1");
  CHECK(std::filesystem::exists(data.dir / "model.report.json"));

  const auto again = (data.dir / "again.json").string();
  REQUIRE(run({"fit", "--input", data.contexts(), "--rank", "3", "--output", again}).code == 0);
  CHECK(testing::slurp(model) == testing::slurp(again));
}

TEST_CASE("fit argument validation") {
  Planted data;
  const auto out = (data.dir / "m.json").string();
  const auto zero = run({"fit", "--input", data.contexts(), "--rank", "0", "--output", out});
  CHECK(zero.code == cli::kExitInput);
  CHECK(!zero.err.empty());
  const auto big = run({"fit", "--input", data.contexts(), "--rank", "11", "--output", out});
  CHECK(big.code == cli::kExitInput);
  CHECK(big.err.find("r ≤ p") != std::string::npos);
  CHECK(run({"fit", "--input", (data.dir / "nope").string(), "--rank", "2", "--output", out}).code == cli::kExitInput);
  CHECK(run({"fit", "--input", data.contexts(), "--rank", "8", "--output", out}).code == cli::kExitNumerical);
}

TEST_CASE("select-rank") {
  Planted data;
  const auto out = (data.dir / "sel.json").string();
  REQUIRE(run({"select-rank", "--input", data.contexts(), "--candidates", "2-5", "--output", out}).code == 0);
  const auto j = nlohmann::json::parse(testing::slurp(out));
  CHECK(j["chosen"] == 3);
  CHECK(j["threshold"] == 0.8);
  CHECK(j["n_seed_pairs"] == 5);
  CHECK(j["scree"].size() == 10);
  CHECK(run({"select-rank", "--input", data.contexts(), "--candidates", "", "--output", out}).code == cli::kExitInput);
  CHECK(run({"select-rank", "--input", data.contexts(), "--candidates", "2,x", "--output", out}).code ==
        cli::kExitInput);
}

TEST_CASE("score") {
  Planted data;
  const auto model = (data.dir / "m.json").string();
  REQUIRE(run({"fit", "--input", data.contexts(), "--rank", "3", "--output", model}).code == 0);
  const auto file = data.dir / "contexts" / "context1.csv";
  const auto out = (data.dir / "s.csv").string();
  REQUIRE(run({"score", "--model", model, "--data", file.string(), "--output", out}).code == 0);
  std::vector<std::string> header;
  const Matrix S = read_matrix(out, &header);
  CHECK(header == std::vector<std::string>{"mcpc1", "mcpc2", "mcpc3"});
  const Matrix X = read_matrix(file);
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  CHECK((S - score_samples(load_model(model).model, Xc)).cwiseAbs().maxCoeff() <= 1e-10);

  data.dir.write("wrong.csv", "1,2\n3,4\n");
  CHECK(run({"score", "--model", model, "--data", (data.dir / "wrong.csv").string(), "--output", out}).code ==
        cli::kExitInput);
}

TEST_CASE("score applies the stored projection") {
  Planted data;
  const auto model = (data.dir / "m.json").string();
  REQUIRE(run({"fit", "--input", data.contexts(), "--rank", "2", "--pca-components", "4", "--output", model}).code ==
          0);
  const ModelFile mf = load_model(model);
  REQUIRE(mf.preprocessing.projection.has_value());
  const auto file = data.dir / "contexts" / "context2.csv";
  const auto out = (data.dir / "s.csv").string();
  REQUIRE(run({"score", "--model", model, "--data", file.string(), "--output", out}).code == 0);
  const Matrix X = read_matrix(file);
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  const Matrix manual = score_samples(mf.model, Xc * mf.preprocessing.projection->transpose());
  CHECK((read_matrix(out) - manual).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("diag") {
  Planted data;
  const auto model = (data.dir / "m.json").string();
  REQUIRE(run({"fit", "--input", data.contexts(), "--rank", "3", "--output", model}).code == 0);
  const auto out = (data.dir / "d.csv").string();
  REQUIRE(run({"diag", "--model", model, "--input", data.contexts(), "--output", out}).code == 0);
  const auto table = read_table(out);
  CHECK(table.header.front() == "context");
  CHECK(table.header.size() == 8);
  REQUIRE(table.rows.size() == 6);
  for (const auto& row : table.rows) {
    CHECK(std::stod(row[1]) <= 1e-6);
    CHECK(std::stod(row[2]) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::stod(row[5]) <= 1e-6);
    CHECK(row[7] == "ok");
    CHECK(std::stod(row[6]) <= 1e-6);
  }
}

TEST_CASE("diag flags non positive definite contexts and still succeeds") {
  Planted data;
  const auto model = (data.dir / "m.json").string();
  REQUIRE(run({"fit", "--input", data.contexts(), "--rank", "3", "--output", model}).code == 0);
  testing::TempDir other;
  for (int i = 1; i <= 6; ++i) {
    std::ostringstream rows;
    for (int n = 0; n < 3; ++n) {
      for (int c = 0; c < 10; ++c) rows << (c ? "," : "") << (c == 0 ? n : 0);
      rows << "\n";
    }
    other.write("c" + std::to_string(i) + ".csv", rows.str());
  }
  const auto out = (data.dir / "d.csv").string();
  REQUIRE(run({"diag", "--model", model, "--input", other.path().string(), "--output", out}).code == 0);
  const auto table = read_table(out);
  CHECK(table.rows[0][7] == "not_positive_definite");
}

TEST_CASE("bench") {
  testing::TempDir dir;
  const auto out = (dir / "b.csv").string();
  REQUIRE(run({"bench", "--p", "10", "--k", "6", "--r", "3", "--density", "1", "--trials", "2", "--N", "200",
               "--output", out}).code == 0);
  const std::string text = testing::slurp(out);
  CHECK(text.rfind("method,p,k,r,N,trial,seed,ascore,runtime_seconds,converged\n", 0) == 0);
  CHECK(count_lines(text) == 1 + 2 * 3);

  REQUIRE(run({"bench", "--mode", "sweep", "--p", "8", "--k", "5", "--r", "2", "--density", "1", "--N-grid",
               "50,500", "--methods", "mcpca", "--output", out}).code == 0);
  CHECK(count_lines(testing::slurp(out)) == 3);

  CHECK(run({"bench", "--trials", "0", "--output", out}).code == cli::kExitInput);
  CHECK(run({"bench", "--mode", "grid", "--trials", "1", "--output", out}).code == cli::kExitInput);
  CHECK(run({"bench", "--methods", "external", "--trials", "1", "--output", out}).code == cli::kExitInput);
}

TEST_CASE("bench external results and export") {
  testing::TempDir dir;
  const auto exp = dir / "export";
  const auto out = (dir / "b.csv").string();
  REQUIRE(run({"bench", "--p", "6", "--k", "4", "--r", "2", "--density", "1", "--trials", "2", "--noiseless",
               "--methods", "mcpca", "--export-dir", exp.string(), "--output", out}).code == 0);
  CHECK(std::filesystem::exists(exp / "trial_0_A_true.csv"));
  CHECK(std::filesystem::exists(exp / "trial_1_covariance.csv"));

  const auto ext = dir / "ext";
  std::filesystem::create_directories(ext);
  std::filesystem::copy_file(exp / "trial_0_A_true.csv", ext / "trial_0.csv");
  REQUIRE(run({"bench", "--p", "6", "--k", "4", "--r", "2", "--density", "1", "--trials", "2", "--noiseless",
               "--methods", "external", "--external-dir", ext.string(), "--output", out}).code == 0);
  const auto table = read_table(out);
  REQUIRE(table.rows.size() == 2);
  CHECK(std::stod(table.rows[0][7]) == doctest::Approx(1.0));
  CHECK(table.rows[0][9] == "true");
  CHECK(table.rows[1][9] == "false");
}

TEST_CASE("invalid thread setting is an input error") {
  ::setenv("MCPCA_THREADS", "many", 1);
  testing::TempDir dir;
  CHECK(run({"generate", "--output-dir", dir.path().string()}).code == cli::kExitInput);
  ::unsetenv("MCPCA_THREADS");
}
