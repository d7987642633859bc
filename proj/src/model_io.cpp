#include "mcpca/model_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mcpca/error.hpp"

namespace mcpca {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw InputError(std::string("model file: '") + name + "' must have " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw InputError(std::string("model file: '") + name + "' row " + std::to_string(i) + " must have " +
                       std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[static_cast<std::size_t>(c)].is_number())
        throw InputError(std::string("model file: '") + name + "' has a non-numeric entry");
      m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

void check_model_invariants(const McpcaModel& m) {
  if (m.A.cols() != m.B.cols()) throw InputError("model: A and B disagree on r");
  if (static_cast<Eigen::Index>(m.context_ids.size()) != m.k()) throw InputError("model: context id count != k");
  for (Eigen::Index j = 0; j < m.r(); ++j) {
    if (std::abs(m.A.col(j).norm() - 1.0) > 1e-10)
      throw InputError("model: column " + std::to_string(j + 1) + " of A is not unit norm");
    Eigen::Index imax = 0;
    m.A.col(j).cwiseAbs().maxCoeff(&imax);
    if (m.A(imax, j) < 0) throw InputError("model: column " + std::to_string(j + 1) + " of A violates the sign rule");
  }
  if ((m.B.array() < 0.0).any()) throw InputError("model: B has negative entries");
  const Eigen::RowVectorXd sums = m.B.colwise().sum();
  for (Eigen::Index j = 1; j < m.r(); ++j)
    if (sums(j) > sums(j - 1)) throw InputError("model: columns are not ordered by descending loading sums");
}

std::string serialize_model(const ModelFile& mf) {
  const McpcaModel& m = mf.model;
  json j;
  j["format_version"] = kModelFormatVersion;
  j["p"] = m.p();
  j["k"] = m.k();
  j["r"] = m.r();
  j["context_ids"] = m.context_ids;
  j["A"] = matrix_to_json(m.A);
  j["B"] = matrix_to_json(m.B);
  j["ordering_rule"] = m.ordering_rule;
  j["sign_rule"] = m.sign_rule;
  j["seed"] = m.seed;
  j["converged"] = m.converged;
  json pre;
  pre["centering"] = mf.preprocessing.centering;
  pre["covariance_normalization"] = mf.preprocessing.covariance_normalization;
  pre["whitening"] = mf.preprocessing.whitening;
  pre["pca_components"] = mf.preprocessing.pca_components ? json(*mf.preprocessing.pca_components) : json(nullptr);
  pre["projection"] = mf.preprocessing.projection ? matrix_to_json(*mf.preprocessing.projection) : json(nullptr);
  if (mf.preprocessing.pooled_mean) {
    json mean = json::array();
    for (double v : *mf.preprocessing.pooled_mean) mean.push_back(v);
    pre["pooled_mean"] = std::move(mean);
  } else {
    pre["pooled_mean"] = nullptr;
  }
  j["preprocessing"] = std::move(pre);
  return dump(j);
}

ModelFile parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw InputError("unsupported model format_version " + j.at("format_version").dump());
    ModelFile mf;
    McpcaModel& m = mf.model;
    const auto p = j.at("p").get<Eigen::Index>();
    const auto k = j.at("k").get<Eigen::Index>();
    const auto r = j.at("r").get<Eigen::Index>();
    if (p < 1 || k < 1 || r < 0 || r > p) throw InputError("model file: invalid p, k, r");
    m.context_ids = j.at("context_ids").get<std::vector<std::string>>();
    m.A = matrix_from_json(j.at("A"), p, r, "A");
    m.B = matrix_from_json(j.at("B"), k, r, "B");
    m.ordering_rule = j.at("ordering_rule").get<std::string>();
    m.sign_rule = j.at("sign_rule").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.converged = j.at("converged").get<std::vector<bool>>();
    const json& pre = j.at("preprocessing");
    Preprocessing& pp = mf.preprocessing;
    pp.centering = pre.at("centering").get<std::string>();
    pp.covariance_normalization = pre.at("covariance_normalization").get<std::string>();
    pp.whitening = pre.at("whitening").get<std::string>();
    if (!pre.at("pca_components").is_null()) pp.pca_components = pre.at("pca_components").get<Eigen::Index>();
    if (!pre.at("projection").is_null()) {
      const json& proj = pre.at("projection");
      if (!pp.pca_components || *pp.pca_components != p)
        throw InputError("model file: projection requires pca_components == p");
      const auto raw = proj.empty() ? Eigen::Index{0} : static_cast<Eigen::Index>(proj.front().size());
      pp.projection = matrix_from_json(proj, p, raw, "projection");
    }
    if (!pre.at("pooled_mean").is_null()) {
      const auto v = pre.at("pooled_mean").get<std::vector<double>>();
      pp.pooled_mean = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    if (static_cast<Eigen::Index>(m.converged.size()) != r) throw InputError("model file: converged must have r entries");
    check_model_invariants(m);
    return mf;
  } catch (const json::exception& e) {
    throw InputError(std::string("model file is malformed: ") + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw InputError("failed writing '" + path.string() + "'");
}

void save_model(const std::filesystem::path& path, const ModelFile& mf) { write_text_file(path, serialize_model(mf)); }

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_report(const FitReport& report, const Preprocessing& pre) {
  json j;
  j["reconstruction_error"] = report.reconstruction_error;
  j["per_context_error"] = report.per_context_error;
  j["objective"] = report.objective;
  j["objective_trace"] = report.objective_trace;
  j["iterations"] = report.iterations;
  j["restarts_used"] = report.restarts_used;
  j["singular_values"] = report.singular_values;
  json pairs = json::array();
  for (auto [a, b] : report.collinear_loading_pairs) pairs.push_back({a + 1, b + 1});
  j["collinear_loading_pairs"] = std::move(pairs);
  j["non_identifiable_suspect"] = report.non_identifiable_suspect;
  j["elapsed_seconds"] = report.elapsed_seconds;
  j["preprocessing"] = {{"centering", pre.centering},
                        {"covariance_normalization", pre.covariance_normalization},
                        {"whitening", pre.whitening},
                        {"pca_components", pre.pca_components ? json(*pre.pca_components) : json(nullptr)}};
  return dump(j);
}

std::string serialize_rank_report(const RankSelectionReport& report) {
  json j;
  j["candidates"] = report.candidates;
  j["stability"] = report.stability;
  j["failures"] = report.failures;
  j["chosen"] = report.chosen ? json(*report.chosen) : json(nullptr);
  j["threshold"] = report.threshold;
  j["n_seed_pairs"] = report.n_seed_pairs;
  j["scree"] = report.scree;
  return dump(j);
}

void write_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header) {
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

}  // namespace mcpca
