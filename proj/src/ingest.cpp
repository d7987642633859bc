#include "mcpca/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "mcpca/error.hpp"

namespace mcpca {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

bool is_missing(std::string_view cell) {
  cell = trim(cell);
  std::string lower(cell);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower.empty() || lower == "na" || lower == "nan" || lower == "null";
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    auto pos = rest.find(delim);
    cells.emplace_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return cells;
}

double cell_value(const std::string& cell, const fs::path& path, std::size_t line) {
  if (is_missing(cell))
    throw InputError(path.string() + ":" + std::to_string(line) + ": missing value");
  auto v = parse_number(cell);
  if (!v)
    throw InputError(path.string() + ":" + std::to_string(line) + ": non-numeric cell '" + cell + "'");
  return *v;
}

// Line number in the file for data row `row` (1-based, accounting for the header).
std::size_t line_of(const Table& t, std::size_t row) { return row + 1 + (t.header.empty() ? 0 : 1); }

Matrix rows_to_matrix(const Table& t, const std::vector<std::size_t>& rows,
                      const std::vector<std::size_t>& cols, const fs::path& path) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b)
      m(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          cell_value(t.rows[rows[a]][cols[b]], path, line_of(t, rows[a]));
  return m;
}

}  // namespace

std::vector<std::string> ContextDataset::ids() const {
  std::vector<std::string> out;
  for (const auto& c : contexts) out.push_back(c.id);
  return out;
}

Eigen::Index ContextDataset::total_samples() const {
  Eigen::Index n = 0;
  for (const auto& c : contexts) n += c.data.rows();
  return n;
}

void validate(const ContextDataset& d) {
  if (d.contexts.empty()) throw InputError("dataset has no contexts");
  const Eigen::Index p = d.p();
  if (p < 1) throw InputError("dataset has no variables");
  for (const auto& c : d.contexts) {
    if (c.data.cols() != p)
      throw InputError("context '" + c.id + "' has " + std::to_string(c.data.cols()) +
                       " variables, expected " + std::to_string(p));
    if (c.data.rows() < 2)
      throw InputError("context '" + c.id + "' has fewer than 2 samples");
    if (!c.data.allFinite()) throw InputError("context '" + c.id + "' has non-finite values");
  }
  if (!d.variable_names.empty() && static_cast<Eigen::Index>(d.variable_names.size()) != p)
    throw InputError("variable name count does not match p");
}

InputFormat parse_input_format(const std::string& name) {
  if (name == "auto") return InputFormat::automatic;
  if (name == "long-table") return InputFormat::long_table;
  if (name == "per-context-files") return InputFormat::per_context_files;
  throw InputError("unknown input format '" + name + "' (auto, long-table, per-context-files)");
}

Table read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::string line;
  std::vector<std::vector<std::string>> rows;
  char delim = 0;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    if (delim == 0) delim = line.find('\t') != std::string::npos ? '\t' : ',';
    auto cells = split(line, delim);
    if (!rows.empty() && cells.size() != rows.front().size())
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": ragged row (" +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(rows.front().size()) + ")");
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw InputError("'" + path.string() + "' is empty");
  Table t;
  const bool header = std::any_of(rows.front().begin(), rows.front().end(), [](const std::string& c) {
    return !is_missing(c) && !parse_number(c);
  });
  if (header) {
    t.header = std::move(rows.front());
    rows.erase(rows.begin());
  }
  t.rows = std::move(rows);
  return t;
}

Matrix read_matrix(const fs::path& path, std::vector<std::string>* header) {
  Table t = read_table(path);
  if (t.rows.empty()) throw InputError("'" + path.string() + "' has no data rows");
  std::vector<std::size_t> rows(t.rows.size()), cols(t.rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t j = 0; j < cols.size(); ++j) cols[j] = j;
  if (header) *header = t.header;
  return rows_to_matrix(t, rows, cols, path);
}

namespace {

ContextDataset load_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".csv" || ext == ".tsv" || ext == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (files.empty()) throw InputError("directory '" + dir.string() + "' has no .csv/.tsv/.txt files");
  ContextDataset d;
  for (const auto& f : files) {
    std::vector<std::string> header;
    Matrix X = read_matrix(f, &header);
    if (!header.empty() && d.variable_names.empty()) d.variable_names = header;
    d.contexts.push_back({f.stem().string(), std::move(X)});
  }
  validate(d);
  return d;
}

ContextDataset load_long_table(const fs::path& path) {
  std::ifstream probe(path);
  if (!probe) throw InputError("cannot open '" + path.string() + "'");
  Table t = read_table(path);
  const std::size_t width = t.header.empty() ? (t.rows.empty() ? 0 : t.rows.front().size()) : t.header.size();
  // read_table takes any row with a non-numeric cell as the header, which a
  // headerless long table trips on through its id column. Re-admit that row
  // when only its first cell is non-numeric.
  if (!t.header.empty()) {
    bool only_first = !t.header.empty() && !parse_number(t.header[0]);
    for (std::size_t j = 1; j < t.header.size() && only_first; ++j)
      if (!parse_number(t.header[j])) only_first = false;
    std::string first = t.header[0];
    std::transform(first.begin(), first.end(), first.begin(), [](unsigned char c) { return std::tolower(c); });
    if (only_first && first != "context") {
      t.rows.insert(t.rows.begin(), t.header);
      t.header.clear();
    }
  }
  if (width < 2) throw InputError("long table needs a context column and at least one variable");
  std::size_t ctx_col = 0;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    std::string h = t.header[j];
    std::transform(h.begin(), h.end(), h.begin(), [](unsigned char c) { return std::tolower(c); });
    if (h == "context") {
      ctx_col = j;
      break;
    }
  }
  std::vector<std::size_t> value_cols;
  for (std::size_t j = 0; j < width; ++j)
    if (j != ctx_col) value_cols.push_back(j);

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string& id = t.rows[i][ctx_col];
    if (id.empty()) throw InputError(path.string() + ":" + std::to_string(line_of(t, i)) + ": empty context id");
    auto [it, inserted] = members.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(i);
  }
  if (order.empty()) throw InputError("'" + path.string() + "' has no data rows");
  ContextDataset d;
  if (!t.header.empty())
    for (auto j : value_cols) d.variable_names.push_back(t.header[j]);
  for (const auto& id : order) d.contexts.push_back({id, rows_to_matrix(t, members[id], value_cols, path)});
  validate(d);
  return d;
}

}  // namespace

ContextDataset load_contexts(const fs::path& path, InputFormat format) {
  if (!fs::exists(path)) throw InputError("input '" + path.string() + "' does not exist");
  if (format == InputFormat::automatic)
    format = fs::is_directory(path) ? InputFormat::per_context_files : InputFormat::long_table;
  if (format == InputFormat::per_context_files) {
    if (!fs::is_directory(path)) throw InputError("per-context-files input must be a directory");
    return load_directory(path);
  }
  if (fs::is_directory(path)) throw InputError("long-table input must be a file");
  return load_long_table(path);
}

Matrix sample_covariance(const Matrix& X) {
  if (X.rows() < 2) throw InputError("sample covariance needs at least 2 samples");
  const Matrix single[] = {X};
  return kernels::serial::sample_covariances(single).front();
}

PcaReduction global_pca_reduce(const ContextDataset& d, Eigen::Index n_components) {
  validate(d);
  const Eigen::Index p = d.p();
  const Eigen::Index total = d.total_samples();
  if (n_components < 1 || n_components > std::min(p, total))
    throw InputError("n_components must be in [1, min(p, total samples)] = [1, " +
                     std::to_string(std::min(p, total)) + "], got " + std::to_string(n_components));
  Matrix pooled(total, p);
  Eigen::Index row = 0;
  for (const auto& c : d.contexts) {
    pooled.middleRows(row, c.data.rows()) = c.data;
    row += c.data.rows();
  }
  PcaReduction out;
  out.pooled_mean = pooled.colwise().mean().transpose();
  const Matrix centered = pooled.rowwise() - out.pooled_mean.transpose();
  Matrix cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(total - 1, 1));
  cov = (0.5 * (cov + cov.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  out.projection.resize(n_components, p);
  out.pooled_eigenvalues.resize(n_components);
  for (Eigen::Index c = 0; c < n_components; ++c) {
    const Eigen::Index src = p - 1 - c;  // eigenvalues ascending
    Vector v = eig.eigenvectors().col(src);
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
    out.projection.row(c) = v.transpose();
    out.pooled_eigenvalues(c) = eig.eigenvalues()(src);
  }
  out.reduced.variable_names.clear();
  for (Eigen::Index c = 0; c < n_components; ++c) out.reduced.variable_names.push_back("pc" + std::to_string(c + 1));
  for (const auto& c : d.contexts)
    out.reduced.contexts.push_back(
        {c.id, (c.data.rowwise() - out.pooled_mean.transpose()) * out.projection.transpose()});
  return out;
}

CovarianceTensor build_tensor(const ContextDataset& d, Exec exec) {
  validate(d);
  std::vector<Matrix> data;
  data.reserve(d.contexts.size());
  for (const auto& c : d.contexts) data.push_back(c.data);
  return stack_covariances(kernels::sample_covariances(data, exec));
}

}  // namespace mcpca
