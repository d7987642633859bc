#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpca/decompose.hpp"
#include "mcpca/model_select.hpp"

namespace mcpca {

inline constexpr int kModelFormatVersion = 1;

struct Preprocessing {
  std::string centering = "per-context";
  std::string covariance_normalization = "unbiased (n-1)";
  std::string whitening = "none";
  std::optional<Eigen::Index> pca_components;
  std::optional<Matrix> projection;  // pca_components x p_raw
  std::optional<Vector> pooled_mean;  // length p_raw
};

struct ModelFile {
  McpcaModel model;
  Preprocessing preprocessing;
};

/// Versioned JSON text. Matrices are row-major nested arrays; doubles are
/// written in shortest round-trip form, so load followed by save reproduces
/// the bytes.
std::string serialize_model(const ModelFile& mf);
ModelFile parse_model(const std::string& text);

void save_model(const std::filesystem::path& path, const ModelFile& mf);
ModelFile load_model(const std::filesystem::path& path);

/// Throws InputError unless A has unit columns, B >= 0, the columns follow
/// the ordering rule and each a_j has a positive largest entry.
void check_model_invariants(const McpcaModel& m);

std::string serialize_report(const FitReport& report, const Preprocessing& pre);
std::string serialize_rank_report(const RankSelectionReport& report);

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

/// Comma-delimited, LF line endings, optional header row.
void write_csv(std::ostream& out, const Matrix& m, const std::vector<std::string>& header = {});
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mcpca
