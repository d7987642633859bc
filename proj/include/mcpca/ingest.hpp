#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcpca/kernels.hpp"
#include "mcpca/tensor.hpp"

namespace mcpca {

struct Context {
  std::string id;
  Matrix data;  // n_i x p
};

/// Per-context data matrices over a shared variable set.
struct ContextDataset {
  std::vector<Context> contexts;
  std::vector<std::string> variable_names;  // empty or length p

  Eigen::Index p() const { return contexts.empty() ? 0 : contexts.front().data.cols(); }
  Eigen::Index k() const { return static_cast<Eigen::Index>(contexts.size()); }
  std::vector<std::string> ids() const;
  Eigen::Index total_samples() const;
};

/// Checks the dataset invariants (shared p, n_i >= 2, finite values).
void validate(const ContextDataset& d);

enum class InputFormat { automatic, long_table, per_context_files };

InputFormat parse_input_format(const std::string& name);

// A delimited numeric table. Comma or tab, picked from the first line. A
// first row with any non-numeric cell is taken as the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::filesystem::path& path);

/// Purely numeric table (after an optional header) as a matrix.
Matrix read_matrix(const std::filesystem::path& path, std::vector<std::string>* header = nullptr);

/// Loads contexts from a directory (one file per context, id = file stem,
/// lexicographic order) or from a single long table (context column named
/// `context` in the header, otherwise the first column; order of first
/// appearance). `automatic` picks by whether the path is a directory.
ContextDataset load_contexts(const std::filesystem::path& path,
                             InputFormat format = InputFormat::automatic);

/// Unbiased covariance of the column-centered data, (X - mean)^T (X - mean) / (n - 1).
Matrix sample_covariance(const Matrix& X);

struct PcaReduction {
  ContextDataset reduced;    // scores, n_i x n_components
  Matrix projection;         // n_components x p, orthonormal rows
  Vector pooled_mean;        // length p
  Vector pooled_eigenvalues; // top n_components
};

/// Global PCA on the pooled, pooled-mean-centered data. Scores are not whitened.
PcaReduction global_pca_reduce(const ContextDataset& d, Eigen::Index n_components);

CovarianceTensor build_tensor(const ContextDataset& d, Exec exec = Exec::parallel);

}  // namespace mcpca
