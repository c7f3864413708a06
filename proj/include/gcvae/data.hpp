#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcvae/matrix.hpp"

namespace gcvae {

/// Observed range of one column; maps values onto [0, 1].
struct ColumnRange {
  double min = 0.0;
  double max = 1.0;

  /// Constant columns map to 0.5.
  double normalize(double v) const;
  double denormalize(double u) const;
  bool constant() const { return !(max > min); }
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

/// Features X, guiding variables Y (both Min-Max normalized) and optional labels.
struct Dataset {
  Matrix X;
  Matrix Y;
  std::optional<std::vector<std::size_t>> labels;
  std::vector<std::string> feature_names;
  std::vector<std::string> guide_names;
  std::string label_name = "label";
  std::vector<ColumnRange> x_ranges;
  std::vector<ColumnRange> y_ranges;

  std::size_t rows() const { return X.rows(); }
  Dataset subset(std::span<const std::size_t> idx) const;
  Matrix raw_X() const;
  Matrix raw_Y() const;
};

/// Per-column ranges observed in M.
std::vector<ColumnRange> observe_ranges(const Matrix& M);
Matrix normalize_columns(const Matrix& M, std::span<const ColumnRange> ranges);
Matrix denormalize_columns(const Matrix& M, std::span<const ColumnRange> ranges);

/// Parameters of the synthetic guided-clustering benchmark.
struct SyntheticSpec {
  std::size_t k_true = 3;
  std::size_t n = 5000;
  std::size_t d_latent_true = 2;
  std::size_t d_x = 18;
  std::size_t d_y = 3;
  double cluster_separation = 6.0;
  std::size_t distractor_dims = 16;
  double distractor_scale = 10.0;
  // Distractor columns are scale * (B v) with v ~ N(0, I_rank) and unit-norm rows of B:
  // every column is marginally N(0, scale^2) and independent of the cluster, but together
  // they form a low-rank dominant source of variance.
  std::size_t distractor_rank = 2;
  double y_noise_sd = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Dataset plus the generator's ground truth.
struct SyntheticDataset {
  Dataset data;
  Matrix component_means;  // k_true x d_latent_true
  Matrix signatures;       // k_true x d_y, raw units: E[y | c]
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Raw CSV table: header names and numeric cells.
struct CsvTable {
  std::vector<std::string> names;
  Matrix values;

  std::size_t column(const std::string& name) const;  // throws DataError naming it
  bool has_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Non-guide, non-label columns become X; guide columns become Y. Min-Max statistics come
/// from the whole file. Throws DataError on missing columns, non-numeric cells or < 10 rows.
Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& guide_columns,
                 const std::optional<std::string>& label_column = std::nullopt);
Dataset dataset_from_table(const CsvTable& table, const std::vector<std::string>& guide_columns,
                           const std::optional<std::string>& label_column);

/// Raw (denormalized) values with a trailing label column when labels exist.
CsvTable to_table(const Dataset& d);

struct DataSplit {
  Dataset train, val, test;
  std::vector<std::size_t> train_idx, val_idx, test_idx;
};

/// Seeded shuffle then contiguous cut (train, val, test). Sizes are floor(f * n) for val and
/// test with the remainder in train. With labels and n >= 500 the shuffle is stratified.
DataSplit split(const Dataset& d, std::array<double, 3> fractions, std::uint64_t seed);

}  // namespace gcvae
