#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcvae/data.hpp"
#include "gcvae/matrix.hpp"

namespace gcvae {

/// counts(p, t) = number of samples predicted p with truth t, padded square.
struct ContingencyTable {
  Matrix counts;
  std::size_t total = 0;
};

ContingencyTable contingency(std::span<const std::size_t> pred, std::span<const std::size_t> truth);

/// Minimum-cost perfect assignment (Kuhn-Munkres, O(K^3)); result[row] = column.
std::vector<std::size_t> hungarian(const Matrix& cost);
double assignment_cost(const Matrix& cost, std::span<const std::size_t> assignment);

/// Hungarian-matched accuracy in [0, 1].
double clustering_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth);

/// Predicted cluster -> true class under the accuracy-maximizing matching.
std::vector<std::size_t> matched_labels(std::span<const std::size_t> pred, std::span<const std::size_t> truth);

/// Mutual information over the arithmetic mean of the two entropies. Returns 1 when both
/// labelings are single-cluster.
double nmi(std::span<const std::size_t> pred, std::span<const std::size_t> truth);

struct ColumnStats {
  double mean = 0.0;
  double sd = 0.0;
};

/// Per-cluster count and mean +/- sd of every feature and guide column, denormalized.
struct ClusterProfile {
  std::vector<std::string> columns;         // features then guides
  std::vector<std::size_t> counts;          // per cluster
  std::vector<std::vector<ColumnStats>> stats;  // [cluster][column]; empty clusters hold zeros
};

ClusterProfile cluster_profiles(const Dataset& data, std::span<const std::size_t> assignments,
                                std::optional<std::size_t> clusters = std::nullopt);

void write_profile_csv(std::ostream& out, const ClusterProfile& p);
void write_profile_text(std::ostream& out, const ClusterProfile& p);

}  // namespace gcvae
