#include "gcvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gcvae/errors.hpp"

namespace gcvae {

ContingencyTable contingency(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  if (pred.size() != truth.size()) throw std::invalid_argument("contingency: length mismatch");
  if (pred.empty()) throw std::invalid_argument("contingency: empty input");
  const std::size_t kp = *std::max_element(pred.begin(), pred.end()) + 1;
  const std::size_t kt = *std::max_element(truth.begin(), truth.end()) + 1;
  const std::size_t k = std::max(kp, kt);
  ContingencyTable t{Matrix(k, k), pred.size()};
  for (std::size_t i = 0; i < pred.size(); ++i) t.counts(pred[i], truth[i]) += 1.0;
  return t;
}

std::vector<std::size_t> hungarian(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw std::invalid_argument("hungarian: cost matrix must be square");
  if (!cost.all_finite()) throw std::invalid_argument("hungarian: costs must be finite");
  const std::size_t n = cost.rows();
  if (n == 0) return {};
  // Potentials formulation with 1-based sentinel column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double assignment_cost(const Matrix& cost, std::span<const std::size_t> assignment) {
  double s = 0.0;
  for (std::size_t r = 0; r < assignment.size(); ++r) s += cost(r, assignment[r]);
  return s;
}

std::vector<std::size_t> matched_labels(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  const auto table = contingency(pred, truth);
  Matrix cost = table.counts;
  cost *= -1.0;
  return hungarian(cost);
}

double clustering_accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  if (pred.empty()) throw std::invalid_argument("clustering_accuracy: empty input");
  const auto table = contingency(pred, truth);
  Matrix cost = table.counts;
  cost *= -1.0;
  const auto match = hungarian(cost);
  double hit = 0.0;
  for (std::size_t p = 0; p < match.size(); ++p) hit += table.counts(p, match[p]);
  return hit / static_cast<double>(pred.size());
}

double nmi(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  const auto table = contingency(pred, truth);
  const double n = static_cast<double>(table.total);
  const std::size_t k = table.counts.rows();
  std::vector<double> rp(k, 0.0), rt(k, 0.0);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      rp[a] += table.counts(a, b);
      rt[b] += table.counts(a, b);
    }
  auto entropy = [n](const std::vector<double>& counts) {
    double h = 0.0;
    for (double c : counts)
      if (c > 0.0) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hp = entropy(rp);
  const double ht = entropy(rt);
  if (hp == 0.0 && ht == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      const double c = table.counts(a, b);
      if (c > 0.0) mi += (c / n) * std::log(c * n / (rp[a] * rt[b]));
    }
  const double denom = 0.5 * (hp + ht);
  return std::clamp(mi / denom, 0.0, 1.0);
}

ClusterProfile cluster_profiles(const Dataset& data, std::span<const std::size_t> assignments,
                                std::optional<std::size_t> clusters) {
  if (assignments.size() != data.rows()) {
    throw DataError("cluster_profiles: " + std::to_string(assignments.size()) + " assignments for " +
                    std::to_string(data.rows()) + " rows");
  }
  std::size_t k = clusters.value_or(0);
  for (auto a : assignments) k = std::max(k, a + 1);

  const Matrix raw = data.Y.cols() > 0 ? Matrix::hconcat(data.raw_X(), data.raw_Y()) : data.raw_X();
  ClusterProfile p;
  p.columns = data.feature_names;
  p.columns.insert(p.columns.end(), data.guide_names.begin(), data.guide_names.end());
  p.counts.assign(k, 0);
  p.stats.assign(k, std::vector<ColumnStats>(raw.cols()));
  for (auto a : assignments) p.counts[a]++;
  for (std::size_t i = 0; i < raw.rows(); ++i)
    for (std::size_t c = 0; c < raw.cols(); ++c) p.stats[assignments[i]][c].mean += raw(i, c);
  for (std::size_t g = 0; g < k; ++g) {
    if (p.counts[g] == 0) continue;
    for (auto& s : p.stats[g]) s.mean /= static_cast<double>(p.counts[g]);
  }
  for (std::size_t i = 0; i < raw.rows(); ++i)
    for (std::size_t c = 0; c < raw.cols(); ++c) {
      const double d = raw(i, c) - p.stats[assignments[i]][c].mean;
      p.stats[assignments[i]][c].sd += d * d;
    }
  for (std::size_t g = 0; g < k; ++g) {
    if (p.counts[g] == 0) continue;
    for (auto& s : p.stats[g]) s.sd = std::sqrt(s.sd / static_cast<double>(p.counts[g]));
  }
  return p;
}

void write_profile_csv(std::ostream& out, const ClusterProfile& p) {
  out << "cluster,count";
  for (const auto& c : p.columns) out << ',' << c << "_mean," << c << "_sd";
  out << '\n';
  for (std::size_t g = 0; g < p.counts.size(); ++g) {
    out << g << ',' << p.counts[g];
    for (const auto& s : p.stats[g]) {
      if (p.counts[g] == 0) {
        out << ",,";
      } else {
        out << ',' << format_double(s.mean) << ',' << format_double(s.sd);
      }
    }
    out << '\n';
  }
}

void write_profile_text(std::ostream& out, const ClusterProfile& p) {
  std::size_t name_w = 8;
  for (const auto& c : p.columns) name_w = std::max(name_w, c.size());
  constexpr int cell_w = 22;
  out << std::left << std::setw(static_cast<int>(name_w)) << "column";
  for (std::size_t g = 0; g < p.counts.size(); ++g) {
    std::ostringstream h;
    h << "cluster " << g << " (n=" << p.counts[g] << ")";
    out << "  " << std::setw(cell_w) << h.str();
  }
  out << '\n';
  for (std::size_t c = 0; c < p.columns.size(); ++c) {
    out << std::left << std::setw(static_cast<int>(name_w)) << p.columns[c];
    for (std::size_t g = 0; g < p.counts.size(); ++g) {
      std::ostringstream cell;
      if (p.counts[g] > 0) {
        cell << std::fixed << std::setprecision(3) << p.stats[g][c].mean << " +/- " << p.stats[g][c].sd;
      }
      out << "  " << std::setw(cell_w) << cell.str();
    }
    out << '\n';
  }
}

}  // namespace gcvae
