#include "gcvae/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gcvae/errors.hpp"
#include "gcvae/rng.hpp"

namespace gcvae {

double ColumnRange::normalize(double v) const {
  if (constant()) return 0.5;
  return (v - min) / (max - min);
}

double ColumnRange::denormalize(double u) const {
  if (constant()) return min;
  return min + u * (max - min);
}

std::vector<ColumnRange> observe_ranges(const Matrix& M) {
  std::vector<ColumnRange> out(M.cols());
  for (std::size_t j = 0; j < M.cols(); ++j) {
    double lo = M(0, j), hi = M(0, j);
    for (std::size_t i = 1; i < M.rows(); ++i) {
      lo = std::min(lo, M(i, j));
      hi = std::max(hi, M(i, j));
    }
    out[j] = {lo, hi};
  }
  return out;
}

Matrix normalize_columns(const Matrix& M, std::span<const ColumnRange> ranges) {
  if (ranges.size() != M.cols()) throw std::invalid_argument("normalize_columns: range count mismatch");
  Matrix out(M.rows(), M.cols());
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) out(i, j) = ranges[j].normalize(M(i, j));
  return out;
}

Matrix denormalize_columns(const Matrix& M, std::span<const ColumnRange> ranges) {
  if (ranges.size() != M.cols()) throw std::invalid_argument("denormalize_columns: range count mismatch");
  Matrix out(M.rows(), M.cols());
  for (std::size_t i = 0; i < M.rows(); ++i)
    for (std::size_t j = 0; j < M.cols(); ++j) out(i, j) = ranges[j].denormalize(M(i, j));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out = *this;
  out.X = X.gather_rows(idx);
  out.Y = Y.gather_rows(idx);
  if (labels) {
    std::vector<std::size_t> l(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) l[r] = (*labels)[idx[r]];
    out.labels = std::move(l);
  }
  return out;
}

Matrix Dataset::raw_X() const { return denormalize_columns(X, x_ranges); }
Matrix Dataset::raw_Y() const { return denormalize_columns(Y, y_ranges); }

void SyntheticSpec::validate() const {
  if (k_true < 2) throw std::invalid_argument("synthetic: k_true must be >= 2");
  if (n < k_true) throw std::invalid_argument("synthetic: n must be >= k_true");
  if (d_latent_true < 1 || d_y < 1) throw std::invalid_argument("synthetic: dimensions must be >= 1");
  if (d_x < d_latent_true + distractor_dims) {
    throw std::invalid_argument("synthetic: d_x must be >= d_latent_true + distractor_dims");
  }
  if (distractor_dims > 0 && (distractor_rank < 1 || distractor_rank > distractor_dims)) {
    throw std::invalid_argument("synthetic: distractor_rank must lie in [1, distractor_dims]");
  }
  if (!(cluster_separation > 0.0) || distractor_scale < 0.0 || y_noise_sd < 0.0) {
    throw std::invalid_argument("synthetic: separation must be > 0, scales >= 0");
  }
}

namespace {

// K points with all pairwise distances equal to `separation` when K <= dim + 1 (a regular
// simplex); otherwise random directions rescaled so the closest pair sits at `separation`.
Matrix place_means(Rng& rng, std::size_t K, std::size_t dim, double separation) {
  Matrix means(K, dim);
  if (K <= dim + 1) {
    // Orthonormal basis of the centred one-hot vectors, by Gram-Schmidt.
    const double kk = static_cast<double>(K);
    std::vector<std::vector<double>> basis;
    for (std::size_t b = 0; b + 1 < K; ++b) {
      std::vector<double> v(K, -1.0 / kk);
      v[b] += 1.0;
      for (const auto& u : basis) {
        const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
        for (std::size_t k = 0; k < K; ++k) v[k] -= dot * u[k];
      }
      const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      for (auto& x : v) x /= norm;
      basis.push_back(std::move(v));
    }
    const double scale = separation / std::sqrt(2.0);
    for (std::size_t c = 0; c < K; ++c) {
      for (std::size_t b = 0; b + 1 < K; ++b) {
        double coord = 0.0;
        for (std::size_t k = 0; k < K; ++k) coord += ((k == c ? 1.0 : 0.0) - 1.0 / kk) * basis[b][k];
        means(c, b) = scale * coord;
      }
    }
    return means;
  }
  means = sample_standard_normal(rng, K, dim);
  double min_d = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < K; ++a)
    for (std::size_t b = a + 1; b < K; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += (means(a, j) - means(b, j)) * (means(a, j) - means(b, j));
      min_d = std::min(min_d, std::sqrt(s));
    }
  means *= separation / min_d;
  return means;
}

Matrix unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m = sample_standard_normal(rng, rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    const double inv = 1.0 / std::sqrt(s);
    for (double& v : m.row(r)) v *= inv;
  }
  return m;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  Rng means_rng = root.split("means");
  Rng map_rng = root.split("informative-map");
  Rng distractor_rng = root.split("distractor-map");
  Rng sig_rng = root.split("signatures");
  Rng draw_rng = root.split("draws");

  const std::size_t K = spec.k_true;
  const std::size_t d_inf = spec.d_x - spec.distractor_dims;

  SyntheticDataset out;
  out.component_means = place_means(means_rng, K, spec.d_latent_true, spec.cluster_separation);

  const Matrix A = unit_rows(map_rng, d_inf, spec.d_latent_true);
  const Matrix offset = sample_standard_normal(map_rng, 1, d_inf);
  const Matrix B = spec.distractor_dims > 0 ? unit_rows(distractor_rng, spec.distractor_dims, spec.distractor_rank)
                                            : Matrix();

  // Signatures: sqrt(2) * one-hot when d_y >= K (pairwise distance exactly 2), otherwise
  // random points scaled to a minimum pairwise distance of 2.
  if (spec.d_y >= K) {
    out.signatures = Matrix(K, spec.d_y);
    for (std::size_t c = 0; c < K; ++c) out.signatures(c, c) = std::sqrt(2.0);
  } else {
    out.signatures = place_means(sig_rng, K, spec.d_y, 2.0);
  }

  const std::size_t n = spec.n;
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = static_cast<std::size_t>(draw_rng.below(K));
  const Matrix u_noise = sample_standard_normal(draw_rng, n, spec.d_latent_true);
  const Matrix x_noise = sample_standard_normal(draw_rng, n, d_inf);
  const Matrix v = spec.distractor_dims > 0 ? sample_standard_normal(draw_rng, n, spec.distractor_rank) : Matrix();
  const Matrix y_noise = sample_standard_normal(draw_rng, n, spec.d_y);

  Matrix X(n, spec.d_x), Y(n, spec.d_y);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = labels[i];
    std::vector<double> u(spec.d_latent_true);
    for (std::size_t j = 0; j < u.size(); ++j) u[j] = out.component_means(c, j) + u_noise(i, j);
    for (std::size_t f = 0; f < d_inf; ++f) {
      double acc = offset(0, f);
      for (std::size_t j = 0; j < u.size(); ++j) acc += A(f, j) * u[j];
      X(i, f) = acc + 0.1 * x_noise(i, f);
    }
    for (std::size_t f = 0; f < spec.distractor_dims; ++f) {
      double acc = 0.0;
      for (std::size_t r = 0; r < spec.distractor_rank; ++r) acc += B(f, r) * v(i, r);
      X(i, d_inf + f) = spec.distractor_scale * acc;
    }
    for (std::size_t k = 0; k < spec.d_y; ++k) Y(i, k) = out.signatures(c, k) + spec.y_noise_sd * y_noise(i, k);
  }

  Dataset& d = out.data;
  d.x_ranges = observe_ranges(X);
  d.y_ranges = observe_ranges(Y);
  d.X = normalize_columns(X, d.x_ranges);
  d.Y = normalize_columns(Y, d.y_ranges);
  d.labels = std::move(labels);
  for (std::size_t f = 0; f < d_inf; ++f) d.feature_names.push_back("x" + std::to_string(f));
  for (std::size_t f = 0; f < spec.distractor_dims; ++f) d.feature_names.push_back("noise" + std::to_string(f));
  for (std::size_t k = 0; k < spec.d_y; ++k) d.guide_names.push_back("y" + std::to_string(k));
  return out;
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw DataError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return cells;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty (header row required)");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  CsvTable t;
  t.names = split_line(line);
  std::set<std::string> seen;
  for (const auto& n : t.names) {
    if (n.empty()) throw DataError("empty column name in header");
    if (!seen.insert(n).second) throw DataError("duplicate column '" + n + "'");
  }
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != t.names.size()) {
      throw DataError("row " + std::to_string(line_no) + ": expected " + std::to_string(t.names.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto& s = cells[c];
      const auto* first = s.data();
      const auto* last = s.data() + s.size();
      if (!s.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw DataError("non-numeric cell at row " + std::to_string(line_no) + ", column '" + t.names[c] +
                        "': '" + s + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  t.values = Matrix(rows, t.names.size(), std::move(values));
  return t;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t c = 0; c < table.names.size(); ++c) out << (c ? "," : "") << table.names[c];
  out << '\n';
  for (std::size_t i = 0; i < table.values.rows(); ++i) {
    for (std::size_t c = 0; c < table.values.cols(); ++c) out << (c ? "," : "") << format_double(table.values(i, c));
    out << '\n';
  }
}

Dataset dataset_from_table(const CsvTable& table, const std::vector<std::string>& guide_columns,
                           const std::optional<std::string>& label_column) {
  if (table.values.rows() < 10) {
    throw DataError("need at least 10 data rows, found " + std::to_string(table.values.rows()));
  }
  std::vector<std::size_t> guide_idx;
  for (const auto& g : guide_columns) guide_idx.push_back(table.column(g));
  std::optional<std::size_t> label_idx;
  if (label_column) label_idx = table.column(*label_column);

  std::vector<std::size_t> feature_idx;
  for (std::size_t c = 0; c < table.names.size(); ++c) {
    const bool is_guide = std::find(guide_idx.begin(), guide_idx.end(), c) != guide_idx.end();
    if (!is_guide && (!label_idx || c != *label_idx)) feature_idx.push_back(c);
  }
  if (feature_idx.empty()) throw DataError("no feature columns left after removing guide/label columns");

  const std::size_t n = table.values.rows();
  Matrix X(n, feature_idx.size()), Y(n, guide_idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < feature_idx.size(); ++f) X(i, f) = table.values(i, feature_idx[f]);
    for (std::size_t g = 0; g < guide_idx.size(); ++g) Y(i, g) = table.values(i, guide_idx[g]);
  }
  Dataset d;
  for (auto f : feature_idx) d.feature_names.push_back(table.names[f]);
  d.guide_names = guide_columns;
  d.x_ranges = observe_ranges(X);
  d.X = normalize_columns(X, d.x_ranges);
  if (!guide_idx.empty()) {
    d.y_ranges = observe_ranges(Y);
    d.Y = normalize_columns(Y, d.y_ranges);
  } else {
    d.Y = Y;
  }
  if (label_idx) {
    d.label_name = *label_column;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = table.values(i, *label_idx);
      if (v < 0.0 || v != std::floor(v)) {
        throw DataError("label column '" + *label_column + "' row " + std::to_string(i + 2) +
                        ": labels must be non-negative integers");
      }
      labels[i] = static_cast<std::size_t>(v);
    }
    d.labels = std::move(labels);
  }
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const std::vector<std::string>& guide_columns,
                 const std::optional<std::string>& label_column) {
  return dataset_from_table(read_csv(path), guide_columns, label_column);
}

CsvTable to_table(const Dataset& d) {
  CsvTable t;
  t.names = d.feature_names;
  t.names.insert(t.names.end(), d.guide_names.begin(), d.guide_names.end());
  Matrix raw = Matrix::hconcat(d.raw_X(), d.raw_Y());
  if (d.labels) {
    t.names.push_back(d.label_name);
    Matrix lab(d.rows(), 1);
    for (std::size_t i = 0; i < d.rows(); ++i) lab(i, 0) = static_cast<double>((*d.labels)[i]);
    raw = Matrix::hconcat(raw, lab);
  }
  t.values = std::move(raw);
  return t;
}

DataSplit split(const Dataset& d, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw std::invalid_argument("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");
  const std::size_t n = d.rows();
  const auto n_val = static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions[2] * static_cast<double>(n) + 1e-9));
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n) throw DataError("split: a partition would be empty");
  const std::size_t n_train = n - n_val - n_test;

  Rng rng = Rng(seed).split("split");
  std::vector<std::size_t> order;
  if (d.labels && n >= 500) {
    // Stratified: each row gets key (rank within its shuffled class + jitter) / class size,
    // so every contiguous cut holds each class in proportion.
    const auto& labels = *d.labels;
    const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(n);
    for (auto& members : by_class) {
      const auto perm = permutation(rng, members.size());
      for (std::size_t r = 0; r < members.size(); ++r) {
        const double key = (static_cast<double>(r) + rng.uniform()) / static_cast<double>(members.size());
        keyed.emplace_back(key, members[perm[r]]);
      }
    }
    std::sort(keyed.begin(), keyed.end());
    for (const auto& kv : keyed) order.push_back(kv.second);
  } else {
    order = permutation(rng, n);
  }

  DataSplit s;
  s.train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                   order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  s.train = d.subset(s.train_idx);
  s.val = d.subset(s.val_idx);
  s.test = d.subset(s.test_idx);
  return s;
}

}  // namespace gcvae
