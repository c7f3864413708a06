#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gcvae/data.hpp"
#include "gcvae/errors.hpp"
#include "gcvae/eval.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace gcvae;

namespace {

double nearest_signature_accuracy(const SyntheticDataset& s) {
  const Matrix Y = s.data.raw_Y();
  std::size_t hit = 0;
  for (std::size_t i = 0; i < Y.rows(); ++i) {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t c = 0; c < s.signatures.rows(); ++c) {
      double d = 0.0;
      for (std::size_t k = 0; k < Y.cols(); ++k) d += std::pow(Y(i, k) - s.signatures(c, k), 2);
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    hit += best == (*s.data.labels)[i];
  }
  return static_cast<double>(hit) / Y.rows();
}

}  // namespace

TEST_CASE("synthetic generator: easy mode is K-means separable") {
  SyntheticSpec spec;
  spec.n = 1500;
  spec.distractor_scale = 0.0;
  spec.cluster_separation = 10.0;
  const auto s = generate_synthetic(spec);
  const auto pred = oracle::lloyd_kmeans(s.data.raw_X(), 3, 5, 1);
  CHECK(clustering_accuracy(pred, *s.data.labels) >= 0.99);
}

TEST_CASE("synthetic generator: distractors defeat K-means, y stays decodable") {
  SyntheticSpec spec;  // distractor_scale = 10
  const auto s = generate_synthetic(spec);
  const auto pred = oracle::lloyd_kmeans(s.data.raw_X(), 3, 5, 2);
  CHECK(clustering_accuracy(pred, *s.data.labels) <= 0.6);
  CHECK(nearest_signature_accuracy(s) >= 0.99);

  // Distractor columns are marginally N(0, scale^2) and carry no cluster information.
  const Matrix raw = s.data.raw_X();
  const std::size_t first_noise = spec.d_x - spec.distractor_dims;
  for (std::size_t f = first_noise; f < spec.d_x; ++f) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i) m += raw(i, f);
    m /= raw.rows();
    for (std::size_t i = 0; i < raw.rows(); ++i) v += std::pow(raw(i, f) - m, 2);
    v /= raw.rows();
    CHECK(std::abs(m) < 0.5);
    CHECK(std::abs(std::sqrt(v) - spec.distractor_scale) < 0.5);
  }
}

TEST_CASE("synthetic generator: structure and determinism") {
  SyntheticSpec spec;
  spec.n = 600;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.data.X == b.data.X);
  CHECK(a.data.Y == b.data.Y);
  CHECK(*a.data.labels == *b.data.labels);
  spec.seed = 2;
  CHECK_FALSE(generate_synthetic(spec).data.X == a.data.X);

  for (double v : a.data.X.flat()) CHECK((v >= 0.0 && v <= 1.0));
  for (auto l : *a.data.labels) CHECK(l < 3);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t e = c + 1; e < 3; ++e) {
      double d = 0.0, dm = 0.0;
      for (std::size_t k = 0; k < 3; ++k) d += std::pow(a.signatures(c, k) - a.signatures(e, k), 2);
      for (std::size_t j = 0; j < 2; ++j) dm += std::pow(a.component_means(c, j) - a.component_means(e, j), 2);
      CHECK(std::sqrt(d) >= 2.0 - 1e-12);
      CHECK(std::sqrt(dm) == doctest::Approx(6.0).epsilon(1e-12));
    }

  SyntheticSpec bad;
  bad.k_true = 1;
  CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
  bad = SyntheticSpec{};
  bad.d_x = 10;
  CHECK_THROWS_AS(generate_synthetic(bad), std::invalid_argument);
}

TEST_CASE("load_csv normalization") {
  test_util::TempDir dir;
  const auto path = dir.path / "t.csv";
  {
    std::ofstream f(path);
    f << "age,flat,g\n";
    const double ages[] = {18, 80, 49, 30, 40, 50, 60, 70, 20, 25};
    for (int i = 0; i < 10; ++i) f << ages[i] << ",7," << i << "\n";
  }
  const Dataset d = load_csv(path, {"g"});
  CHECK(d.feature_names == std::vector<std::string>{"age", "flat"});
  CHECK(d.X(2, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.x_ranges[0] == ColumnRange{18.0, 80.0});
  for (std::size_t i = 0; i < 10; ++i) CHECK(d.X(i, 1) == 0.5);
  CHECK(d.raw_X()(2, 0) == doctest::Approx(49.0).epsilon(1e-15));
  CHECK(d.raw_X()(0, 1) == 7.0);
  CHECK_FALSE(d.labels.has_value());

  CHECK_THROWS_WITH_AS(load_csv(path, {"missing"}), doctest::Contains("missing"), DataError);
}

TEST_CASE("load_csv errors") {
  test_util::TempDir dir;
  const auto bad = dir.path / "bad.csv";
  {
    std::ofstream f(bad);
    f << "a,b\n";
    for (int i = 0; i < 12; ++i) f << i << "," << (i == 4 ? "oops" : "1") << "\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(bad, {"a"}), doctest::Contains("row 6, column 'b'"), DataError);

  const auto tiny = dir.path / "tiny.csv";
  {
    std::ofstream f(tiny);
    f << "a,b\n1,2\n3,4\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(tiny, {"a"}), doctest::Contains("at least 10"), DataError);

  const auto labels = dir.path / "labels.csv";
  {
    std::ofstream f(labels);
    f << "a,b,label\n";
    for (int i = 0; i < 10; ++i) f << i << ",1," << (i == 3 ? "0.5" : "1") << "\n";
  }
  CHECK_THROWS_AS(load_csv(labels, {"b"}, std::string("label")), DataError);
}

TEST_CASE("normalization round trip and idempotence") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    Matrix M = sample_standard_normal(rng, 30, 4);
    M *= 1000.0 * rng.uniform();
    const auto ranges = observe_ranges(M);
    const Matrix N = normalize_columns(M, ranges);
    const Matrix back = denormalize_columns(N, ranges);
    for (std::size_t k = 0; k < M.size(); ++k) {
      CHECK(std::abs(back.flat()[k] - M.flat()[k]) <= 1e-12 * std::max(1.0, std::abs(M.flat()[k])));
    }
    const std::vector<ColumnRange> unit(4, ColumnRange{0.0, 1.0});
    CHECK(normalize_columns(N, unit) == N);
  }
}

TEST_CASE("csv round trip of a synthetic dataset") {
  test_util::TempDir dir;
  SyntheticSpec spec;
  spec.n = 100;
  const auto s = generate_synthetic(spec);
  write_csv(dir.path / "s.csv", to_table(s.data));
  const Dataset d = load_csv(dir.path / "s.csv", s.data.guide_names, std::string("label"));
  CHECK(*d.labels == *s.data.labels);
  CHECK(d.feature_names == s.data.feature_names);
  for (std::size_t k = 0; k < d.X.size(); ++k) CHECK(std::abs(d.X.flat()[k] - s.data.X.flat()[k]) < 1e-12);
}

TEST_CASE("split") {
  SyntheticSpec spec;
  spec.n = 1000;
  const Dataset d = generate_synthetic(spec).data;
  const auto s = split(d, {0.7, 0.2, 0.1}, 5);
  CHECK(s.train.rows() == 700);
  CHECK(s.val.rows() == 200);
  CHECK(s.test.rows() == 100);

  std::vector<int> seen(1000, 0);
  for (const auto* idx : {&s.train_idx, &s.val_idx, &s.test_idx})
    for (auto i : *idx) seen[i]++;
  for (int c : seen) CHECK(c == 1);

  const auto again = split(d, {0.7, 0.2, 0.1}, 5);
  CHECK(again.val_idx == s.val_idx);
  CHECK_FALSE(split(d, {0.7, 0.2, 0.1}, 6).val_idx == s.val_idx);

  std::vector<double> share(3, 0.0);
  for (auto l : *d.labels) share[l] += 1.0 / 1000.0;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    std::vector<double> ps(3, 0.0);
    for (auto l : *part->labels) ps[l] += 1.0 / part->rows();
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(ps[c] - share[c]) < 0.05);
  }
  CHECK(s.val.X.row(0)[0] == d.X.row(s.val_idx[0])[0]);

  CHECK_THROWS_AS(split(d, {0.7, 0.2, 0.2}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(d, {1.0, 0.0, 0.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(d.subset(std::vector<std::size_t>{0, 1, 2, 3, 4}), {0.7, 0.2, 0.1}, 1), DataError);
}
