#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gcvae/gmm.hpp"
#include "gcvae/numerics.hpp"

using namespace gcvae;

namespace {

GmmParams random_gmm(Rng& rng, std::size_t K, std::size_t J) {
  std::vector<double> pi(K);
  double s = 0.0;
  for (auto& p : pi) s += (p = 0.2 + rng.uniform());
  for (auto& p : pi) p /= s;
  Matrix mu = sample_standard_normal(rng, K, J);
  mu *= 2.0;
  Matrix lv(K, J);
  for (auto& v : lv.flat()) v = std::log(0.3 + 2.0 * rng.uniform());
  return GmmParams::from_weights(pi, std::move(mu), std::move(lv));
}

// Mixture density evaluated in extended precision from the raw formula.
long double mixture_density(const GmmParams& g, std::span<const double> z) {
  const auto pi = g.pi();
  long double total = 0.0L;
  for (std::size_t c = 0; c < g.components(); ++c) {
    long double dens = pi[c];
    for (std::size_t j = 0; j < z.size(); ++j) {
      const long double var = std::exp(static_cast<long double>(g.log_var(c, j)));
      const long double d = z[j] - g.mu(c, j);
      dens *= std::exp(-d * d / (2 * var)) / std::sqrt(2 * std::numbers::pi_v<long double> * var);
    }
    total += dens;
  }
  return total;
}

Matrix blob_data(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  Matrix Z = sample_standard_normal(rng, n, 2);
  for (std::size_t i = 0; i < n; ++i) Z(i, 0) += (i % 2 == 0) ? 5.0 : -5.0;
  return Z;
}

}  // namespace

TEST_CASE("mixture weights live on the simplex") {
  GmmParams g;
  g.logits = {100.0, -3.0, 0.5};
  g.mu = Matrix(3, 1);
  g.log_var = Matrix(3, 1);
  const auto pi = g.pi();
  double s = 0.0;
  for (double p : pi) {
    CHECK(p > 0.0);
    s += p;
  }
  CHECK(std::abs(s - 1.0) < 1e-9);
  const std::vector<double> bad{0.5, 0.0};
  CHECK_THROWS_AS(GmmParams::from_weights(bad, Matrix(2, 1), Matrix(2, 1)), std::invalid_argument);
}

TEST_CASE("gmm_log_joint examples") {
  const std::vector<double> one{1.0};
  const auto single = GmmParams::from_weights(one, Matrix(1, 2, 0.5), Matrix(1, 2, 0.3));
  const std::vector<double> z{0.1, -0.4};
  const std::vector<double> mu{0.5, 0.5}, lv{0.3, 0.3};
  CHECK(gmm_log_joint(single, z)[0] == doctest::Approx(gaussian_diag_logpdf(z, mu, lv)).epsilon(1e-15));

  const std::vector<double> half{0.5, 0.5};
  const auto twin = GmmParams::from_weights(half, Matrix(2, 2, 0.5), Matrix(2, 2, 0.3));
  const auto lj = gmm_log_joint(twin, z);
  CHECK(lj[0] == lj[1]);
  CHECK(lj[0] == doctest::Approx(gaussian_diag_logpdf(z, mu, lv) - std::log(2.0)).epsilon(1e-14));

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto g = random_gmm(rng, 3, 2);
    const Matrix zz = sample_standard_normal(rng, 1, 2);
    const double lse = log_sum_exp(gmm_log_joint(g, zz.row(0)));
    CHECK(std::abs(lse - static_cast<double>(std::log(mixture_density(g, zz.row(0))))) < 1e-10);
  }
  const std::vector<double> wrong{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(gmm_log_joint(single, wrong), std::invalid_argument);
}

TEST_CASE("gmm_responsibilities examples") {
  const std::vector<double> half{0.5, 0.5};
  Matrix mu(2, 1);
  mu(0, 0) = -1.0;
  mu(1, 0) = 1.0;
  const auto sym = GmmParams::from_weights(half, mu, Matrix(2, 1));
  const std::vector<double> mid{0.0};
  const auto r = gmm_responsibilities(sym, mid);
  CHECK(r[0] == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<double> skew{0.9, 0.1};
  const auto same = GmmParams::from_weights(skew, Matrix(2, 1, 0.3), Matrix(2, 1));
  const auto s = gmm_responsibilities(same, mid);
  CHECK(s[0] == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(s[1] == doctest::Approx(0.1).epsilon(1e-13));

  // Direct Bayes in extended precision.
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto g = random_gmm(rng, 3, 2);
    const Matrix z = sample_standard_normal(rng, 1, 2);
    const auto resp = gmm_responsibilities(g, z.row(0));
    const auto pi = g.pi();
    const long double total = mixture_density(g, z.row(0));
    double sum = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      GmmParams only = GmmParams::from_weights(std::vector<double>{1.0}, g.mu.col_block(0, 2).gather_rows(std::vector<std::size_t>{c}),
                                               g.log_var.gather_rows(std::vector<std::size_t>{c}));
      const long double num = pi[c] * mixture_density(only, z.row(0));
      CHECK(std::abs(resp[c] - static_cast<double>(num / total)) < 1e-12);
      sum += resp[c];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }

  // Far-away inputs still give a probability vector.
  const std::vector<double> far{1e6};
  const auto f = gmm_responsibilities(sym, far);
  CHECK(f[1] == 1.0);
  CHECK(f[0] >= 0.0);
}

TEST_CASE("apply_var_floor") {
  const std::vector<double> one{1.0};
  auto g = GmmParams::from_weights(one, Matrix(1, 2), Matrix(1, 2, -50.0));
  g.apply_var_floor(1e-4);
  CHECK(g.log_var(0, 0) == std::log(1e-4));
}

TEST_CASE("kmeans_plus_plus and kmeans") {
  const Matrix Z = blob_data(8, 400);
  Rng a(1), b(1);
  const auto seeds = kmeans_plus_plus(a, Z, 2);
  CHECK(seeds == kmeans_plus_plus(b, Z, 2));
  CHECK(seeds.size() == 2);
  Rng c(2);
  const auto km = kmeans(c, Z, 2);
  for (std::size_t i = 2; i < Z.rows(); ++i) CHECK((km.assignment[i] == km.assignment[i % 2]));
  CHECK(km.assignment[0] != km.assignment[1]);
}

TEST_CASE("EM on one Gaussian matches the sample moments") {
  Rng rng(9);
  const std::size_t n = 5000;
  Matrix Z = sample_standard_normal(rng, n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    Z(i, 0) = 1.5 + 2.0 * Z(i, 0);
    Z(i, 1) = -0.5 + 0.5 * Z(i, 1);
  }
  Rng em(10);
  const auto fit = gmm_fit_em(em, Z, 1);
  for (std::size_t j = 0; j < 2; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += Z(i, j);
    m /= n;
    for (std::size_t i = 0; i < n; ++i) v += (Z(i, j) - m) * (Z(i, j) - m);
    v /= n;
    CHECK(std::abs(fit.params.mu(0, j) - m) < 3.0 * std::sqrt(v / n));
    CHECK(std::abs(std::exp(fit.params.log_var(0, j)) - v) < 0.1 * v);
  }
}

TEST_CASE("EM on two separated blobs") {
  const Matrix Z = blob_data(11, 2000);
  Rng rng(12);
  const auto fit = gmm_fit_em(rng, Z, 2);
  const std::size_t right = fit.params.mu(0, 0) > 0 ? 0 : 1;
  CHECK(std::abs(fit.params.mu(right, 0) - 5.0) < 0.1);
  CHECK(std::abs(fit.params.mu(1 - right, 0) + 5.0) < 0.1);
  CHECK(std::abs(fit.params.mu(right, 1)) < 0.1);
  for (double p : fit.params.pi()) CHECK(std::abs(p - 0.5) < 0.05);
  for (std::size_t t = 1; t < fit.log_likelihood.size(); ++t) {
    CHECK(fit.log_likelihood[t] >= fit.log_likelihood[t - 1] - 1e-9);
  }
  for (double lv : fit.params.log_var.flat()) CHECK(lv >= std::log(kDefaultVarFloor));

  Rng again(12);
  CHECK(gmm_fit_em(again, Z, 2).params == fit.params);
}

TEST_CASE("EM preconditions and rescue") {
  Rng rng(13);
  CHECK_THROWS_AS(gmm_fit_em(rng, Matrix(2, 2), 3), std::invalid_argument);

  // Duplicate points: more components than distinct locations forces empty components.
  Matrix Z(40, 1);
  for (std::size_t i = 0; i < 40; ++i) Z(i, 0) = (i < 20) ? 0.0 : 10.0;
  Z(39, 0) = 10.5;
  const auto fit = gmm_fit_em(rng, Z, 3);
  for (double p : fit.params.pi()) CHECK(p > 0.0);
  CHECK(fit.params.log_var.all_finite());
  CHECK(fit.params.mu.all_finite());
}
