#include "gcvae/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gcvae/kernels.hpp"
#include "gcvae/numerics.hpp"

namespace gcvae {

std::vector<double> GmmParams::pi() const {
  std::vector<double> p(logits);
  softmax_inplace(p);
  return p;
}

std::vector<double> GmmParams::log_pi() const {
  const double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t c = 0; c < logits.size(); ++c) out[c] = logits[c] - lse;
  return out;
}

GmmParams GmmParams::from_weights(std::span<const double> pi, Matrix mu, Matrix log_var) {
  if (pi.size() != mu.rows() || !mu.same_shape(log_var)) {
    throw std::invalid_argument("GmmParams: inconsistent shapes");
  }
  GmmParams g;
  g.logits.resize(pi.size());
  for (std::size_t c = 0; c < pi.size(); ++c) {
    if (!(pi[c] > 0.0)) throw std::invalid_argument("GmmParams: mixture weights must be positive");
    g.logits[c] = std::log(pi[c]);
  }
  g.mu = std::move(mu);
  g.log_var = std::move(log_var);
  return g;
}

void GmmParams::apply_var_floor(double var_floor) {
  const double lo = std::log(var_floor);
  for (auto& v : log_var.flat()) v = std::max(v, lo);
}

std::vector<double> gmm_log_joint(const GmmParams& params, std::span<const double> z) {
  if (z.size() != params.dim()) {
    throw std::invalid_argument("gmm_log_joint: z has length " + std::to_string(z.size()) +
                                ", prior dimension is " + std::to_string(params.dim()));
  }
  const auto log_pi = params.log_pi();
  std::vector<double> out(params.components());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = log_pi[c] + gaussian_diag_logpdf(z, params.mu.row(c), params.log_var.row(c));
  }
  return out;
}

std::vector<double> gmm_responsibilities(const GmmParams& params, std::span<const double> z) {
  auto lj = gmm_log_joint(params, z);
  softmax_inplace(lj);
  return lj;
}

double gmm_log_likelihood(const GmmParams& params, const Matrix& Z) {
  std::vector<double> per_row(Z.rows());
  kernels::for_each_row(Z.rows(), [&](std::size_t i) { per_row[i] = log_sum_exp(gmm_log_joint(params, Z.row(i))); });
  double total = 0.0;
  for (double v : per_row) total += v;
  return total;
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

std::vector<double> column_variance(const Matrix& Z) {
  const std::size_t n = Z.rows();
  std::vector<double> mean(Z.cols(), 0.0), var(Z.cols(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < Z.cols(); ++j) mean[j] += Z(i, j);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < Z.cols(); ++j) {
      const double d = Z(i, j) - mean[j];
      var[j] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(n);
  return var;
}

}  // namespace

std::vector<std::size_t> kmeans_plus_plus(Rng& rng, const Matrix& Z, std::size_t K) {
  const std::size_t n = Z.rows();
  if (K == 0 || n < K) throw std::invalid_argument("kmeans++: need n >= K >= 1");
  std::vector<std::size_t> seeds;
  seeds.push_back(static_cast<std::size_t>(rng.below(n)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < K) {
    const auto last = Z.row(seeds.back());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(Z.row(i), last));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // All points coincide with chosen seeds.
      pick = static_cast<std::size_t>(rng.below(n));
    }
    seeds.push_back(pick);
  }
  return seeds;
}

KMeansResult kmeans(Rng& rng, const Matrix& Z, std::size_t K, std::size_t max_iters, std::size_t restarts) {
  const std::size_t n = Z.rows();
  const std::size_t J = Z.cols();
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    const auto seeds = kmeans_plus_plus(rng, Z, K);
    Matrix centers = Z.gather_rows(seeds);
    std::vector<std::size_t> assign(n, K);
    double inertia = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
      std::vector<std::size_t> next(n);
      std::vector<double> dist(n);
      kernels::for_each_row(n, [&](std::size_t i) {
        double bd = std::numeric_limits<double>::infinity();
        std::size_t bc = 0;
        for (std::size_t c = 0; c < K; ++c) {
          const double d = squared_distance(Z.row(i), centers.row(c));
          if (d < bd) {
            bd = d;
            bc = c;
          }
        }
        next[i] = bc;
        dist[i] = bd;
      });
      inertia = 0.0;
      for (double d : dist) inertia += d;
      const bool changed = next != assign;
      assign = std::move(next);
      if (!changed) break;
      Matrix sums(K, J);
      std::vector<std::size_t> counts(K, 0);
      for (std::size_t i = 0; i < n; ++i) {
        counts[assign[i]]++;
        for (std::size_t j = 0; j < J; ++j) sums(assign[i], j) += Z(i, j);
      }
      for (std::size_t c = 0; c < K; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t j = 0; j < J; ++j) centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
      }
    }
    if (inertia < best.inertia) {
      best.centers = centers;
      best.assignment = assign;
      best.inertia = inertia;
    }
  }
  return best;
}

EmResult gmm_fit_em(Rng& rng, const Matrix& Z, std::size_t K, const EmOptions& options) {
  const std::size_t n = Z.rows();
  const std::size_t J = Z.cols();
  if (J == 0) throw std::invalid_argument("gmm_fit_em: latent dimension must be >= 1");
  if (K == 0 || n < K) {
    throw std::invalid_argument("gmm_fit_em: need n >= K (n=" + std::to_string(n) + ", K=" + std::to_string(K) + ")");
  }
  const double log_floor = std::log(options.var_floor);
  const auto global_var = column_variance(Z);

  Matrix init_log_var(K, J);
  for (std::size_t c = 0; c < K; ++c)
    for (std::size_t j = 0; j < J; ++j) init_log_var(c, j) = std::max(std::log(global_var[j]), log_floor);
  const std::vector<double> uniform(K, 1.0 / static_cast<double>(K));

  EmResult result;
  result.params = GmmParams::from_weights(uniform, Z.gather_rows(kmeans_plus_plus(rng, Z, K)), init_log_var);
  GmmParams& g = result.params;

  Matrix resp(n, K);
  std::vector<double> row_ll(n);
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < options.max_iters; ++it) {
    // E-step
    kernels::for_each_row(n, [&](std::size_t i) {
      auto lj = gmm_log_joint(g, Z.row(i));
      const double lse = log_sum_exp(lj);
      row_ll[i] = lse;
      for (std::size_t c = 0; c < K; ++c) resp(i, c) = std::exp(lj[c] - lse);
    });
    double ll = 0.0;
    for (double v : row_ll) ll += v;
    result.log_likelihood.push_back(ll);
    result.iterations = it + 1;
    if (it > 0 && (ll - prev) / static_cast<double>(n) < options.tol) break;
    prev = ll;

    // M-step
    std::vector<double> mass(K, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < K; ++c) mass[c] += resp(i, c);

    for (std::size_t c = 0; c < K; ++c) {
      if (mass[c] < 1e-8) {
        // Rescue: move the empty component onto the worst-explained datum.
        std::size_t worst = 0;
        double worst_max = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
          double m = 0.0;
          for (std::size_t k = 0; k < K; ++k) m = std::max(m, resp(i, k));
          if (m < worst_max) {
            worst_max = m;
            worst = i;
          }
        }
        for (std::size_t j = 0; j < J; ++j) {
          g.mu(c, j) = Z(worst, j);
          g.log_var(c, j) = std::max(std::log(global_var[j]), log_floor);
        }
        mass[c] = 1.0;
        result.rescues++;
        continue;
      }
      for (std::size_t j = 0; j < J; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += resp(i, c) * Z(i, j);
        const double m = s / mass[c];
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = Z(i, j) - m;
          v += resp(i, c) * d * d;
        }
        g.mu(c, j) = m;
        g.log_var(c, j) = std::max(std::log(v / mass[c]), log_floor);
      }
    }
    double total_mass = 0.0;
    for (double m : mass) total_mass += m;
    for (std::size_t c = 0; c < K; ++c) g.logits[c] = std::log(mass[c] / total_mass);
  }
  result.log_likelihood.push_back(gmm_log_likelihood(g, Z));
  return result;
}

}  // namespace gcvae
