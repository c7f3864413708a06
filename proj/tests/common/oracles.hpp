#pragma once

// Independent reference computations shared by unit and acceptance tests. None of these
// call into the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gcvae/gmm.hpp"
#include "gcvae/matrix.hpp"
#include "gcvae/objective.hpp"

namespace oracle {

/// Minimum total cost over all permutations.
inline double brute_force_min_cost(const gcvae::Matrix& cost) {
  std::vector<std::size_t> perm(cost.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t r = 0; r < perm.size(); ++r) s += cost(r, perm[r]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Accuracy maximized over every relabeling of predicted clusters (k <= 8).
inline double brute_force_accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth,
                                   std::size_t k) {
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += perm[pred[i]] == truth[i];
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(pred.size());
}

/// Adaptive Gauss-Kronrod value of the integral of N(z; mq, sq^2) log N(z; mp, sp^2).
inline double quadrature_expected_logpdf(double mq, double sq, double mp, double sp) {
  const double pi = std::numbers::pi;
  auto f = [&](double z) {
    const double q = std::exp(-0.5 * (z - mq) * (z - mq) / (sq * sq)) / (sq * std::sqrt(2 * pi));
    const double logp = -0.5 * std::log(2 * pi * sp * sp) - 0.5 * (z - mp) * (z - mp) / (sp * sp);
    return q * logp;
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, mq - 14 * sq, mq + 14 * sq, 20, 1e-14,
                                                                        &err);
}

/// Plain Lloyd k-means with random-row initialization; best inertia over `restarts`.
inline std::vector<std::size_t> lloyd_kmeans(const gcvae::Matrix& X, std::size_t k, std::size_t restarts,
                                             std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<std::size_t> pick(0, X.rows() - 1);
  const std::size_t n = X.rows(), d = X.cols();
  std::vector<std::size_t> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    std::vector<std::vector<double>> centers(k);
    for (auto& c : centers) {
      const auto row = X.row(pick(gen));
      c.assign(row.begin(), row.end());
    }
    std::vector<std::size_t> assign(n, 0);
    double inertia = 0.0;
    for (int it = 0; it < 100; ++it) {
      inertia = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          double s = 0.0;
          for (std::size_t j = 0; j < d; ++j) s += (X(i, j) - centers[c][j]) * (X(i, j) - centers[c][j]);
          if (s < bd) {
            bd = s;
            assign[i] = c;
          }
        }
        inertia += bd;
      }
      std::vector<std::vector<double>> sum(k, std::vector<double>(d, 0.0));
      std::vector<std::size_t> cnt(k, 0);
      for (std::size_t i = 0; i < n; ++i) {
        cnt[assign[i]]++;
        for (std::size_t j = 0; j < d; ++j) sum[assign[i]][j] += X(i, j);
      }
      for (std::size_t c = 0; c < k; ++c)
        if (cnt[c] > 0)
          for (std::size_t j = 0; j < d; ++j) centers[c][j] = sum[c][j] / cnt[c];
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = assign;
    }
  }
  return best;
}

struct McEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Monte-Carlo estimate of sum_i KL[q(z|x_i) q(c|x_i) || p(z, c)] from joint draws (z, c) per row,
/// with std::mt19937_64 noise unrelated to the library's generator.
inline McEstimate mc_kl(const gcvae::EncoderOutput& enc, const gcvae::Matrix& q, const gcvae::GmmParams& gmm,
                        std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const std::size_t J = enc.mu.cols(), K = q.cols();
  std::vector<double> pi(K);
  {
    const double m = *std::max_element(gmm.logits.begin(), gmm.logits.end());
    double s = 0.0;
    for (std::size_t c = 0; c < K; ++c) s += (pi[c] = std::exp(gmm.logits[c] - m));
    for (auto& p : pi) p /= s;
  }
  auto log_normal = [](double z, double m, double lv) {
    return -0.5 * (std::log(2 * std::numbers::pi) + lv + (z - m) * (z - m) / std::exp(lv));
  };
  McEstimate total;
  double var_sum = 0.0;
  for (std::size_t i = 0; i < enc.mu.rows(); ++i) {
    double s = 0.0, ss = 0.0;
    std::vector<double> z(J);
    for (std::size_t d = 0; d < draws; ++d) {
      double log_q = 0.0;
      for (std::size_t j = 0; j < J; ++j) {
        z[j] = enc.mu(i, j) + std::exp(0.5 * enc.log_var(i, j)) * normal(gen);
        log_q += log_normal(z[j], enc.mu(i, j), enc.log_var(i, j));
      }
      const double u = unif(gen);
      std::size_t c = 0;
      double cum = q(i, 0);
      while (u > cum && c + 1 < K) cum += q(i, ++c);
      double log_p = std::log(pi[c]);
      for (std::size_t j = 0; j < J; ++j) log_p += log_normal(z[j], gmm.mu(c, j), gmm.log_var(c, j));
      const double v = log_q + std::log(q(i, c)) - log_p;
      s += v;
      ss += v * v;
    }
    const double mean = s / draws;
    const double var = (ss / draws - mean * mean) * draws / (draws - 1.0);
    total.mean += mean;
    var_sum += var / draws;
  }
  total.standard_error = std::sqrt(var_sum);
  return total;
}

}  // namespace oracle
