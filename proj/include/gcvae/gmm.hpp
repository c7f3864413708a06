#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gcvae/matrix.hpp"
#include "gcvae/rng.hpp"

namespace gcvae {

inline constexpr double kDefaultVarFloor = 1e-4;

/// Latent mixture prior p(z, c) = Cat(c; pi) N(z; mu_c, diag(exp(log_var_c))).
/// Mixture weights live as unconstrained logits so gradient steps stay on the simplex.
struct GmmParams {
  std::vector<double> logits;  // K
  Matrix mu;                   // K x J
  Matrix log_var;              // K x J

  std::size_t components() const { return logits.size(); }
  std::size_t dim() const { return mu.cols(); }
  std::vector<double> pi() const;
  std::vector<double> log_pi() const;

  /// Build from explicit weights (must be positive); logits = log(pi).
  static GmmParams from_weights(std::span<const double> pi, Matrix mu, Matrix log_var);
  /// Clamp every log-variance to >= log(var_floor).
  void apply_var_floor(double var_floor);
  friend bool operator==(const GmmParams&, const GmmParams&) = default;
};

/// Entry c = log pi_c + log N(z; mu_c, sigma_c^2).
std::vector<double> gmm_log_joint(const GmmParams& params, std::span<const double> z);

/// p(c | z): softmax of gmm_log_joint.
std::vector<double> gmm_responsibilities(const GmmParams& params, std::span<const double> z);

/// Mixture log-density log p(z), summed over the rows of Z.
double gmm_log_likelihood(const GmmParams& params, const Matrix& Z);

/// k-means++ seeding: returns K row indices of Z.
std::vector<std::size_t> kmeans_plus_plus(Rng& rng, const Matrix& Z, std::size_t K);

struct KMeansResult {
  Matrix centers;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
};

/// Lloyd iterations from k-means++ seeds; best of `restarts`.
KMeansResult kmeans(Rng& rng, const Matrix& Z, std::size_t K, std::size_t max_iters = 100,
                    std::size_t restarts = 4);

struct EmOptions {
  std::size_t max_iters = 200;
  double tol = 1e-6;  // on the per-point average log-likelihood
  double var_floor = kDefaultVarFloor;
};

struct EmResult {
  GmmParams params;
  std::vector<double> log_likelihood;  // total data log-likelihood before each M-step, then final
  std::size_t iterations = 0;
  std::size_t rescues = 0;  // empty components re-seeded
};

/// Diagonal-covariance EM from k-means++ means. Throws std::invalid_argument when n < K.
EmResult gmm_fit_em(Rng& rng, const Matrix& Z, std::size_t K, const EmOptions& options = {});

}  // namespace gcvae
