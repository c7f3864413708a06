#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gcvae/gmm.hpp"
#include "gcvae/matrix.hpp"
#include "gcvae/nn.hpp"
#include "gcvae/rng.hpp"

namespace gcvae {

inline constexpr double kMaxLogVar = 10.0;

/// Encoder heads: q(z|x) = N(mu_tilde, diag(exp(log_var_tilde))).
struct EncoderOutput {
  Matrix mu;       // n x J
  Matrix log_var;  // n x J, clamped to [log var_floor, kMaxLogVar]

  std::size_t rows() const { return mu.rows(); }
  std::size_t dim() const { return mu.cols(); }
};

/// One Monte-Carlo draw z = mu + exp(log_var / 2) * eps for every row.
struct LatentSample {
  Matrix z;
  Matrix eps;
};

/// q(c|x): one probability vector per row.
struct ClusterPosterior {
  Matrix q;  // n x K
};

/// The developed objective, term by term, each field signed as it enters `total`:
///   total = recon + beta * (cross_entropy_zc + log_prior_c + entropy_z + entropy_c).
/// The -J/2 log 2pi constants of the z cross-entropy and z entropy cancel and are dropped
/// from both; recon drops the Gaussian normalizer and the 1/2 factor.
struct ElboBreakdown {
  double recon = 0.0;
  double cross_entropy_zc = 0.0;
  double log_prior_c = 0.0;
  double entropy_z = 0.0;
  double entropy_c = 0.0;
  double beta = 0.0;
  double total = 0.0;

  /// cross_entropy_zc + log_prior_c + entropy_z + entropy_c = -KL[q(z,c|x) || p(z,c)].
  double regularizer() const { return cross_entropy_zc + log_prior_c + entropy_z + entropy_c; }
  ElboBreakdown& operator+=(const ElboBreakdown& o);
  ElboBreakdown& operator*=(double s);
};

/// Splits a 2J-wide head into (mu, clamped log-variance).
EncoderOutput split_encoder_head(const Matrix& head, double var_floor);

EncoderOutput encode(const MlpParams& encoder, const Matrix& X, double var_floor = kDefaultVarFloor);

/// Rebuild z from stored noise.
LatentSample latent_from_noise(const EncoderOutput& enc, Matrix eps);

std::vector<LatentSample> reparameterize(Rng& rng, const EncoderOutput& enc, std::size_t L);

/// Average over the L samples of p(c|z^(l)).
ClusterPosterior cluster_posterior(const GmmParams& gmm, std::span<const LatentSample> samples);

ElboBreakdown elbo(const MlpParams& decoder, const GmmParams& gmm, const Matrix& Y, const EncoderOutput& enc,
                   std::span<const LatentSample> samples, const ClusterPosterior& q, double beta);

/// Clusterless objective against a standard-normal prior: recon - beta * KL[q(z|x) || N(0, I)].
/// Reported with log_prior_c = entropy_c = 0 and cross_entropy_zc + entropy_z = -KL.
ElboBreakdown pretrain_elbo(const MlpParams& decoder, const Matrix& Y, const EncoderOutput& enc,
                            std::span<const LatentSample> samples, double beta);

/// Gradients of the GMM prior parameters (logits of pi, means, log-variances).
struct GmmGrads {
  std::vector<double> logits;
  Matrix mu;
  Matrix log_var;

  static GmmGrads zeros_like(const GmmParams& g);
  std::vector<double> flat() const;
};

std::vector<double> flatten(const GmmParams& g);
void assign_flat(GmmParams& g, std::span<const double> flat);

struct ElboGradients {
  MlpGrads encoder;
  MlpGrads decoder;
  GmmGrads gmm;  // zero-sized when no prior was given
  ElboBreakdown value;
  ClusterPosterior q;
};

/// Noise and (optionally) a frozen posterior that pin down one evaluation of the objective.
struct FrozenDraws {
  std::vector<Matrix> eps;            // L matrices of n x J
  std::optional<ClusterPosterior> q;  // recomputed from the samples when empty
};

/// Analytic gradients of `total` (ascent direction) with respect to every trainable scalar.
/// q(c|x) is held constant. `gmm == nullptr` selects the pretraining objective.
ElboGradients elbo_backward(const MlpParams& encoder, const MlpParams& decoder, const GmmParams* gmm,
                            const Matrix& X, const Matrix& Y, double beta, const FrozenDraws& draws,
                            double var_floor = kDefaultVarFloor);

/// Same, drawing L fresh noise matrices from rng.
ElboGradients elbo_backward(const MlpParams& encoder, const MlpParams& decoder, const GmmParams* gmm,
                            const Matrix& X, const Matrix& Y, double beta, std::size_t L, Rng& rng,
                            double var_floor = kDefaultVarFloor);

/// Scalar objective for a frozen draw; the finite-difference twin of elbo_backward.
ElboBreakdown elbo_frozen(const MlpParams& encoder, const MlpParams& decoder, const GmmParams* gmm,
                          const Matrix& X, const Matrix& Y, double beta, const FrozenDraws& draws,
                          double var_floor = kDefaultVarFloor);

/// softmax((log q + g) / tau) for given Gumbel noise g.
std::vector<double> gumbel_softmax_with_noise(std::span<const double> q_row, std::span<const double> noise,
                                              double tau);
std::vector<double> gumbel_softmax_assign(Rng& rng, std::span<const double> q_row, double tau);

/// Row-wise argmax; ties resolve to the lowest index.
std::vector<std::size_t> hard_assign(const ClusterPosterior& q);
std::size_t argmax(std::span<const double> v);

}  // namespace gcvae
