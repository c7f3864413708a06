#include "gcvae/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "gcvae/errors.hpp"
#include "gcvae/kernels.hpp"
#include "gcvae/numerics.hpp"

namespace gcvae {

ElboBreakdown& ElboBreakdown::operator+=(const ElboBreakdown& o) {
  recon += o.recon;
  cross_entropy_zc += o.cross_entropy_zc;
  log_prior_c += o.log_prior_c;
  entropy_z += o.entropy_z;
  entropy_c += o.entropy_c;
  total += o.total;
  return *this;
}

ElboBreakdown& ElboBreakdown::operator*=(double s) {
  recon *= s;
  cross_entropy_zc *= s;
  log_prior_c *= s;
  entropy_z *= s;
  entropy_c *= s;
  total *= s;
  return *this;
}

EncoderOutput split_encoder_head(const Matrix& head, double var_floor) {
  if (head.cols() == 0 || head.cols() % 2 != 0) {
    throw std::invalid_argument("encode: encoder output width " + std::to_string(head.cols()) +
                                " is not 2J");
  }
  const std::size_t J = head.cols() / 2;
  EncoderOutput out{head.col_block(0, J), head.col_block(J, J)};
  const double lo = std::log(var_floor);
  for (auto& v : out.log_var.flat()) v = std::clamp(v, lo, kMaxLogVar);
  return out;
}

EncoderOutput encode(const MlpParams& encoder, const Matrix& X, double var_floor) {
  return split_encoder_head(mlp_forward(encoder, X), var_floor);
}

LatentSample latent_from_noise(const EncoderOutput& enc, Matrix eps) {
  require_same_shape(enc.mu, eps, "latent_from_noise");
  LatentSample s{Matrix(enc.rows(), enc.dim()), std::move(eps)};
  for (std::size_t k = 0; k < s.z.size(); ++k) {
    s.z.data()[k] = enc.mu.data()[k] + std::exp(0.5 * enc.log_var.data()[k]) * s.eps.data()[k];
  }
  return s;
}

std::vector<LatentSample> reparameterize(Rng& rng, const EncoderOutput& enc, std::size_t L) {
  if (L == 0) throw std::invalid_argument("reparameterize: L must be >= 1");
  std::vector<LatentSample> out;
  out.reserve(L);
  for (std::size_t l = 0; l < L; ++l) out.push_back(latent_from_noise(enc, sample_standard_normal(rng, enc.rows(), enc.dim())));
  return out;
}

ClusterPosterior cluster_posterior(const GmmParams& gmm, std::span<const LatentSample> samples) {
  if (samples.empty()) throw std::invalid_argument("cluster_posterior: need at least one sample");
  const std::size_t n = samples.front().z.rows();
  const std::size_t K = gmm.components();
  ClusterPosterior out{Matrix(n, K)};
  const double inv_l = 1.0 / static_cast<double>(samples.size());
  kernels::for_each_row(n, [&](std::size_t i) {
    auto row = out.q.row(i);
    for (const auto& s : samples) {
      const auto r = gmm_responsibilities(gmm, s.z.row(i));
      for (std::size_t c = 0; c < K; ++c) row[c] += r[c];
    }
    if (samples.size() > 1) {
      for (auto& v : row) v *= inv_l;
    }
  });
  return out;
}

namespace {

double sum_rows(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

void require_finite(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericalError(std::string("elbo: non-finite ") + term);
}

// Terms 2-5 for a GMM prior, or the standard-normal pretraining prior when gmm == nullptr.
void prior_terms(const GmmParams* gmm, const EncoderOutput& enc, const ClusterPosterior* q, ElboBreakdown& out) {
  const std::size_t n = enc.rows();
  const std::size_t J = enc.dim();
  std::vector<double> t2(n, 0.0), t3(n, 0.0), t4(n, 0.0), t5(n, 0.0);
  if (gmm) {
    if (gmm->dim() != J) throw std::invalid_argument("elbo: prior dimension does not match encoder");
    if (!q || q->q.rows() != n || q->q.cols() != gmm->components()) {
      throw std::invalid_argument("elbo: posterior shape mismatch");
    }
    const auto log_pi = gmm->log_pi();
    const std::size_t K = gmm->components();
    kernels::for_each_row(n, [&](std::size_t i) {
      double a2 = 0.0, a3 = 0.0, a5 = 0.0;
      for (std::size_t c = 0; c < K; ++c) {
        const double qc = q->q(i, c);
        if (qc == 0.0) continue;
        double inner = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
          const double lvp = gmm->log_var(c, j);
          const double d = enc.mu(i, j) - gmm->mu(c, j);
          inner += lvp + std::exp(enc.log_var(i, j) - lvp) + d * d * std::exp(-lvp);
        }
        a2 += qc * inner;
        a3 += qc * log_pi[c];
        a5 += qc * std::log(qc);
      }
      t2[i] = -0.5 * a2;
      t3[i] = a3;
      t5[i] = -a5;
    });
  } else {
    kernels::for_each_row(n, [&](std::size_t i) {
      double a2 = 0.0;
      for (std::size_t j = 0; j < J; ++j) a2 += std::exp(enc.log_var(i, j)) + enc.mu(i, j) * enc.mu(i, j);
      t2[i] = -0.5 * a2;
    });
  }
  kernels::for_each_row(n, [&](std::size_t i) {
    double a4 = 0.0;
    for (std::size_t j = 0; j < J; ++j) a4 += 1.0 + enc.log_var(i, j);
    t4[i] = 0.5 * a4;
  });
  out.cross_entropy_zc = sum_rows(t2);
  out.log_prior_c = sum_rows(t3);
  out.entropy_z = sum_rows(t4);
  out.entropy_c = sum_rows(t5);
  require_finite(out.cross_entropy_zc, "cross_entropy_zc (term 2)");
  require_finite(out.log_prior_c, "log_prior_c (term 3)");
  require_finite(out.entropy_z, "entropy_z (term 4)");
  require_finite(out.entropy_c, "entropy_c (term 5)");
}

double squared_error(const Matrix& Y, const Matrix& Yhat) {
  require_same_shape(Y, Yhat, "reconstruction");
  std::vector<double> per_row(Y.rows());
  kernels::for_each_row(Y.rows(), [&](std::size_t i) {
    double s = 0.0;
    for (std::size_t k = 0; k < Y.cols(); ++k) {
      const double d = Y(i, k) - Yhat(i, k);
      s += d * d;
    }
    per_row[i] = s;
  });
  return sum_rows(per_row);
}

double reconstruction(const MlpParams& decoder, const Matrix& Y, std::span<const LatentSample> samples) {
  if (samples.empty()) throw std::invalid_argument("elbo: need at least one sample");
  double acc = 0.0;
  for (const auto& s : samples) acc += squared_error(Y, mlp_forward(decoder, s.z));
  return -acc / static_cast<double>(samples.size());
}

ElboBreakdown assemble(double recon, const GmmParams* gmm, const EncoderOutput& enc, const ClusterPosterior* q,
                       double beta) {
  ElboBreakdown out;
  out.recon = recon;
  require_finite(out.recon, "recon (term 1)");
  prior_terms(gmm, enc, q, out);
  out.beta = beta;
  out.total = out.recon + beta * out.regularizer();
  require_finite(out.total, "total");
  return out;
}

}  // namespace

ElboBreakdown elbo(const MlpParams& decoder, const GmmParams& gmm, const Matrix& Y, const EncoderOutput& enc,
                   std::span<const LatentSample> samples, const ClusterPosterior& q, double beta) {
  return assemble(reconstruction(decoder, Y, samples), &gmm, enc, &q, beta);
}

ElboBreakdown pretrain_elbo(const MlpParams& decoder, const Matrix& Y, const EncoderOutput& enc,
                            std::span<const LatentSample> samples, double beta) {
  return assemble(reconstruction(decoder, Y, samples), nullptr, enc, nullptr, beta);
}

GmmGrads GmmGrads::zeros_like(const GmmParams& g) {
  return {std::vector<double>(g.components(), 0.0), Matrix(g.mu.rows(), g.mu.cols()),
          Matrix(g.log_var.rows(), g.log_var.cols())};
}

std::vector<double> GmmGrads::flat() const {
  std::vector<double> out(logits);
  out.insert(out.end(), mu.values().begin(), mu.values().end());
  out.insert(out.end(), log_var.values().begin(), log_var.values().end());
  return out;
}

std::vector<double> flatten(const GmmParams& g) {
  std::vector<double> out(g.logits);
  out.insert(out.end(), g.mu.values().begin(), g.mu.values().end());
  out.insert(out.end(), g.log_var.values().begin(), g.log_var.values().end());
  return out;
}

void assign_flat(GmmParams& g, std::span<const double> flat) {
  if (flat.size() != g.logits.size() + g.mu.size() + g.log_var.size()) {
    throw std::invalid_argument("assign_flat(GmmParams): size mismatch");
  }
  std::size_t off = 0;
  for (auto& v : g.logits) v = flat[off++];
  for (auto& v : g.mu.flat()) v = flat[off++];
  for (auto& v : g.log_var.flat()) v = flat[off++];
}

ElboGradients elbo_backward(const MlpParams& encoder, const MlpParams& decoder, const GmmParams* gmm,
                            const Matrix& X, const Matrix& Y, double beta, const FrozenDraws& draws,
                            double var_floor) {
  if (X.rows() != Y.rows()) throw std::invalid_argument("elbo_backward: X and Y row counts differ");
  if (draws.eps.empty()) throw std::invalid_argument("elbo_backward: need at least one noise draw");
  const std::size_t n = X.rows();

  MlpCache enc_cache;
  const Matrix head = mlp_forward(encoder, X, &enc_cache);
  const EncoderOutput enc = split_encoder_head(head, var_floor);
  const std::size_t J = enc.dim();

  std::vector<LatentSample> samples;
  samples.reserve(draws.eps.size());
  for (const auto& e : draws.eps) samples.push_back(latent_from_noise(enc, e));

  ElboGradients out;
  if (gmm) out.q = draws.q ? *draws.q : cluster_posterior(*gmm, samples);

  // Term 1 through the decoder and the reparameterized z.
  const double L = static_cast<double>(samples.size());
  Matrix d_mu(n, J), d_lv(n, J);
  out.decoder = MlpGrads::zeros_like(decoder);
  double sq = 0.0;
  for (const auto& s : samples) {
    MlpCache dec_cache;
    const Matrix yhat = mlp_forward(decoder, s.z, &dec_cache);
    if (!yhat.same_shape(Y)) throw std::invalid_argument("elbo_backward: decoder output does not match Y");
    sq += squared_error(Y, yhat);
    Matrix d_yhat(n, Y.cols());
    for (std::size_t k = 0; k < d_yhat.size(); ++k) d_yhat.data()[k] = (2.0 / L) * (Y.data()[k] - yhat.data()[k]);
    auto back = mlp_backward(decoder, dec_cache, d_yhat);
    out.decoder += back.grads;
    for (std::size_t k = 0; k < d_mu.size(); ++k) {
      const double dz = back.dX.data()[k];
      d_mu.data()[k] += dz;
      d_lv.data()[k] += dz * s.eps.data()[k] * 0.5 * std::exp(0.5 * enc.log_var.data()[k]);
    }
  }
  out.value = assemble(-sq / L, gmm, enc, gmm ? &out.q : nullptr, beta);

  // Terms 2 and 4 with respect to the encoder heads; Term 5 is constant under frozen q.
  if (gmm) {
    const std::size_t K = gmm->components();
    kernels::for_each_row(n, [&](std::size_t i) {
      for (std::size_t j = 0; j < J; ++j) {
        double gm = 0.0, gv = 0.0;
        for (std::size_t c = 0; c < K; ++c) {
          const double qc = out.q.q(i, c);
          const double inv_var = std::exp(-gmm->log_var(c, j));
          gm -= qc * (enc.mu(i, j) - gmm->mu(c, j)) * inv_var;
          gv -= 0.5 * qc * std::exp(enc.log_var(i, j)) * inv_var;
        }
        d_mu(i, j) += beta * gm;
        d_lv(i, j) += beta * (gv + 0.5);
      }
    });

    out.gmm = GmmGrads::zeros_like(*gmm);
    const auto pi = gmm->pi();
    double q_mass_total = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
      double q_mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) q_mass += out.q.q(i, c);
      out.gmm.logits[c] = q_mass;
      q_mass_total += q_mass;
    }
    for (std::size_t c = 0; c < K; ++c) out.gmm.logits[c] = beta * (out.gmm.logits[c] - pi[c] * q_mass_total);
    kernels::for_each_row(K, [&](std::size_t c) {
      for (std::size_t j = 0; j < J; ++j) {
        const double inv_var = std::exp(-gmm->log_var(c, j));
        double gm = 0.0, gv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double qc = out.q.q(i, c);
          const double d = enc.mu(i, j) - gmm->mu(c, j);
          gm += qc * d * inv_var;
          gv += qc * (1.0 - std::exp(enc.log_var(i, j)) * inv_var - d * d * inv_var);
        }
        out.gmm.mu(c, j) = beta * gm;
        out.gmm.log_var(c, j) = -0.5 * beta * gv;
      }
    });
  } else {
    kernels::for_each_row(n, [&](std::size_t i) {
      for (std::size_t j = 0; j < J; ++j) {
        d_mu(i, j) -= beta * enc.mu(i, j);
        d_lv(i, j) += beta * 0.5 * (1.0 - std::exp(enc.log_var(i, j)));
      }
    });
  }

  // Back through the log-variance clamp and the encoder.
  const double lo = std::log(var_floor);
  Matrix d_head(n, 2 * J);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      const double raw = head(i, J + j);
      d_head(i, j) = d_mu(i, j);
      d_head(i, J + j) = (raw > lo && raw < kMaxLogVar) ? d_lv(i, j) : 0.0;
    }
  }
  out.encoder = mlp_backward(encoder, enc_cache, d_head).grads;

  for (const auto* g : {&out.encoder, &out.decoder}) {
    for (const auto& v : flatten(*g)) {
      if (!std::isfinite(v)) throw NumericalError("elbo_backward: non-finite network gradient");
    }
  }
  for (double v : out.gmm.flat()) {
    if (!std::isfinite(v)) throw NumericalError("elbo_backward: non-finite prior gradient");
  }
  return out;
}

ElboGradients elbo_backward(const MlpParams& encoder, const MlpParams& decoder, const GmmParams* gmm,
                            const Matrix& X, const Matrix& Y, double beta, std::size_t L, Rng& rng,
                            double var_floor) {
  if (L == 0) throw std::invalid_argument("elbo_backward: L must be >= 1");
  if (encoder.out_dim() % 2 != 0) throw std::invalid_argument("elbo_backward: encoder width is not 2J");
  FrozenDraws draws;
  for (std::size_t l = 0; l < L; ++l) draws.eps.push_back(sample_standard_normal(rng, X.rows(), encoder.out_dim() / 2));
  return elbo_backward(encoder, decoder, gmm, X, Y, beta, draws, var_floor);
}

ElboBreakdown elbo_frozen(const MlpParams& encoder, const MlpParams& decoder, const GmmParams* gmm,
                          const Matrix& X, const Matrix& Y, double beta, const FrozenDraws& draws,
                          double var_floor) {
  const EncoderOutput enc = encode(encoder, X, var_floor);
  std::vector<LatentSample> samples;
  for (const auto& e : draws.eps) samples.push_back(latent_from_noise(enc, e));
  if (!gmm) return pretrain_elbo(decoder, Y, enc, samples, beta);
  const ClusterPosterior q = draws.q ? *draws.q : cluster_posterior(*gmm, samples);
  return elbo(decoder, *gmm, Y, enc, samples, q, beta);
}

std::vector<double> gumbel_softmax_with_noise(std::span<const double> q_row, std::span<const double> noise,
                                              double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax: tau must be > 0");
  if (q_row.size() != noise.size()) throw std::invalid_argument("gumbel_softmax: noise length mismatch");
  std::vector<double> out(q_row.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double lq = std::log(std::max(q_row[c], std::numeric_limits<double>::min()));
    out[c] = (lq + noise[c]) / tau;
  }
  softmax_inplace(out);
  return out;
}

std::vector<double> gumbel_softmax_assign(Rng& rng, std::span<const double> q_row, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax: tau must be > 0");
  const auto g = sample_gumbel(rng, q_row.size());
  return gumbel_softmax_with_noise(q_row, g, tau);
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < v.size(); ++c) {
    if (v[c] > v[best]) best = c;
  }
  return best;
}

std::vector<std::size_t> hard_assign(const ClusterPosterior& q) {
  std::vector<std::size_t> out(q.q.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax(q.q.row(i));
  return out;
}

}  // namespace gcvae
