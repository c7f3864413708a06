#include "gcvae/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gcvae/errors.hpp"
#include "gcvae/eval.hpp"
#include "gcvae/kernels.hpp"

namespace gcvae {

std::string to_string(TrainMode m) { return m == TrainMode::guided ? "guided" : "unguided_joint"; }

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "guided") return TrainMode::guided;
  if (s == "unguided_joint") return TrainMode::unguided_joint;
  throw ConfigError("field 'mode': expected \"guided\" or \"unguided_joint\", got \"" + s + "\"");
}

std::string to_string(Phase p) { return p == Phase::pretrain ? "pretrain" : "train"; }

double BetaSchedule::at(double beta_train, std::size_t epoch) const {
  if (kind == Kind::constant) return beta_train;
  if (epoch <= start_epoch) return 0.0;
  if (epoch >= end_epoch) return beta_train;
  const double frac = static_cast<double>(epoch - start_epoch) / static_cast<double>(end_epoch - start_epoch);
  return beta_train * frac;
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string("field '") + field + "': must be > 0");
  };
  auto at_least_one = [](std::size_t v, const char* field) {
    if (v < 1) throw ConfigError(std::string("field '") + field + "': must be >= 1");
  };
  at_least_one(K, "K");
  at_least_one(J, "J");
  at_least_one(L, "L");
  at_least_one(epochs_pretrain, "epochs_pretrain");
  at_least_one(epochs_train, "epochs_train");
  at_least_one(batch_size, "batch_size");
  if (!(beta_pretrain >= 0.0) || !std::isfinite(beta_pretrain)) throw ConfigError("field 'beta_pretrain': must be >= 0");
  if (!(beta_train >= 0.0) || !std::isfinite(beta_train)) throw ConfigError("field 'beta_train': must be >= 0");
  positive(lr_net_pretrain, "lr_net_pretrain");
  positive(lr_net, "lr_net");
  positive(lr_gmm, "lr_gmm");
  positive(tau, "tau");
  positive(var_floor, "var_floor");
  for (auto h : encoder_hidden) at_least_one(h, "encoder_hidden");
  for (auto h : decoder_hidden) at_least_one(h, "decoder_hidden");
  if (beta_schedule.kind == BetaSchedule::Kind::linear_ramp && beta_schedule.end_epoch <= beta_schedule.start_epoch) {
    throw ConfigError("field 'beta_schedule': linear_ramp needs end_epoch > start_epoch");
  }
}

DataSchema schema_of(const Dataset& d) { return {d.feature_names, d.guide_names, d.x_ranges, d.y_ranges}; }

Matrix model_input(TrainMode mode, const Matrix& X, const Matrix& Y) {
  return mode == TrainMode::guided ? X : Matrix::hconcat(X, Y);
}

Matrix model_input(TrainMode mode, const Dataset& d) { return model_input(mode, d.X, d.Y); }

Matrix model_target(TrainMode mode, const Dataset& d) {
  return mode == TrainMode::guided ? d.Y : Matrix::hconcat(d.X, d.Y);
}

std::vector<Matrix> inference_noise(std::uint64_t seed, const Matrix& inputs, std::size_t L, std::size_t J) {
  std::vector<Matrix> eps(L, Matrix(inputs.rows(), J));
  const Rng base = Rng(seed).split("infer");
  kernels::for_each_row(inputs.rows(), [&](std::size_t i) {
    const auto row = inputs.row(i);
    Rng r = base.split(Rng::hash_bytes(row.data(), row.size_bytes()));
    for (std::size_t l = 0; l < L; ++l) {
      const Matrix e = sample_standard_normal(r, 1, J);
      std::copy(e.flat().begin(), e.flat().end(), eps[l].row(i).begin());
    }
  });
  return eps;
}

namespace {

struct Evaluation {
  ElboBreakdown value;
  ClusterPosterior q;
  std::vector<std::size_t> assignments;
  Matrix latent;
};

Evaluation evaluate(const TrainConfig& cfg, const MlpParams& encoder, const MlpParams& decoder, const GmmParams* gmm,
                    const Matrix& inputs, const Matrix* targets, double beta) {
  Evaluation ev;
  const EncoderOutput enc = encode(encoder, inputs, cfg.var_floor);
  std::vector<LatentSample> samples;
  for (auto& e : inference_noise(cfg.seed, inputs, cfg.L, enc.dim())) samples.push_back(latent_from_noise(enc, std::move(e)));
  const double inv_n = 1.0 / static_cast<double>(inputs.rows());
  if (gmm) {
    ev.q = cluster_posterior(*gmm, samples);
    ev.assignments = hard_assign(ev.q);
    if (targets) ev.value = elbo(decoder, *gmm, *targets, enc, samples, ev.q, beta);
  } else {
    ev.q.q = Matrix(inputs.rows(), 1, 1.0);
    ev.assignments.assign(inputs.rows(), 0);
    if (targets) ev.value = pretrain_elbo(decoder, *targets, enc, samples, beta);
  }
  const double b = ev.value.beta;
  ev.value *= inv_n;
  ev.value.beta = b;
  ev.latent = enc.mu;
  return ev;
}

std::string context(Phase phase, std::size_t epoch, std::size_t batch) {
  return to_string(phase) + " epoch " + std::to_string(epoch) + " batch " + std::to_string(batch);
}

ElboBreakdown fit_epoch(const TrainConfig& cfg, Phase phase, std::size_t epoch, const Matrix& inputs,
                        const Matrix& targets, MlpParams& encoder, MlpParams& decoder, GmmParams* gmm,
                        AdamState& enc_opt, AdamState& dec_opt, AdamState* gmm_opt, double beta, Rng shuffle,
                        Rng& noise) {
  const std::size_t n = inputs.rows();
  const auto order = permutation(shuffle, n);
  ElboBreakdown sum;
  std::size_t batch = 0;
  for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch) {
    const std::size_t end = std::min(n, start + cfg.batch_size);
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    const Matrix xb = inputs.gather_rows(idx);
    const Matrix yb = targets.gather_rows(idx);
    try {
      auto g = elbo_backward(encoder, decoder, gmm, xb, yb, beta, cfg.L, noise, cfg.var_floor);
      // Minimize -total / batch size.
      const double scale = -1.0 / static_cast<double>(idx.size());
      g.encoder *= scale;
      g.decoder *= scale;
      adam_step(enc_opt, encoder, g.encoder);
      adam_step(dec_opt, decoder, g.decoder);
      if (gmm) {
        auto flat = flatten(*gmm);
        auto grad = g.gmm.flat();
        for (auto& v : grad) v *= scale;
        adam_update(*gmm_opt, flat, grad, "gmm");
        assign_flat(*gmm, flat);
        gmm->apply_var_floor(cfg.var_floor);
      }
      sum += g.value;
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (" + context(phase, epoch, batch) + ")");
    }
  }
  sum *= 1.0 / static_cast<double>(n);
  sum.beta = beta;
  if (!std::isfinite(sum.total)) throw NumericalError("non-finite loss (" + context(phase, epoch, batch) + ")");
  return sum;
}

std::vector<std::size_t> histogram(std::span<const std::size_t> assignments, std::size_t k) {
  std::vector<std::size_t> h(k, 0);
  for (auto a : assignments) h[a]++;
  return h;
}

void attach_label_metrics(EpochMetrics& m, const Dataset& val, std::span<const std::size_t> assignments) {
  if (!val.labels) return;
  m.acc = clustering_accuracy(assignments, *val.labels);
  m.nmi = nmi(assignments, *val.labels);
}

void require_data(const TrainingData& data, TrainMode mode) {
  if (data.train.rows() == 0 || data.val.rows() == 0) throw DataError("training and validation splits must be non-empty");
  if (mode == TrainMode::guided && data.train.Y.cols() == 0) throw DataError("guided training needs guide columns");
}

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

}  // namespace

PretrainResult pretrain(const TrainConfig& config, const TrainingData& data, const TrainingObserver& observer) {
  config.validate();
  require_data(data, config.mode);
  const Matrix inputs = model_input(config.mode, data.train);
  const Matrix targets = model_target(config.mode, data.train);
  const Matrix val_inputs = model_input(config.mode, data.val);
  const Matrix val_targets = model_target(config.mode, data.val);

  const Rng root(config.seed);
  Rng enc_rng = root.split("init-encoder");
  Rng dec_rng = root.split("init-decoder");
  PretrainResult out;
  out.encoder = mlp_init(enc_rng, layer_sizes(inputs.cols(), config.encoder_hidden, 2 * config.J), config.activation);
  out.decoder = mlp_init(dec_rng, layer_sizes(config.J, config.decoder_hidden, targets.cols()), config.activation);

  AdamState enc_opt(config.lr_net_pretrain, out.encoder.parameter_count());
  AdamState dec_opt(config.lr_net_pretrain, out.decoder.parameter_count());
  Rng noise = root.split("pretrain-noise");
  const Rng shuffle = root.split("pretrain-shuffle");
  for (std::size_t epoch = 1; epoch <= config.epochs_pretrain; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.phase = Phase::pretrain;
    m.beta_effective = config.beta_pretrain;
    m.train = fit_epoch(config, Phase::pretrain, epoch, inputs, targets, out.encoder, out.decoder, nullptr, enc_opt,
                        dec_opt, nullptr, config.beta_pretrain, shuffle.split(epoch), noise);
    const auto ev = evaluate(config, out.encoder, out.decoder, nullptr, val_inputs, &val_targets, config.beta_pretrain);
    m.val = ev.value;
    m.occupancy = {val_inputs.rows()};
    if (observer.on_epoch) observer.on_epoch(m);
    if (observer.on_latent) observer.on_latent(m, ev.latent, ev.assignments);
    out.metrics.push_back(std::move(m));
  }
  return out;
}

GmmParams init_gmm_from_latent(const MlpParams& encoder, const Matrix& inputs, std::size_t K, std::uint64_t seed,
                               double var_floor) {
  const EncoderOutput enc = encode(encoder, inputs, var_floor);
  Rng rng = Rng(seed).split("gmm-init");
  EmOptions opt;
  opt.var_floor = var_floor;
  return gmm_fit_em(rng, enc.mu, K, opt).params;
}

TrainResult train(const TrainConfig& config, const TrainingData& data, MlpParams encoder, MlpParams decoder,
                  GmmParams gmm, const TrainingObserver& observer) {
  config.validate();
  require_data(data, config.mode);
  const Matrix inputs = model_input(config.mode, data.train);
  const Matrix targets = model_target(config.mode, data.train);
  const Matrix val_inputs = model_input(config.mode, data.val);
  const Matrix val_targets = model_target(config.mode, data.val);
  if (gmm.components() != config.K || gmm.dim() != config.J) {
    throw std::invalid_argument("train: prior shape does not match config (K, J)");
  }

  const Rng root(config.seed);
  AdamState enc_opt(config.lr_net, encoder.parameter_count());
  AdamState dec_opt(config.lr_net, decoder.parameter_count());
  AdamState gmm_opt(config.lr_gmm, flatten(gmm).size());
  Rng noise = root.split("train-noise");
  const Rng shuffle = root.split("train-shuffle");

  TrainResult out;
  std::size_t low_streak = 0;
  const double low_threshold = 0.01 * static_cast<double>(val_inputs.rows());
  for (std::size_t epoch = 1; epoch <= config.epochs_train; ++epoch) {
    const double beta = config.beta_schedule.at(config.beta_train, epoch);
    EpochMetrics m;
    m.epoch = epoch;
    m.phase = Phase::train;
    m.beta_effective = beta;
    m.train = fit_epoch(config, Phase::train, epoch, inputs, targets, encoder, decoder, &gmm, enc_opt, dec_opt,
                        &gmm_opt, beta, shuffle.split(epoch), noise);
    const auto ev = evaluate(config, encoder, decoder, &gmm, val_inputs, &val_targets, beta);
    m.val = ev.value;
    m.occupancy = histogram(ev.assignments, config.K);
    attach_label_metrics(m, data.val, ev.assignments);

    const bool low = std::any_of(m.occupancy.begin(), m.occupancy.end(),
                                 [&](std::size_t c) { return static_cast<double>(c) < low_threshold; });
    low_streak = low ? low_streak + 1 : 0;
    if (low_streak == 5) {
      std::ostringstream w;
      w << "cluster occupancy below 1% of the validation set for 5 consecutive epochs (epoch " << epoch << ")";
      out.warnings.push_back(w.str());
      if (observer.on_warning) observer.on_warning(w.str());
    }
    if (observer.on_epoch) observer.on_epoch(m);
    if (observer.on_latent) observer.on_latent(m, ev.latent, ev.assignments);
    if (epoch == config.epochs_train) out.final_val_assignments = ev.assignments;
    out.metrics.push_back(std::move(m));
  }

  Checkpoint& ck = out.checkpoint;
  ck.config = config;
  ck.encoder = std::move(encoder);
  ck.decoder = std::move(decoder);
  ck.gmm = std::move(gmm);
  ck.epoch = config.epochs_train;
  ck.rng_state = noise.state();
  ck.schema = schema_of(data.train);
  return out;
}

TrainResult run_pipeline(const TrainConfig& config, const TrainingData& data, const TrainingObserver& observer) {
  auto pre = pretrain(config, data, observer);
  const Matrix inputs = model_input(config.mode, data.train);
  GmmParams gmm = init_gmm_from_latent(pre.encoder, inputs, config.K, config.seed, config.var_floor);
  auto result = train(config, data, std::move(pre.encoder), std::move(pre.decoder), std::move(gmm), observer);
  result.metrics.insert(result.metrics.begin(), pre.metrics.begin(), pre.metrics.end());
  return result;
}

TrainResult run_unguided_baseline(const TrainConfig& config, const TrainingData& data, const TrainingObserver& observer) {
  if (config.mode != TrainMode::unguided_joint) {
    throw ConfigError("field 'mode': run_unguided_baseline requires \"unguided_joint\"");
  }
  return run_pipeline(config, data, observer);
}

InferenceResult infer(const Checkpoint& checkpoint, const Matrix& inputs) {
  if (inputs.cols() != checkpoint.encoder.in_dim()) {
    throw DataError("infer: inputs have " + std::to_string(inputs.cols()) + " columns, model expects " +
                                std::to_string(checkpoint.encoder.in_dim()));
  }
  auto ev = evaluate(checkpoint.config, checkpoint.encoder, checkpoint.decoder, &checkpoint.gmm, inputs, nullptr, 0.0);
  return {std::move(ev.q), std::move(ev.assignments), std::move(ev.latent)};
}

Matrix sample_assignments(const ClusterPosterior& q, double tau, std::uint64_t seed) {
  Matrix out(q.q.rows(), q.q.cols());
  Rng rng = Rng(seed).split("gumbel-assign");
  for (std::size_t i = 0; i < q.q.rows(); ++i) {
    const auto s = gumbel_softmax_assign(rng, q.q.row(i), tau);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace gcvae
