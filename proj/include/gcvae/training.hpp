#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcvae/data.hpp"
#include "gcvae/gmm.hpp"
#include "gcvae/nn.hpp"
#include "gcvae/objective.hpp"
#include "gcvae/rng.hpp"

namespace gcvae {

enum class TrainMode { guided, unguided_joint };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

/// beta_effective(epoch) = beta_train for `constant`; for `linear_ramp` it rises linearly from
/// 0 at start_epoch to beta_train at end_epoch and stays there.
struct BetaSchedule {
  enum class Kind { constant, linear_ramp };
  Kind kind = Kind::constant;
  std::size_t start_epoch = 0;
  std::size_t end_epoch = 0;

  double at(double beta_train, std::size_t epoch) const;
  friend bool operator==(const BetaSchedule&, const BetaSchedule&) = default;
};

struct TrainConfig {
  std::size_t K = 3;
  std::size_t J = 2;
  std::size_t L = 1;
  double beta_pretrain = 0.001;
  double beta_train = 0.01;
  BetaSchedule beta_schedule;
  double lr_net_pretrain = 0.0005;
  double lr_net = 0.0001;
  double lr_gmm = 0.00001;
  std::size_t epochs_pretrain = 5;
  std::size_t epochs_train = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::vector<std::size_t> decoder_hidden{64, 64};
  Activation activation = Activation::tanh;
  double tau = 0.5;
  double var_floor = kDefaultVarFloor;
  TrainMode mode = TrainMode::guided;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Column layout and normalization the model was trained on.
struct DataSchema {
  std::vector<std::string> feature_names;
  std::vector<std::string> guide_names;
  std::vector<ColumnRange> x_ranges;
  std::vector<ColumnRange> y_ranges;
  friend bool operator==(const DataSchema&, const DataSchema&) = default;
};

DataSchema schema_of(const Dataset& d);

inline constexpr const char* kCheckpointVersion = "gcvae-checkpoint/1";

struct Checkpoint {
  std::string version = kCheckpointVersion;
  TrainConfig config;
  MlpParams encoder;
  MlpParams decoder;
  GmmParams gmm;
  std::size_t epoch = 0;
  Rng::State rng_state;
  DataSchema schema;
};

enum class Phase { pretrain, train };
std::string to_string(Phase p);

struct EpochMetrics {
  std::size_t epoch = 0;
  Phase phase = Phase::pretrain;
  ElboBreakdown train;  // per-sample averages over the epoch's mini-batches
  ElboBreakdown val;    // per-sample averages with frozen parameters
  double beta_effective = 0.0;
  std::vector<std::size_t> occupancy;  // validation hard-assignment histogram
  std::optional<double> acc;
  std::optional<double> nmi;
};

struct TrainingObserver {
  std::function<void(const EpochMetrics&)> on_epoch;
  /// Validation latent means and assignments after each epoch (optional snapshots).
  std::function<void(const EpochMetrics&, const Matrix&, std::span<const std::size_t>)> on_latent;
  std::function<void(const std::string&)> on_warning;
};

struct TrainingData {
  Dataset train;
  Dataset val;
};

/// Encoder input and reconstruction target for a mode: guided uses (X, Y); the unguided
/// baseline feeds concat(X, Y) and reconstructs it.
Matrix model_input(TrainMode mode, const Dataset& d);
Matrix model_target(TrainMode mode, const Dataset& d);
Matrix model_input(TrainMode mode, const Matrix& X, const Matrix& Y);

struct PretrainResult {
  MlpParams encoder;
  MlpParams decoder;
  std::vector<EpochMetrics> metrics;
};

PretrainResult pretrain(const TrainConfig& config, const TrainingData& data, const TrainingObserver& observer = {});

GmmParams init_gmm_from_latent(const MlpParams& encoder, const Matrix& inputs, std::size_t K, std::uint64_t seed,
                               double var_floor = kDefaultVarFloor);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
  std::vector<std::string> warnings;
  std::vector<std::size_t> final_val_assignments;
};

/// Guided phase from initialized components.
TrainResult train(const TrainConfig& config, const TrainingData& data, MlpParams encoder, MlpParams decoder,
                  GmmParams gmm, const TrainingObserver& observer = {});

/// pretrain -> init_gmm_from_latent -> train for whichever mode the config names.
TrainResult run_pipeline(const TrainConfig& config, const TrainingData& data, const TrainingObserver& observer = {});

/// The same pipeline on concat(X, Y); requires mode == unguided_joint.
TrainResult run_unguided_baseline(const TrainConfig& config, const TrainingData& data,
                                  const TrainingObserver& observer = {});

struct InferenceResult {
  ClusterPosterior q;
  std::vector<std::size_t> assignments;
  Matrix latent;  // encoder means
};

/// Noise for row i is drawn from a stream keyed by (seed, bits of row i), so a row's
/// posterior does not depend on which other rows share the call.
std::vector<Matrix> inference_noise(std::uint64_t seed, const Matrix& inputs, std::size_t L, std::size_t J);

/// Cluster posterior, hard assignments and latent means from encoder inputs only.
InferenceResult infer(const Checkpoint& checkpoint, const Matrix& inputs);

/// Gumbel-Softmax relaxed assignment of every posterior row at temperature tau.
Matrix sample_assignments(const ClusterPosterior& q, double tau, std::uint64_t seed);

}  // namespace gcvae
