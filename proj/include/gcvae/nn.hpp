#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gcvae/matrix.hpp"
#include "gcvae/rng.hpp"

namespace gcvae {

enum class Activation { tanh, relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Matrix weight;             // out x in
  std::vector<double> bias;  // out
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Feed-forward network. The last layer is always identity: outputs are raw heads.
struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  std::size_t parameter_count() const;
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct LayerGrads {
  Matrix weight;
  std::vector<double> bias;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;

  static MlpGrads zeros_like(const MlpParams& p);
  void zero();
  MlpGrads& operator+=(const MlpGrads& o);
  MlpGrads& operator*=(double s);
};

/// Per-layer activations recorded by mlp_forward.
struct MlpCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activations
  std::vector<Matrix> post;  // layer outputs
};

/// Glorot-normal weights, zero biases. `hidden_activation` applies to every layer but the last.
MlpParams mlp_init(Rng& rng, std::span<const std::size_t> layer_sizes, Activation hidden_activation);

Matrix mlp_forward(const MlpParams& params, const Matrix& X, MlpCache* cache = nullptr);

struct MlpBackward {
  Matrix dX;
  MlpGrads grads;
};

MlpBackward mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix& dY);

/// Flat views used by optimizers and finite-difference checks (layer order, weights then bias).
std::vector<double> flatten(const MlpParams& p);
std::vector<double> flatten(const MlpGrads& g);
void assign_flat(MlpParams& p, std::span<const double> flat);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  AdamState() = default;
  AdamState(double learning_rate, std::size_t n_params)
      : lr(learning_rate), m(n_params, 0.0), v(n_params, 0.0) {}
};

/// One bias-corrected Adam descent step on a flat parameter block. `what` names the
/// block in the overflow error.
void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads,
                 const std::string& what = "params");

/// Descent step on a whole network; throws NumericalError("gradient overflow ...") naming the
/// first layer holding a non-finite gradient.
void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads);

}  // namespace gcvae
