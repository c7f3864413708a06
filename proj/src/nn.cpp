#include "gcvae/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gcvae/errors.hpp"
#include "gcvae/kernels.hpp"

namespace gcvae {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& p) {
  MlpGrads g;
  g.layers.reserve(p.layers.size());
  for (const auto& l : p.layers) {
    g.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size())});
  }
  return g;
}

void MlpGrads::zero() {
  for (auto& l : layers) {
    l.weight.fill(0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

MlpGrads& MlpGrads::operator+=(const MlpGrads& o) {
  if (o.layers.size() != layers.size()) throw std::invalid_argument("MlpGrads: layer count mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += o.layers[k].weight;
    for (std::size_t j = 0; j < layers[k].bias.size(); ++j) layers[k].bias[j] += o.layers[k].bias[j];
  }
  return *this;
}

MlpGrads& MlpGrads::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    for (auto& b : l.bias) b *= s;
  }
  return *this;
}

MlpParams mlp_init(Rng& rng, std::span<const std::size_t> layer_sizes, Activation hidden_activation) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("mlp_init: need at least two layer sizes");
  for (auto s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("mlp_init: layer sizes must be >= 1");
  }
  MlpParams p;
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const std::size_t in = layer_sizes[k];
    const std::size_t out = layer_sizes[k + 1];
    const double sd = std::sqrt(2.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weight = sample_standard_normal(rng, out, in);
    layer.weight *= sd;
    layer.bias.assign(out, 0.0);
    layer.activation = (k + 2 == layer_sizes.size()) ? Activation::identity : hidden_activation;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

void apply_activation(Activation a, const Matrix& pre, Matrix& post) {
  post = pre;
  switch (a) {
    case Activation::tanh:
      for (auto& v : post.flat()) v = std::tanh(v);
      break;
    case Activation::relu:
      for (auto& v : post.flat()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::identity: break;
  }
}

// dPre = dPost * act'(pre); relu'(0) := 0.
void activation_backward(Activation a, const Matrix& pre, const Matrix& post, Matrix& d) {
  switch (a) {
    case Activation::tanh:
      for (std::size_t k = 0; k < d.size(); ++k) {
        const double t = post.data()[k];
        d.data()[k] *= 1.0 - t * t;
      }
      break;
    case Activation::relu:
      for (std::size_t k = 0; k < d.size(); ++k) {
        if (!(pre.data()[k] > 0.0)) d.data()[k] = 0.0;
      }
      break;
    case Activation::identity: break;
  }
}

}  // namespace

Matrix mlp_forward(const MlpParams& params, const Matrix& X, MlpCache* cache) {
  if (params.layers.empty()) throw std::invalid_argument("mlp_forward: empty network");
  if (X.cols() != params.in_dim()) {
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(X.cols()) +
                                " columns, network expects " + std::to_string(params.in_dim()));
  }
  if (cache) {
    cache->input = X;
    cache->pre.assign(params.layers.size(), Matrix());
    cache->post.assign(params.layers.size(), Matrix());
  }
  Matrix current = X;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& layer = params.layers[k];
    Matrix pre;
    kernels::affine_forward(current, layer.weight, layer.bias, pre);
    Matrix post;
    apply_activation(layer.activation, pre, post);
    if (cache) {
      cache->pre[k] = std::move(pre);
      cache->post[k] = post;
    }
    current = std::move(post);
  }
  return current;
}

MlpBackward mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix& dY) {
  const std::size_t depth = params.layers.size();
  if (cache.pre.size() != depth || cache.post.size() != depth) {
    throw std::invalid_argument("mlp_backward: cache does not match network depth");
  }
  for (std::size_t k = 0; k < depth; ++k) {
    const auto& pre = cache.pre[k];
    if (pre.cols() != params.layers[k].out_dim() || pre.rows() != cache.input.rows()) {
      throw std::invalid_argument("mlp_backward: stale cache at layer " + std::to_string(k));
    }
  }
  if (cache.input.cols() != params.in_dim()) throw std::invalid_argument("mlp_backward: stale cache input");
  if (!dY.same_shape(cache.post.back())) throw std::invalid_argument("mlp_backward: dY shape mismatch");

  MlpBackward out;
  out.grads = MlpGrads::zeros_like(params);
  Matrix d = dY;
  for (std::size_t k = depth; k-- > 0;) {
    const auto& layer = params.layers[k];
    activation_backward(layer.activation, cache.pre[k], cache.post[k], d);
    const Matrix& layer_in = k == 0 ? cache.input : cache.post[k - 1];
    kernels::affine_backward_params(d, layer_in, out.grads.layers[k].weight, out.grads.layers[k].bias);
    Matrix d_in;
    kernels::affine_backward_input(d, layer.weight, d_in);
    d = std::move(d_in);
  }
  out.dX = std::move(d);
  return out;
}

std::vector<double> flatten(const MlpParams& p) {
  std::vector<double> flat;
  flat.reserve(p.parameter_count());
  for (const auto& l : p.layers) {
    flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

std::vector<double> flatten(const MlpGrads& g) {
  std::vector<double> flat;
  for (const auto& l : g.layers) {
    flat.insert(flat.end(), l.weight.values().begin(), l.weight.values().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

void assign_flat(MlpParams& p, std::span<const double> flat) {
  if (flat.size() != p.parameter_count()) throw std::invalid_argument("assign_flat: size mismatch");
  std::size_t off = 0;
  for (auto& l : p.layers) {
    for (auto& w : l.weight.flat()) w = flat[off++];
    for (auto& b : l.bias) b = flat[off++];
  }
}

void adam_update(AdamState& state, std::span<double> params, std::span<const double> grads,
                 const std::string& what) {
  if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_update: shape mismatch for " + what);
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericalError("gradient overflow in " + what);
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads) {
  if (grads.layers.size() != params.layers.size()) throw std::invalid_argument("adam_step: layer count mismatch");
  for (std::size_t k = 0; k < grads.layers.size(); ++k) {
    const auto& g = grads.layers[k];
    const bool finite = g.weight.all_finite() &&
                        std::all_of(g.bias.begin(), g.bias.end(), [](double v) { return std::isfinite(v); });
    if (!finite) throw NumericalError("gradient overflow in layer " + std::to_string(k));
  }
  if (state.m.empty()) {
    state.m.assign(params.parameter_count(), 0.0);
    state.v.assign(params.parameter_count(), 0.0);
  }
  auto flat_p = flatten(params);
  const auto flat_g = flatten(grads);
  adam_update(state, flat_p, flat_g, "network");
  assign_flat(params, flat_p);
}

}  // namespace gcvae
