#include "gcvae/kernels.hpp"

#include <omp.h>

#include <stdexcept>
#include <vector>

namespace gcvae::kernels {

namespace {

void check_forward(const Matrix& X, const Matrix& W, std::span<const double> b, Matrix& Y) {
  if (X.cols() != W.cols() || b.size() != W.rows()) {
    throw std::invalid_argument("affine_forward: shape mismatch");
  }
  if (Y.rows() != X.rows() || Y.cols() != W.rows()) Y = Matrix(X.rows(), W.rows());
}

void check_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX) {
  if (dY.cols() != W.rows()) throw std::invalid_argument("affine_backward_input: shape mismatch");
  if (dX.rows() != dY.rows() || dX.cols() != W.cols()) dX = Matrix(dY.rows(), W.cols());
}

void check_backward_params(const Matrix& dY, const Matrix& X, const Matrix& dW,
                           std::span<double> db) {
  if (dY.rows() != X.rows() || dW.rows() != dY.cols() || dW.cols() != X.cols() ||
      db.size() != dY.cols()) {
    throw std::invalid_argument("affine_backward_params: shape mismatch");
  }
}

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void affine_forward(const Matrix& X, const Matrix& W, std::span<const double> b, Matrix& Y) {
  check_forward(X, W, b, Y);
  const std::size_t in = W.cols();
  const std::size_t out = W.rows();
  const auto n = static_cast<std::ptrdiff_t>(X.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double* x = X.data() + i * in;
    double* y = Y.data() + i * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = W.data() + o * in;
      double acc = b[o];
      for (std::size_t k = 0; k < in; ++k) acc += x[k] * w[k];
      y[o] = acc;
    }
  }
}

void affine_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX) {
  check_backward_input(dY, W, dX);
  const std::size_t in = W.cols();
  const std::size_t out = W.rows();
  const auto n = static_cast<std::ptrdiff_t>(dY.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double* dx = dX.data() + i * in;
    const double* dy = dY.data() + i * out;
    for (std::size_t k = 0; k < in; ++k) dx[k] = 0.0;
    // Row-streaming over W; per element the sum over o still runs 0..out-1.
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dy[o];
      const double* w = W.data() + o * in;
      for (std::size_t k = 0; k < in; ++k) dx[k] += g * w[k];
    }
  }
}

void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::span<double> db) {
  check_backward_params(dY, X, dW, db);
  const std::size_t in = X.cols();
  const std::size_t out = dY.cols();
  const std::size_t n = dY.rows();
  const auto out_i = static_cast<std::ptrdiff_t>(out);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t o = 0; o < out_i; ++o) {
    // Sum into a zeroed row first so the per-element order matches the reference.
    std::vector<double> acc(in, 0.0);
    double bacc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double g = dY(i, static_cast<std::size_t>(o));
      const double* x = X.data() + i * in;
      for (std::size_t k = 0; k < in; ++k) acc[k] += g * x[k];
      bacc += g;
    }
    double* dw = dW.data() + o * in;
    for (std::size_t k = 0; k < in; ++k) dw[k] += acc[k];
    db[static_cast<std::size_t>(o)] += bacc;
  }
}

namespace reference {

void affine_forward(const Matrix& X, const Matrix& W, std::span<const double> b, Matrix& Y) {
  check_forward(X, W, b, Y);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t o = 0; o < W.rows(); ++o) {
      double acc = b[o];
      for (std::size_t k = 0; k < W.cols(); ++k) acc += X(i, k) * W(o, k);
      Y(i, o) = acc;
    }
  }
}

void affine_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX) {
  check_backward_input(dY, W, dX);
  for (std::size_t i = 0; i < dY.rows(); ++i) {
    for (std::size_t k = 0; k < W.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t o = 0; o < W.rows(); ++o) acc += dY(i, o) * W(o, k);
      dX(i, k) = acc;
    }
  }
}

void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::span<double> db) {
  check_backward_params(dY, X, dW, db);
  for (std::size_t o = 0; o < dY.cols(); ++o) {
    for (std::size_t k = 0; k < X.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t i = 0; i < dY.rows(); ++i) acc += dY(i, o) * X(i, k);
      dW(o, k) += acc;
    }
    double bacc = 0.0;
    for (std::size_t i = 0; i < dY.rows(); ++i) bacc += dY(i, o);
    db[o] += bacc;
  }
}

}  // namespace reference

}  // namespace gcvae::kernels
