#pragma once

#include <cstddef>
#include <span>

#include "gcvae/matrix.hpp"

namespace gcvae::kernels {

// Dense kernels behind the MLP passes. Every parallel kernel splits work over
// output rows only and accumulates each output element in the same order as its
// serial reference, so the two are bit-identical at any thread count.

/// Y = X * W^T + 1 b^T.   X: n x in, W: out x in, Y: n x out.
void affine_forward(const Matrix& X, const Matrix& W, std::span<const double> b, Matrix& Y);

/// dX = dY * W.   dY: n x out, W: out x in, dX: n x in.
void affine_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX);

/// dW += dY^T * X,  db += column sums of dY.
void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::span<double> db);

/// Runs f(i) for i in [0, n) across the OpenMP team. f must only write row-private state.
template <class F>
void for_each_row(std::size_t n, F&& f) {
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) f(static_cast<std::size_t>(i));
}

int max_threads();

namespace reference {

void affine_forward(const Matrix& X, const Matrix& W, std::span<const double> b, Matrix& Y);
void affine_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX);
void affine_backward_params(const Matrix& dY, const Matrix& X, Matrix& dW, std::span<double> db);

}  // namespace reference

}  // namespace gcvae::kernels
