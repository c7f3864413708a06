#pragma once

#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "gcvae/matrix.hpp"

namespace gcvae {

inline constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

/// log(sum(exp(v))) via max-shift. Entries may be -inf; throws on empty input.
double log_sum_exp(std::span<const double> v);

/// Diagonal Gaussian log-density with variances carried as log-variance.
double gaussian_diag_logpdf(std::span<const double> x, std::span<const double> mu,
                            std::span<const double> log_var);

/// Closed form of the integral of N(z; mq, exp(lvq)) * log N(z; mp, exp(lvp)) over one dimension:
/// -1/2 [log 2pi + lvp + exp(lvq - lvp) + (mq - mp)^2 exp(-lvp)].
double expected_gaussian_logpdf(double mq, double lvq, double mp, double lvp);

/// In-place softmax of a row of logits (max-shifted).
void softmax_inplace(std::span<double> v);

/// Central finite-difference gradient of f at p. Throws NumericalError naming the
/// coordinate when f is non-finite at a probe point.
std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> p, double h);

/// |a - b| / max(|a|, |b|, floor): the relative error used in gradient checks.
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace gcvae
