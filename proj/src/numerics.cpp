#include "gcvae/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "gcvae/errors.hpp"

namespace gcvae {

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("log_sum_exp: empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double gaussian_diag_logpdf(std::span<const double> x, std::span<const double> mu,
                            std::span<const double> log_var) {
  if (x.size() != mu.size() || x.size() != log_var.size()) {
    throw std::invalid_argument("gaussian_diag_logpdf: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x[j] - mu[j];
    acc += -0.5 * kLog2Pi - 0.5 * log_var[j] - d * d / (2.0 * std::exp(log_var[j]));
  }
  return acc;
}

double expected_gaussian_logpdf(double mq, double lvq, double mp, double lvp) {
  const double d = mq - mp;
  return -0.5 * (kLog2Pi + lvp + std::exp(lvq - lvp) + d * d * std::exp(-lvp));
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) return;
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (auto& x : v) {
    x = std::exp(x - m);
    s += x;
  }
  for (auto& x : v) x /= s;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> p, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> probe(p.begin(), p.end());
  std::vector<double> grad(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    probe[j] = p[j] + h;
    const double fp = f(probe);
    probe[j] = p[j] - h;
    const double fm = f(probe);
    probe[j] = p[j];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericalError("finite_diff_grad: non-finite evaluation at index " + std::to_string(j));
    }
    grad[j] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace gcvae
