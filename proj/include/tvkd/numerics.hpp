#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace tvkd {

/// temperature * log sum_i exp(x_i / temperature), max-subtracted. Entries may
/// be -inf; the result is -inf when all of them are.
double logsumexp(std::span<const double> x, double temperature = 1.0);

/// Row softmax of x / temperature.
std::vector<double> softmax(std::span<const double> x, double temperature = 1.0);
void softmax_into(std::span<const double> x, double temperature, std::span<double> out);

/// KL(p || q) in nats with 0 log(0/q) = 0. SupportError if q is zero where p is not.
double kl_divergence(std::span<const double> p, std::span<const double> q);

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)); asymptotic forms beyond |x| > 30.
inline double softplus(double x) {
  if (x > 30.0) return x + std::exp(-x);
  if (x < -30.0) return std::exp(x);
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double log_sigmoid(double x) { return -softplus(-x); }

bool all_finite(std::span<const double> x);

}  // namespace tvkd
