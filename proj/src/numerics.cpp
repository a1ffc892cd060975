#include "tvkd/numerics.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "tvkd/errors.hpp"

namespace tvkd {

double logsumexp(std::span<const double> x, double temperature) {
  if (x.empty()) throw InvalidArgument("logsumexp of an empty row");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  const double m = *std::max_element(x.begin(), x.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double sum = 0.0;
  for (double v : x) sum += std::exp((v - m) / temperature);
  return m + temperature * std::log(sum);
}

void softmax_into(std::span<const double> x, double temperature, std::span<double> out) {
  if (x.size() != out.size()) throw ShapeMismatch("softmax output size mismatch");
  const double lse = logsumexp(x, temperature);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp((x[i] - lse) / temperature);
}

std::vector<double> softmax(std::span<const double> x, double temperature) {
  std::vector<double> out(x.size());
  softmax_into(x, temperature, out);
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeMismatch("KL between distributions of different sizes");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw SupportError(fmt::format("q has zero mass at index {} where p = {}", i, p[i]));
    kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace tvkd
