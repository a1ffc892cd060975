#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "tvkd/core_mdp.hpp"

namespace tvkd {

/// Dense logit table theta(s, a) over the non-terminal states of a StateSpace.
/// pi(a|s) = softmax(theta(s, .)).
class TabularPolicy {
 public:
  TabularPolicy() = default;
  explicit TabularPolicy(StateSpace space);  // zero logits: uniform policy
  TabularPolicy(StateSpace space, std::vector<double> logits);

  /// i.i.d. N(0, stddev^2) logits drawn from the Init stream of `seed`.
  static TabularPolicy gaussian(StateSpace space, double stddev, std::uint64_t seed);

  const StateSpace& space() const noexcept { return space_; }
  std::size_t vocab_size() const noexcept { return space_.vocab_size(); }
  std::size_t parameter_count() const noexcept { return logits_.size(); }

  std::span<const double> logits() const noexcept { return logits_; }
  std::span<double> logits() noexcept { return logits_; }

  /// Logit row of a non-terminal state; TerminalStateError otherwise.
  std::span<const double> row(StateIndex s) const;
  std::span<double> row(StateIndex s);

  friend bool operator==(const TabularPolicy& a, const TabularPolicy& b) {
    return a.space_ == b.space_ && a.logits_ == b.logits_;
  }

 private:
  StateSpace space_;
  std::vector<double> logits_;
};

double log_prob(const TabularPolicy& policy, StateIndex state, TokenId action);

/// Gradient of log pi(action|state) w.r.t. theta(state, .): e_action - softmax.
/// Every other parameter has zero gradient.
struct RowGradient {
  std::size_t row = 0;
  std::vector<double> values;
};
RowGradient grad_log_prob(const TabularPolicy& policy, StateIndex state, TokenId action);

/// grad[theta(state, .)] += scale * (e_action - softmax(theta(state, .))).
void accumulate_grad_log_prob(const TabularPolicy& policy, StateIndex state, TokenId action,
                              double scale, std::span<double> grad);

/// Sum of log pi over the trajectory's steps.
double trajectory_log_prob(const TabularPolicy& policy, const Trajectory& traj);
void accumulate_trajectory_grad(const TabularPolicy& policy, const Trajectory& traj, double scale,
                                std::span<double> grad);

enum class OptimizerKind { Sgd, Adam };

struct OptimState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  static OptimState make(OptimizerKind kind, double learning_rate, std::size_t parameter_count);
};

/// SGD: theta -= lr * g. Adam: bias-corrected moments,
/// theta -= lr * m_hat / (sqrt(v_hat) + eps).
void apply_update(TabularPolicy& policy, std::span<const double> grad, OptimState& opt);

using PolicyLoss = std::function<double(const TabularPolicy&)>;
using PolicyGradient = std::function<std::vector<double>(const TabularPolicy&)>;

/// Max over parameters of |analytic - central difference| / scale with
/// scale = max(|analytic|, |numeric|, 1e-3 * max_j |analytic_j|); entries
/// where the scale is zero contribute their absolute error. Above
/// `max_parameters` parameters a seeded subsample is checked.
double finite_difference_check(const PolicyLoss& loss, const PolicyGradient& gradient,
                               const TabularPolicy& policy, double epsilon = 1e-5,
                               std::uint64_t seed = 0, std::size_t max_parameters = 10'000);

// Checkpoint text format: see docs/formats.md.
void save_policy(std::ostream& out, const TabularPolicy& policy);
TabularPolicy load_policy(std::istream& in);
void save_policy(const std::filesystem::path& path, const TabularPolicy& policy);
TabularPolicy load_policy(const std::filesystem::path& path);

}  // namespace tvkd
