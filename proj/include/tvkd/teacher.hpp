#pragma once

// Teacher-side quantities. The teacher's logits are read as Q_phi(s, .), its
// soft value is V_phi(s) = beta * log sum_a exp(Q_phi(s, a) / beta), and the
// shaping term is psi(s, a) = V_phi(s') - V_phi(s).
//
// For a teacher whose logits are the soft-optimal Q of a known-reward MDP,
// r(s, a) + psi(s, a) = r(s, a) + V(s') - V(s) = Q(s, a) - V(s), the soft
// advantage, so a stored psi plus the reward reproduces the advantage.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tvkd/core_mdp.hpp"
#include "tvkd/policy_model.hpp"

namespace tvkd {

/// How V_phi is defined at terminal states.
enum class TerminalValue {
  Zero,       // V_phi(terminal) = 0
  LogSumExp,  // soft value of the teacher's terminal logit row
};

struct TeacherModel {
  TabularPolicy policy;  // logits = Q_phi on non-terminal states
  double beta = 1.0;
  TerminalValue terminal = TerminalValue::Zero;
  std::vector<double> terminal_logits;  // terminal_count x vocab, LogSumExp mode only

  const StateSpace& space() const noexcept { return policy.space(); }

  /// Logit row of any state. CoverageError for a terminal state in Zero mode.
  std::span<const double> logits(StateIndex s) const;
  bool has_logits(StateIndex s) const noexcept;

  /// V_phi(s).
  double value(StateIndex s) const;
};

/// Throws ShapeMismatch / InvalidArgument / NonFiniteError on a malformed teacher.
void validate_teacher(const TeacherModel& teacher);

/// beta * log sum_a exp(logits[a] / beta). NonFiniteError on non-finite input.
double value_from_logits(std::span<const double> logits, double beta);

/// V_phi(s_0) .. V_phi(s_len).
std::vector<double> teacher_values_along(const TeacherModel& teacher, const Trajectory& traj);

/// psi_t = V_phi(s_{t+1}) - V_phi(s_t), t = 0 .. len-1.
std::vector<double> shaping_sequence(const TeacherModel& teacher, const Trajectory& traj);

enum class ShapingVariant { TeacherValue, Logits, LogProbability, Max, Margin, Expectation };

inline constexpr ShapingVariant kAllVariants[] = {
    ShapingVariant::TeacherValue, ShapingVariant::Logits, ShapingVariant::LogProbability,
    ShapingVariant::Max,          ShapingVariant::Margin, ShapingVariant::Expectation};

bool is_state_dependent(ShapingVariant v) noexcept;
std::string_view to_string(ShapingVariant v) noexcept;
ShapingVariant parse_variant(std::string_view name);  // InvalidArgument on unknown names

/// The auxiliary quantity of `variant` at `state`, with pi_phi = softmax(Q_phi / beta):
///   TeacherValue   beta * log sum_a exp(Q_phi(s, a) / beta)
///   Logits         Q_phi(s, a)
///   LogProbability log pi_phi(a|s)
///   Max            max_a pi_phi(a|s)
///   Margin         top-1 minus top-2 probability
///   Expectation    sum_a pi_phi(a|s) Q_phi(s, a)
/// Action-dependent variants require `action` (MissingAction otherwise). At a
/// state without logits (terminal, Zero mode) state-dependent variants are 0.
double auxiliary_potential(ShapingVariant variant, const TeacherModel& teacher, StateIndex state,
                           std::optional<TokenId> action = std::nullopt);
double auxiliary_potential(ShapingVariant variant, const TeacherModel& teacher, const State& state,
                           std::optional<TokenId> action = std::nullopt);

/// Per-step shaping of `variant` along a trajectory: Phi(s_{t+1}) - Phi(s_t) for
/// state-dependent variants, the quantity at (s_t, a_t) for action-dependent ones.
std::vector<double> variant_shaping_sequence(ShapingVariant variant, const TeacherModel& teacher,
                                             const Trajectory& traj);

/// Dense (nonterminal_count x vocab) shaping table for the solver. Potentials
/// of state-dependent variants are taken as 0 at terminal states.
std::vector<double> variant_shaping_table(ShapingVariant variant, const TeacherModel& teacher);

/// Top-k logits of one row plus the soft value of the rest, so that the full
/// row's soft value is recoverable exactly.
struct TopKLogitRecord {
  std::vector<std::uint32_t> token_ids;  // descending logit, ties by lower id
  std::vector<double> logits;
  double remainder_logsumexp = 0.0;  // beta * log sum_{a not in top-k} exp(logit/beta); -inf if empty

  friend bool operator==(const TopKLogitRecord&, const TopKLogitRecord&) = default;
};

TopKLogitRecord make_topk_record(std::span<const double> logits, std::size_t k, double beta);

/// Soft value from a record. Logits are combined in token-id order with the
/// remainder last, so k = vocab reproduces value_from_logits bit for bit.
double value_from_topk(const TopKLogitRecord& record, double beta);

}  // namespace tvkd
