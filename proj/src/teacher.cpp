#include "tvkd/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "tvkd/errors.hpp"
#include "tvkd/numerics.hpp"

namespace tvkd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Indices of the row sorted by descending logit, ties by lower id.
std::vector<std::uint32_t> ranked(std::span<const double> row) {
  std::vector<std::uint32_t> idx(row.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return row[a] > row[b]; });
  return idx;
}

}  // namespace

bool TeacherModel::has_logits(StateIndex s) const noexcept {
  return !space().is_terminal(s) || terminal == TerminalValue::LogSumExp;
}

std::span<const double> TeacherModel::logits(StateIndex s) const {
  if (s >= space().state_count()) throw CoverageError(fmt::format("state {} is outside the teacher", s));
  if (!space().is_terminal(s)) return policy.row(s);
  if (terminal != TerminalValue::LogSumExp) {
    throw CoverageError(fmt::format("teacher has no logits for terminal state {}", s));
  }
  const std::size_t n = space().vocab_size();
  return std::span<const double>(terminal_logits).subspan(space().terminal_row_of(s) * n, n);
}

double TeacherModel::value(StateIndex s) const {
  if (space().is_terminal(s) && terminal == TerminalValue::Zero) {
    if (s >= space().state_count()) throw CoverageError(fmt::format("state {} is outside the teacher", s));
    return 0.0;
  }
  return value_from_logits(logits(s), beta);
}

void validate_teacher(const TeacherModel& teacher) {
  if (!(teacher.beta > 0.0) || !std::isfinite(teacher.beta)) {
    throw InvalidArgument("teacher beta must be positive and finite");
  }
  if (!all_finite(teacher.policy.logits())) throw NonFiniteError("teacher logits contain a non-finite entry");
  if (teacher.terminal == TerminalValue::LogSumExp) {
    const auto& sp = teacher.space();
    if (teacher.terminal_logits.size() != sp.terminal_count() * sp.vocab_size()) {
      throw ShapeMismatch("terminal logit table shape mismatch");
    }
    if (!all_finite(teacher.terminal_logits)) throw NonFiniteError("terminal logits contain a non-finite entry");
  }
}

double value_from_logits(std::span<const double> logits, double beta) {
  if (logits.empty()) throw InvalidArgument("empty logit row");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!all_finite(logits)) throw NonFiniteError("non-finite logit");
  return logsumexp(logits, beta);
}

std::vector<double> teacher_values_along(const TeacherModel& teacher, const Trajectory& traj) {
  const auto states = trajectory_states(teacher.space(), traj);
  std::vector<double> values(states.size());
  for (std::size_t t = 0; t < states.size(); ++t) values[t] = teacher.value(states[t]);
  return values;
}

std::vector<double> shaping_sequence(const TeacherModel& teacher, const Trajectory& traj) {
  const auto values = teacher_values_along(teacher, traj);
  std::vector<double> psi(traj.size());
  for (std::size_t t = 0; t < psi.size(); ++t) psi[t] = values[t + 1] - values[t];
  return psi;
}

bool is_state_dependent(ShapingVariant v) noexcept {
  return v != ShapingVariant::Logits && v != ShapingVariant::LogProbability;
}

std::string_view to_string(ShapingVariant v) noexcept {
  switch (v) {
    case ShapingVariant::TeacherValue: return "TeacherValue";
    case ShapingVariant::Logits: return "Logits";
    case ShapingVariant::LogProbability: return "LogProbability";
    case ShapingVariant::Max: return "Max";
    case ShapingVariant::Margin: return "Margin";
    case ShapingVariant::Expectation: return "Expectation";
  }
  return "?";
}

ShapingVariant parse_variant(std::string_view name) {
  for (ShapingVariant v : kAllVariants) {
    if (to_string(v) == name) return v;
  }
  throw InvalidArgument(fmt::format("unknown shaping variant '{}'", name));
}

double auxiliary_potential(ShapingVariant variant, const TeacherModel& teacher, StateIndex state,
                           std::optional<TokenId> action) {
  if (!is_state_dependent(variant)) {
    if (!action) throw MissingAction(fmt::format("{} shaping needs an action", to_string(variant)));
    teacher.space().check_token(*action);
  }
  if (is_state_dependent(variant) && !teacher.has_logits(state)) {
    if (state >= teacher.space().state_count()) throw CoverageError(fmt::format("state {} is outside the teacher", state));
    return 0.0;
  }
  const auto q = teacher.logits(state);
  const double beta = teacher.beta;
  switch (variant) {
    case ShapingVariant::TeacherValue:
      return value_from_logits(q, beta);
    case ShapingVariant::Logits:
      return q[action->value];
    case ShapingVariant::LogProbability:
      return (q[action->value] - value_from_logits(q, beta)) / beta;
    case ShapingVariant::Max: {
      const auto p = softmax(q, beta);
      return *std::max_element(p.begin(), p.end());
    }
    case ShapingVariant::Margin: {
      const auto p = softmax(q, beta);
      if (p.size() < 2) return p[0];
      const auto order = ranked(p);
      return p[order[0]] - p[order[1]];
    }
    case ShapingVariant::Expectation: {
      const auto p = softmax(q, beta);
      double e = 0.0;
      for (std::size_t a = 0; a < p.size(); ++a) e += p[a] * q[a];
      return e;
    }
  }
  throw InvalidArgument("unknown shaping variant");
}

double auxiliary_potential(ShapingVariant variant, const TeacherModel& teacher, const State& state,
                           std::optional<TokenId> action) {
  return auxiliary_potential(variant, teacher, teacher.space().index_of(state), action);
}

std::vector<double> variant_shaping_sequence(ShapingVariant variant, const TeacherModel& teacher,
                                             const Trajectory& traj) {
  if (variant == ShapingVariant::TeacherValue) return shaping_sequence(teacher, traj);
  const auto states = trajectory_states(teacher.space(), traj);
  std::vector<double> psi(traj.size());
  if (is_state_dependent(variant)) {
    std::vector<double> phi(states.size());
    for (std::size_t t = 0; t < states.size(); ++t) phi[t] = auxiliary_potential(variant, teacher, states[t]);
    for (std::size_t t = 0; t < psi.size(); ++t) psi[t] = phi[t + 1] - phi[t];
  } else {
    for (std::size_t t = 0; t < psi.size(); ++t) {
      psi[t] = auxiliary_potential(variant, teacher, states[t], traj.actions[t]);
    }
  }
  return psi;
}

std::vector<double> variant_shaping_table(ShapingVariant variant, const TeacherModel& teacher) {
  const StateSpace& space = teacher.space();
  const std::size_t n = space.vocab_size();
  std::vector<double> table(space.nonterminal_count() * n);
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    const StateIndex s = space.state_of_row(row);
    if (is_state_dependent(variant)) {
      const double phi_s = auxiliary_potential(variant, teacher, s);
      for (std::size_t a = 0; a < n; ++a) {
        const StateIndex next = space.child(s, TokenId(static_cast<std::uint32_t>(a)));
        const double phi_next = space.is_terminal(next) ? 0.0 : auxiliary_potential(variant, teacher, next);
        table[row * n + a] = phi_next - phi_s;
      }
    } else {
      for (std::size_t a = 0; a < n; ++a) {
        table[row * n + a] = auxiliary_potential(variant, teacher, s, TokenId(static_cast<std::uint32_t>(a)));
      }
    }
  }
  return table;
}

TopKLogitRecord make_topk_record(std::span<const double> logits, std::size_t k, double beta) {
  if (k == 0) throw InvalidArgument("top_k must be at least 1");
  if (!all_finite(logits)) throw NonFiniteError("non-finite logit");
  k = std::min(k, logits.size());
  const auto order = ranked(logits);
  TopKLogitRecord rec;
  rec.token_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  for (auto id : rec.token_ids) rec.logits.push_back(logits[id]);
  if (k == logits.size()) {
    rec.remainder_logsumexp = kNegInf;
  } else {
    std::vector<std::uint32_t> rest(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(rest.begin(), rest.end());
    std::vector<double> vals;
    vals.reserve(rest.size());
    for (auto id : rest) vals.push_back(logits[id]);
    rec.remainder_logsumexp = logsumexp(vals, beta);
  }
  return rec;
}

double value_from_topk(const TopKLogitRecord& record, double beta) {
  if (record.token_ids.size() != record.logits.size()) throw ShapeMismatch("top-k record is inconsistent");
  if (record.token_ids.empty()) throw InvalidArgument("empty top-k record");
  std::vector<std::size_t> order(record.token_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return record.token_ids[a] < record.token_ids[b]; });
  std::vector<double> vals;
  vals.reserve(order.size() + 1);
  for (auto i : order) vals.push_back(record.logits[i]);
  if (record.remainder_logsumexp != kNegInf) vals.push_back(record.remainder_logsumexp);
  return value_from_logits(vals, beta);
}

}  // namespace tvkd
