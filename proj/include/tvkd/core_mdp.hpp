#pragma once

// Finite token-level MDP: deterministic concatenation dynamics over a prefix
// tree of depth `horizon`, undiscounted, one tree per prompt.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tvkd {

struct TokenId {
  std::uint32_t value = 0;

  constexpr TokenId() = default;
  constexpr explicit TokenId(std::uint32_t v) : value(v) {}
  friend constexpr auto operator<=>(TokenId, TokenId) = default;
};

using StateIndex = std::size_t;

inline constexpr std::size_t kDefaultStateCap = 10'000'000;

struct State {
  std::int64_t prompt_id = 0;
  std::vector<TokenId> generated;

  friend bool operator==(const State&, const State&) = default;
};

/// Shape of the state space and the canonical indexing shared by every
/// tabular structure.
///
/// Within a prompt, the state reached by tokens (a_0 .. a_{t-1}) has local
/// index offset(t) + sum_i a_i * V^(t-1-i), where offset(t) = sum_{k<t} V^k.
/// This is depth-then-lexicographic order, so every non-terminal state comes
/// before every terminal one and children always have larger indices than
/// their parent. Global index = prompt_index * states_per_prompt + local.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(std::uint32_t vocab_size, std::uint32_t horizon,
             std::vector<std::int64_t> prompt_ids);

  std::uint32_t vocab_size() const noexcept { return vocab_size_; }
  std::uint32_t horizon() const noexcept { return horizon_; }
  const std::vector<std::int64_t>& prompt_ids() const noexcept { return prompt_ids_; }
  std::size_t num_prompts() const noexcept { return prompt_ids_.size(); }

  /// Saturates at SIZE_MAX for spaces too large to index.
  std::size_t states_per_prompt() const noexcept { return per_prompt_; }
  std::size_t nonterminal_per_prompt() const noexcept { return nonterminal_per_prompt_; }
  std::size_t terminal_per_prompt() const noexcept { return per_prompt_ - nonterminal_per_prompt_; }
  std::size_t state_count() const noexcept;
  std::size_t nonterminal_count() const noexcept;
  std::size_t terminal_count() const noexcept;

  /// Throws SizeLimitError when the whole space exceeds `cap` states.
  void check_size(std::size_t cap = kDefaultStateCap) const;

  std::size_t prompt_index(std::int64_t prompt_id) const;  // CoverageError if unknown
  bool has_prompt(std::int64_t prompt_id) const noexcept;

  StateIndex root(std::size_t prompt_idx) const noexcept { return prompt_idx * per_prompt_; }
  StateIndex index_of(const State& s) const;
  State state_at(StateIndex index) const;
  std::uint32_t depth(StateIndex index) const noexcept;
  bool is_terminal(StateIndex index) const noexcept;
  std::size_t prompt_of(StateIndex index) const noexcept { return index / per_prompt_; }

  /// Index of the state reached by appending `action`.
  StateIndex child(StateIndex index, TokenId action) const;

  /// Row of a non-terminal state in (nonterminal_count x vocab) tables.
  std::size_t row_of(StateIndex index) const;
  /// Row of a terminal state in (terminal_count x vocab) tables.
  std::size_t terminal_row_of(StateIndex index) const;
  /// Inverse of row_of.
  StateIndex state_of_row(std::size_t row) const noexcept;

  void check_token(TokenId action) const;

  friend bool operator==(const StateSpace& a, const StateSpace& b) {
    return a.vocab_size_ == b.vocab_size_ && a.horizon_ == b.horizon_ &&
           a.prompt_ids_ == b.prompt_ids_;
  }

 private:
  std::uint32_t vocab_size_ = 0;
  std::uint32_t horizon_ = 0;
  std::vector<std::int64_t> prompt_ids_;
  std::vector<std::size_t> depth_offset_;  // offset(t), t = 0..horizon+1
  std::size_t per_prompt_ = 0;
  std::size_t nonterminal_per_prompt_ = 0;
};

struct PromptWeight {
  std::int64_t prompt_id = 0;
  double weight = 0.0;
};

/// Dense reward table r(s, a) for every non-terminal state. The discount is
/// fixed to 1.
class TokenMDP {
 public:
  TokenMDP(std::uint32_t vocab_size, std::uint32_t horizon, std::vector<PromptWeight> prompts,
           std::vector<double> rewards, std::size_t state_cap = kDefaultStateCap);

  const StateSpace& space() const noexcept { return space_; }
  std::uint32_t vocab_size() const noexcept { return space_.vocab_size(); }
  std::uint32_t horizon() const noexcept { return space_.horizon(); }
  const std::vector<PromptWeight>& prompts() const noexcept { return prompts_; }

  double reward(StateIndex state, TokenId action) const;
  std::span<const double> reward_row(StateIndex state) const;
  std::span<const double> rewards() const noexcept { return rewards_; }

 private:
  StateSpace space_;
  std::vector<PromptWeight> prompts_;
  std::vector<double> rewards_;
};

struct Trajectory {
  std::int64_t prompt_id = 0;
  std::vector<TokenId> actions;

  std::size_t size() const noexcept { return actions.size(); }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct PreferencePair {
  std::int64_t prompt_id = 0;
  Trajectory winner;
  Trajectory loser;
  std::optional<double> ground_truth_margin;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

using Dataset = std::vector<PreferencePair>;

State transition(const StateSpace& space, const State& state, TokenId action);

/// All states of one prompt's prefix tree in index order.
std::vector<State> enumerate_states(const StateSpace& space, std::int64_t prompt_id,
                                    std::size_t cap = kDefaultStateCap);

/// Throws InvalidTrajectory unless the prompt is known, every token is in
/// range and the length does not exceed the horizon.
void validate_trajectory(const StateSpace& space, const Trajectory& traj);

/// s_0 .. s_len along the trajectory.
std::vector<StateIndex> trajectory_states(const StateSpace& space, const Trajectory& traj);

double trajectory_return(const TokenMDP& mdp, const Trajectory& traj);

/// Throws InvalidTrajectory on mismatched prompt ids or identical responses.
void validate_pair(const StateSpace& space, const PreferencePair& pair);

PreferencePair make_pair(Trajectory winner, Trajectory loser,
                         std::optional<double> ground_truth_margin = std::nullopt);

// One JSON object per line: {"prompt_id":..,"winner":[..],"loser":[..],"margin":..}
std::string pair_to_json_line(const PreferencePair& pair);
PreferencePair pair_from_json_line(const std::string& line, std::size_t line_number);

}  // namespace tvkd
