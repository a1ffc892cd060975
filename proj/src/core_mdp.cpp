#include "tvkd/core_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <json.hpp>

#include "tvkd/errors.hpp"

namespace tvkd {

namespace {

constexpr std::size_t kSaturated = std::numeric_limits<std::size_t>::max();

std::size_t sat_add(std::size_t a, std::size_t b) {
  return (a > kSaturated - b) ? kSaturated : a + b;
}

std::size_t sat_mul(std::size_t a, std::size_t b) {
  if (a == 0 || b == 0) return 0;
  return (a > kSaturated / b) ? kSaturated : a * b;
}

}  // namespace

StateSpace::StateSpace(std::uint32_t vocab_size, std::uint32_t horizon,
                       std::vector<std::int64_t> prompt_ids)
    : vocab_size_(vocab_size), horizon_(horizon), prompt_ids_(std::move(prompt_ids)) {
  if (vocab_size_ == 0) throw InvalidArgument("vocab_size must be positive");
  if (horizon_ == 0) throw InvalidArgument("horizon must be positive");
  if (prompt_ids_.empty()) throw InvalidArgument("at least one prompt is required");
  auto sorted = prompt_ids_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgument("duplicate prompt id");
  }

  depth_offset_.assign(horizon_ + 2, 0);
  std::size_t level = 1;
  for (std::uint32_t t = 0; t <= horizon_; ++t) {
    depth_offset_[t + 1] = sat_add(depth_offset_[t], level);
    level = sat_mul(level, vocab_size_);
  }
  per_prompt_ = depth_offset_[horizon_ + 1];
  nonterminal_per_prompt_ = depth_offset_[horizon_];
}

std::size_t StateSpace::state_count() const noexcept { return sat_mul(per_prompt_, num_prompts()); }

std::size_t StateSpace::nonterminal_count() const noexcept {
  return sat_mul(nonterminal_per_prompt_, num_prompts());
}

std::size_t StateSpace::terminal_count() const noexcept {
  return sat_mul(terminal_per_prompt(), num_prompts());
}

void StateSpace::check_size(std::size_t cap) const {
  if (state_count() > cap) {
    throw SizeLimitError(fmt::format("state space of vocab {} horizon {} x {} prompts exceeds cap {}",
                                     vocab_size_, horizon_, num_prompts(), cap));
  }
}

bool StateSpace::has_prompt(std::int64_t prompt_id) const noexcept {
  return std::find(prompt_ids_.begin(), prompt_ids_.end(), prompt_id) != prompt_ids_.end();
}

std::size_t StateSpace::prompt_index(std::int64_t prompt_id) const {
  auto it = std::find(prompt_ids_.begin(), prompt_ids_.end(), prompt_id);
  if (it == prompt_ids_.end()) throw CoverageError(fmt::format("unknown prompt id {}", prompt_id));
  return static_cast<std::size_t>(it - prompt_ids_.begin());
}

void StateSpace::check_token(TokenId action) const {
  if (action.value >= vocab_size_) {
    throw InvalidToken(fmt::format("token {} outside vocabulary of size {}", action.value, vocab_size_));
  }
}

std::uint32_t StateSpace::depth(StateIndex index) const noexcept {
  const std::size_t local = index % per_prompt_;
  auto it = std::upper_bound(depth_offset_.begin(), depth_offset_.end(), local);
  return static_cast<std::uint32_t>((it - depth_offset_.begin()) - 1);
}

bool StateSpace::is_terminal(StateIndex index) const noexcept {
  return index % per_prompt_ >= nonterminal_per_prompt_;
}

StateIndex StateSpace::index_of(const State& s) const {
  const std::size_t p = prompt_index(s.prompt_id);
  if (s.generated.size() > horizon_) {
    throw InvalidTrajectory(fmt::format("state of length {} exceeds horizon {}", s.generated.size(), horizon_));
  }
  std::size_t rank = 0;
  for (TokenId a : s.generated) {
    check_token(a);
    rank = rank * vocab_size_ + a.value;
  }
  return p * per_prompt_ + depth_offset_[s.generated.size()] + rank;
}

State StateSpace::state_at(StateIndex index) const {
  if (index >= state_count()) throw InvalidArgument(fmt::format("state index {} out of range", index));
  State s;
  s.prompt_id = prompt_ids_[prompt_of(index)];
  const std::uint32_t t = depth(index);
  std::size_t rank = index % per_prompt_ - depth_offset_[t];
  s.generated.resize(t);
  for (std::uint32_t i = t; i-- > 0;) {
    s.generated[i] = TokenId(static_cast<std::uint32_t>(rank % vocab_size_));
    rank /= vocab_size_;
  }
  return s;
}

StateIndex StateSpace::child(StateIndex index, TokenId action) const {
  check_token(action);
  if (is_terminal(index)) throw TerminalStateError("no transition out of a terminal state");
  const std::size_t base = index - index % per_prompt_;
  const std::uint32_t t = depth(index);
  const std::size_t rank = index % per_prompt_ - depth_offset_[t];
  return base + depth_offset_[t + 1] + rank * vocab_size_ + action.value;
}

std::size_t StateSpace::row_of(StateIndex index) const {
  if (is_terminal(index)) throw TerminalStateError("terminal states have no action row");
  return prompt_of(index) * nonterminal_per_prompt_ + index % per_prompt_;
}

std::size_t StateSpace::terminal_row_of(StateIndex index) const {
  if (!is_terminal(index)) throw InvalidArgument("state is not terminal");
  return prompt_of(index) * terminal_per_prompt() + (index % per_prompt_ - nonterminal_per_prompt_);
}

StateIndex StateSpace::state_of_row(std::size_t row) const noexcept {
  return (row / nonterminal_per_prompt_) * per_prompt_ + row % nonterminal_per_prompt_;
}

TokenMDP::TokenMDP(std::uint32_t vocab_size, std::uint32_t horizon, std::vector<PromptWeight> prompts,
                   std::vector<double> rewards, std::size_t state_cap)
    : prompts_(std::move(prompts)), rewards_(std::move(rewards)) {
  std::vector<std::int64_t> ids;
  ids.reserve(prompts_.size());
  double total = 0.0;
  for (const auto& p : prompts_) {
    if (!(p.weight >= 0.0)) throw InvalidArgument("prompt weights must be nonnegative");
    ids.push_back(p.prompt_id);
    total += p.weight;
  }
  space_ = StateSpace(vocab_size, horizon, std::move(ids));
  space_.check_size(state_cap);
  if (std::abs(total - 1.0) > 1e-12) {
    throw InvalidArgument(fmt::format("prompt weights sum to {:.17g}, expected 1", total));
  }
  const std::size_t expected = space_.nonterminal_count() * vocab_size;
  if (rewards_.size() != expected) {
    throw ShapeMismatch(fmt::format("reward table has {} entries, expected {}", rewards_.size(), expected));
  }
}

double TokenMDP::reward(StateIndex state, TokenId action) const {
  space_.check_token(action);
  return rewards_[space_.row_of(state) * space_.vocab_size() + action.value];
}

std::span<const double> TokenMDP::reward_row(StateIndex state) const {
  const std::size_t v = space_.vocab_size();
  return std::span<const double>(rewards_).subspan(space_.row_of(state) * v, v);
}

State transition(const StateSpace& space, const State& state, TokenId action) {
  space.check_token(action);
  if (state.generated.size() >= space.horizon()) {
    throw TerminalStateError(fmt::format("state of length {} is terminal", state.generated.size()));
  }
  State next = state;
  next.generated.push_back(action);
  return next;
}

std::vector<State> enumerate_states(const StateSpace& space, std::int64_t prompt_id, std::size_t cap) {
  const std::size_t p = space.prompt_index(prompt_id);
  if (space.states_per_prompt() > cap) {
    throw SizeLimitError(fmt::format("prefix tree for vocab {} horizon {} exceeds cap {}",
                                     space.vocab_size(), space.horizon(), cap));
  }
  std::vector<State> out;
  out.reserve(space.states_per_prompt());
  const StateIndex base = space.root(p);
  for (std::size_t i = 0; i < space.states_per_prompt(); ++i) out.push_back(space.state_at(base + i));
  return out;
}

void validate_trajectory(const StateSpace& space, const Trajectory& traj) {
  if (!space.has_prompt(traj.prompt_id)) {
    throw InvalidTrajectory(fmt::format("unknown prompt id {}", traj.prompt_id));
  }
  if (traj.actions.size() > space.horizon()) {
    throw InvalidTrajectory(fmt::format("trajectory of length {} exceeds horizon {}", traj.actions.size(),
                                        space.horizon()));
  }
  for (TokenId a : traj.actions) {
    if (a.value >= space.vocab_size()) {
      throw InvalidTrajectory(fmt::format("token {} outside vocabulary of size {}", a.value, space.vocab_size()));
    }
  }
}

std::vector<StateIndex> trajectory_states(const StateSpace& space, const Trajectory& traj) {
  validate_trajectory(space, traj);
  std::vector<StateIndex> states;
  states.reserve(traj.size() + 1);
  StateIndex s = space.root(space.prompt_index(traj.prompt_id));
  states.push_back(s);
  for (TokenId a : traj.actions) {
    s = space.child(s, a);
    states.push_back(s);
  }
  return states;
}

double trajectory_return(const TokenMDP& mdp, const Trajectory& traj) {
  const auto states = trajectory_states(mdp.space(), traj);
  double total = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) total += mdp.reward(states[t], traj.actions[t]);
  return total;
}

void validate_pair(const StateSpace& space, const PreferencePair& pair) {
  if (pair.winner.prompt_id != pair.prompt_id || pair.loser.prompt_id != pair.prompt_id) {
    throw InvalidTrajectory("winner and loser must share the pair's prompt id");
  }
  if (pair.winner.actions == pair.loser.actions) throw InvalidTrajectory("winner and loser are identical");
  validate_trajectory(space, pair.winner);
  validate_trajectory(space, pair.loser);
}

PreferencePair make_pair(Trajectory winner, Trajectory loser, std::optional<double> ground_truth_margin) {
  if (winner.prompt_id != loser.prompt_id) throw InvalidTrajectory("winner and loser must share a prompt");
  if (winner.actions == loser.actions) throw InvalidTrajectory("winner and loser are identical");
  PreferencePair pair;
  pair.prompt_id = winner.prompt_id;
  pair.winner = std::move(winner);
  pair.loser = std::move(loser);
  pair.ground_truth_margin = ground_truth_margin;
  return pair;
}

namespace {

nlohmann::json tokens_to_json(const std::vector<TokenId>& tokens) {
  auto arr = nlohmann::json::array();
  for (TokenId t : tokens) arr.push_back(t.value);
  return arr;
}

std::vector<TokenId> tokens_from_json(const nlohmann::json& j, const char* field, std::size_t line) {
  if (!j.is_array()) throw ParseError(line, fmt::format("field '{}' must be an array", field));
  std::vector<TokenId> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number_unsigned()) {
      throw ParseError(line, fmt::format("field '{}' must hold nonnegative integers", field));
    }
    const auto raw = v.get<std::uint64_t>();
    if (raw > std::numeric_limits<std::uint32_t>::max()) {
      throw ParseError(line, fmt::format("token in '{}' out of range", field));
    }
    out.emplace_back(static_cast<std::uint32_t>(raw));
  }
  return out;
}

}  // namespace

std::string pair_to_json_line(const PreferencePair& pair) {
  nlohmann::ordered_json j;
  j["prompt_id"] = pair.prompt_id;
  j["winner"] = tokens_to_json(pair.winner.actions);
  j["loser"] = tokens_to_json(pair.loser.actions);
  if (pair.ground_truth_margin) j["margin"] = *pair.ground_truth_margin;
  return j.dump();
}

PreferencePair pair_from_json_line(const std::string& line, std::size_t line_number) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line_number, fmt::format("malformed record ({})", e.what()));
  }
  if (!j.is_object()) throw ParseError(line_number, "record must be a JSON object");
  for (const char* field : {"prompt_id", "winner", "loser"}) {
    if (!j.contains(field)) throw ParseError(line_number, fmt::format("missing field '{}'", field));
  }
  if (!j["prompt_id"].is_number_integer()) throw ParseError(line_number, "field 'prompt_id' must be an integer");

  PreferencePair pair;
  pair.prompt_id = j["prompt_id"].get<std::int64_t>();
  pair.winner = Trajectory{pair.prompt_id, tokens_from_json(j["winner"], "winner", line_number)};
  pair.loser = Trajectory{pair.prompt_id, tokens_from_json(j["loser"], "loser", line_number)};
  if (j.contains("margin")) {
    if (!j["margin"].is_number()) throw ParseError(line_number, "field 'margin' must be a number");
    pair.ground_truth_margin = j["margin"].get<double>();
  }
  if (pair.winner.actions == pair.loser.actions) throw ParseError(line_number, "winner and loser are identical");
  return pair;
}

}  // namespace tvkd
