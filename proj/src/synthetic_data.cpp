#include "tvkd/synthetic_data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "tvkd/errors.hpp"
#include "tvkd/numerics.hpp"
#include "tvkd/random.hpp"

namespace tvkd {

namespace {

constexpr int kMaxConsecutiveRejects = 1000;

// Reward accumulated from the root to every state.
std::vector<double> accumulated_rewards(const TokenMDP& mdp) {
  const StateSpace& space = mdp.space();
  const std::size_t n = space.vocab_size();
  std::vector<double> acc(space.state_count(), 0.0);
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    const StateIndex s = space.state_of_row(row);
    const StateIndex first = space.child(s, TokenId(0));
    for (std::size_t a = 0; a < n; ++a) acc[first + a] = acc[s] + mdp.rewards()[row * n + a];
  }
  return acc;
}

TokenId draw_categorical(Rng& rng, std::span<const double> probs) {
  const double u = rng.uniform01();
  double cum = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    cum += probs[a];
    if (u < cum) return TokenId(static_cast<std::uint32_t>(a));
  }
  return TokenId(static_cast<std::uint32_t>(probs.size() - 1));
}

}  // namespace

std::string_view to_string(SamplerPolicy s) noexcept {
  return s == SamplerPolicy::Uniform ? "uniform" : "teacher_boltzmann";
}

SamplerPolicy parse_sampler(std::string_view name) {
  if (name == "uniform") return SamplerPolicy::Uniform;
  if (name == "teacher_boltzmann") return SamplerPolicy::TeacherBoltzmann;
  throw InvalidArgument(fmt::format("unknown sampler '{}'", name));
}

void GenConfig::validate() const {
  if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
  if (horizon == 0) throw InvalidArgument("horizon must be positive");
  if (num_prompts == 0) throw InvalidArgument("num_prompts must be positive");
  if (pairs_per_prompt == 0) throw InvalidArgument("pairs_per_prompt must be positive");
  if (!(reward_low <= reward_high) || !std::isfinite(reward_low) || !std::isfinite(reward_high)) {
    throw InvalidArgument("reward bounds must be finite with reward_low <= reward_high");
  }
  if (!(bt_temperature > 0.0)) throw InvalidArgument("bt_temperature must be positive");
  if (!(sampler_beta > 0.0)) throw InvalidArgument("sampler_beta must be positive");
}

TokenMDP sample_mdp(const GenConfig& cfg) {
  cfg.validate();
  std::vector<std::int64_t> ids(cfg.num_prompts);
  std::vector<PromptWeight> prompts(cfg.num_prompts);
  for (std::uint32_t p = 0; p < cfg.num_prompts; ++p) {
    ids[p] = p;
    prompts[p] = {p, 1.0 / cfg.num_prompts};
  }
  StateSpace space(cfg.vocab_size, cfg.horizon, ids);
  space.check_size();
  Rng rng(cfg.seed, Stream::Rewards);
  std::vector<double> rewards(space.nonterminal_count() * cfg.vocab_size);
  for (double& r : rewards) r = rng.uniform(cfg.reward_low, cfg.reward_high);
  return TokenMDP(cfg.vocab_size, cfg.horizon, std::move(prompts), std::move(rewards));
}

TeacherModel make_soft_optimal_teacher(const TokenMDP& mdp, double beta_teacher) {
  const auto sol = soft_value_iteration(mdp, beta_teacher);
  return TeacherModel{TabularPolicy(mdp.space(), sol.q), beta_teacher, TerminalValue::Zero, {}};
}

TeacherModel make_sequence_value_teacher(const TokenMDP& mdp, double beta_teacher) {
  const auto sol = soft_value_iteration(mdp, beta_teacher);
  const StateSpace& space = mdp.space();
  const std::size_t n = space.vocab_size();
  const auto acc = accumulated_rewards(mdp);
  std::vector<double> logits = sol.q;
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    const double base = acc[space.state_of_row(row)];
    for (std::size_t a = 0; a < n; ++a) logits[row * n + a] += base;
  }
  // A flat row c has soft value c + beta * ln(n).
  const double flat_offset = beta_teacher * std::log(static_cast<double>(n));
  std::vector<double> terminal(space.terminal_count() * n);
  for (StateIndex s = 0; s < space.state_count(); ++s) {
    if (!space.is_terminal(s)) continue;
    const std::size_t row = space.terminal_row_of(s);
    for (std::size_t a = 0; a < n; ++a) terminal[row * n + a] = acc[s] - flat_offset;
  }
  return TeacherModel{TabularPolicy(space, std::move(logits)), beta_teacher, TerminalValue::LogSumExp,
                      std::move(terminal)};
}

Dataset sample_preference_pairs(const TokenMDP& mdp, const GenConfig& cfg) {
  cfg.validate();
  const StateSpace& space = mdp.space();
  if (cfg.vocab_size != space.vocab_size() || cfg.horizon != space.horizon()) {
    throw InvalidArgument("generation config does not match the MDP shape");
  }
  BoltzmannPolicy sampler;
  if (cfg.sampler == SamplerPolicy::TeacherBoltzmann) {
    sampler = boltzmann_policy(soft_value_iteration(mdp, cfg.sampler_beta));
  }
  const auto acc = accumulated_rewards(mdp);
  Rng rng(cfg.seed, Stream::Pairs);

  auto draw = [&](std::size_t prompt_idx, Trajectory& traj) -> StateIndex {
    const std::size_t len = cfg.variable_length ? 1 + rng.index(cfg.horizon) : cfg.horizon;
    traj.prompt_id = space.prompt_ids()[prompt_idx];
    traj.actions.clear();
    StateIndex s = space.root(prompt_idx);
    for (std::size_t t = 0; t < len; ++t) {
      const TokenId a = cfg.sampler == SamplerPolicy::Uniform
                            ? TokenId(static_cast<std::uint32_t>(rng.index(cfg.vocab_size)))
                            : draw_categorical(rng, sampler.row(s));
      traj.actions.push_back(a);
      s = space.child(s, a);
    }
    return s;
  };

  Dataset data;
  data.reserve(static_cast<std::size_t>(space.num_prompts()) * cfg.pairs_per_prompt);
  Trajectory t1, t2;
  for (std::size_t p = 0; p < space.num_prompts(); ++p) {
    for (std::uint32_t k = 0; k < cfg.pairs_per_prompt; ++k) {
      int rejects = 0;
      while (true) {
        const StateIndex e1 = draw(p, t1);
        const StateIndex e2 = draw(p, t2);
        const double r1 = acc[e1];
        const double r2 = acc[e2];
        if (t1 == t2 || r1 == r2) {
          if (++rejects >= kMaxConsecutiveRejects) {
            throw ExhaustionError(fmt::format("prompt {}: {} consecutive candidate pairs were identical or tied",
                                              space.prompt_ids()[p], rejects));
          }
          continue;
        }
        const bool first_wins = rng.uniform01() < sigmoid((r1 - r2) / cfg.bt_temperature);
        if (first_wins) {
          data.push_back(make_pair(t1, t2, r1 - r2));
        } else {
          data.push_back(make_pair(t2, t1, r2 - r1));
        }
        break;
      }
    }
  }
  return data;
}

std::string dataset_to_string(const Dataset& data) {
  std::string out;
  for (const auto& p : data) {
    out += pair_to_json_line(p);
    out += '\n';
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  const std::string text = dataset_to_string(data);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError(fmt::format("write to {} failed", path.string()));
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    data.push_back(pair_from_json_line(line, line_no));
  }
  if (in.bad()) throw IoError(fmt::format("read from {} failed", path.string()));
  return data;
}

}  // namespace tvkd
