#pragma once

// Reference implementations used by the tests. They walk explicit State
// objects recursively and never touch the library's row indexing or
// logsumexp, so agreement with the library is a real cross-check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tvkd/core_mdp.hpp"
#include "tvkd/random.hpp"

namespace oracle {

using tvkd::State;
using tvkd::TokenId;
using tvkd::TokenMDP;

inline double lse(const std::vector<double>& x, double beta) {
  double m = x[0];
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (double v : x) s += std::exp((v - m) / beta);
  return m + beta * std::log(s);
}

inline std::vector<double> softmax(const std::vector<double>& x, double beta) {
  const double z = lse(x, beta);
  std::vector<double> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) p[i] = std::exp((x[i] - z) / beta);
  return p;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Extra per-step reward F(s, a, s').
using Bonus = std::function<double(const State&, TokenId, const State&)>;

inline std::vector<double> soft_q(const TokenMDP& mdp, const State& s, double beta, const Bonus& bonus = {});

inline double soft_v(const TokenMDP& mdp, const State& s, double beta, const Bonus& bonus = {}) {
  if (s.generated.size() == mdp.horizon()) return 0.0;
  return lse(soft_q(mdp, s, beta, bonus), beta);
}

inline std::vector<double> soft_q(const TokenMDP& mdp, const State& s, double beta, const Bonus& bonus) {
  const auto& space = mdp.space();
  std::vector<double> q(mdp.vocab_size());
  for (std::uint32_t a = 0; a < mdp.vocab_size(); ++a) {
    State next = s;
    next.generated.push_back(TokenId(a));
    double r = mdp.reward(space.index_of(s), TokenId(a));
    if (bonus) r += bonus(s, TokenId(a), next);
    q[a] = r + soft_v(mdp, next, beta, bonus);
  }
  return q;
}

// Random MDP with vocab in [2, max_vocab], horizon in [1, max_horizon],
// 1 or 2 prompts and rewards U[-1, 1).
inline TokenMDP random_mdp(tvkd::Rng& rng, std::uint32_t max_vocab, std::uint32_t max_horizon) {
  const auto vocab = static_cast<std::uint32_t>(2 + rng.index(max_vocab - 1));
  const auto horizon = static_cast<std::uint32_t>(1 + rng.index(max_horizon));
  const std::size_t prompts = 1 + rng.index(2);
  std::vector<tvkd::PromptWeight> pw;
  for (std::size_t p = 0; p < prompts; ++p) pw.push_back({static_cast<std::int64_t>(10 + p), 1.0 / prompts});
  std::size_t nonterminal = 0;
  std::size_t level = 1;
  for (std::uint32_t t = 0; t < horizon; ++t) {
    nonterminal += level;
    level *= vocab;
  }
  std::vector<double> rewards(prompts * nonterminal * vocab);
  for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
  return TokenMDP(vocab, horizon, std::move(pw), std::move(rewards));
}

inline tvkd::Trajectory random_trajectory(const tvkd::StateSpace& space, tvkd::Rng& rng, bool full_length) {
  tvkd::Trajectory t;
  t.prompt_id = space.prompt_ids()[rng.index(space.num_prompts())];
  const std::size_t len = full_length ? space.horizon() : 1 + rng.index(space.horizon());
  for (std::size_t i = 0; i < len; ++i) t.actions.push_back(TokenId(static_cast<std::uint32_t>(rng.index(space.vocab_size()))));
  return t;
}

// Two distinct trajectories on the same prompt.
inline tvkd::PreferencePair random_pair(const tvkd::StateSpace& space, tvkd::Rng& rng, bool full_length = false) {
  for (;;) {
    tvkd::Trajectory w = random_trajectory(space, rng, full_length);
    tvkd::Trajectory l = random_trajectory(space, rng, full_length);
    l.prompt_id = w.prompt_id;
    if (!(w == l)) return tvkd::make_pair(std::move(w), std::move(l));
  }
}

// Sum over the trajectory of log softmax(logits(s_t))[a_t], logits read
// through `row` from a State.
inline double log_prob(const std::function<std::vector<double>(const State&)>& row, const tvkd::Trajectory& t) {
  State s{t.prompt_id, {}};
  double total = 0.0;
  for (TokenId a : t.actions) {
    const auto x = row(s);
    total += x[a.value] - lse(x, 1.0);
    s.generated.push_back(a);
  }
  return total;
}

}  // namespace oracle
