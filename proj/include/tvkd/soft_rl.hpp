#pragma once

// Exact MaxEnt solver for finite token MDPs (gamma = 1):
//   Q(s, a) = r(s, a) + shaping(s, a) + V(s')
//   V(s)    = beta * log sum_a exp(Q(s, a) / beta),   V(terminal) = 0
//   pi(a|s) = exp((Q(s, a) - V(s)) / beta)

#include <iosfwd>
#include <span>
#include <vector>

#include "tvkd/core_mdp.hpp"

namespace tvkd {

struct SoftSolution {
  StateSpace space;
  double beta = 1.0;
  std::vector<double> q;  // nonterminal_count x vocab, row order of StateSpace::row_of
  std::vector<double> v;  // state_count

  std::span<const double> q_row(StateIndex s) const {
    const std::size_t n = space.vocab_size();
    return std::span<const double>(q).subspan(space.row_of(s) * n, n);
  }
};

/// Backward induction. `shaping`, when non-empty, is added to the reward table
/// entry-wise and must have the reward table's shape.
SoftSolution soft_value_iteration(const TokenMDP& mdp, double beta, std::span<const double> shaping = {},
                                  std::size_t state_cap = kDefaultStateCap);

/// Probability table over non-terminal states.
struct BoltzmannPolicy {
  StateSpace space;
  std::vector<double> probs;  // nonterminal_count x vocab

  std::span<const double> row(StateIndex s) const {
    const std::size_t n = space.vocab_size();
    return std::span<const double>(probs).subspan(space.row_of(s) * n, n);
  }
  std::span<const double> row_at(std::size_t row) const {
    const std::size_t n = space.vocab_size();
    return std::span<const double>(probs).subspan(row * n, n);
  }
};

BoltzmannPolicy boltzmann_policy(const SoftSolution& sol);

/// Row-wise softmax(logits / temperature) over a (nonterminal_count x vocab) table.
BoltzmannPolicy boltzmann_from_logits(const StateSpace& space, std::span<const double> logits,
                                      double temperature = 1.0);

/// sum_s w(s) KL(p(.|s) || q(.|s)) / sum_s w(s), one weight per non-terminal row.
double policy_divergence(const BoltzmannPolicy& p, const BoltzmannPolicy& q, std::span<const double> weights);

/// Largest per-row KL(p || q).
double max_policy_divergence(const BoltzmannPolicy& p, const BoltzmannPolicy& q);

/// Text export: one line per state, "index V [Q_0 .. Q_{V-1}]", every number
/// in 12-significant-digit scientific notation. Terminal states carry V only.
void write_solution(std::ostream& out, const SoftSolution& sol);

}  // namespace tvkd
