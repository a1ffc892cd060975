#include "tvkd/soft_rl.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "tvkd/errors.hpp"
#include "tvkd/numerics.hpp"

namespace tvkd {

SoftSolution soft_value_iteration(const TokenMDP& mdp, double beta, std::span<const double> shaping,
                                  std::size_t state_cap) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive and finite");
  const StateSpace& space = mdp.space();
  space.check_size(state_cap);
  const auto rewards = mdp.rewards();
  if (!shaping.empty() && shaping.size() != rewards.size()) {
    throw ShapeMismatch(fmt::format("shaping table has {} entries, expected {}", shaping.size(), rewards.size()));
  }
  if (!all_finite(rewards)) throw NonFiniteError("reward table contains a non-finite entry");
  if (!all_finite(shaping)) throw NonFiniteError("shaping table contains a non-finite entry");

  const std::size_t vocab = space.vocab_size();
  SoftSolution sol;
  sol.space = space;
  sol.beta = beta;
  sol.q.assign(space.nonterminal_count() * vocab, 0.0);
  sol.v.assign(space.state_count(), 0.0);

  for (std::size_t p = 0; p < space.num_prompts(); ++p) {
    const StateIndex root = space.root(p);
    for (std::size_t local = space.nonterminal_per_prompt(); local-- > 0;) {
      const StateIndex s = root + local;
      const std::size_t row = space.row_of(s);
      const StateIndex first_child = space.child(s, TokenId(0));
      double* q = sol.q.data() + row * vocab;
      for (std::size_t a = 0; a < vocab; ++a) {
        double r = rewards[row * vocab + a];
        if (!shaping.empty()) r += shaping[row * vocab + a];
        q[a] = r + sol.v[first_child + a];
      }
      sol.v[s] = logsumexp(std::span<const double>(q, vocab), beta);
    }
  }
  return sol;
}

BoltzmannPolicy boltzmann_policy(const SoftSolution& sol) {
  const StateSpace& space = sol.space;
  const std::size_t vocab = space.vocab_size();
  BoltzmannPolicy pi{space, std::vector<double>(sol.q.size())};
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    const double v = sol.v[space.state_of_row(row)];
    double total = 0.0;
    for (std::size_t a = 0; a < vocab; ++a) {
      const double p = std::exp((sol.q[row * vocab + a] - v) / sol.beta);
      pi.probs[row * vocab + a] = p;
      total += p;
    }
    for (std::size_t a = 0; a < vocab; ++a) pi.probs[row * vocab + a] /= total;
  }
  return pi;
}

BoltzmannPolicy boltzmann_from_logits(const StateSpace& space, std::span<const double> logits,
                                      double temperature) {
  const std::size_t vocab = space.vocab_size();
  if (logits.size() != space.nonterminal_count() * vocab) throw ShapeMismatch("logit table shape mismatch");
  BoltzmannPolicy pi{space, std::vector<double>(logits.size())};
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    softmax_into(logits.subspan(row * vocab, vocab), temperature,
                 std::span<double>(pi.probs).subspan(row * vocab, vocab));
  }
  return pi;
}

double policy_divergence(const BoltzmannPolicy& p, const BoltzmannPolicy& q, std::span<const double> weights) {
  if (!(p.space == q.space)) throw ShapeMismatch("policies are defined on different state spaces");
  const std::size_t rows = p.space.nonterminal_count();
  if (weights.size() != rows) throw ShapeMismatch(fmt::format("expected {} weights, got {}", rows, weights.size()));
  double num = 0.0;
  double den = 0.0;
  for (std::size_t row = 0; row < rows; ++row) {
    if (weights[row] < 0.0) throw InvalidArgument("weights must be nonnegative");
    if (weights[row] == 0.0) continue;
    num += weights[row] * kl_divergence(p.row_at(row), q.row_at(row));
    den += weights[row];
  }
  if (!(den > 0.0)) throw InvalidArgument("weights must have a positive sum");
  return num / den;
}

double max_policy_divergence(const BoltzmannPolicy& p, const BoltzmannPolicy& q) {
  if (!(p.space == q.space)) throw ShapeMismatch("policies are defined on different state spaces");
  double worst = 0.0;
  for (std::size_t row = 0; row < p.space.nonterminal_count(); ++row) {
    worst = std::max(worst, kl_divergence(p.row_at(row), q.row_at(row)));
  }
  return worst;
}

void write_solution(std::ostream& out, const SoftSolution& sol) {
  const StateSpace& space = sol.space;
  for (StateIndex s = 0; s < space.state_count(); ++s) {
    std::string line = fmt::format("{} {:.11e}", s, sol.v[s]);
    if (!space.is_terminal(s)) {
      for (double q : sol.q_row(s)) line += fmt::format(" {:.11e}", q);
    }
    out << line << '\n';
  }
}

}  // namespace tvkd
