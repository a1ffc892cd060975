#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "../support/oracle.hpp"
#include "tvkd/errors.hpp"
#include "tvkd/soft_rl.hpp"

using namespace tvkd;

#ifndef TVKD_GOLDEN_DIR
#error "TVKD_GOLDEN_DIR must be defined"
#endif

namespace {

TokenMDP zero_mdp(std::uint32_t vocab, std::uint32_t horizon) {
  const StateSpace space(vocab, horizon, {0});
  return TokenMDP(vocab, horizon, {{0, 1.0}}, std::vector<double>(space.nonterminal_count() * vocab, 0.0));
}

}  // namespace

TEST_CASE("zero rewards give H * beta * log V at the root") {
  const SoftSolution sol = soft_value_iteration(zero_mdp(4, 2), 1.0);
  CHECK(sol.v[0] == doctest::Approx(2.77258872223978123766892848583).epsilon(1e-15));
  const SoftSolution hot = soft_value_iteration(zero_mdp(3, 3), 0.5);
  CHECK(hot.v[0] == doctest::Approx(3 * 0.5 * std::log(3.0)).epsilon(1e-14));
  for (StateIndex s = 0; s < hot.space.state_count(); ++s) {
    if (hot.space.is_terminal(s)) CHECK(hot.v[s] == 0.0);
  }
}

TEST_CASE("one-step values") {
  const TokenMDP mdp(2, 1, {{0, 1.0}}, {1.0, 0.0});
  CHECK(soft_value_iteration(mdp, 1.0).v[0] == doctest::Approx(1.31326168751822283404899549497).epsilon(1e-15));
  const TokenMDP two(2, 1, {{0, 1.0}}, {1.0, 2.0});
  CHECK(soft_value_iteration(two, 0.5).v[0] == doctest::Approx(2.06346400552148624822186340318).epsilon(1e-15));
  const auto pi = boltzmann_policy(soft_value_iteration(mdp, 1.0));
  CHECK(pi.row(0)[0] == doctest::Approx(0.731058578630004879251159241822).epsilon(1e-15));
}

TEST_CASE("solver matches the recursive oracle") {
  Rng rng(4242);
  for (int i = 0; i < 10; ++i) {
    const TokenMDP mdp = oracle::random_mdp(rng, 4, 3);
    const double beta = rng.uniform(0.05, 3.0);
    const SoftSolution sol = soft_value_iteration(mdp, beta);
    const auto pi = boltzmann_policy(sol);
    for (const auto pid : mdp.space().prompt_ids()) {
      for (const State& s : enumerate_states(mdp.space(), pid)) {
        const StateIndex idx = mdp.space().index_of(s);
        CHECK(sol.v[idx] == doctest::Approx(oracle::soft_v(mdp, s, beta)).epsilon(1e-12));
        if (mdp.space().is_terminal(idx)) continue;
        const auto q = oracle::soft_q(mdp, s, beta);
        const auto p = oracle::softmax(q, beta);
        for (std::size_t a = 0; a < q.size(); ++a) {
          CHECK(sol.q_row(idx)[a] == doctest::Approx(q[a]).epsilon(1e-12));
          CHECK(pi.row(idx)[a] == doctest::Approx(p[a]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("Boltzmann rows are normalised") {
  Rng rng(7);
  const TokenMDP mdp = oracle::random_mdp(rng, 5, 3);
  const auto pi = boltzmann_policy(soft_value_iteration(mdp, 0.3));
  for (std::size_t r = 0; r < mdp.space().nonterminal_count(); ++r) {
    double s = 0.0;
    for (double p : pi.row_at(r)) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("policy from logits and divergence") {
  const StateSpace space(2, 1, {0});
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{2.0, 0.0};
  const auto pa = boltzmann_from_logits(space, a);
  const auto pb = boltzmann_from_logits(space, b);
  const std::vector<double> w{1.0};
  CHECK(policy_divergence(pb, pa, w) == doctest::Approx(0.067130754453132781664997829912).epsilon(1e-13));
  CHECK(policy_divergence(pa, pb, w) == doctest::Approx(0.0826077448947447831435720695686).epsilon(1e-13));
  CHECK(max_policy_divergence(pa, pa) == 0.0);
  const std::vector<double> zero{0.0};
  CHECK_THROWS_AS(policy_divergence(pa, pb, zero), InvalidArgument);
  const std::vector<double> neg{-1.0};
  CHECK_THROWS_AS(policy_divergence(pa, pb, neg), InvalidArgument);
}

TEST_CASE("solver argument checks") {
  const TokenMDP mdp(2, 1, {{0, 1.0}}, {1.0, 0.0});
  CHECK_THROWS_AS(soft_value_iteration(mdp, 0.0), InvalidArgument);
  CHECK_THROWS_AS(soft_value_iteration(mdp, -1.0), InvalidArgument);
  const std::vector<double> wrong{1.0};
  CHECK_THROWS_AS(soft_value_iteration(mdp, 1.0, wrong), ShapeMismatch);
  const std::vector<double> nan{1.0, std::nan("")};
  CHECK_THROWS_AS(soft_value_iteration(mdp, 1.0, nan), NonFiniteError);
  CHECK_THROWS_AS(soft_value_iteration(zero_mdp(10, 8), 1.0, {}, 1000), SizeLimitError);
}

TEST_CASE("zero-reward solution export matches golden file") {
  std::ostringstream out;
  write_solution(out, soft_value_iteration(zero_mdp(2, 2), 1.0));
  std::ifstream in(std::string(TVKD_GOLDEN_DIR) + "/zero_reward_v2_h2.txt");
  REQUIRE(in);
  std::stringstream expected;
  expected << in.rdbuf();
  CHECK(out.str() == expected.str());
}
