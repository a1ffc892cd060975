#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../support/oracle.hpp"
#include "tvkd/errors.hpp"
#include "tvkd/losses.hpp"
#include "tvkd/numerics.hpp"

using namespace tvkd;

namespace {

PreferencePair one_step_pair() { return make_pair(Trajectory{0, {TokenId(0)}}, Trajectory{0, {TokenId(1)}}); }

}  // namespace

TEST_CASE("per-token reward") {
  LossConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 2.0;
  CHECK(per_token_reward(-1.0, 0.4, cfg) == doctest::Approx(-2.2));
  CHECK_THROWS_AS(per_token_reward(std::nan(""), 0.0, cfg), NonFiniteError);
  cfg.beta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg.beta = 1.0;
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("hand-computed loss on a one-step pair") {
  const TabularPolicy p(StateSpace(2, 1, {0}));
  const std::vector<double> psi_w{0.3}, psi_l{-0.2};
  LossConfig cfg;
  cfg.alpha = 0.5;
  cfg.beta = 1.0;
  const auto rep = tvkd_loss(p, one_step_pair(), psi_w, psi_l, cfg);
  CHECK(rep.margin == doctest::Approx(-0.25));
  CHECK(rep.loss == doctest::Approx(std::log1p(std::exp(0.25))));
  CHECK(rep.rewards_winner[0] == doctest::Approx(std::log(0.5) - 0.15));
  CHECK(rep.rewards_loser[0] == doctest::Approx(std::log(0.5) + 0.1));
  CHECK(tvkd_margin(p, one_step_pair(), psi_w, psi_l, cfg) == rep.margin);
}

TEST_CASE("loss input checks") {
  const TabularPolicy p(StateSpace(2, 2, {0}));
  const PreferencePair pair = one_step_pair();
  const std::vector<double> two{0.0, 0.0}, one{0.0};
  LossConfig cfg;
  CHECK_THROWS_AS(tvkd_loss(p, pair, two, one, cfg), LengthMismatch);
  const TabularPolicy other(StateSpace(3, 2, {0}));
  CHECK_THROWS_AS(dpo_loss(p, other, pair, 1.0), CoverageError);
  CHECK_THROWS_AS(dpo_form_loss(p, pair, 0.0), InvalidArgument);
}

TEST_CASE("alpha = 0 reduces to DPO") {
  Rng rng(88);
  for (int i = 0; i < 200; ++i) {
    const TokenMDP mdp = oracle::random_mdp(rng, 4, 3);
    const auto p = TabularPolicy::gaussian(mdp.space(), 1.0, rng.next());
    const auto ref = TabularPolicy::gaussian(mdp.space(), 1.0, rng.next());
    const auto pair = oracle::random_pair(mdp.space(), rng);
    std::vector<double> pw(pair.winner.size()), pl(pair.loser.size());
    for (double& x : pw) x = rng.uniform(-2, 2);
    for (double& x : pl) x = rng.uniform(-2, 2);
    LossConfig cfg;
    cfg.alpha = 0.0;
    cfg.beta = rng.uniform(0.1, 3.0);
    CHECK(std::abs(tvkd_loss(p, pair, pw, pl, cfg).loss - dpo_form_loss(p, pair, cfg.beta)) <= 1e-12);
    cfg.use_reference = true;
    CHECK(std::abs(tvkd_loss_with_reference(p, ref, pair, pw, pl, cfg).loss - dpo_loss(p, ref, pair, cfg.beta)) <=
          1e-12);
  }
}

TEST_CASE("gradient structure") {
  Rng rng(89);
  const TokenMDP mdp = oracle::random_mdp(rng, 4, 3);
  const auto p = TabularPolicy::gaussian(mdp.space(), 1.0, 3);
  const auto pair = oracle::random_pair(mdp.space(), rng, true);
  std::vector<double> pw(pair.winner.size(), 0.1), pl(pair.loser.size(), -0.3);
  LossConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 0.9;
  const auto g = tvkd_gradient(p, pair, pw, pl, cfg);
  CHECK(g.coefficient == doctest::Approx(cfg.beta * sigmoid(-g.margin)));
  for (std::size_t i = 0; i < g.gradient.size(); ++i) {
    CHECK(g.gradient[i] == doctest::Approx(-g.coefficient * g.direction[i]));
  }
  std::vector<double> acc(p.parameter_count(), 0.0);
  const auto rep = accumulate_tvkd_gradient(p, pair, pw, pl, cfg, nullptr, 0.5, acc);
  CHECK(rep.loss == doctest::Approx(g.loss));
  for (std::size_t i = 0; i < acc.size(); ++i) CHECK(acc[i] == doctest::Approx(0.5 * g.gradient[i]));

  const PolicyLoss loss = [&](const TabularPolicy& q) { return tvkd_loss(q, pair, pw, pl, cfg).loss; };
  const PolicyGradient grad = [&](const TabularPolicy& q) { return tvkd_gradient(q, pair, pw, pl, cfg).gradient; };
  CHECK(finite_difference_check(loss, grad, p) <= 1e-5);

  // Shaping does not change the gradient direction, only its weight.
  LossConfig plain = cfg;
  plain.alpha = 0.0;
  const auto g0 = tvkd_gradient(p, pair, pw, pl, plain);
  for (std::size_t i = 0; i < g.direction.size(); ++i) CHECK(g.direction[i] == doctest::Approx(g0.direction[i]));
}

TEST_CASE("trajectory scores") {
  const StateSpace space(2, 2, {0});
  const TabularPolicy p(space, {std::log(3.0), 0.0, 0.0, 0.0, 0.0, 0.0});
  const Trajectory t{0, {TokenId(0), TokenId(1)}};
  const double lp = std::log(0.75) + std::log(0.5);
  CHECK(score_trajectory(p, t, ScoreMode::LogProb) == doctest::Approx(lp));
  CHECK(score_trajectory(p, t, ScoreMode::LengthNormLogProb) == doctest::Approx(lp / 2));
  CHECK_THROWS_AS(score_trajectory(p, Trajectory{0, {}}, ScoreMode::LengthNormLogProb), EmptyTrajectory);
}

TEST_CASE("loss report csv") {
  std::vector<PairLossReport> reps(2);
  reps[0].margin = 0.5;
  reps[0].loss = 0.25;
  reps[1].margin = -1;
  reps[1].loss = 2;
  std::ostringstream out;
  write_loss_reports_csv(out, reps);
  CHECK(out.str() == "pair,margin,loss\n0,0.5,0.25\n1,-1,2\n");
}
