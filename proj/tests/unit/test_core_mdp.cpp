#include <doctest.h>

#include <set>

#include "tvkd/core_mdp.hpp"
#include "tvkd/errors.hpp"

using namespace tvkd;

namespace {

Trajectory traj(std::int64_t prompt, std::initializer_list<std::uint32_t> tokens) {
  Trajectory t{prompt, {}};
  for (auto a : tokens) t.actions.push_back(TokenId(a));
  return t;
}

TokenMDP small_mdp() {
  // vocab 2, horizon 2, one prompt: 3 non-terminal rows.
  return TokenMDP(2, 2, {{0, 1.0}}, {0.5, -1.0, 2.0, 0.25, -0.75, 1.5});
}

}  // namespace

TEST_CASE("state counts") {
  const StateSpace space(3, 2, {5, 7});
  CHECK(space.states_per_prompt() == 13);
  CHECK(space.nonterminal_per_prompt() == 4);
  CHECK(space.terminal_per_prompt() == 9);
  CHECK(space.state_count() == 26);
  CHECK(space.nonterminal_count() == 8);
  CHECK(space.terminal_count() == 18);
}

TEST_CASE("index formula") {
  const StateSpace space(3, 2, {5, 7});
  // offset(2) = 1 + 3 = 4; [1, 2] -> 4 + 1*3 + 2.
  CHECK(space.index_of(State{5, {TokenId(1), TokenId(2)}}) == 9);
  CHECK(space.index_of(State{7, {TokenId(1), TokenId(2)}}) == 13 + 9);
  CHECK(space.index_of(State{7, {}}) == 13);
  CHECK(space.index_of(State{5, {TokenId(2)}}) == 3);
  CHECK(space.root(1) == 13);
}

TEST_CASE("index round trip, depth order and rows") {
  const StateSpace space(3, 3, {0, 1, 2});
  std::set<std::size_t> rows;
  for (StateIndex s = 0; s < space.state_count(); ++s) {
    const State st = space.state_at(s);
    CHECK(space.index_of(st) == s);
    CHECK(space.depth(s) == st.generated.size());
    CHECK(space.is_terminal(s) == (st.generated.size() == 3));
    CHECK(space.prompt_of(s) == static_cast<std::size_t>(st.prompt_id));
    if (!space.is_terminal(s)) {
      const std::size_t r = space.row_of(s);
      CHECK(space.state_of_row(r) == s);
      rows.insert(r);
      for (std::uint32_t a = 0; a < 3; ++a) {
        const StateIndex c = space.child(s, TokenId(a));
        CHECK(c > s);
        CHECK(space.index_of(transition(space, st, TokenId(a))) == c);
      }
    } else {
      CHECK_THROWS_AS(space.row_of(s), TerminalStateError);
    }
  }
  CHECK(rows.size() == space.nonterminal_count());
  CHECK(*rows.rbegin() == space.nonterminal_count() - 1);
}

TEST_CASE("enumerate_states follows index order") {
  const StateSpace space(2, 3, {4});
  const auto states = enumerate_states(space, 4);
  REQUIRE(states.size() == space.states_per_prompt());
  for (std::size_t i = 0; i < states.size(); ++i) CHECK(space.index_of(states[i]) == i);
  CHECK_THROWS_AS(enumerate_states(space, 4, 5), SizeLimitError);
}

TEST_CASE("transition errors") {
  const StateSpace space(2, 1, {0});
  const State root{0, {}};
  CHECK_THROWS_AS(transition(space, root, TokenId(2)), InvalidToken);
  const State leaf = transition(space, root, TokenId(1));
  CHECK(leaf.generated.size() == 1);
  CHECK_THROWS_AS(transition(space, leaf, TokenId(0)), TerminalStateError);
  CHECK_THROWS_AS(space.index_of(State{9, {}}), CoverageError);
}

TEST_CASE("construction errors") {
  CHECK_THROWS_AS(StateSpace(0, 2, {0}), InvalidArgument);
  CHECK_THROWS_AS(StateSpace(2, 0, {0}), InvalidArgument);
  CHECK_THROWS_AS(StateSpace(2, 2, {}), InvalidArgument);
  CHECK_THROWS_AS(StateSpace(2, 2, {1, 1}), InvalidArgument);
  CHECK_THROWS_AS(StateSpace(10, 10, {0}).check_size(), SizeLimitError);
  CHECK_THROWS_AS(TokenMDP(2, 2, {{0, 1.0}}, {1.0, 2.0}), ShapeMismatch);
  CHECK_THROWS_AS(TokenMDP(2, 1, {{0, 0.5}}, {1.0, 2.0}), InvalidArgument);
  CHECK_THROWS_AS(TokenMDP(2, 1, {{0, 1.5}, {1, -0.5}}, {1, 2, 3, 4}), InvalidArgument);
}

TEST_CASE("rewards and returns") {
  const TokenMDP mdp = small_mdp();
  CHECK(mdp.reward(0, TokenId(1)) == -1.0);
  CHECK(mdp.reward(2, TokenId(0)) == -0.75);
  CHECK_THROWS_AS(mdp.reward(3, TokenId(0)), TerminalStateError);
  CHECK(trajectory_return(mdp, traj(0, {0, 1})) == doctest::Approx(0.5 + 0.25));
  CHECK(trajectory_return(mdp, traj(0, {1, 1})) == doctest::Approx(-1.0 + 1.5));
  CHECK(trajectory_return(mdp, traj(0, {1})) == doctest::Approx(-1.0));
  const auto states = trajectory_states(mdp.space(), traj(0, {1, 0}));
  CHECK(states == std::vector<StateIndex>{0, 2, 5});
}

TEST_CASE("trajectory validation") {
  const StateSpace space(2, 2, {0});
  CHECK_NOTHROW(validate_trajectory(space, traj(0, {})));
  CHECK_THROWS_AS(validate_trajectory(space, traj(3, {0})), InvalidTrajectory);
  CHECK_THROWS_AS(validate_trajectory(space, traj(0, {0, 0, 0})), InvalidTrajectory);
  CHECK_THROWS_AS(validate_trajectory(space, traj(0, {2})), InvalidTrajectory);
  CHECK_THROWS_AS(make_pair(traj(0, {1}), traj(0, {1})), InvalidTrajectory);
  CHECK_THROWS_AS(make_pair(traj(0, {1}), traj(1, {0})), InvalidTrajectory);
}

TEST_CASE("pair JSON round trip") {
  const PreferencePair p = make_pair(traj(3, {1, 0, 2}), traj(3, {2}), 0.125);
  const std::string line = pair_to_json_line(p);
  CHECK(line == R"({"prompt_id":3,"winner":[1,0,2],"loser":[2],"margin":0.125})");
  CHECK(pair_from_json_line(line, 1) == p);
  const PreferencePair q = make_pair(traj(-1, {0}), traj(-1, {1}));
  CHECK(pair_from_json_line(pair_to_json_line(q), 1) == q);
}

TEST_CASE("pair JSON errors carry the line number") {
  const char* bad[] = {
      "not json",
      R"([1,2])",
      R"({"prompt_id":0,"winner":[1]})",
      R"({"prompt_id":"a","winner":[1],"loser":[0]})",
      R"({"prompt_id":0,"winner":[-1],"loser":[0]})",
      R"({"prompt_id":0,"winner":[1],"loser":[1]})",
      R"({"prompt_id":0,"winner":[1],"loser":[0],"margin":"x"})",
  };
  for (const char* line : bad) {
    try {
      pair_from_json_line(line, 17);
      FAIL("expected ParseError for " << line);
    } catch (const ParseError& e) {
      CHECK(e.line() == 17);
    }
  }
}
