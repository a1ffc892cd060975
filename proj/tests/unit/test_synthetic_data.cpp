#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tvkd/errors.hpp"
#include "tvkd/synthetic_data.hpp"

using namespace tvkd;

namespace {

GenConfig small_gen(std::uint64_t seed) {
  GenConfig g;
  g.seed = seed;
  g.num_prompts = 6;
  g.pairs_per_prompt = 30;
  return g;
}

}  // namespace

TEST_CASE("mdp sampling is deterministic per seed") {
  const auto a = sample_mdp(small_gen(1));
  const auto b = sample_mdp(small_gen(1));
  const auto c = sample_mdp(small_gen(2));
  CHECK(std::vector<double>(a.rewards().begin(), a.rewards().end()) ==
        std::vector<double>(b.rewards().begin(), b.rewards().end()));
  CHECK_FALSE(std::vector<double>(a.rewards().begin(), a.rewards().end()) ==
              std::vector<double>(c.rewards().begin(), c.rewards().end()));
  CHECK(a.prompts().size() == 6);
  for (const auto& p : a.prompts()) CHECK(p.weight == doctest::Approx(1.0 / 6));
  for (double r : a.rewards()) CHECK((r >= -1.0 && r < 1.0));
}

TEST_CASE("preference pairs") {
  const GenConfig g = small_gen(3);
  const TokenMDP mdp = sample_mdp(g);
  const Dataset d = sample_preference_pairs(mdp, g);
  REQUIRE(d.size() == 180);
  CHECK(d == sample_preference_pairs(mdp, g));
  std::size_t agree = 0;
  for (const auto& p : d) {
    CHECK_NOTHROW(validate_pair(mdp.space(), p));
    CHECK(p.winner.size() == 3);
    REQUIRE(p.ground_truth_margin.has_value());
    CHECK(*p.ground_truth_margin ==
          doctest::Approx(trajectory_return(mdp, p.winner) - trajectory_return(mdp, p.loser)));
    CHECK(*p.ground_truth_margin != 0.0);
    if (*p.ground_truth_margin > 0) ++agree;
  }
  // Bradley-Terry labels mostly agree with the returns.
  CHECK(agree > d.size() / 2);
}

TEST_CASE("variable length and teacher sampler") {
  GenConfig g = small_gen(4);
  g.variable_length = true;
  g.sampler = SamplerPolicy::TeacherBoltzmann;
  g.sampler_beta = 0.5;
  const TokenMDP mdp = sample_mdp(g);
  const Dataset d = sample_preference_pairs(mdp, g);
  bool short_seen = false;
  for (const auto& p : d) {
    CHECK(p.winner.size() >= 1);
    CHECK(p.winner.size() <= 3);
    short_seen = short_seen || p.winner.size() < 3 || p.loser.size() < 3;
  }
  CHECK(short_seen);
}

TEST_CASE("exhaustion when no distinct returns exist") {
  GenConfig g = small_gen(5);
  g.reward_low = g.reward_high = 0.5;
  const TokenMDP mdp = sample_mdp(g);
  CHECK_THROWS_AS(sample_preference_pairs(mdp, g), ExhaustionError);
}

TEST_CASE("config validation") {
  GenConfig g;
  g.vocab_size = 0;
  CHECK_THROWS_AS(g.validate(), InvalidArgument);
  g = GenConfig{};
  g.reward_low = 2.0;
  CHECK_THROWS_AS(g.validate(), InvalidArgument);
  g = GenConfig{};
  g.bt_temperature = 0.0;
  CHECK_THROWS_AS(g.validate(), InvalidArgument);
  CHECK(parse_sampler("uniform") == SamplerPolicy::Uniform);
  CHECK(parse_sampler(to_string(SamplerPolicy::TeacherBoltzmann)) == SamplerPolicy::TeacherBoltzmann);
  CHECK_THROWS_AS(parse_sampler("greedy"), InvalidArgument);
}

TEST_CASE("dataset file round trip and parse errors") {
  const GenConfig g = small_gen(6);
  const Dataset d = sample_preference_pairs(sample_mdp(g), g);
  const auto dir = std::filesystem::temp_directory_path() / "tvkd_unit_dataset";
  std::filesystem::create_directories(dir);
  const auto path = dir / "d.jsonl";
  write_dataset(path, d);
  CHECK(read_dataset(path) == d);
  CHECK(sha256_file(path) == sha256(dataset_to_string(d)));
  {
    std::ofstream out(path, std::ios::app);
    out << "{\"prompt_id\":0}\n";
  }
  try {
    read_dataset(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == d.size() + 1);
  }
  CHECK_THROWS_AS(read_dataset(dir / "missing.jsonl"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sha256") {
  CHECK(to_hex(sha256("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(to_hex(sha256("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const Sha256 h = sha256("tvkd");
  CHECK(sha256_from_hex(to_hex(h)) == h);
  CHECK_THROWS_AS(sha256_from_hex("abc"), InvalidArgument);
  CHECK_THROWS_AS(sha256_from_hex(std::string(64, 'g')), InvalidArgument);
}
