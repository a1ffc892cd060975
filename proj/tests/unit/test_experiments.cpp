#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tvkd/errors.hpp"
#include "tvkd/experiments.hpp"
#include "tvkd/numerics.hpp"

using namespace tvkd;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.gen.num_prompts = 8;
  cfg.gen.pairs_per_prompt = 40;
  cfg.alpha_grid = {0.0, 1.0};
  cfg.beta_grid = {1.0};
  cfg.seeds = {0, 1};
  return cfg;
}

}  // namespace

TEST_CASE("split indices") {
  const auto [train, eval] = split_indices(101, 0.2, 7);
  CHECK(eval.size() == 20);
  CHECK(train.size() == 81);
  CHECK(std::is_sorted(train.begin(), train.end()));
  CHECK(std::is_sorted(eval.begin(), eval.end()));
  std::vector<std::size_t> all(train);
  all.insert(all.end(), eval.begin(), eval.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(101);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  CHECK(split_indices(101, 0.2, 7) == split_indices(101, 0.2, 7));
  CHECK_FALSE(split_indices(101, 0.2, 7) == split_indices(101, 0.2, 8));
  CHECK_THROWS_AS(split_indices(10, 1.0, 0), InvalidArgument);
}

TEST_CASE("names") {
  for (const char* m : {"dpo", "tvkd", "tvkd_ref", "aux:Logits", "aux:Margin"}) CHECK(to_string(parse_method(m)) == m);
  CHECK(parse_method("aux:Max").variant == ShapingVariant::Max);
  CHECK_THROWS_AS(parse_method("ppo"), InvalidArgument);
  CHECK_THROWS_AS(parse_method("aux:Nope"), InvalidArgument);
  for (auto k : {TeacherKind::SoftOptimal, TeacherKind::SequenceValue, TeacherKind::DpoTrained}) {
    CHECK(parse_teacher_kind(to_string(k)) == k);
  }
  CHECK(parse_alignment_mode("policy") == AlignmentMode::Policy);
  CHECK(parse_alignment_mode(to_string(AlignmentMode::Profile)) == AlignmentMode::Profile);
}

TEST_CASE("instances are deterministic") {
  const auto cfg = small_config();
  const Instance a = make_instance(cfg, 3);
  const Instance b = make_instance(cfg, 3);
  CHECK(a.data == b.data);
  CHECK(a.cache == b.cache);
  CHECK(a.eval.size() == 64);
  CHECK(a.train.size() + a.eval.size() == a.data.size());
}

TEST_CASE("DPO is TVKD at alpha = 0, bit for bit") {
  const auto cfg = small_config();
  const Instance inst = make_instance(cfg, 0);
  const auto dpo = train_student(cfg, inst, Method{MethodKind::Dpo}, 0.7, 1.0);
  const auto tv0 = train_student(cfg, inst, Method{MethodKind::Tvkd}, 0.0, 1.0);
  CHECK(dpo.policy == tv0.policy);
  CHECK(dpo.report.accuracy_ground_truth == tv0.report.accuracy_ground_truth);
  CHECK(dpo.report.alpha == 0.0);
  const auto tv = train_student(cfg, inst, Method{MethodKind::Tvkd}, 1.0, 1.0);
  CHECK_FALSE(tv.policy == dpo.policy);
  CHECK(tv.report.steps == dpo.report.steps);
  CHECK(tv.report.epoch_eval_accuracy.size() == cfg.training.epochs + 1);
}

TEST_CASE("other methods and teachers train") {
  auto cfg = small_config();
  cfg.teacher_kind = TeacherKind::DpoTrained;
  const Instance inst = make_instance(cfg, 2);
  CHECK(inst.teacher.beta == cfg.teacher_beta());
  for (const char* m : {"tvkd_ref", "aux:LogProbability", "aux:Expectation"}) {
    const auto r = train_student(cfg, inst, parse_method(m));
    CHECK(r.report.method == m);
    CHECK(std::isfinite(r.report.accuracy_ground_truth));
  }
  cfg.teacher_kind = TeacherKind::SoftOptimal;
  const Instance soft = make_instance(cfg, 2);
  CHECK(soft.teacher.terminal == TerminalValue::Zero);
}

TEST_CASE("margin accuracy counts ties as wrong") {
  Dataset d;
  d.push_back(make_pair(Trajectory{0, {TokenId(0)}}, Trajectory{0, {TokenId(1)}}, 1.0));
  d.push_back(make_pair(Trajectory{0, {TokenId(1)}}, Trajectory{0, {TokenId(0)}}, 1.0));
  d.push_back(make_pair(Trajectory{0, {TokenId(1)}}, Trajectory{0, {TokenId(0)}}, -1.0));
  const TrajectoryScorer score = [](const Trajectory& t) { return t.actions[0].value == 0 ? 1.0 : 0.0; };
  CHECK(eval_margin_accuracy(score, d) == doctest::Approx(1.0 / 3));
  CHECK(eval_margin_accuracy(score, d, LabelSource::GroundTruth) == doctest::Approx(2.0 / 3));
  const TrajectoryScorer flat = [](const Trajectory&) { return 0.0; };
  CHECK(eval_margin_accuracy(flat, d) == 0.0);
  CHECK_THROWS_AS(eval_margin_accuracy(flat, Dataset{}), EmptyDataset);
}

TEST_CASE("student as teacher and value alignment") {
  const StateSpace space(2, 1, {0});
  const TabularPolicy s(space, {1.0, -1.0});
  const TeacherModel t = student_as_teacher(s, 0.5);
  CHECK(t.logits(0)[0] == 0.5);
  CHECK(t.logits(0)[1] == -0.5);
  Dataset d{make_pair(Trajectory{0, {TokenId(0)}}, Trajectory{0, {TokenId(1)}})};
  CHECK(eval_value_alignment(t, t, d) == 0.0);
  CHECK(eval_value_alignment(t, t, d, AlignmentMode::Policy) == 0.0);
  const TeacherModel u = student_as_teacher(TabularPolicy(space), 0.5);
  const auto p = softmax(std::vector<double>{1.0, -1.0});
  const double expected = kl_divergence(p, std::vector<double>{0.5, 0.5});
  CHECK(eval_value_alignment(t, u, d, AlignmentMode::Policy) == doctest::Approx(expected));
  CHECK_THROWS_AS(eval_value_alignment(t, t, Dataset{}), EmptyDataset);
}

TEST_CASE("invariance harness") {
  Rng rng(19, Stream::Verification);
  const TokenMDP mdp = random_verification_mdp(rng);
  auto phi = random_potential(mdp.space(), rng);
  for (StateIndex s = 0; s < phi.size(); ++s) {
    if (mdp.space().is_terminal(s)) CHECK(phi[s] == 0.0);
  }
  const auto rep = verify_invariance(mdp, phi, 0.7);
  CHECK(rep.passed);
  CHECK(rep.max_policy_kl <= kInvarianceTolerance);
  const StateIndex leaf = mdp.space().state_count() - 1;
  phi[leaf] = 0.3;
  try {
    verify_invariance(mdp, phi, 0.7);
    FAIL("expected PotentialError");
  } catch (const PotentialError& e) {
    CHECK(e.state() == leaf);
  }
  CHECK_THROWS_AS(verify_invariance(mdp, std::vector<double>(2, 0.0), 1.0), ShapeMismatch);
}

TEST_CASE("counterexample") {
  const TokenMDP mdp = counterexample_mdp();
  CHECK(mdp.vocab_size() == 2);
  CHECK(mdp.horizon() == 1);
  const auto rep = verify_action_shaping_breaks(mdp, ShapingVariant::LogProbability, 1.0, 1.0);
  CHECK(rep.original_root[0] == doctest::Approx(0.731058578630004879251159241822).epsilon(1e-14));
  CHECK(rep.shaped_root[0] == doctest::Approx(0.880797077977882444059729141302).epsilon(1e-14));
  CHECK(rep.policy_kl == doctest::Approx(0.067130754453132781664997829912).epsilon(1e-13));
  const auto logits = verify_action_shaping_breaks(mdp, ShapingVariant::Logits, 1.0, 1.0);
  CHECK(logits.policy_kl > 0.01);
  CHECK_THROWS_AS(verify_action_shaping_breaks(mdp, ShapingVariant::TeacherValue, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("token annotation") {
  const std::vector<double> psi{0.1, 0.5, 0.5, -1.0, 0.2};
  CHECK(top_k_positions(psi, 3) == std::vector<std::size_t>{1, 2, 4});
  CHECK(top_k_positions(psi, 10).size() == 5);
  const auto cfg = small_config();
  const Instance inst = make_instance(cfg, 1);
  const auto ann = export_token_shaping(inst.teacher, inst.eval[0].winner, 2);
  CHECK(ann.psi == shaping_sequence(inst.teacher, inst.eval[0].winner));
  CHECK(ann.marked.size() == 2);
  CHECK(ann.prompt_id == inst.eval[0].prompt_id);
}

TEST_CASE("analysis tables") {
  const auto cfg = small_config();
  std::vector<Instance> inst;
  for (auto s : cfg.seeds) inst.push_back(make_instance(cfg, s));
  const auto dpo = train_student(cfg, inst[0], Method{MethodKind::Dpo});
  const auto tv = train_student(cfg, inst[0], Method{MethodKind::Tvkd});
  const auto t4 = table4_rows(inst[0], dpo.policy);
  REQUIRE(t4.size() == 3);
  const auto t5 = table5_rows(cfg, inst[0], dpo.policy, tv.policy);
  REQUIRE(t5.size() == 3);
  CHECK(t5[0].model == "Teacher");
  CHECK(t5[0].divergence == 0.0);
  const auto t6 = sweep_auxiliary(cfg, inst[0]);
  REQUIRE(t6.size() == std::size(kAllVariants));
  for (const auto& row : t6) {
    CHECK(row.state_dependent == is_state_dependent(row.variant));
    CHECK(row.invariance_passed == row.state_dependent);
  }
  const auto sweep = sweep_hyperparameters(cfg, inst);
  CHECK(sweep.cells.size() == 2 * 1 * 2);
  CHECK(sweep.baseline.size() == 2);
  CHECK(sweep.alpha_zero_matches_baseline);
}
