#include "tvkd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "tvkd/errors.hpp"
#include "tvkd/numerics.hpp"

namespace tvkd {

namespace {

struct TrainingData {
  std::span<const PreferencePair> pairs;
  std::vector<std::span<const double>> psi_winner;
  std::vector<std::span<const double>> psi_loser;
};

struct TrainingOutcome {
  TabularPolicy policy;
  std::uint64_t steps = 0;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_margin;
  std::vector<double> epoch_eval_accuracy;
  std::uint32_t selected_epoch = 0;
};

double ground_truth_accuracy(const TabularPolicy& policy, std::span<const PreferencePair> eval) {
  return eval_margin_accuracy(policy_scorer(policy, ScoreMode::LogProb), eval, LabelSource::GroundTruth);
}

TrainingOutcome run_training(const StateSpace& space, const TrainingConfig& tc, const LossConfig& loss,
                             const TrainingData& data, std::span<const PreferencePair> eval,
                             const TabularPolicy* reference, std::uint64_t seed) {
  loss.validate();
  if (tc.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  TrainingOutcome out;
  out.policy = TabularPolicy::gaussian(space, tc.init_stddev, seed);
  OptimState opt = OptimState::make(tc.optimizer, tc.learning_rate, out.policy.parameter_count());
  Rng order_rng(seed, Stream::Training);

  const bool select = tc.select_best_epoch && !eval.empty();
  TabularPolicy best = out.policy;
  double best_acc = -1.0;
  if (!eval.empty()) {
    best_acc = ground_truth_accuracy(out.policy, eval);
    out.epoch_eval_accuracy.push_back(best_acc);
  }

  std::vector<std::size_t> order(data.pairs.size());
  std::vector<double> grad(out.policy.parameter_count());
  for (std::uint32_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0, margin_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += tc.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + tc.batch_size);
      const double scale = 1.0 / static_cast<double>(b1 - b0);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = b0; k < b1; ++k) {
        const std::size_t i = order[k];
        const auto rep = accumulate_tvkd_gradient(out.policy, data.pairs[i], data.psi_winner[i], data.psi_loser[i],
                                                  loss, reference, scale, grad);
        if (!std::isfinite(rep.loss) || !std::isfinite(rep.margin)) {
          throw DivergenceError(fmt::format("non-finite loss at epoch {}, step {}", epoch, out.steps + 1));
        }
        loss_sum += rep.loss;
        margin_sum += rep.margin;
      }
      apply_update(out.policy, grad, opt);
      ++out.steps;
    }
    const double n = static_cast<double>(std::max<std::size_t>(order.size(), 1));
    out.epoch_loss.push_back(loss_sum / n);
    out.epoch_margin.push_back(margin_sum / n);
    if (!eval.empty()) {
      const double acc = ground_truth_accuracy(out.policy, eval);
      out.epoch_eval_accuracy.push_back(acc);
      if (select && acc > best_acc) {
        best_acc = acc;
        best = out.policy;
        out.selected_epoch = epoch;
      }
    }
  }
  if (select) {
    out.policy = std::move(best);
  } else {
    out.selected_epoch = tc.epochs;
  }
  return out;
}

Dataset gather(const Dataset& data, const std::vector<std::size_t>& idx) {
  Dataset out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

}  // namespace

std::string_view to_string(TeacherKind k) noexcept {
  switch (k) {
    case TeacherKind::SoftOptimal: return "soft_optimal";
    case TeacherKind::SequenceValue: return "sequence_value";
    case TeacherKind::DpoTrained: return "dpo_trained";
  }
  return "?";
}

TeacherKind parse_teacher_kind(std::string_view name) {
  for (auto k : {TeacherKind::SoftOptimal, TeacherKind::SequenceValue, TeacherKind::DpoTrained}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument(fmt::format("unknown teacher kind '{}'", name));
}

std::string_view to_string(AlignmentMode m) noexcept { return m == AlignmentMode::Profile ? "profile" : "policy"; }

AlignmentMode parse_alignment_mode(std::string_view name) {
  if (name == "profile") return AlignmentMode::Profile;
  if (name == "policy") return AlignmentMode::Policy;
  throw InvalidArgument(fmt::format("unknown alignment mode '{}'", name));
}

std::string to_string(const Method& m) {
  switch (m.kind) {
    case MethodKind::Dpo: return "dpo";
    case MethodKind::Tvkd: return "tvkd";
    case MethodKind::TvkdRef: return "tvkd_ref";
    case MethodKind::AuxVariant: return fmt::format("aux:{}", to_string(m.variant));
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "dpo") return {MethodKind::Dpo};
  if (name == "tvkd") return {MethodKind::Tvkd};
  if (name == "tvkd_ref") return {MethodKind::TvkdRef};
  if (name.rfind("aux:", 0) == 0) return {MethodKind::AuxVariant, parse_variant(name.substr(4))};
  throw InvalidArgument(fmt::format("unknown method '{}'", name));
}

void ExperimentConfig::validate() const {
  gen.validate();
  loss.validate();
  if (beta_teacher && !(*beta_teacher > 0.0)) throw InvalidArgument("beta_teacher must be positive");
  if (alpha_grid.empty() || beta_grid.empty()) throw InvalidArgument("sweep grids must be non-empty");
  for (double a : alpha_grid) {
    if (!(a >= 0.0)) throw InvalidArgument("alpha grid entries must be nonnegative");
  }
  for (double b : beta_grid) {
    if (!(b > 0.0)) throw InvalidArgument("beta grid entries must be positive");
  }
  if (seeds.empty()) throw InvalidArgument("seed list must be non-empty");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw InvalidArgument("eval_fraction must lie in (0, 1)");
  if (training.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (!(training.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double eval_fraction,
                                                                            std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) throw InvalidArgument("eval_fraction must lie in (0, 1)");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, Stream::Split);
  rng.shuffle(std::span<std::size_t>(perm));
  const auto n_eval = static_cast<std::size_t>(std::floor(eval_fraction * static_cast<double>(n)));
  if (n_eval == 0 || n_eval == n) throw EmptyDataset(fmt::format("{} pairs cannot be split {}", n, eval_fraction));
  std::vector<std::size_t> eval(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_eval));
  std::vector<std::size_t> train(perm.begin() + static_cast<std::ptrdiff_t>(n_eval), perm.end());
  std::sort(eval.begin(), eval.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(eval)};
}

TeacherModel make_teacher(const ExperimentConfig& cfg, const TokenMDP& mdp, const Dataset& train,
                          std::uint64_t seed) {
  const double beta_t = cfg.teacher_beta();
  switch (cfg.teacher_kind) {
    case TeacherKind::SoftOptimal:
      return make_soft_optimal_teacher(mdp, beta_t);
    case TeacherKind::SequenceValue:
      return make_sequence_value_teacher(mdp, beta_t);
    case TeacherKind::DpoTrained: {
      TrainingData data{train, {}, {}};
      std::vector<std::vector<double>> zeros;
      zeros.reserve(2 * train.size());
      for (const auto& p : train) {
        zeros.emplace_back(p.winner.size(), 0.0);
        data.psi_winner.push_back(zeros.back());
        zeros.emplace_back(p.loser.size(), 0.0);
        data.psi_loser.push_back(zeros.back());
      }
      TrainingConfig tc = cfg.training;
      tc.select_best_epoch = false;
      LossConfig loss{0.0, beta_t, false, ShapingVariant::TeacherValue};
      auto out = run_training(mdp.space(), tc, loss, data, {}, nullptr, seed);
      std::vector<double> logits(out.policy.logits().begin(), out.policy.logits().end());
      for (double& x : logits) x *= beta_t;
      return TeacherModel{TabularPolicy(mdp.space(), std::move(logits)), beta_t, TerminalValue::Zero, {}};
    }
  }
  throw InvalidArgument("unknown teacher kind");
}

Instance assemble_instance(const ExperimentConfig& cfg, std::uint64_t seed, TokenMDP mdp, Dataset data,
                           std::optional<TeacherValueCache> cache) {
  cfg.validate();
  for (const auto& p : data) validate_pair(mdp.space(), p);
  auto [train_idx, eval_idx] = split_indices(data.size(), cfg.eval_fraction, seed);
  Dataset train = gather(data, train_idx);
  Dataset eval = gather(data, eval_idx);
  TeacherModel teacher = make_teacher(cfg, mdp, train, seed);
  if (!cache) {
    cache = build_value_cache(teacher, data, cfg.top_k, sha256(dataset_to_string(data)));
  } else if (cache->pairs.size() != data.size()) {
    throw ShapeMismatch(fmt::format("cache holds {} pairs, dataset has {}", cache->pairs.size(), data.size()));
  }
  return Instance{seed,
                  std::move(mdp),
                  std::move(teacher),
                  std::move(data),
                  std::move(train_idx),
                  std::move(eval_idx),
                  std::move(train),
                  std::move(eval),
                  std::move(*cache)};
}

Instance make_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
  GenConfig gen = cfg.gen;
  gen.seed = seed;
  TokenMDP mdp = sample_mdp(gen);
  Dataset data = sample_preference_pairs(mdp, gen);
  return assemble_instance(cfg, seed, std::move(mdp), std::move(data));
}

TrainResult train_student(const ExperimentConfig& cfg, const Instance& inst, const Method& method, double alpha,
                          double beta) {
  LossConfig loss = cfg.loss;
  loss.alpha = method.kind == MethodKind::Dpo ? 0.0 : alpha;
  loss.beta = beta;
  loss.use_reference = method.kind == MethodKind::TvkdRef;
  loss.variant = method.kind == MethodKind::AuxVariant ? method.variant : ShapingVariant::TeacherValue;

  TrainingData data{inst.train, {}, {}};
  std::vector<std::vector<double>> storage;
  storage.reserve(2 * inst.train.size());
  for (std::size_t k = 0; k < inst.train.size(); ++k) {
    const auto& pair = inst.train[k];
    switch (method.kind) {
      case MethodKind::Dpo:
        storage.emplace_back(pair.winner.size(), 0.0);
        data.psi_winner.push_back(storage.back());
        storage.emplace_back(pair.loser.size(), 0.0);
        data.psi_loser.push_back(storage.back());
        break;
      case MethodKind::Tvkd:
      case MethodKind::TvkdRef: {
        const auto& c = inst.cache.pairs[inst.train_idx[k]];
        data.psi_winner.push_back(c.psi_winner);
        data.psi_loser.push_back(c.psi_loser);
        break;
      }
      case MethodKind::AuxVariant:
        storage.push_back(variant_shaping_sequence(method.variant, inst.teacher, pair.winner));
        data.psi_winner.push_back(storage.back());
        storage.push_back(variant_shaping_sequence(method.variant, inst.teacher, pair.loser));
        data.psi_loser.push_back(storage.back());
        break;
    }
  }

  const TabularPolicy uniform(inst.mdp.space());
  const TabularPolicy* reference = loss.use_reference ? &uniform : nullptr;
  auto out = run_training(inst.mdp.space(), cfg.training, loss, data, inst.eval, reference, inst.seed);

  RunReport rep;
  rep.method = to_string(method);
  rep.alpha = loss.alpha;
  rep.beta = beta;
  rep.seed = inst.seed;
  rep.steps = out.steps;
  rep.epoch_loss = std::move(out.epoch_loss);
  rep.epoch_margin = std::move(out.epoch_margin);
  rep.epoch_eval_accuracy = std::move(out.epoch_eval_accuracy);
  rep.selected_epoch = out.selected_epoch;
  rep.accuracy_ground_truth = ground_truth_accuracy(out.policy, inst.eval);
  rep.accuracy_labels = eval_margin_accuracy(policy_scorer(out.policy, ScoreMode::LogProb), inst.eval);
  rep.value_alignment = eval_value_alignment(out.policy, inst.teacher, inst.eval, beta, cfg.alignment);
  return TrainResult{std::move(out.policy), std::move(rep)};
}

TrainResult train_student(const ExperimentConfig& cfg, const Instance& inst, const Method& method) {
  return train_student(cfg, inst, method, cfg.loss.alpha, cfg.loss.beta);
}

TrajectoryScorer policy_scorer(const TabularPolicy& policy, ScoreMode mode) {
  return [&policy, mode](const Trajectory& t) { return score_trajectory(policy, t, mode); };
}

TrajectoryScorer teacher_scorer(const TeacherModel& teacher, ScoreMode mode) {
  return [&teacher, mode](const Trajectory& t) { return score_trajectory(teacher, t, mode); };
}

TrajectoryScorer variant_scorer(const TeacherModel& teacher, ShapingVariant variant) {
  return [&teacher, variant](const Trajectory& t) {
    double total = 0.0;
    for (double x : variant_shaping_sequence(variant, teacher, t)) total += x;
    return total;
  };
}

double eval_margin_accuracy(const TrajectoryScorer& scorer, std::span<const PreferencePair> pairs,
                            LabelSource labels) {
  if (pairs.empty()) throw EmptyDataset("margin accuracy of an empty dataset");
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const Trajectory* better = &p.winner;
    const Trajectory* worse = &p.loser;
    if (labels == LabelSource::GroundTruth) {
      if (!p.ground_truth_margin) throw InvalidArgument("pair has no ground-truth margin");
      if (*p.ground_truth_margin < 0.0) std::swap(better, worse);
    }
    if (scorer(*better) > scorer(*worse)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

TeacherModel student_as_teacher(const TabularPolicy& student, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  std::vector<double> logits(student.logits().begin(), student.logits().end());
  for (double& x : logits) x *= beta;
  return TeacherModel{TabularPolicy(student.space(), std::move(logits)), beta, TerminalValue::Zero, {}};
}

double eval_value_alignment(const TeacherModel& reference, const TeacherModel& other,
                            std::span<const PreferencePair> pairs, AlignmentMode mode) {
  if (!(reference.space() == other.space())) throw CoverageError("models are defined on different state spaces");
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> a, b;
  for (const auto& p : pairs) {
    if (p.winner.size() == 0) continue;
    const auto states = trajectory_states(reference.space(), p.winner);
    const std::size_t len = p.winner.size();
    if (mode == AlignmentMode::Profile) {
      a.resize(len);
      b.resize(len);
      for (std::size_t t = 0; t < len; ++t) {
        a[t] = reference.value(states[t]);
        b[t] = other.value(states[t]);
      }
      total += kl_divergence(softmax(a), softmax(b));
    } else {
      double sum = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        sum += kl_divergence(softmax(reference.logits(states[t]), reference.beta),
                             softmax(other.logits(states[t]), other.beta));
      }
      total += sum / static_cast<double>(len);
    }
    ++count;
  }
  if (count == 0) throw EmptyDataset("no pair with a non-empty chosen response");
  return total / static_cast<double>(count);
}

double eval_value_alignment(const TabularPolicy& student, const TeacherModel& teacher,
                            std::span<const PreferencePair> pairs, double beta, AlignmentMode mode) {
  return eval_value_alignment(teacher, student_as_teacher(student, beta), pairs, mode);
}

InvarianceReport verify_invariance(const TokenMDP& mdp, std::span<const double> potential, double beta) {
  const StateSpace& space = mdp.space();
  if (potential.size() != space.state_count()) {
    throw ShapeMismatch(fmt::format("potential has {} entries, expected {}", potential.size(), space.state_count()));
  }
  for (StateIndex s = 0; s < potential.size(); ++s) {
    if (!std::isfinite(potential[s])) throw PotentialError(s, fmt::format("potential at state {} is not finite", s));
    if (space.is_terminal(s) && potential[s] != 0.0) {
      throw PotentialError(s, fmt::format("potential at terminal state {} is {}, expected 0", s, potential[s]));
    }
  }
  const std::size_t n = space.vocab_size();
  std::vector<double> shaping(space.nonterminal_count() * n);
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    const StateIndex s = space.state_of_row(row);
    const StateIndex first = space.child(s, TokenId(0));
    for (std::size_t a = 0; a < n; ++a) shaping[row * n + a] = potential[first + a] - potential[s];
  }
  const auto base = soft_value_iteration(mdp, beta);
  const auto shaped = soft_value_iteration(mdp, beta, shaping);
  const auto pi = boltzmann_policy(base);
  const auto pi_shaped = boltzmann_policy(shaped);

  InvarianceReport rep;
  for (std::size_t row = 0; row < space.nonterminal_count(); ++row) {
    const StateIndex s = space.state_of_row(row);
    const double kl = kl_divergence(pi_shaped.row_at(row), pi.row_at(row));
    if (kl > rep.max_policy_kl) {
      rep.max_policy_kl = kl;
      rep.worst_state = s;
    }
    for (std::size_t a = 0; a < n; ++a) {
      const double dev = std::abs(shaped.q[row * n + a] - base.q[row * n + a] + potential[s]);
      if (dev > rep.max_q_deviation) {
        rep.max_q_deviation = dev;
        rep.worst_state = s;
        rep.worst_action = static_cast<std::uint32_t>(a);
      }
    }
  }
  for (StateIndex s = 0; s < space.state_count(); ++s) {
    rep.max_v_deviation = std::max(rep.max_v_deviation, std::abs(shaped.v[s] - base.v[s] + potential[s]));
  }
  rep.passed = rep.max_policy_kl <= kInvarianceTolerance && rep.max_q_deviation <= kInvarianceTolerance &&
               rep.max_v_deviation <= kInvarianceTolerance;
  return rep;
}

std::vector<double> random_potential(const StateSpace& space, Rng& rng, double scale) {
  std::vector<double> phi(space.state_count(), 0.0);
  for (StateIndex s = 0; s < phi.size(); ++s) {
    if (!space.is_terminal(s)) phi[s] = rng.uniform(-scale, scale);
  }
  return phi;
}

TokenMDP random_verification_mdp(Rng& rng, std::uint32_t max_vocab, std::uint32_t max_horizon) {
  if (max_vocab < 2 || max_horizon < 1) throw InvalidArgument("verification MDP bounds too small");
  const auto vocab = static_cast<std::uint32_t>(2 + rng.index(max_vocab - 1));
  const auto horizon = static_cast<std::uint32_t>(1 + rng.index(max_horizon));
  StateSpace space(vocab, horizon, {0});
  std::vector<double> rewards(space.nonterminal_count() * vocab);
  for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
  return TokenMDP(vocab, horizon, {{0, 1.0}}, std::move(rewards));
}

TokenMDP counterexample_mdp() { return TokenMDP(2, 1, {{0, 1.0}}, {1.0, 0.0}); }

ActionShapingReport verify_action_shaping_breaks(const TokenMDP& mdp, ShapingVariant variant, double beta,
                                                 double alpha) {
  if (is_state_dependent(variant)) {
    throw InvalidArgument(fmt::format("{} is not an action-dependent variant", to_string(variant)));
  }
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be nonnegative");
  const TeacherModel teacher = make_soft_optimal_teacher(mdp, beta);
  auto shaping = variant_shaping_table(variant, teacher);
  for (double& x : shaping) x *= alpha;
  const auto pi = boltzmann_policy(soft_value_iteration(mdp, beta));
  const auto pi_shaped = boltzmann_policy(soft_value_iteration(mdp, beta, shaping));
  const std::vector<double> weights(mdp.space().nonterminal_count(), 1.0);
  ActionShapingReport rep;
  rep.policy_kl = policy_divergence(pi_shaped, pi, weights);
  rep.max_policy_kl = max_policy_divergence(pi_shaped, pi);
  const StateIndex root = mdp.space().root(0);
  rep.shaped_root.assign(pi_shaped.row(root).begin(), pi_shaped.row(root).end());
  rep.original_root.assign(pi.row(root).begin(), pi.row(root).end());
  return rep;
}

std::vector<AuxiliaryRow> sweep_auxiliary(const ExperimentConfig& cfg, const Instance& inst) {
  const auto base = boltzmann_policy(soft_value_iteration(inst.mdp, cfg.teacher_beta()));
  std::vector<AuxiliaryRow> rows;
  for (ShapingVariant v : kAllVariants) {
    AuxiliaryRow row;
    row.seed = inst.seed;
    row.variant = v;
    row.state_dependent = is_state_dependent(v);
    row.margin_accuracy = eval_margin_accuracy(variant_scorer(inst.teacher, v), inst.eval);
    row.student_accuracy = train_student(cfg, inst, Method{MethodKind::AuxVariant, v}).report.accuracy_ground_truth;
    auto shaping = variant_shaping_table(v, inst.teacher);
    for (double& x : shaping) x *= cfg.loss.alpha;
    const auto shaped = boltzmann_policy(soft_value_iteration(inst.mdp, cfg.teacher_beta(), shaping));
    row.invariance_kl = max_policy_divergence(shaped, base);
    row.invariance_passed = row.invariance_kl <= kInvarianceTolerance;
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::size_t> top_k_positions(std::span<const double> psi, std::size_t k) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  std::vector<std::size_t> idx(psi.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return psi[a] > psi[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

TokenAnnotation export_token_shaping(const TeacherModel& teacher, const Trajectory& traj, std::size_t k) {
  TokenAnnotation ann;
  ann.prompt_id = traj.prompt_id;
  ann.actions = traj.actions;
  ann.psi = shaping_sequence(teacher, traj);
  ann.marked = top_k_positions(ann.psi, k);
  return ann;
}

SweepReport sweep_hyperparameters(const ExperimentConfig& cfg, std::span<const Instance> instances) {
  if (cfg.alpha_grid.empty() || cfg.beta_grid.empty()) throw InvalidArgument("sweep grids must be non-empty");
  if (instances.empty()) throw InvalidArgument("sweep needs at least one instance");
  SweepReport rep;
  std::vector<TabularPolicy> baseline_policies;
  for (double beta : cfg.beta_grid) {
    for (const auto& inst : instances) {
      auto res = train_student(cfg, inst, Method{MethodKind::Dpo}, 0.0, beta);
      rep.baseline.push_back({0.0, beta, inst.seed, res.report.accuracy_ground_truth, res.report.value_alignment});
      baseline_policies.push_back(std::move(res.policy));
    }
  }
  for (double alpha : cfg.alpha_grid) {
    for (std::size_t b = 0; b < cfg.beta_grid.size(); ++b) {
      for (std::size_t i = 0; i < instances.size(); ++i) {
        const double beta = cfg.beta_grid[b];
        auto res = train_student(cfg, instances[i], Method{MethodKind::Tvkd}, alpha, beta);
        rep.cells.push_back({alpha, beta, instances[i].seed, res.report.accuracy_ground_truth,
                             res.report.value_alignment});
        if (alpha == 0.0 && !(res.policy == baseline_policies[b * instances.size() + i])) {
          rep.alpha_zero_matches_baseline = false;
        }
      }
    }
  }
  return rep;
}

std::vector<Table4Row> table4_rows(const Instance& inst, const TabularPolicy& dpo_student) {
  return {
      {inst.seed, "ShapingSum", eval_margin_accuracy(teacher_scorer(inst.teacher, ScoreMode::ShapingSum), inst.eval)},
      {inst.seed, "LogProb", eval_margin_accuracy(policy_scorer(dpo_student, ScoreMode::LogProb), inst.eval)},
      {inst.seed, "LengthNormLogProb",
       eval_margin_accuracy(policy_scorer(dpo_student, ScoreMode::LengthNormLogProb), inst.eval)},
  };
}

std::vector<Table5Row> table5_rows(const ExperimentConfig& cfg, const Instance& inst,
                                   const TabularPolicy& dpo_student, const TabularPolicy& tvkd_student) {
  const double beta = cfg.loss.beta;
  return {
      {inst.seed, "Teacher", eval_value_alignment(inst.teacher, inst.teacher, inst.eval, cfg.alignment)},
      {inst.seed, "DPO", eval_value_alignment(dpo_student, inst.teacher, inst.eval, beta, cfg.alignment)},
      {inst.seed, "TVKD", eval_value_alignment(tvkd_student, inst.teacher, inst.eval, beta, cfg.alignment)},
  };
}

}  // namespace tvkd
