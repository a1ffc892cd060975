#include "tvkd/losses.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "tvkd/errors.hpp"
#include "tvkd/numerics.hpp"

namespace tvkd {

namespace {

void check_lengths(const PreferencePair& pair, std::span<const double> psi_w, std::span<const double> psi_l) {
  if (psi_w.size() != pair.winner.size()) {
    throw LengthMismatch(fmt::format("winner has {} tokens but {} shaping terms", pair.winner.size(), psi_w.size()));
  }
  if (psi_l.size() != pair.loser.size()) {
    throw LengthMismatch(fmt::format("loser has {} tokens but {} shaping terms", pair.loser.size(), psi_l.size()));
  }
}

std::vector<double> side_rewards(const TabularPolicy& policy, const TabularPolicy* reference,
                                 const Trajectory& traj, std::span<const double> psi, const LossConfig& cfg) {
  const auto states = trajectory_states(policy.space(), traj);
  std::vector<double> r(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    r[t] = per_token_reward(log_prob(policy, states[t], traj.actions[t]), psi[t], cfg);
    if (reference) r[t] -= cfg.beta * log_prob(*reference, states[t], traj.actions[t]);
  }
  return r;
}

PairLossReport make_report(const TabularPolicy& policy, const TabularPolicy* reference, const PreferencePair& pair,
                           std::span<const double> psi_w, std::span<const double> psi_l, const LossConfig& cfg) {
  cfg.validate();
  check_lengths(pair, psi_w, psi_l);
  if (reference && !(reference->space() == policy.space())) {
    throw CoverageError("reference policy is defined on a different state space");
  }
  PairLossReport rep;
  rep.rewards_winner = side_rewards(policy, reference, pair.winner, psi_w, cfg);
  rep.rewards_loser = side_rewards(policy, reference, pair.loser, psi_l, cfg);
  double sw = 0.0, sl = 0.0;
  for (double x : rep.rewards_winner) sw += x;
  for (double x : rep.rewards_loser) sl += x;
  rep.margin = sw - sl;
  rep.loss = softplus(-rep.margin);
  return rep;
}

double side_log_prob_sum(const TabularPolicy& policy, const TabularPolicy* reference, const Trajectory& traj) {
  const auto states = trajectory_states(policy.space(), traj);
  double total = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    double x = log_prob(policy, states[t], traj.actions[t]);
    if (reference) x -= log_prob(*reference, states[t], traj.actions[t]);
    total += x;
  }
  return total;
}

}  // namespace

void LossConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be nonnegative and finite");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be positive and finite");
}

double per_token_reward(double log_prob, double psi, const LossConfig& cfg) {
  if (!std::isfinite(log_prob) || !std::isfinite(psi)) throw NonFiniteError("non-finite per-token input");
  return cfg.beta * log_prob - cfg.alpha * psi;
}

double tvkd_margin(const TabularPolicy& policy, const PreferencePair& pair, std::span<const double> psi_w,
                   std::span<const double> psi_l, const LossConfig& cfg) {
  return make_report(policy, nullptr, pair, psi_w, psi_l, cfg).margin;
}

PairLossReport tvkd_loss(const TabularPolicy& policy, const PreferencePair& pair, std::span<const double> psi_w,
                         std::span<const double> psi_l, const LossConfig& cfg) {
  return make_report(policy, nullptr, pair, psi_w, psi_l, cfg);
}

PairLossReport tvkd_loss_with_reference(const TabularPolicy& policy, const TabularPolicy& reference,
                                        const PreferencePair& pair, std::span<const double> psi_w,
                                        std::span<const double> psi_l, const LossConfig& cfg) {
  return make_report(policy, &reference, pair, psi_w, psi_l, cfg);
}

double dpo_loss(const TabularPolicy& policy, const TabularPolicy& reference, const PreferencePair& pair,
                double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(reference.space() == policy.space())) throw CoverageError("reference policy is defined on a different state space");
  const double w = side_log_prob_sum(policy, &reference, pair.winner);
  const double l = side_log_prob_sum(policy, &reference, pair.loser);
  return softplus(-beta * (w - l));
}

double dpo_form_loss(const TabularPolicy& policy, const PreferencePair& pair, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  const double w = side_log_prob_sum(policy, nullptr, pair.winner);
  const double l = side_log_prob_sum(policy, nullptr, pair.loser);
  return softplus(-beta * (w - l));
}

TvkdGradient tvkd_gradient(const TabularPolicy& policy, const PreferencePair& pair, std::span<const double> psi_w,
                           std::span<const double> psi_l, const LossConfig& cfg, const TabularPolicy* reference) {
  const auto rep = make_report(policy, reference, pair, psi_w, psi_l, cfg);
  TvkdGradient g;
  g.margin = rep.margin;
  g.loss = rep.loss;
  g.coefficient = cfg.beta * sigmoid(-rep.margin);
  g.direction.assign(policy.parameter_count(), 0.0);
  accumulate_trajectory_grad(policy, pair.winner, 1.0, g.direction);
  accumulate_trajectory_grad(policy, pair.loser, -1.0, g.direction);
  g.gradient.resize(g.direction.size());
  for (std::size_t i = 0; i < g.direction.size(); ++i) g.gradient[i] = -g.coefficient * g.direction[i];
  return g;
}

PairLossReport accumulate_tvkd_gradient(const TabularPolicy& policy, const PreferencePair& pair,
                                        std::span<const double> psi_w, std::span<const double> psi_l,
                                        const LossConfig& cfg, const TabularPolicy* reference, double scale,
                                        std::span<double> grad) {
  auto rep = make_report(policy, reference, pair, psi_w, psi_l, cfg);
  const double c = scale * cfg.beta * sigmoid(-rep.margin);
  accumulate_trajectory_grad(policy, pair.winner, -c, grad);
  accumulate_trajectory_grad(policy, pair.loser, c, grad);
  return rep;
}

double score_trajectory(const TabularPolicy& policy, const Trajectory& traj, ScoreMode mode) {
  switch (mode) {
    case ScoreMode::LogProb:
      return trajectory_log_prob(policy, traj);
    case ScoreMode::LengthNormLogProb:
      if (traj.size() == 0) throw EmptyTrajectory("length-normalized score of an empty trajectory");
      return trajectory_log_prob(policy, traj) / static_cast<double>(traj.size());
    case ScoreMode::ShapingSum:
      throw InvalidArgument("ShapingSum scoring needs a teacher");
  }
  throw InvalidArgument("unknown score mode");
}

double score_trajectory(const TeacherModel& teacher, const Trajectory& traj, ScoreMode mode) {
  if (mode == ScoreMode::ShapingSum) {
    double total = 0.0;
    for (double x : shaping_sequence(teacher, traj)) total += x;
    return total;
  }
  if (mode == ScoreMode::LengthNormLogProb && traj.size() == 0) {
    throw EmptyTrajectory("length-normalized score of an empty trajectory");
  }
  const auto states = trajectory_states(teacher.space(), traj);
  double total = 0.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    total += auxiliary_potential(ShapingVariant::LogProbability, teacher, states[t], traj.actions[t]);
  }
  return mode == ScoreMode::LogProb ? total : total / static_cast<double>(traj.size());
}

void write_loss_reports_csv(std::ostream& out, std::span<const PairLossReport> reports) {
  out << "pair,margin,loss\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << fmt::format("{},{},{}\n", i, reports[i].margin, reports[i].loss);
  }
}

}  // namespace tvkd
