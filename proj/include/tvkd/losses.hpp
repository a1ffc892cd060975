#pragma once

// Preference losses over tabular policies.
//
//   r(t)  = beta * log pi(a_t|s_t) - alpha * psi_t        [- beta * log pi_ref(a_t|s_t)]
//   M     = sum_t r_winner(t) - sum_t r_loser(t)            (lengths may differ)
//   loss  = -log sigmoid(M) = softplus(-M)
//   dloss = -beta * sigmoid(-M) * (sum_t grad log pi_w - sum_t grad log pi_l)
//
// psi enters only through M; the direction of the gradient does not depend on it.

#include <iosfwd>
#include <span>
#include <vector>

#include "tvkd/core_mdp.hpp"
#include "tvkd/policy_model.hpp"
#include "tvkd/teacher.hpp"

namespace tvkd {

struct LossConfig {
  double alpha = 1.0;
  double beta = 1.0;
  bool use_reference = false;
  ShapingVariant variant = ShapingVariant::TeacherValue;

  void validate() const;  // InvalidArgument unless alpha >= 0 and beta > 0
};

struct PairLossReport {
  double margin = 0.0;
  double loss = 0.0;
  std::vector<double> rewards_winner;
  std::vector<double> rewards_loser;
};

/// beta * log_prob - alpha * psi.
double per_token_reward(double log_prob, double psi, const LossConfig& cfg);

double tvkd_margin(const TabularPolicy& policy, const PreferencePair& pair, std::span<const double> psi_winner,
                   std::span<const double> psi_loser, const LossConfig& cfg);

/// Reference-free loss; `cfg.use_reference` is ignored here.
PairLossReport tvkd_loss(const TabularPolicy& policy, const PreferencePair& pair,
                         std::span<const double> psi_winner, std::span<const double> psi_loser,
                         const LossConfig& cfg);

PairLossReport tvkd_loss_with_reference(const TabularPolicy& policy, const TabularPolicy& reference,
                                        const PreferencePair& pair, std::span<const double> psi_winner,
                                        std::span<const double> psi_loser, const LossConfig& cfg);

/// softplus(-beta * (sum log-ratio_w - sum log-ratio_l)), log-ratio = log pi - log pi_ref.
double dpo_loss(const TabularPolicy& policy, const TabularPolicy& reference, const PreferencePair& pair,
                double beta);

/// softplus(-beta * (sum log pi_w - sum log pi_l)).
double dpo_form_loss(const TabularPolicy& policy, const PreferencePair& pair, double beta);

struct TvkdGradient {
  double margin = 0.0;
  double loss = 0.0;
  double coefficient = 0.0;        // beta * sigmoid(-M)
  std::vector<double> direction;   // sum grad log pi_w - sum grad log pi_l
  std::vector<double> gradient;    // d loss / d theta = -coefficient * direction
};

/// `reference` switches to the reference-policy margin when non-null.
TvkdGradient tvkd_gradient(const TabularPolicy& policy, const PreferencePair& pair,
                           std::span<const double> psi_winner, std::span<const double> psi_loser,
                           const LossConfig& cfg, const TabularPolicy* reference = nullptr);

/// grad += scale * d loss / d theta for one pair; returns the pair's report.
PairLossReport accumulate_tvkd_gradient(const TabularPolicy& policy, const PreferencePair& pair,
                                        std::span<const double> psi_winner, std::span<const double> psi_loser,
                                        const LossConfig& cfg, const TabularPolicy* reference, double scale,
                                        std::span<double> grad);

enum class ScoreMode { LogProb, LengthNormLogProb, ShapingSum };

/// LogProb and LengthNormLogProb only; ShapingSum needs a teacher.
double score_trajectory(const TabularPolicy& policy, const Trajectory& traj, ScoreMode mode);
/// Teacher log-probabilities use pi_phi = softmax(Q_phi / beta). ShapingSum is sum_t psi_t.
double score_trajectory(const TeacherModel& teacher, const Trajectory& traj, ScoreMode mode);

/// CSV with header "pair,margin,loss"; numbers in shortest round-trip form.
void write_loss_reports_csv(std::ostream& out, std::span<const PairLossReport> reports);

}  // namespace tvkd
