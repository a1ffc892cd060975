#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tvkd/core_mdp.hpp"
#include "tvkd/losses.hpp"
#include "tvkd/policy_model.hpp"
#include "tvkd/random.hpp"
#include "tvkd/soft_rl.hpp"
#include "tvkd/synthetic_data.hpp"
#include "tvkd/teacher.hpp"
#include "tvkd/value_cache.hpp"

namespace tvkd {

enum class TeacherKind { SoftOptimal, SequenceValue, DpoTrained };
std::string_view to_string(TeacherKind k) noexcept;
TeacherKind parse_teacher_kind(std::string_view name);

/// Profile: softmax-normalised value profiles along chosen responses.
/// Policy: per-state KL between the two Boltzmann policies.
enum class AlignmentMode { Profile, Policy };
std::string_view to_string(AlignmentMode m) noexcept;
AlignmentMode parse_alignment_mode(std::string_view name);

enum class MethodKind { Dpo, Tvkd, TvkdRef, AuxVariant };

struct Method {
  MethodKind kind = MethodKind::Tvkd;
  ShapingVariant variant = ShapingVariant::TeacherValue;  // AuxVariant only

  friend bool operator==(const Method&, const Method&) = default;
};
std::string to_string(const Method& m);
Method parse_method(std::string_view name);  // dpo | tvkd | tvkd_ref | aux:<Variant>

struct TrainingConfig {
  std::uint32_t epochs = 1;
  std::uint32_t batch_size = 16;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-2;
  double init_stddev = 0.0;       // 0: uniform initial policy
  bool select_best_epoch = true;  // keep the epoch with the best held-out ground-truth accuracy
};

struct ExperimentConfig {
  GenConfig gen;
  TeacherKind teacher_kind = TeacherKind::SequenceValue;
  std::optional<double> beta_teacher;  // defaults to loss.beta
  std::uint32_t top_k = 0;
  LossConfig loss;
  std::vector<double> alpha_grid{0.0, 0.1, 0.2, 0.5, 0.7, 1.0, 1.5};
  std::vector<double> beta_grid{0.1, 0.2, 0.5, 1.0, 2.0, 5.0};
  TrainingConfig training;
  double eval_fraction = 0.2;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  AlignmentMode alignment = AlignmentMode::Profile;

  double teacher_beta() const { return beta_teacher.value_or(loss.beta); }
  void validate() const;
};

/// Everything derived from one root seed: MDP, teacher, dataset, split, cache.
struct Instance {
  std::uint64_t seed = 0;
  TokenMDP mdp;
  TeacherModel teacher;
  Dataset data;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> eval_idx;
  Dataset train;
  Dataset eval;
  TeacherValueCache cache;  // over `data`, in dataset order
};

/// Shuffle 0..n-1 with the Split stream; the first floor(fraction * n) are held out.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double eval_fraction,
                                                                            std::uint64_t seed);

TeacherModel make_teacher(const ExperimentConfig& cfg, const TokenMDP& mdp, const Dataset& train,
                          std::uint64_t seed);

/// Generates MDP and dataset from `seed` (overriding cfg.gen.seed).
Instance make_instance(const ExperimentConfig& cfg, std::uint64_t seed);

/// Builds an instance around an existing dataset; the cache is built unless given.
Instance assemble_instance(const ExperimentConfig& cfg, std::uint64_t seed, TokenMDP mdp, Dataset data,
                           std::optional<TeacherValueCache> cache = std::nullopt);

struct RunReport {
  std::string method;
  double alpha = 0.0;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  std::vector<double> epoch_loss;            // mean training loss per epoch
  std::vector<double> epoch_margin;          // mean training margin per epoch
  std::vector<double> epoch_eval_accuracy;   // index 0: before training
  std::uint32_t selected_epoch = 0;
  double accuracy_ground_truth = 0.0;        // held-out, returned policy
  double accuracy_labels = 0.0;
  double value_alignment = 0.0;
};

struct TrainResult {
  TabularPolicy policy;
  RunReport report;
};

/// Deterministic minibatch training on inst.train. DivergenceError on a
/// non-finite loss.
TrainResult train_student(const ExperimentConfig& cfg, const Instance& inst, const Method& method, double alpha,
                          double beta);
TrainResult train_student(const ExperimentConfig& cfg, const Instance& inst, const Method& method);

using TrajectoryScorer = std::function<double(const Trajectory&)>;

TrajectoryScorer policy_scorer(const TabularPolicy& policy, ScoreMode mode);
TrajectoryScorer teacher_scorer(const TeacherModel& teacher, ScoreMode mode);
/// Sum of a variant's per-step shaping along the trajectory.
TrajectoryScorer variant_scorer(const TeacherModel& teacher, ShapingVariant variant);

enum class LabelSource { Labels, GroundTruth };

/// Fraction of pairs where the scorer ranks the preferred response strictly
/// higher; ties count as wrong. With GroundTruth the preferred response is the
/// one with the higher return (sign of ground_truth_margin).
double eval_margin_accuracy(const TrajectoryScorer& scorer, std::span<const PreferencePair> pairs,
                            LabelSource labels = LabelSource::Labels);

/// Teacher view of a student: logits beta * theta at temperature beta.
TeacherModel student_as_teacher(const TabularPolicy& student, double beta);

/// Mean over pairs of KL(reference || other) along chosen responses, states
/// s_0 .. s_{|tau|-1}. EmptyDataset when no pair has a non-empty winner.
double eval_value_alignment(const TeacherModel& reference, const TeacherModel& other,
                            std::span<const PreferencePair> pairs, AlignmentMode mode = AlignmentMode::Profile);
double eval_value_alignment(const TabularPolicy& student, const TeacherModel& teacher,
                            std::span<const PreferencePair> pairs, double beta,
                            AlignmentMode mode = AlignmentMode::Profile);

struct InvarianceReport {
  double max_policy_kl = 0.0;
  double max_q_deviation = 0.0;  // max |Q'(s,a) - Q(s,a) + Phi(s)|
  double max_v_deviation = 0.0;  // max |V'(s) - V(s) + Phi(s)|
  StateIndex worst_state = 0;
  std::uint32_t worst_action = 0;
  bool passed = false;           // both deviations and KL <= 1e-9
};

inline constexpr double kInvarianceTolerance = 1e-9;

/// Solves the MDP with and without shaping Phi(s') - Phi(s). `potential` has one
/// entry per state; PotentialError if a terminal entry is nonzero or any is non-finite.
InvarianceReport verify_invariance(const TokenMDP& mdp, std::span<const double> potential, double beta);

/// Phi ~ U[-scale, scale) on non-terminal states, 0 on terminal states.
std::vector<double> random_potential(const StateSpace& space, Rng& rng, double scale = 1.0);

/// Random MDP for the verification harness: vocab 2..4, horizon 1..3, rewards U[-1, 1).
TokenMDP random_verification_mdp(Rng& rng, std::uint32_t max_vocab = 4, std::uint32_t max_horizon = 3);

/// One prompt, one step, vocabulary 2, rewards (1, 0).
TokenMDP counterexample_mdp();

struct ActionShapingReport {
  double policy_kl = 0.0;      // uniform-weight KL(shaped || original)
  double max_policy_kl = 0.0;
  std::vector<double> shaped_root;
  std::vector<double> original_root;
};

/// Shapes the MDP with alpha * (variant quantity) of its soft-optimal teacher
/// at `beta` and compares the Boltzmann policies. `variant` must be action-dependent.
ActionShapingReport verify_action_shaping_breaks(const TokenMDP& mdp, ShapingVariant variant, double beta,
                                                 double alpha);

struct AuxiliaryRow {
  std::uint64_t seed = 0;
  ShapingVariant variant = ShapingVariant::TeacherValue;
  bool state_dependent = true;
  double margin_accuracy = 0.0;   // variant shaping sum as scorer, held-out labels
  double student_accuracy = 0.0;  // student trained with the variant, held-out ground truth
  double invariance_kl = 0.0;     // max per-state KL of the shaped soft-optimal policy
  bool invariance_passed = false;
};

/// One row per variant, in kAllVariants order.
std::vector<AuxiliaryRow> sweep_auxiliary(const ExperimentConfig& cfg, const Instance& inst);

struct TokenAnnotation {
  std::int64_t prompt_id = 0;
  std::vector<TokenId> actions;
  std::vector<double> psi;
  std::vector<std::size_t> marked;  // by descending psi, ties by earliest position
};

/// Positions of the k largest entries, ties by earliest position.
std::vector<std::size_t> top_k_positions(std::span<const double> psi, std::size_t k);
TokenAnnotation export_token_shaping(const TeacherModel& teacher, const Trajectory& traj, std::size_t k);

struct SweepCell {
  double alpha = 0.0;
  double beta = 1.0;
  std::uint64_t seed = 0;
  double accuracy_ground_truth = 0.0;
  double value_alignment = 0.0;
};

struct SweepReport {
  std::vector<SweepCell> cells;     // alpha-major, then beta, then seed
  std::vector<SweepCell> baseline;  // DPO per (beta, seed), alpha = 0
  bool alpha_zero_matches_baseline = true;
};

SweepReport sweep_hyperparameters(const ExperimentConfig& cfg, std::span<const Instance> instances);

struct Table4Row {
  std::uint64_t seed = 0;
  std::string scorer;
  double accuracy = 0.0;
};

/// ShapingSum from the teacher, LogProb and LengthNormLogProb from `dpo_student`,
/// on the held-out split.
std::vector<Table4Row> table4_rows(const Instance& inst, const TabularPolicy& dpo_student);

struct Table5Row {
  std::uint64_t seed = 0;
  std::string model;
  double divergence = 0.0;
};

std::vector<Table5Row> table5_rows(const ExperimentConfig& cfg, const Instance& inst,
                                   const TabularPolicy& dpo_student, const TabularPolicy& tvkd_student);

}  // namespace tvkd
