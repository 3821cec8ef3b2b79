#pragma once

#include "failprompt/checkpoint.hpp"
#include "failprompt/clustering.hpp"
#include "failprompt/data_synth.hpp"
#include "failprompt/dynamics.hpp"
#include "failprompt/losses.hpp"
#include "failprompt/planner.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace failprompt {

struct ExperimentConfig {
  TrainingMode mode = TrainingMode::Fvlc;
  int clusters = 3;       // K
  int prompt_length = 2;  // L_p^f
  double tau = kDefaultTemperature;
  int batch_human = 8;
  int batch_robot = 8;
  int batch_failure = 8;
  int epochs = 30;
  int steps_per_epoch = 400;
  double lr_encoder = 1e-2;
  double lr_prompt = 1e-2;
  double grad_clip = 5.0;
  bool exclude_self = false;
  int kmeans_iters = 50;
  int embed_dim = 32;
  int hidden = 32;
  std::uint64_t seed = 1;
  std::vector<Task> train_tasks{kDefaultTrainTasks.begin(), kDefaultTrainTasks.end()};
  std::vector<Task> target_tasks{kTargetTasks.begin(), kTargetTasks.end()};
  EnvVariant env_variant = EnvVariant::Train;

  // Training data.
  int data_human = 60;
  int data_robot_success = 20;
  int data_robot_failure = 20;
  FailureSources data_sources;
  double data_noise = 0.05;
  // Evaluation clips (robot, every task).
  int eval_success = 50;
  int eval_failure = 50;

  int plan_candidates = 300;
  int plan_horizon = sim::kHorizon;
  int plan_trials = 50;
  int plan_seeds = 3;
  CemConfig cem;

  int dynamics_episodes = 2000;
  int dynamics_epochs = 300;

  /// Throws BadConfig.
  void validate() const;
  std::uint64_t data_seed() const;
  std::uint64_t eval_seed() const;
  DataConfig data_config() const;
  DataConfig eval_data_config() const;
};

/// Parses "key = value" lines ('#' starts a comment). Unknown keys, bad
/// values and repeated keys throw BadConfig.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});
/// Every key with its current value, in a stable order.
std::string format_config(const ExperimentConfig& config);
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::vector<std::string> config_keys();

/// Seed precedence: an explicit flag beats REWARD_SEED, which beats the config.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed);

/// Trainable state plus the frozen text table.
struct ModelParams {
  VideoEncoderParams encoder;
  TextTable texts;
  FailurePromptPool pool;
  std::map<Task, ClusterState> clusters;

  static ModelParams initialize(const ExperimentConfig& config);
  Checkpoint to_checkpoint() const;
  /// Throws CorruptFile.
  static ModelParams from_checkpoint(const Checkpoint& ck);

  double reward(const Clip& clip, Task task) const;
};

/// Indices into a dataset, grouped by stratum.
struct SampledBatch {
  std::vector<std::size_t> human;
  std::vector<std::size_t> robot_success;
  std::vector<std::size_t> robot_failure;
  std::vector<int> failure_clusters;
};

/// Pseudo-labels of every training failure clip, keyed by dataset index.
using PseudoLabels = std::map<std::size_t, int>;

/// Throws InsufficientStratum.
SampledBatch sample_batch(const Dataset& dataset, const ExperimentConfig& config, Rng& rng,
                          const PseudoLabels* labels = nullptr);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double cdc = 0.0;
  double vlc = 0.0;
  double failure = 0.0;
  double grad_norm = 0.0;
  std::map<Task, double> cluster_objective;
  std::map<Task, double> label_churn;
  std::map<Task, std::vector<int>> cluster_sizes;

  std::string to_json() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochMetrics> metrics;  // epoch 0 is the untrained evaluation

  std::string metrics_log() const;
};

TrainResult train(const ExperimentConfig& config, const Dataset& dataset);

struct SeparationReport {
  double auc = 0.5;         // mean of the per-task AUCs
  double pooled_auc = 0.5;  // all clips ranked together
  std::map<Task, double> task_auc;
  std::vector<double> scores;
  std::vector<bool> labels;
  std::vector<Task> tasks;
};

/// Probability that a random success outscores a random failure, ties half.
/// Throws OneClassOnly.
double roc_auc(std::span<const double> scores, const std::vector<bool>& labels);

/// Scores robot clips of the given tasks. Throws OneClassOnly when the
/// clips of any listed task (or the pooled set) lack one outcome.
SeparationReport evaluate_separation(const ModelParams& params, const Dataset& eval_set,
                                     const std::vector<Task>& tasks);

enum class RewardKind { Learned, Oracle, Random };
std::string_view reward_kind_name(RewardKind k) noexcept;
RewardKind parse_reward_kind(std::string_view name);

struct PlanningOptions {
  RewardKind reward = RewardKind::Learned;
  bool refine_with_cem = false;
  int trials = 50;
  int seeds = 3;
  std::uint64_t seed = 1;
  PlanConfig plan;
  EnvVariant env_variant = EnvVariant::Train;
};

struct TaskPlanningResult {
  Task task = Task::CloseDrawer;
  std::vector<double> per_seed;  // success rate per seed
  double mean = 0.0;
  // Filled when refine_with_cem is set.
  std::vector<double> refined_per_seed;
  double refined_mean = 0.0;
  double mean_score = 0.0;
  double refined_mean_score = 0.0;
  bool cem_never_decreased = true;
};

struct PlanningReport {
  std::vector<TaskPlanningResult> tasks;
  const TaskPlanningResult* find(Task task) const;
};

PlanningReport evaluate_planning(const ModelParams* params, const DynamicsModel& dynamics,
                                 const std::vector<Task>& tasks, const PlanningOptions& options);

struct AblationCell {
  TrainingMode mode = TrainingMode::Fvlc;
  int clusters = 3;
  FailureSources sources;
};

struct AblationRow {
  std::uint64_t seed = 0;
  AblationCell cell;
  double auc_seen = 0.0;
  double auc_heldout = 0.0;
  double plan_success = 0.0;
};

/// no_failure and bce per source, fvlc per K and source.
std::vector<AblationCell> default_ablation_grid();

/// Trains and evaluates each cell for every seed. Cells of one seed share
/// the human and success strata; the failure source only changes failures.
std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid, const ExperimentConfig& base,
                                      const std::vector<std::uint64_t>& seeds, bool with_planning);

inline constexpr std::string_view kAblationHeader = "seed,mode,K,source,auc_seen,auc_heldout,plan_success";
std::string ablation_csv(std::vector<AblationRow> rows);

}  // namespace failprompt
