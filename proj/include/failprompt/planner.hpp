#pragma once

#include "failprompt/dynamics.hpp"
#include "failprompt/encoders.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace failprompt {

/// Scores a predicted state sequence for one task.
class RewardFn {
 public:
  /// sigma(v . t) of the encoded rendering of the predicted states.
  static RewardFn learned(const VideoEncoderParams& encoder, Embedding text, RenderParams render = {});
  /// 1 when the task predicate holds on the predicted states, else 0.
  static RewardFn oracle(Task task);

  double operator()(std::span<const SimState> states) const;
  bool is_oracle() const { return oracle_; }

 private:
  bool oracle_ = false;
  Task task_ = Task::CloseDrawer;
  const VideoEncoderParams* encoder_ = nullptr;
  Embedding text_;
  RenderParams render_;
};

/// Renders predicted states to an encoder clip at uniform temporal indices
/// (0, 5, 10, 15 for a 16-state prediction).
Clip render_prediction(std::span<const SimState> states, const RenderParams& render);

struct CemConfig {
  int iterations = 4;
  int population = 64;
  double elite_fraction = 0.1;
  double init_std = 0.02;

  int elite_count() const;
};

struct PlanConfig {
  int candidates = 300;  // G
  int horizon = sim::kHorizon;  // H
  std::uint64_t seed = 0;
  CemConfig cem;

  /// Throws BadConfig.
  void validate() const;
};

struct PlanResult {
  std::vector<Action> actions;
  double score = 0.0;
  int candidate = 0;  // index of the chosen candidate (vmpc only)
};

/// The G candidate sequences vmpc_plan draws for a seed.
std::vector<std::vector<Action>> sample_candidates(const PlanConfig& config);

PlanResult vmpc_plan(const RewardFn& reward, const DynamicsModel& model, const SimState& s0, const PlanConfig& config);

using ActionScorer = std::function<double(std::span<const Action>)>;

struct CemResult {
  std::vector<Action> actions;
  double score = 0.0;
  std::vector<double> best_history;  // best-ever score after each iteration
  std::vector<double> final_mean;    // 3 values per step: vx, vy, grip
};

/// Throws BadConfig for an invalid cem config or an empty initial sequence.
CemResult cem_refine(std::span<const Action> initial, const ActionScorer& scorer, const CemConfig& config,
                     std::uint64_t seed);

/// Scorer that predicts with the model and evaluates the reward.
ActionScorer plan_scorer(const RewardFn& reward, const DynamicsModel& model, const SimState& s0);

}  // namespace failprompt
