#pragma once

#include "failprompt/checkpoint.hpp"
#include "failprompt/simworld.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace failprompt {

inline constexpr int kChunkSize = 4;
/// gripper x/y, grip, drawer extension, faucet angle, cup x/y.
inline constexpr int kStateWidth = 7;

Vector state_to_vector(const SimState& s);
/// Clamps every coordinate into its valid range; the grip flag is thresholded at 0.5.
SimState vector_to_state(const Vector& v, Vec2 camera_offset = {});

enum class DynamicsKind { GroundTruth, Learned };

/// Learned chunk regressor: next = s + W [x; tanh(R x + c); 1] with
/// x = scaled state plus four scaled actions.
struct ChunkRegressor {
  Matrix weights;      // kStateWidth x (input + hidden + 1)
  Matrix random_proj;  // hidden x input
  Vector random_bias;  // hidden

  static ChunkRegressor initialize(int hidden, std::uint64_t seed);
  int input_width() const { return static_cast<int>(random_proj.cols()); }
  Vector features(const SimState& s, std::span<const Action> chunk) const;
  SimState predict(const SimState& s, std::span<const Action> chunk) const;
};

class DynamicsModel {
 public:
  static DynamicsModel ground_truth();
  static DynamicsModel learned(ChunkRegressor regressor);

  DynamicsKind kind() const { return kind_; }
  const ChunkRegressor& regressor() const { return regressor_; }

  Checkpoint to_checkpoint() const;
  /// Throws CorruptFile.
  static DynamicsModel from_checkpoint(const Checkpoint& ck);

 private:
  DynamicsKind kind_ = DynamicsKind::GroundTruth;
  ChunkRegressor regressor_;
};

/// s0 followed by the state after each 4-action chunk. Throws BadHorizon
/// unless the action count is a positive multiple of 4.
std::vector<SimState> chunked_predict(const DynamicsModel& model, const SimState& s0,
                                      std::span<const Action> actions);

struct DynamicsTrainConfig {
  int epochs = 300;  // conjugate-gradient iterations on the normal equations
  int hidden = 96;
  double ridge = 1e-9;
  std::uint64_t seed = 7;
};

struct DynamicsTrainReport {
  std::vector<double> loss_history;  // mean squared residual after each epoch
  std::size_t transitions = 0;
};

/// Throws InsufficientData with fewer than 100 chunk transitions.
DynamicsModel train_dynamics(std::span<const Trajectory> episodes, const DynamicsTrainConfig& config,
                             DynamicsTrainReport* report = nullptr);

/// Random-action episodes from randomized task initial states.
std::vector<Trajectory> random_episodes(int count, std::uint64_t seed, int horizon = sim::kHorizon);

/// Mean absolute per-coordinate error of chunked predictions against the
/// simulator, over every predicted state (s0 excluded).
double dynamics_error(const DynamicsModel& model, std::span<const Trajectory> episodes);
/// Same, for single-chunk predictions from true states.
double one_chunk_error(const DynamicsModel& model, std::span<const Trajectory> episodes);

}  // namespace failprompt
