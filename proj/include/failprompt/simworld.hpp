#pragma once

#include "failprompt/embedding.hpp"
#include "failprompt/rng.hpp"
#include "failprompt/tasks.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace failprompt {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
double distance(Vec2 a, Vec2 b);

namespace sim {
inline constexpr double kContactRadius = 0.04;
inline constexpr double kMaxSpeed = 0.05;
inline constexpr double kDrawerOpen = 0.07;
inline constexpr double kDrawerClosedBelow = 0.05;
inline constexpr double kFaucetThreshold = 0.01;
inline constexpr double kCupAwayDistance = 0.1;
inline constexpr double kCupPushDistance = 0.05;
inline constexpr double kOpenDrawerAbove = 0.02;
inline constexpr double kPokeTolerance = 0.01;
inline constexpr int kHorizon = 60;
inline constexpr int kFeatureWidth = 16;
// Drawer handle sits at kDrawerBase + (0, drawer_ext); the drawer slides along y.
inline constexpr Vec2 kDrawerBase{0.20, 0.60};
inline constexpr Vec2 kFaucetHandle{0.80, 0.62};
inline constexpr Vec2 kCupHome{0.50, 0.55};
}  // namespace sim

enum class Grip { Open, Close, Hold };

/// Planar velocity command plus gripper command; velocity is clamped to
/// [-kMaxSpeed, kMaxSpeed] per axis on construction.
class Action {
 public:
  Action() = default;
  Action(double vx, double vy, Grip grip);
  /// Continuous encoding used by samplers: g < -1/3 opens, g > 1/3 closes.
  static Action from_continuous(double vx, double vy, double g);

  Vec2 velocity() const { return velocity_; }
  Grip grip() const { return grip_; }
  /// Inverse of from_continuous (open -> -1, hold -> 0, close -> 1).
  double grip_continuous() const;

 private:
  Vec2 velocity_{};
  Grip grip_ = Grip::Hold;
};

struct SimState {
  Vec2 gripper{0.5, 0.3};
  bool grip_closed = false;
  double drawer_ext = sim::kDrawerOpen;
  double faucet_angle = 0.0;
  Vec2 cup = sim::kCupHome;
  Vec2 camera_offset{};

  bool operator==(const SimState&) const = default;
};

struct Trajectory {
  std::vector<SimState> states;  // T + 1
  std::vector<Action> actions;   // T
};

Vec2 drawer_handle(const SimState& s);
bool touches_drawer(const SimState& s);
bool touches_faucet(const SimState& s);
bool touches_cup(const SimState& s);
/// Contact with the object a task manipulates.
bool touches_task_object(Task task, const SimState& s);

SimState step(const SimState& state, const Action& action);
/// Uniform draw from the action box (velocity box, continuous grip in [-1, 1]).
Action random_action(Rng& rng);
std::vector<Action> random_actions(Rng& rng, int horizon = sim::kHorizon);
Trajectory rollout(const SimState& s0, std::span<const Action> actions);

/// Randomized initial state for a task (gripper placed near, not on, the object).
SimState initial_state(Task task, Rng& rng);

/// Ground-truth predicate over a state sequence (first state is the start).
bool success(Task task, std::span<const SimState> states);
bool success(Task task, const Trajectory& trajectory);
/// Predicate evaluated as if the episode ended at frame `t`.
bool success_at(Task task, std::span<const SimState> states, std::size_t t);

enum class Domain { Robot, Human };
std::string_view domain_name(Domain d) noexcept;

/// Fixed invertible affine map applied to robot frame features to produce
/// human-domain features, plus the per-clip viewpoint spread.
struct DomainShift {
  Matrix transform;  // F x F
  Vector bias;       // F
  double viewpoint_std = 0.05;

  static DomainShift identity();
  /// Default shift: 0.7 I + 0.5 Q (Q a seeded rotation) and a seeded bias.
  static DomainShift standard(std::uint64_t seed = 11);
};

enum class EnvVariant { Train, ShiftedColor, ShiftedView, ShiftedArrangement };
std::string_view env_variant_name(EnvVariant v) noexcept;
/// Throws BadConfig.
EnvVariant parse_env_variant(std::string_view name);

/// Rendering-only parameters; never affect dynamics or predicates.
struct RenderParams {
  Vec2 camera_shift{};
  Vec2 arrangement_shift{};
  Vector color_shift;  // empty or width F

  static RenderParams for_variant(EnvVariant v);
};

/// Deterministic feature map of a state (width kFeatureWidth).
Vector render_features(const SimState& state, Domain domain = Domain::Robot,
                       const DomainShift& shift = DomainShift::standard(), const RenderParams& params = {});

}  // namespace failprompt
