#include "failprompt/simworld.hpp"

#include "failprompt/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace failprompt {

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

namespace {

double clamp_speed(double v) {
  if (!std::isfinite(v)) return 0.0;
  return std::clamp(v, -sim::kMaxSpeed, sim::kMaxSpeed);
}

Vec2 clamp_table(Vec2 p) { return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)}; }

// "At least" comparisons tolerate the rounding of a difference of two coordinates.
constexpr double kAtLeastSlack = 1e-12;

}  // namespace

Action::Action(double vx, double vy, Grip grip) : velocity_{clamp_speed(vx), clamp_speed(vy)}, grip_(grip) {}

Action Action::from_continuous(double vx, double vy, double g) {
  const Grip grip = g < -1.0 / 3.0 ? Grip::Open : (g > 1.0 / 3.0 ? Grip::Close : Grip::Hold);
  return Action(vx, vy, grip);
}

double Action::grip_continuous() const {
  switch (grip_) {
    case Grip::Open: return -1.0;
    case Grip::Close: return 1.0;
    case Grip::Hold: return 0.0;
  }
  return 0.0;
}

Vec2 drawer_handle(const SimState& s) { return sim::kDrawerBase + Vec2{0.0, s.drawer_ext}; }
bool touches_drawer(const SimState& s) { return distance(s.gripper, drawer_handle(s)) <= sim::kContactRadius; }
bool touches_faucet(const SimState& s) { return distance(s.gripper, sim::kFaucetHandle) <= sim::kContactRadius; }
bool touches_cup(const SimState& s) { return distance(s.gripper, s.cup) <= sim::kContactRadius; }

bool touches_task_object(Task task, const SimState& s) {
  switch (task) {
    case Task::CloseDrawer:
    case Task::OpenDrawer: return touches_drawer(s);
    case Task::TurnFaucet: return touches_faucet(s);
    case Task::MoveCupAway:
    case Task::PushCupLeftToRight:
    case Task::PushCupRightToLeft:
    case Task::PokeCup: return touches_cup(s);
  }
  return false;
}

SimState step(const SimState& state, const Action& action) {
  SimState next = state;
  if (action.grip() == Grip::Close) next.grip_closed = true;
  if (action.grip() == Grip::Open) next.grip_closed = false;
  const Vec2 v = action.velocity();

  // Contacts are evaluated on the pre-step configuration.
  if (touches_drawer(state)) {
    next.drawer_ext = std::clamp(state.drawer_ext + v.y, 0.0, sim::kDrawerOpen);
  }
  if (touches_faucet(state)) {
    next.faucet_angle = state.faucet_angle + std::abs(v.x);
  }
  if (touches_cup(state)) {
    if (next.grip_closed) {
      next.cup = clamp_table(state.cup + v);
    } else {
      const Vec2 d = state.cup - state.gripper;
      const double len = std::hypot(d.x, d.y);
      if (len > 0.0) {
        const Vec2 n = (1.0 / len) * d;
        const double push = v.x * n.x + v.y * n.y;
        if (push > 0.0) next.cup = clamp_table(state.cup + push * n);
      }
    }
  }
  next.gripper = clamp_table(state.gripper + v);
  return next;
}

Action random_action(Rng& rng) {
  const double vx = rng.uniform(-sim::kMaxSpeed, sim::kMaxSpeed);
  const double vy = rng.uniform(-sim::kMaxSpeed, sim::kMaxSpeed);
  return Action::from_continuous(vx, vy, rng.uniform(-1.0, 1.0));
}

std::vector<Action> random_actions(Rng& rng, int horizon) {
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (int i = 0; i < horizon; ++i) out.push_back(random_action(rng));
  return out;
}

Trajectory rollout(const SimState& s0, std::span<const Action> actions) {
  Trajectory t;
  t.states.reserve(actions.size() + 1);
  t.states.push_back(s0);
  t.actions.assign(actions.begin(), actions.end());
  for (const Action& a : actions) t.states.push_back(step(t.states.back(), a));
  return t;
}

SimState initial_state(Task task, Rng& rng) {
  SimState s;
  s.cup = sim::kCupHome + Vec2{rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)};
  s.drawer_ext = rng.uniform(0.0, sim::kDrawerOpen);
  if (task == Task::CloseDrawer) s.drawer_ext = sim::kDrawerOpen;
  if (task == Task::OpenDrawer) s.drawer_ext = 0.0;
  s.faucet_angle = 0.0;

  // Gripper starts on an arc below the task object.
  Vec2 anchor = s.cup;
  if (task == Task::CloseDrawer || task == Task::OpenDrawer) anchor = drawer_handle(s);
  if (task == Task::TurnFaucet) anchor = sim::kFaucetHandle;
  const double angle = rng.uniform(-0.75 * std::numbers::pi, -0.25 * std::numbers::pi);
  const double radius = task == Task::TurnFaucet ? rng.uniform(0.18, 0.28) : rng.uniform(0.12, 0.22);
  s.gripper = clamp_table(anchor + Vec2{radius * std::cos(angle), radius * std::sin(angle)});
  return s;
}

bool success_at(Task task, std::span<const SimState> states, std::size_t t) {
  if (states.empty()) return false;
  t = std::min(t, states.size() - 1);
  const SimState& first = states.front();
  const SimState& last = states[t];
  switch (task) {
    case Task::CloseDrawer: return last.drawer_ext < sim::kDrawerClosedBelow;
    case Task::OpenDrawer: return last.drawer_ext > sim::kOpenDrawerAbove;
    case Task::TurnFaucet: return last.faucet_angle - first.faucet_angle > sim::kFaucetThreshold;
    case Task::MoveCupAway: return last.cup.y - first.cup.y >= sim::kCupAwayDistance - kAtLeastSlack;
    case Task::PushCupLeftToRight: return last.cup.x - first.cup.x >= sim::kCupPushDistance - kAtLeastSlack;
    case Task::PushCupRightToLeft: return first.cup.x - last.cup.x >= sim::kCupPushDistance - kAtLeastSlack;
    case Task::PokeCup: return touches_cup(last) && distance(last.cup, first.cup) <= sim::kPokeTolerance;
  }
  throw Error(ErrorCode::UnknownTask, "task id " + std::to_string(static_cast<int>(task)));
}

bool success(Task task, std::span<const SimState> states) {
  if (states.empty()) return false;
  return success_at(task, states, states.size() - 1);
}

bool success(Task task, const Trajectory& trajectory) { return success(task, std::span<const SimState>(trajectory.states)); }

std::string_view domain_name(Domain d) noexcept { return d == Domain::Human ? "human" : "robot"; }

namespace {

Matrix seeded_rotation(int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix g(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  // Fix the sign convention so that Q is unique for a given draw.
  const Matrix rr = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < n; ++c)
    if (rr(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

DomainShift make_standard(std::uint64_t seed) {
  const int f = sim::kFeatureWidth;
  DomainShift s;
  s.transform = 0.7 * Matrix::Identity(f, f) + 0.5 * seeded_rotation(f, mix_seed(seed, 1));
  Rng rng(mix_seed(seed, 2));
  s.bias.resize(f);
  for (int i = 0; i < f; ++i) s.bias(i) = rng.normal(0.0, 0.15);
  s.viewpoint_std = 0.05;
  return s;
}

// Raw scene descriptor fed to the fixed renderer nonlinearity.
constexpr int kRawWidth = 8;

const Matrix& render_matrix() {
  static const Matrix m = [] {
    Rng rng(0x72656e64);
    Matrix a(sim::kFeatureWidth, kRawWidth);
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c) a(r, c) = rng.normal(0.0, 0.8);
    return a;
  }();
  return m;
}

}  // namespace

DomainShift DomainShift::identity() {
  DomainShift s;
  s.transform = Matrix::Identity(sim::kFeatureWidth, sim::kFeatureWidth);
  s.bias = Vector::Zero(sim::kFeatureWidth);
  s.viewpoint_std = 0.0;
  return s;
}

DomainShift DomainShift::standard(std::uint64_t seed) {
  if (seed == 11) {
    static const DomainShift cached = make_standard(11);
    return cached;
  }
  return make_standard(seed);
}

std::string_view env_variant_name(EnvVariant v) noexcept {
  switch (v) {
    case EnvVariant::Train: return "train";
    case EnvVariant::ShiftedColor: return "shifted-color";
    case EnvVariant::ShiftedView: return "shifted-view";
    case EnvVariant::ShiftedArrangement: return "shifted-arrangement";
  }
  return "unknown";
}

EnvVariant parse_env_variant(std::string_view name) {
  for (EnvVariant v : {EnvVariant::Train, EnvVariant::ShiftedColor, EnvVariant::ShiftedView,
                       EnvVariant::ShiftedArrangement}) {
    if (env_variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::BadConfig, "unknown environment variant '" + std::string(name) + "'");
}

RenderParams RenderParams::for_variant(EnvVariant v) {
  RenderParams p;
  if (v == EnvVariant::Train) return p;
  // Each variant includes the changes of the previous one.
  Rng rng(0x636f6c);
  p.color_shift.resize(sim::kFeatureWidth);
  for (int i = 0; i < sim::kFeatureWidth; ++i) p.color_shift(i) = rng.normal(0.0, 0.05);
  if (v == EnvVariant::ShiftedColor) return p;
  p.camera_shift = {0.04, -0.03};
  if (v == EnvVariant::ShiftedView) return p;
  p.arrangement_shift = {-0.03, 0.02};
  return p;
}

Vector render_features(const SimState& state, Domain domain, const DomainShift& shift, const RenderParams& params) {
  const Vec2 view = state.camera_offset + params.camera_shift;
  const Vec2 g = state.gripper + view;
  const Vec2 cup = state.cup + view + params.arrangement_shift;
  Vector raw(kRawWidth);
  raw << 2.0 * (g.x - 0.5), 2.0 * (g.y - 0.5), state.grip_closed ? 0.5 : -0.5,
      2.0 * (state.drawer_ext / sim::kDrawerOpen - 0.5), 2.0 * std::tanh(state.faucet_angle / 0.02) - 1.0,
      4.0 * (cup.x - sim::kCupHome.x), 4.0 * (cup.y - sim::kCupHome.y),
      2.0 * (params.arrangement_shift.x + params.arrangement_shift.y);
  Vector f = (render_matrix() * raw).array().tanh();
  if (params.color_shift.size() == f.size()) f += params.color_shift;
  if (domain == Domain::Human) f = shift.transform * f + shift.bias;
  return f;
}

}  // namespace failprompt
