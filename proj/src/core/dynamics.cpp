#include "failprompt/dynamics.hpp"

#include "failprompt/error.hpp"

#include <algorithm>
#include <cmath>

namespace failprompt {

namespace {

constexpr int kInputWidth = kStateWidth + 6 + 3 * kChunkSize;
constexpr double kActionScale = 1.0 / sim::kMaxSpeed;

}  // namespace

Vector state_to_vector(const SimState& s) {
  Vector v(kStateWidth);
  v << s.gripper.x, s.gripper.y, s.grip_closed ? 1.0 : 0.0, s.drawer_ext, s.faucet_angle, s.cup.x, s.cup.y;
  return v;
}

SimState vector_to_state(const Vector& v, Vec2 camera_offset) {
  if (v.size() != kStateWidth) throw Error(ErrorCode::ShapeMismatch, "state vector width");
  auto unit = [](double x) { return std::isfinite(x) ? std::clamp(x, 0.0, 1.0) : 0.0; };
  SimState s;
  s.gripper = {unit(v(0)), unit(v(1))};
  s.grip_closed = v(2) > 0.5;
  s.drawer_ext = std::isfinite(v(3)) ? std::clamp(v(3), 0.0, sim::kDrawerOpen) : 0.0;
  s.faucet_angle = std::isfinite(v(4)) ? std::max(v(4), 0.0) : 0.0;
  s.cup = {unit(v(5)), unit(v(6))};
  s.camera_offset = camera_offset;
  return s;
}

ChunkRegressor ChunkRegressor::initialize(int hidden, std::uint64_t seed) {
  if (hidden < 0) throw Error(ErrorCode::BadConfig, "hidden width must be non-negative");
  Rng rng(seed);
  ChunkRegressor r;
  r.random_proj.resize(hidden, kInputWidth);
  r.random_bias.resize(hidden);
  for (int i = 0; i < hidden; ++i) {
    for (int j = 0; j < kInputWidth; ++j) r.random_proj(i, j) = rng.normal(0.0, 1.0 / std::sqrt(kInputWidth / 4.0));
    r.random_bias(i) = rng.normal(0.0, 0.5);
  }
  r.weights = Matrix::Zero(kStateWidth, kInputWidth + hidden + 1);
  return r;
}

Vector ChunkRegressor::features(const SimState& s, std::span<const Action> chunk) const {
  Vector x(kInputWidth);
  const Vec2 handle = drawer_handle(s);
  x << s.gripper.x, s.gripper.y, s.grip_closed ? 1.0 : 0.0, s.drawer_ext, s.faucet_angle, s.cup.x, s.cup.y,
      (s.gripper.x - handle.x) * 10.0, (s.gripper.y - handle.y) * 10.0,
      (s.gripper.x - sim::kFaucetHandle.x) * 10.0, (s.gripper.y - sim::kFaucetHandle.y) * 10.0,
      (s.gripper.x - s.cup.x) * 10.0, (s.gripper.y - s.cup.y) * 10.0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
  for (int k = 0; k < kChunkSize; ++k) {
    const Action& a = chunk[static_cast<std::size_t>(k)];
    x(kStateWidth + 6 + 3 * k) = a.velocity().x * kActionScale;
    x(kStateWidth + 6 + 3 * k + 1) = a.velocity().y * kActionScale;
    x(kStateWidth + 6 + 3 * k + 2) = a.grip_continuous();
  }
  const Eigen::Index hidden = random_proj.rows();
  Vector phi(kInputWidth + hidden + 1);
  phi.head(kInputWidth) = x;
  if (hidden > 0) phi.segment(kInputWidth, hidden) = (random_proj * x + random_bias).array().tanh().matrix();
  phi(kInputWidth + hidden) = 1.0;
  return phi;
}

SimState ChunkRegressor::predict(const SimState& s, std::span<const Action> chunk) const {
  const Vector next = state_to_vector(s) + weights * features(s, chunk);
  return vector_to_state(next, s.camera_offset);
}

DynamicsModel DynamicsModel::ground_truth() { return DynamicsModel{}; }

DynamicsModel DynamicsModel::learned(ChunkRegressor regressor) {
  DynamicsModel m;
  m.kind_ = DynamicsKind::Learned;
  m.regressor_ = std::move(regressor);
  return m;
}

Checkpoint DynamicsModel::to_checkpoint() const {
  Checkpoint ck;
  ck.put_scalar("dynamics.kind", kind_ == DynamicsKind::Learned ? 1.0 : 0.0);
  if (kind_ == DynamicsKind::Learned) {
    ck.put("dynamics.weights", regressor_.weights);
    ck.put("dynamics.random_proj", regressor_.random_proj);
    ck.put_vector("dynamics.random_bias", regressor_.random_bias);
  }
  return ck;
}

DynamicsModel DynamicsModel::from_checkpoint(const Checkpoint& ck) {
  if (ck.get_scalar("dynamics.kind") == 0.0) return ground_truth();
  ChunkRegressor r;
  r.weights = ck.get("dynamics.weights");
  r.random_proj = ck.get("dynamics.random_proj");
  r.random_bias = ck.get_vector("dynamics.random_bias");
  if (r.random_proj.cols() != kInputWidth || r.random_bias.size() != r.random_proj.rows() ||
      r.weights.rows() != kStateWidth || r.weights.cols() != kInputWidth + r.random_proj.rows() + 1) {
    throw Error(ErrorCode::CorruptFile, "dynamics arrays have inconsistent shapes");
  }
  return learned(std::move(r));
}

std::vector<SimState> chunked_predict(const DynamicsModel& model, const SimState& s0,
                                      std::span<const Action> actions) {
  if (actions.empty() || actions.size() % kChunkSize != 0) {
    throw Error(ErrorCode::BadHorizon, std::to_string(actions.size()) + " actions do not form 4-step chunks");
  }
  std::vector<SimState> out;
  out.reserve(actions.size() / kChunkSize + 1);
  out.push_back(s0);
  SimState s = s0;
  for (std::size_t c = 0; c < actions.size(); c += kChunkSize) {
    const auto chunk = actions.subspan(c, kChunkSize);
    if (model.kind() == DynamicsKind::GroundTruth) {
      for (const Action& a : chunk) s = step(s, a);
    } else {
      s = model.regressor().predict(s, chunk);
    }
    out.push_back(s);
  }
  return out;
}

DynamicsModel train_dynamics(std::span<const Trajectory> episodes, const DynamicsTrainConfig& config,
                             DynamicsTrainReport* report) {
  ChunkRegressor reg = ChunkRegressor::initialize(config.hidden, config.seed);
  const Eigen::Index width = reg.weights.cols();

  std::vector<Vector> phis;
  std::vector<Vector> targets;
  for (const Trajectory& ep : episodes) {
    for (std::size_t t = 0; t + kChunkSize <= ep.actions.size() && t + kChunkSize < ep.states.size();
         t += kChunkSize) {
      const auto chunk = std::span<const Action>(ep.actions).subspan(t, kChunkSize);
      phis.push_back(reg.features(ep.states[t], chunk));
      targets.push_back(state_to_vector(ep.states[t + kChunkSize]) - state_to_vector(ep.states[t]));
    }
  }
  if (phis.size() < 100) {
    throw Error(ErrorCode::InsufficientData, std::to_string(phis.size()) + " chunk transitions, need 100");
  }
  const double n = static_cast<double>(phis.size());
  Matrix a = Matrix::Zero(width, width);
  Matrix b = Matrix::Zero(width, kStateWidth);
  double yy = 0.0;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    a.selfadjointView<Eigen::Lower>().rankUpdate(phis[i]);
    b += phis[i] * targets[i].transpose();
    yy += targets[i].squaredNorm();
  }
  a = a.selfadjointView<Eigen::Lower>();
  a.diagonal().array() += config.ridge * n;

  // Jacobi-preconditioned conjugate gradients per output column, from zero weights.
  const Vector inv_diag = a.diagonal().unaryExpr([](double d) { return d > 0.0 ? 1.0 / d : 1.0; });
  Matrix w = Matrix::Zero(width, kStateWidth);
  Matrix r = b;
  Matrix z = inv_diag.asDiagonal() * r;
  Matrix p = z;
  Vector rz(kStateWidth);
  for (int c = 0; c < kStateWidth; ++c) rz(c) = r.col(c).dot(z.col(c));
  std::vector<double> history;
  auto loss = [&] {
    // ||Phi w - y||^2 = w'Aw - 2 w'b + y'y (ridge term included in A).
    double total = yy;
    for (int c = 0; c < kStateWidth; ++c) total += w.col(c).dot(a * w.col(c)) - 2.0 * w.col(c).dot(b.col(c));
    return std::max(total, 0.0) / (n * kStateWidth);
  };
  for (int it = 0; it < config.epochs; ++it) {
    for (int c = 0; c < kStateWidth; ++c) {
      if (rz(c) <= 1e-300) continue;
      const Vector ap = a * p.col(c);
      const double denom = p.col(c).dot(ap);
      if (!(denom > 0.0)) continue;
      const double alpha = rz(c) / denom;
      w.col(c) += alpha * p.col(c);
      r.col(c) -= alpha * ap;
      z.col(c) = inv_diag.cwiseProduct(r.col(c));
      const double rz_new = r.col(c).dot(z.col(c));
      p.col(c) = z.col(c) + (rz_new / rz(c)) * p.col(c);
      rz(c) = rz_new;
    }
    history.push_back(loss());
  }
  reg.weights = w.transpose();
  if (report) {
    report->loss_history = std::move(history);
    report->transitions = phis.size();
  }
  return DynamicsModel::learned(std::move(reg));
}

std::vector<Trajectory> random_episodes(int count, std::uint64_t seed, int horizon) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const Task task = kAllTasks[rng.index(kAllTasks.size())];
    const SimState s0 = initial_state(task, rng);
    out.push_back(rollout(s0, random_actions(rng, horizon)));
  }
  return out;
}

namespace {

double state_abs_error(const SimState& a, const SimState& b) {
  return (state_to_vector(a) - state_to_vector(b)).cwiseAbs().sum() / kStateWidth;
}

}  // namespace

double dynamics_error(const DynamicsModel& model, std::span<const Trajectory> episodes) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Trajectory& ep : episodes) {
    const std::size_t usable = ep.actions.size() / kChunkSize * kChunkSize;
    if (usable == 0) continue;
    const auto pred = chunked_predict(model, ep.states.front(), std::span<const Action>(ep.actions).first(usable));
    for (std::size_t c = 1; c < pred.size(); ++c) {
      total += state_abs_error(pred[c], ep.states[c * kChunkSize]);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double one_chunk_error(const DynamicsModel& model, std::span<const Trajectory> episodes) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Trajectory& ep : episodes) {
    for (std::size_t t = 0; t + kChunkSize <= ep.actions.size(); t += kChunkSize) {
      const auto pred = chunked_predict(model, ep.states[t], std::span<const Action>(ep.actions).subspan(t, kChunkSize));
      total += state_abs_error(pred[1], ep.states[t + kChunkSize]);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace failprompt
