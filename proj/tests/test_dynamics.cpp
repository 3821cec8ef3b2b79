#include "doctest.h"
#include "support.hpp"

#include "failprompt/dynamics.hpp"

#include <cmath>

using namespace failprompt;
using fp_test::throws_code;

namespace {

// Gripper-only motion far from every object, with the grip held: the state
// update is exactly linear in the chunk's actions.
std::vector<Trajectory> free_motion_episodes(int count, std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    SimState s0;
    s0.gripper = {rng.uniform(0.45, 0.55), rng.uniform(0.22, 0.28)};
    std::vector<Action> actions;
    for (int t = 0; t < sim::kHorizon; ++t)
      actions.emplace_back(rng.uniform(-0.003, 0.003), rng.uniform(-0.003, 0.003), Grip::Hold);
    out.push_back(rollout(s0, actions));
  }
  return out;
}

}  // namespace

TEST_CASE("ground-truth dynamics reproduce the simulator at chunk boundaries") {
  const DynamicsModel gt = DynamicsModel::ground_truth();
  for (const Trajectory& ep : random_episodes(20, 3)) {
    const auto pred = chunked_predict(gt, ep.states.front(), ep.actions);
    REQUIRE(pred.size() == 16);
    for (std::size_t c = 0; c < pred.size(); ++c) CHECK(pred[c] == ep.states[c * kChunkSize]);
  }
  Rng rng(2);
  const SimState s0 = initial_state(Task::TurnFaucet, rng);
  const std::vector<Action> still(60, Action(0, 0, Grip::Hold));
  for (const SimState& s : chunked_predict(gt, s0, still)) CHECK(s == s0);
  CHECK(dynamics_error(gt, random_episodes(5, 4)) == 0.0);
}

TEST_CASE("chunked_predict rejects ragged horizons") {
  const DynamicsModel gt = DynamicsModel::ground_truth();
  const SimState s0;
  CHECK(throws_code([&] { chunked_predict(gt, s0, std::vector<Action>(59)); }, ErrorCode::BadHorizon));
  CHECK(throws_code([&] { chunked_predict(gt, s0, std::vector<Action>{}); }, ErrorCode::BadHorizon));
  CHECK(chunked_predict(gt, s0, std::vector<Action>(8)).size() == 3);
}

TEST_CASE("state vectors round trip and clamp") {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    SimState s = initial_state(kAllTasks[static_cast<std::size_t>(i % kTaskCount)], rng);
    s.grip_closed = i % 2 == 0;
    CHECK(vector_to_state(state_to_vector(s)) == s);
  }
  Vector wild(kStateWidth);
  wild << -1.0, 2.0, 0.7, 0.5, -0.2, std::nan(""), 3.0;
  const SimState c = vector_to_state(wild);
  CHECK(c.gripper == Vec2{0.0, 1.0});
  CHECK(c.grip_closed);
  CHECK(c.drawer_ext == sim::kDrawerOpen);
  CHECK(c.faucet_angle == 0.0);
  CHECK(c.cup == Vec2{0.0, 1.0});
  CHECK(throws_code([] { vector_to_state(Vector::Zero(3)); }, ErrorCode::ShapeMismatch));
}

TEST_CASE("linear dynamics are fit to within 1e-6") {
  const auto train = free_motion_episodes(40, 1);
  const auto held = free_motion_episodes(20, 2);
  DynamicsTrainReport report;
  const DynamicsModel m = train_dynamics(train, {}, &report);
  CHECK(report.transitions == 40u * 15u);
  CHECK(dynamics_error(m, held) < 1e-6);
}

TEST_CASE("learned dynamics on random episodes") {
  const auto train = random_episodes(2000, 11);
  const auto held = random_episodes(200, 12);
  DynamicsTrainReport report;
  const DynamicsModel m = train_dynamics(train, {}, &report);
  const double open_loop = dynamics_error(m, held);
  const double one = one_chunk_error(m, held);
  MESSAGE("open-loop error " << open_loop << ", one-chunk error " << one);
  CHECK(open_loop < 0.02);
  CHECK(one <= open_loop);
  REQUIRE(report.loss_history.size() == 300);
  for (std::size_t i = 1; i < report.loss_history.size(); ++i)
    CHECK(report.loss_history[i] <= report.loss_history[i - 1] + 1e-12);

  // Predictions stay inside the valid state box.
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const SimState s0 = initial_state(kAllTasks[static_cast<std::size_t>(i % kTaskCount)], rng);
    std::vector<Action> wild;
    for (int t = 0; t < 60; ++t) wild.emplace_back(0.05, 0.05, Grip::Close);
    for (const SimState& s : chunked_predict(m, s0, wild)) {
      CHECK(s.drawer_ext >= 0.0);
      CHECK(s.drawer_ext <= sim::kDrawerOpen);
      CHECK(s.gripper.x <= 1.0);
      CHECK(s.cup.y <= 1.0);
    }
  }

  const DynamicsModel back = DynamicsModel::from_checkpoint(Checkpoint::parse(m.to_checkpoint().serialize()));
  CHECK(back.kind() == DynamicsKind::Learned);
  CHECK(back.regressor().weights == m.regressor().weights);
  CHECK(dynamics_error(back, held) == open_loop);
}

TEST_CASE("dynamics training is deterministic and insensitive to duplication") {
  const auto train = random_episodes(60, 21);
  DynamicsTrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 50;
  const DynamicsModel a = train_dynamics(train, cfg);
  const DynamicsModel b = train_dynamics(train, cfg);
  CHECK(a.regressor().weights == b.regressor().weights);

  std::vector<Trajectory> doubled = train;
  doubled.insert(doubled.end(), train.begin(), train.end());
  const DynamicsModel d = train_dynamics(doubled, cfg);
  const double scale = a.regressor().weights.cwiseAbs().maxCoeff();
  CHECK((d.regressor().weights - a.regressor().weights).cwiseAbs().maxCoeff() <= 1e-6 * scale);
}

TEST_CASE("dynamics training errors") {
  CHECK(throws_code([] { train_dynamics(std::vector<Trajectory>{}, {}); }, ErrorCode::InsufficientData));
  CHECK(throws_code([] { train_dynamics(random_episodes(6, 1), {}); }, ErrorCode::InsufficientData));
  CHECK(train_dynamics(random_episodes(7, 1), {}).kind() == DynamicsKind::Learned);

  Checkpoint gt = DynamicsModel::ground_truth().to_checkpoint();
  CHECK(DynamicsModel::from_checkpoint(gt).kind() == DynamicsKind::GroundTruth);
  Checkpoint bad = train_dynamics(random_episodes(7, 1), {}).to_checkpoint();
  bad.put_vector("dynamics.random_bias", Vector::Zero(3));
  CHECK(throws_code([&] { DynamicsModel::from_checkpoint(bad); }, ErrorCode::CorruptFile));
}
