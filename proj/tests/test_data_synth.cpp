#include "doctest.h"
#include "support.hpp"

#include "failprompt/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace failprompt;
using fp_test::throws_code;

namespace {

bool ever_touches(Task task, const Trajectory& t) {
  return std::any_of(t.states.begin(), t.states.end(), [&](const SimState& s) { return touches_task_object(task, s); });
}

bool ever_succeeds(Task task, const Trajectory& t) {
  for (std::size_t i = 0; i < t.states.size(); ++i)
    if (success_at(task, t.states, i)) return true;
  return false;
}

DataConfig small_config(std::uint64_t seed) {
  DataConfig c;
  c.human_per_task = 4;
  c.robot_success_per_task = 3;
  c.robot_failure_per_task = 5;
  c.seed = seed;
  return c;
}

std::string temp_path(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_CASE("failure archetype semantics hold on every task") {
  for (Task task : kAllTasks) {
    for (Archetype a : {Archetype::Wander, Archetype::Revert, Archetype::Incomplete}) {
      if (!archetype_supported(task, a)) {
        CHECK(throws_code([&] { gen_failure_trajectory(task, a, 1); }, ErrorCode::ArchetypeUnsupported));
        continue;
      }
      for (std::uint64_t seed = 0; seed < 8; ++seed) {
        INFO(task_name(task) << " " << archetype_name(a) << " seed " << seed);
        const Trajectory t = gen_failure_trajectory(task, a, seed);
        REQUIRE(t.states.size() == static_cast<std::size_t>(sim::kHorizon) + 1);
        CHECK_FALSE(success(task, t));
        CHECK(classify_failure(task, t.states) == a);
        switch (a) {
          case Archetype::Wander: CHECK_FALSE(ever_touches(task, t)); break;
          case Archetype::Revert: CHECK(ever_succeeds(task, t)); break;
          case Archetype::Incomplete:
            CHECK(ever_touches(task, t));
            CHECK_FALSE(ever_succeeds(task, t));
            break;
          case Archetype::None: break;
        }
      }
    }
  }
  CHECK(throws_code([] { gen_failure_trajectory(Task::CloseDrawer, Archetype::None, 1); },
                    ErrorCode::ArchetypeUnsupported));
}

TEST_CASE("archetype examples on the drawer and faucet") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Trajectory w = gen_failure_trajectory(Task::CloseDrawer, Archetype::Wander, seed);
    for (const SimState& s : w.states) CHECK(s.drawer_ext == sim::kDrawerOpen);

    const Trajectory r = gen_failure_trajectory(Task::CloseDrawer, Archetype::Revert, seed);
    double lowest = 1.0;
    for (const SimState& s : r.states) lowest = std::min(lowest, s.drawer_ext);
    CHECK(lowest < 0.05);
    CHECK(r.states.back().drawer_ext >= 0.05);

    const Trajectory f = gen_failure_trajectory(Task::TurnFaucet, Archetype::Incomplete, seed);
    for (const SimState& s : f.states) CHECK(s.faucet_angle - f.states.front().faucet_angle <= 0.01);
  }
}

TEST_CASE("success generators satisfy their predicate") {
  for (Task task : kAllTasks) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      INFO(task_name(task) << " seed " << seed);
      CHECK(success(task, gen_success_trajectory(task, seed)));
      CHECK(success(task, gen_random_success_trajectory(task, seed)));
      const Trajectory f = gen_random_failure_trajectory(task, seed);
      CHECK_FALSE(success(task, f));
      CHECK(classify_failure(task, f.states).has_value());
    }
  }
  // Determinism per seed.
  CHECK(gen_success_trajectory(Task::TurnFaucet, 5).states == gen_success_trajectory(Task::TurnFaucet, 5).states);
}

TEST_CASE("clip frames are sampled at uniform indices") {
  CHECK(clip_frame_indices(61) == std::vector<std::size_t>{0, 20, 40, 60});
  CHECK(clip_frame_indices(61, 1) == std::vector<std::size_t>{0});
  CHECK(clip_frame_indices(0).empty());
  CHECK(clip_frame_indices(4, 4) == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("without noise or shift, human and robot clips of one motion coincide") {
  const Trajectory t = gen_success_trajectory(Task::OpenDrawer, 3);
  Rng a(1), b(1);
  const Clip robot = render_clip(t.states, Domain::Robot, DomainShift::identity(), {}, 0.0, a);
  const Clip human = render_clip(t.states, Domain::Human, DomainShift::identity(), {}, 0.0, b);
  CHECK(robot == human);
  CHECK(robot.rows() == kClipFrames);
  CHECK(robot.cols() == sim::kFeatureWidth);
}

TEST_CASE("default domain shift is nontrivial but keeps task signal") {
  const DomainShift shift = DomainShift::standard();
  double total = 0.0;
  int n = 0;
  for (int i = 0; i < 100; ++i) {
    const Task task = kAllTasks[static_cast<std::size_t>(i % kTaskCount)];
    const Trajectory t = gen_success_trajectory(task, static_cast<std::uint64_t>(i));
    Rng rng(static_cast<std::uint64_t>(i) + 500);
    const Clip robot = render_clip(t.states, Domain::Robot, shift, {}, 0.05, rng);
    const Clip human = render_clip(t.states, Domain::Human, shift, {}, 0.05, rng);
    for (Eigen::Index r = 0; r < robot.rows(); ++r) {
      total += robot.row(r).dot(human.row(r)) / (robot.row(r).norm() * human.row(r).norm());
      ++n;
    }
  }
  const double mean = total / n;
  CHECK(mean > 0.2);
  CHECK(mean < 0.9);
}

TEST_CASE("dataset sizes and labels follow the config") {
  DataConfig c;
  c.robot_success_per_task = 20;
  c.robot_failure_per_task = 20;
  c.human_per_task = 60;
  const Dataset ds = gen_dataset(c);
  CHECK(ds.clips.size() == 7u * (60 + 40));
  for (Task t : kAllTasks) {
    CHECK(ds.count(Domain::Human, t, true) == 60);
    CHECK(ds.count(Domain::Human, t, false) == 0);
    CHECK(ds.count(Domain::Robot, t, true) == 20);
    CHECK(ds.count(Domain::Robot, t, false) == 20);
  }
  for (const auto& clip : ds.clips) {
    CHECK((clip.archetype == Archetype::None) == clip.success);
    if (clip.domain == Domain::Human) CHECK(clip.success);
  }
}

TEST_CASE("failure sources") {
  CHECK(FailureSources::parse("both").to_string() == "both");
  CHECK(FailureSources::parse("random").to_string() == "random");
  CHECK(FailureSources::parse("near_success").to_string() == "near_success");
  CHECK(FailureSources::parse("random,near_success").to_string() == "both");
  CHECK(throws_code([] { FailureSources::parse("scripted"); }, ErrorCode::BadConfig));
  CHECK(throws_code([] { FailureSources::parse(""); }, ErrorCode::BadConfig));

  DataConfig c = small_config(4);
  c.sources = FailureSources::parse("near_success");
  for (const auto& clip : gen_dataset(c).clips) {
    if (!clip.success) CHECK(clip.archetype != Archetype::Wander);
  }
  c.sources = FailureSources{false, false};
  CHECK(throws_code([&] { gen_dataset(c); }, ErrorCode::BadConfig));
  c.robot_failure_per_task = 0;
  CHECK(gen_dataset(c).clips.size() == 7u * 7u);
  c.human_per_task = -1;
  CHECK(throws_code([&] { gen_dataset(c); }, ErrorCode::BadConfig));
}

TEST_CASE("dataset generation is deterministic") {
  CHECK(gen_dataset(small_config(2)) == gen_dataset(small_config(2)));
  CHECK_FALSE(gen_dataset(small_config(2)) == gen_dataset(small_config(3)));
}

TEST_CASE("dataset file round trip and errors") {
  const Dataset ds = gen_dataset(small_config(6));
  const std::string path = temp_path("fp_test_dataset.txt");
  save_dataset(ds, path);
  CHECK(load_dataset(path) == ds);
  CHECK(serialize_dataset(parse_dataset(serialize_dataset(ds))) == serialize_dataset(ds));
  std::remove(path.c_str());

  const std::string text = serialize_dataset(ds);
  CHECK(throws_code([&] { parse_dataset(text.substr(0, text.size() / 2)); }, ErrorCode::CorruptFile));
  CHECK(throws_code([&] { parse_dataset(""); }, ErrorCode::CorruptFile));
  std::string v99 = text;
  v99.replace(v99.find(" 1 "), 3, " 99 ");
  CHECK(throws_code([&] { parse_dataset(v99); }, ErrorCode::VersionMismatch));
  std::string bad = text;
  bad.replace(bad.find("clip robot") != std::string::npos ? bad.find("clip robot") : bad.find("clip human"), 4, "clop");
  CHECK(throws_code([&] { parse_dataset(bad); }, ErrorCode::CorruptFile));
  CHECK(throws_code([&] { parse_dataset(text + "extra\n"); }, ErrorCode::CorruptFile));
  CHECK(throws_code([] { load_dataset("/nonexistent/dir/file.txt"); }, ErrorCode::IoError));
}
