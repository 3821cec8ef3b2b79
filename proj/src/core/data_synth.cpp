#include "failprompt/data_synth.hpp"

#include "failprompt/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace failprompt {

std::string_view archetype_name(Archetype a) noexcept {
  switch (a) {
    case Archetype::None: return "none";
    case Archetype::Wander: return "wander";
    case Archetype::Revert: return "revert";
    case Archetype::Incomplete: return "incomplete";
  }
  return "none";
}

std::optional<Archetype> parse_archetype(std::string_view name) noexcept {
  for (Archetype a : {Archetype::None, Archetype::Wander, Archetype::Revert, Archetype::Incomplete}) {
    if (archetype_name(a) == name) return a;
  }
  return std::nullopt;
}

std::string FailureSources::to_string() const {
  if (random && near_success) return "both";
  if (random) return "random";
  if (near_success) return "near_success";
  return "none";
}

FailureSources FailureSources::parse(std::string_view text) {
  FailureSources out{false, false};
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    const std::string_view item = text.substr(start, end - start);
    if (item == "random") out.random = true;
    else if (item == "near_success") out.near_success = true;
    else if (item == "both") out.random = out.near_success = true;
    else throw Error(ErrorCode::BadConfig, "unknown failure source '" + std::string(item) + "'");
    start = end + 1;
  }
  return out;
}

std::size_t Dataset::count(Domain domain, Task task, bool success) const {
  return static_cast<std::size_t>(std::count_if(clips.begin(), clips.end(), [&](const LabeledClip& c) {
    return c.domain == domain && c.task == task && c.success == success;
  }));
}

std::vector<std::size_t> clip_frame_indices(std::size_t state_count, int frames) {
  std::vector<std::size_t> idx;
  if (state_count == 0 || frames <= 0) return idx;
  for (int l = 0; l < frames; ++l) {
    const double pos = frames == 1 ? 0.0
                                   : static_cast<double>(l) * static_cast<double>(state_count - 1) /
                                         static_cast<double>(frames - 1);
    idx.push_back(static_cast<std::size_t>(std::lround(pos)));
  }
  return idx;
}

Clip render_clip(std::span<const SimState> states, Domain domain, const DomainShift& shift,
                 const RenderParams& render, double noise, Rng& rng) {
  const auto idx = clip_frame_indices(states.size());
  Vec2 view{};
  if (domain == Domain::Human && shift.viewpoint_std > 0.0) {
    view = {rng.normal(0.0, shift.viewpoint_std), rng.normal(0.0, shift.viewpoint_std)};
  }
  Clip clip(static_cast<Eigen::Index>(idx.size()), sim::kFeatureWidth);
  for (std::size_t l = 0; l < idx.size(); ++l) {
    SimState s = states[idx[l]];
    s.camera_offset = s.camera_offset + view;
    Vector f = render_features(s, domain, shift, render);
    if (domain == Domain::Human && noise > 0.0) {
      for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += rng.normal(0.0, noise);
    }
    clip.row(static_cast<Eigen::Index>(l)) = f.transpose();
  }
  return clip;
}

namespace {

constexpr double kNearMissNoise = 0.03;
constexpr int kMaxAttempts = 4000;

// A scripted manipulation: reach a pre-approach point, approach the object
// along the push axis, push until a goal holds, optionally undo the effect.
struct Script {
  std::function<Vec2(const SimState&)> object;
  Vec2 pre_offset;
  Vec2 approach_offset;
  Vec2 push_dir;
  // Zero means "back off against the push direction".
  Vec2 retreat_dir;
  double push_speed = 0.04;
  std::function<bool(const SimState& start, const SimState& now)> push_done;
  bool stop_on_contact = false;
  // Undo phase.
  bool revert = false;
  int revert_after_step = 0;
  bool revert_grip = false;
  Vec2 revert_dir;
  std::function<bool(const SimState& start, const SimState& now)> revert_done;
  int delay = 0;
  int idle_in_contact = 0;
};

Vec2 toward(Vec2 from, Vec2 to, double speed) {
  const Vec2 d = to - from;
  const double len = std::hypot(d.x, d.y);
  if (len <= speed) return d;
  return (speed / len) * d;
}

Vec2 retreat_direction(const Script& script, Vec2 push) {
  if (script.retreat_dir.x != 0.0 || script.retreat_dir.y != 0.0) return script.retreat_dir;
  return -1.0 * push;
}

Trajectory run_script(const Script& script, const SimState& s0, Rng& rng) {
  enum class Phase { Delay, Pre, Approach, Push, Hold, Revert, Retreat, Idle };
  Phase phase = script.delay > 0 ? Phase::Delay : Phase::Pre;
  Trajectory t;
  t.states.push_back(s0);
  int hold_steps = 0;
  Vec2 retreat_target{};
  for (int k = 0; k < sim::kHorizon; ++k) {
    const SimState& s = t.states.back();
    Vec2 v{};
    Grip grip = Grip::Hold;
    bool noisy = false;
    const Vec2 obj = script.object(s);
    switch (phase) {
      case Phase::Delay:
        noisy = true;
        if (k + 1 >= script.delay) phase = Phase::Pre;
        break;
      case Phase::Pre: {
        const Vec2 target = obj + script.pre_offset;
        v = toward(s.gripper, target, sim::kMaxSpeed);
        noisy = distance(s.gripper, target) > 0.06;
        if (distance(s.gripper + v, target) < 1e-12) phase = Phase::Approach;
        break;
      }
      case Phase::Approach: {
        const Vec2 target = obj + script.approach_offset;
        v = toward(s.gripper, target, sim::kMaxSpeed);
        if (distance(s.gripper + v, target) < 1e-12) phase = Phase::Push;
        break;
      }
      case Phase::Push: {
        if ((script.stop_on_contact && touches_cup(s)) || script.push_done(s0, s)) {
          phase = Phase::Hold;
          break;
        }
        v = script.push_speed * script.push_dir;
        break;
      }
      case Phase::Hold:
        ++hold_steps;
        if (script.revert && k >= script.revert_after_step) {
          phase = Phase::Revert;
          if (script.revert_grip) grip = Grip::Close;
        } else if (!script.revert && hold_steps > script.idle_in_contact) {
          phase = Phase::Retreat;
          retreat_target = s.gripper + 0.07 * retreat_direction(script, script.push_dir);
        }
        break;
      case Phase::Revert:
        if (script.revert_done(s0, s)) {
          phase = Phase::Retreat;
          grip = Grip::Open;
          retreat_target = s.gripper + 0.07 * retreat_direction(script, script.push_dir);
          break;
        }
        v = 0.03 * script.revert_dir;
        break;
      case Phase::Retreat:
        v = toward(s.gripper, retreat_target, 0.02);
        if (distance(s.gripper + v, retreat_target) < 1e-12) phase = Phase::Idle;
        break;
      case Phase::Idle: break;
    }
    if (noisy) {
      v.x += rng.uniform(-kNearMissNoise, kNearMissNoise);
      v.y += rng.uniform(-kNearMissNoise, kNearMissNoise);
    }
    const Action a(v.x, v.y, grip);
    t.actions.push_back(a);
    t.states.push_back(step(s, a));
  }
  return t;
}

Vec2 cup_of(const SimState& s) { return s.cup; }
Vec2 faucet_of(const SimState&) { return sim::kFaucetHandle; }

// Builds the scripted plan for a task. `goal` scales how far the push goes:
// the success variant clears the threshold, the incomplete one stops short.
Script make_script(Task task, Archetype variant, Rng& rng) {
  Script sc;
  sc.delay = static_cast<int>(rng.index(8));
  sc.push_speed = rng.uniform(0.025, 0.05);
  sc.idle_in_contact = static_cast<int>(rng.index(4));
  sc.revert = variant == Archetype::Revert;
  sc.revert_after_step = 24 + static_cast<int>(rng.index(10));
  const bool incomplete = variant == Archetype::Incomplete;
  if (incomplete) sc.push_speed = rng.uniform(0.004, 0.01);
  switch (task) {
    case Task::CloseDrawer: {
      sc.object = drawer_handle;
      sc.pre_offset = {0.0, 0.12};
      sc.approach_offset = {0.0, 0.045};
      sc.push_dir = {0.0, -1.0};
      sc.retreat_dir = {1.0, 0.0};
      const double target = incomplete ? rng.uniform(0.056, 0.066) : rng.uniform(0.0, 0.035);
      sc.push_done = [target](const SimState&, const SimState& s) { return s.drawer_ext <= target; };
      sc.revert_dir = {0.0, 1.0};
      sc.revert_done = [](const SimState&, const SimState& s) { return s.drawer_ext >= 0.062; };
      break;
    }
    case Task::OpenDrawer: {
      sc.object = drawer_handle;
      sc.pre_offset = {0.0, -0.12};
      sc.approach_offset = {0.0, -0.045};
      sc.push_dir = {0.0, 1.0};
      sc.retreat_dir = {1.0, 0.0};
      const double target = incomplete ? rng.uniform(0.004, 0.014) : rng.uniform(0.035, 0.07);
      sc.push_done = [target](const SimState&, const SimState& s) { return s.drawer_ext >= target; };
      sc.revert_dir = {0.0, -1.0};
      sc.revert_done = [](const SimState&, const SimState& s) { return s.drawer_ext <= 0.008; };
      break;
    }
    case Task::TurnFaucet: {
      sc.object = faucet_of;
      if (incomplete) {
        // Reaches the handle from below but never sweeps it sideways.
        sc.pre_offset = {0.0, -0.12};
        sc.approach_offset = {0.0, -0.03};
        sc.push_dir = {0.0, 1.0};
        sc.push_done = [](const SimState&, const SimState&) { return true; };
        sc.idle_in_contact = 2 + static_cast<int>(rng.index(6));
      } else {
        sc.pre_offset = {-0.12, 0.0};
        sc.approach_offset = {-0.045, 0.0};
        sc.push_dir = {1.0, 0.0};
        const double target = rng.uniform(0.02, 0.05);
        sc.push_done = [target](const SimState&, const SimState& s) { return s.faucet_angle >= target; };
      }
      break;
    }
    case Task::MoveCupAway: {
      sc.object = cup_of;
      sc.pre_offset = {0.0, -0.12};
      sc.approach_offset = {0.0, -0.035};
      sc.push_dir = {0.0, 1.0};
      const double target = incomplete ? rng.uniform(0.02, 0.07) : rng.uniform(0.12, 0.2);
      sc.push_done = [target](const SimState& s0, const SimState& s) { return s.cup.y - s0.cup.y >= target; };
      sc.revert_grip = true;
      sc.revert_dir = {0.0, -1.0};
      sc.revert_done = [](const SimState& s0, const SimState& s) { return s.cup.y - s0.cup.y <= 0.04; };
      break;
    }
    case Task::PushCupLeftToRight:
    case Task::PushCupRightToLeft: {
      const double dir = task == Task::PushCupLeftToRight ? 1.0 : -1.0;
      sc.object = cup_of;
      sc.pre_offset = {-0.12 * dir, 0.0};
      sc.approach_offset = {-0.035 * dir, 0.0};
      sc.push_dir = {dir, 0.0};
      const double target = incomplete ? rng.uniform(0.01, 0.035) : rng.uniform(0.065, 0.12);
      sc.push_done = [target, dir](const SimState& s0, const SimState& s) { return dir * (s.cup.x - s0.cup.x) >= target; };
      sc.revert_grip = true;
      sc.revert_dir = {-dir, 0.0};
      sc.revert_done = [dir](const SimState& s0, const SimState& s) { return dir * (s.cup.x - s0.cup.x) <= 0.015; };
      break;
    }
    case Task::PokeCup: {
      sc.object = cup_of;
      sc.pre_offset = {0.0, -0.12};
      sc.approach_offset = {0.0, -0.045};
      sc.push_dir = {0.0, 1.0};
      sc.push_speed = 0.004;
      sc.stop_on_contact = true;
      sc.idle_in_contact = sim::kHorizon;
      sc.push_done = [](const SimState&, const SimState&) { return false; };
      sc.revert_dir = {0.0, 1.0};
      const double target = rng.uniform(0.03, 0.08);
      sc.revert_done = [target](const SimState& s0, const SimState& s) { return distance(s.cup, s0.cup) >= target; };
      break;
    }
  }
  return sc;
}

bool ever_touches(Task task, std::span<const SimState> states) {
  return std::any_of(states.begin(), states.end(), [task](const SimState& s) { return touches_task_object(task, s); });
}

}  // namespace

std::optional<Archetype> classify_failure(Task task, std::span<const SimState> states) {
  if (success(task, states)) return std::nullopt;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    if (success_at(task, states, t)) return Archetype::Revert;
  }
  return ever_touches(task, states) ? Archetype::Incomplete : Archetype::Wander;
}

bool archetype_supported(Task task, Archetype archetype) noexcept {
  switch (archetype) {
    case Archetype::None: return false;
    case Archetype::Wander: return true;
    // Faucet displacement only accumulates; a poke has no partial progress.
    case Archetype::Revert: return task != Task::TurnFaucet;
    case Archetype::Incomplete: return task != Task::PokeCup;
  }
  return false;
}

Trajectory gen_success_trajectory(Task task, std::uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const SimState s0 = initial_state(task, rng);
    const Script sc = make_script(task, Archetype::None, rng);
    Trajectory t = run_script(sc, s0, rng);
    if (success(task, t)) return t;
  }
  throw Error(ErrorCode::BadConfig, "scripted demonstration never succeeded for " + std::string(task_name(task)));
}

Trajectory gen_random_success_trajectory(Task task, std::uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt < 20 * kMaxAttempts; ++attempt) {
    const SimState s0 = initial_state(task, rng);
    Trajectory t = rollout(s0, random_actions(rng));
    if (success(task, t)) return t;
  }
  return gen_success_trajectory(task, mix_seed(seed, 1));
}

Trajectory gen_failure_trajectory(Task task, Archetype archetype, std::uint64_t seed) {
  if (!archetype_supported(task, archetype)) {
    throw Error(ErrorCode::ArchetypeUnsupported,
                std::string(archetype_name(archetype)) + " for " + std::string(task_name(task)));
  }
  Rng rng(seed);
  for (int attempt = 0; attempt < 20 * kMaxAttempts; ++attempt) {
    const SimState s0 = initial_state(task, rng);
    Trajectory t;
    if (archetype == Archetype::Wander) {
      t = rollout(s0, random_actions(rng));
    } else {
      t = run_script(make_script(task, archetype, rng), s0, rng);
    }
    if (classify_failure(task, t.states) == archetype) return t;
  }
  throw Error(ErrorCode::ArchetypeUnsupported,
              "could not realise " + std::string(archetype_name(archetype)) + " for " + std::string(task_name(task)));
}

Trajectory gen_random_failure_trajectory(Task task, std::uint64_t seed) {
  Rng rng(seed);
  for (;;) {
    const SimState s0 = initial_state(task, rng);
    Trajectory t = rollout(s0, random_actions(rng));
    if (!success(task, t)) return t;
  }
}

Dataset gen_dataset(const DataConfig& config) {
  if (config.human_per_task < 0 || config.robot_success_per_task < 0 || config.robot_failure_per_task < 0) {
    throw Error(ErrorCode::BadConfig, "clip counts must be non-negative");
  }
  if (config.robot_failure_per_task > 0 && !config.sources.random && !config.sources.near_success) {
    throw Error(ErrorCode::BadConfig, "failure clips requested with no failure source enabled");
  }
  if (config.noise < 0.0) throw Error(ErrorCode::BadConfig, "noise must be non-negative");
  Dataset ds;
  std::uint64_t index = 0;
  auto emit = [&](const Trajectory& t, Domain domain, Task task, bool ok, Archetype arch, std::uint64_t clip_seed) {
    Rng render_rng(mix_seed(clip_seed, 0x72));
    LabeledClip c;
    c.frames = render_clip(t.states, domain, config.shift, config.render, config.noise, render_rng);
    c.domain = domain;
    c.task = task;
    c.success = ok;
    c.archetype = arch;
    c.seed = clip_seed;
    ds.clips.push_back(std::move(c));
  };
  for (Task task : config.tasks) {
    for (int i = 0; i < config.human_per_task; ++i) {
      const std::uint64_t s = mix_seed(config.seed, index++);
      const Trajectory t = i % 2 == 0 ? gen_success_trajectory(task, s) : gen_random_success_trajectory(task, s);
      emit(t, Domain::Human, task, true, Archetype::None, s);
    }
    for (int i = 0; i < config.robot_success_per_task; ++i) {
      const std::uint64_t s = mix_seed(config.seed, index++);
      const Trajectory t = i % 2 == 0 ? gen_success_trajectory(task, s) : gen_random_success_trajectory(task, s);
      emit(t, Domain::Robot, task, true, Archetype::None, s);
    }
    int near_count = 0;
    for (int i = 0; i < config.robot_failure_per_task; ++i) {
      const std::uint64_t s = mix_seed(config.seed, index++);
      const bool use_random = config.sources.random && (!config.sources.near_success || i % 2 == 0);
      Trajectory t;
      if (use_random) {
        t = gen_random_failure_trajectory(task, s);
      } else {
        Archetype a = near_count++ % 2 == 0 ? Archetype::Revert : Archetype::Incomplete;
        if (!archetype_supported(task, a)) a = a == Archetype::Revert ? Archetype::Incomplete : Archetype::Revert;
        t = gen_failure_trajectory(task, a, s);
      }
      emit(t, Domain::Robot, task, false, *classify_failure(task, t.states), s);
    }
  }
  return ds;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::CorruptFile, why); }

}  // namespace

std::string serialize_dataset(const Dataset& dataset) {
  const Eigen::Index frames = dataset.clips.empty() ? kClipFrames : dataset.clips.front().frames.rows();
  const Eigen::Index width = dataset.clips.empty() ? sim::kFeatureWidth : dataset.clips.front().frames.cols();
  std::string out = "failprompt-dataset " + std::to_string(kDatasetFormatVersion) + " clips " +
                    std::to_string(dataset.clips.size()) + " frames " + std::to_string(frames) + " features " +
                    std::to_string(width) + "\n";
  for (const LabeledClip& c : dataset.clips) {
    if (c.frames.rows() != frames || c.frames.cols() != width) throw Error(ErrorCode::ShapeMismatch, "ragged clips");
    out += "clip ";
    out += domain_name(c.domain);
    out += ' ';
    out += task_name(c.task);
    out += c.success ? " 1 " : " 0 ";
    out += archetype_name(c.archetype);
    out += ' ' + std::to_string(c.seed);
    for (Eigen::Index r = 0; r < frames; ++r) {
      for (Eigen::Index col = 0; col < width; ++col) {
        out += ' ';
        append_double(out, c.frames(r, col));
      }
    }
    out += '\n';
  }
  out += "end\n";
  return out;
}

Dataset parse_dataset(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) corrupt("empty dataset file");
  std::istringstream head(line);
  std::string magic, k_clips, k_frames, k_features;
  int version = 0;
  std::size_t count = 0;
  int frames = 0, width = 0;
  if (!(head >> magic >> version) || magic != "failprompt-dataset") corrupt("missing dataset header");
  if (version != kDatasetFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "dataset version " + std::to_string(version));
  }
  if (!(head >> k_clips >> count >> k_frames >> frames >> k_features >> width) || k_clips != "clips" ||
      k_frames != "frames" || k_features != "features" || frames <= 0 || width <= 0) {
    corrupt("malformed dataset header");
  }
  Dataset ds;
  ds.clips.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) corrupt("truncated after " + std::to_string(i) + " clips");
    std::istringstream rec(line);
    std::string tag, domain, task, arch, value;
    int ok = 0;
    LabeledClip c;
    if (!(rec >> tag >> domain >> task >> ok >> arch >> c.seed) || tag != "clip") corrupt("bad clip record " + std::to_string(i));
    if (domain == "human") c.domain = Domain::Human;
    else if (domain == "robot") c.domain = Domain::Robot;
    else corrupt("bad domain '" + domain + "'");
    const auto t = parse_task(task);
    if (!t) corrupt("bad task '" + task + "'");
    c.task = *t;
    if (ok != 0 && ok != 1) corrupt("bad success flag");
    c.success = ok == 1;
    const auto a = parse_archetype(arch);
    if (!a) corrupt("bad archetype '" + arch + "'");
    c.archetype = *a;
    c.frames.resize(frames, width);
    for (int r = 0; r < frames; ++r) {
      for (int col = 0; col < width; ++col) {
        if (!(rec >> value)) corrupt("clip " + std::to_string(i) + " has too few values");
        double v = 0.0;
        const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size()) corrupt("bad number '" + value + "'");
        c.frames(r, col) = v;
      }
    }
    if (rec >> value) corrupt("clip " + std::to_string(i) + " has trailing values");
    ds.clips.push_back(std::move(c));
  }
  if (!std::getline(in, line) || line != "end") corrupt("missing end marker");
  while (std::getline(in, line))
    if (!line.empty()) corrupt("content after end marker");
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << serialize_dataset(dataset);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

}  // namespace failprompt
