#include "failprompt/trajectory_io.hpp"

#include "failprompt/checkpoint.hpp"
#include "failprompt/error.hpp"

#include <cmath>
#include <sstream>

namespace failprompt {

namespace {

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorCode::CorruptFile, why); }

std::string_view grip_name(Grip g) {
  switch (g) {
    case Grip::Open: return "open";
    case Grip::Close: return "close";
    case Grip::Hold: return "hold";
  }
  return "hold";
}

Grip parse_grip(const std::string& s) {
  if (s == "open") return Grip::Open;
  if (s == "close") return Grip::Close;
  if (s == "hold") return Grip::Hold;
  corrupt("bad grip '" + s + "'");
}

double number(std::istringstream& in, const char* what) {
  std::string tok;
  double v = 0.0;
  if (!(in >> tok)) corrupt(std::string("missing ") + what);
  if (tok == "nan") return std::nan("");
  if (!parse_double(tok, v)) corrupt("bad number '" + tok + "'");
  return v;
}

void expect_index(std::istringstream& in, const std::string& tag, std::size_t t) {
  std::string got;
  std::size_t idx = 0;
  if (!(in >> got >> idx) || got != tag || idx != t) corrupt("expected " + tag + " " + std::to_string(t));
}

void expect_done(std::istringstream& in) {
  std::string extra;
  if (in >> extra) corrupt("trailing value '" + extra + "'");
}

}  // namespace

bool TrajectoryDump::operator==(const TrajectoryDump& o) const {
  if (task != o.task || success != o.success || trajectory.states != o.trajectory.states) return false;
  if (trajectory.actions.size() != o.trajectory.actions.size()) return false;
  for (std::size_t i = 0; i < trajectory.actions.size(); ++i) {
    const Action &a = trajectory.actions[i], &b = o.trajectory.actions[i];
    if (!(a.velocity() == b.velocity()) || a.grip() != b.grip()) return false;
  }
  return std::isnan(score) ? std::isnan(o.score) : score == o.score;
}

std::string serialize_trajectory(const TrajectoryDump& dump) {
  const Trajectory& tr = dump.trajectory;
  if (tr.states.size() != tr.actions.size() + 1) throw Error(ErrorCode::SizeMismatch, "need T+1 states for T actions");
  auto num = [](double v) { return std::isnan(v) ? std::string("nan") : format_double(v); };
  std::string out = "failprompt-trajectory " + std::to_string(kTrajectoryFormatVersion) + " task " +
                    std::string(task_name(dump.task)) + " steps " + std::to_string(tr.actions.size()) + " score " +
                    num(dump.score) + " success " + (dump.success ? "1" : "0") + "\n";
  for (std::size_t t = 0; t < tr.states.size(); ++t) {
    const SimState& s = tr.states[t];
    out += "state " + std::to_string(t);
    for (double v : {s.gripper.x, s.gripper.y, s.grip_closed ? 1.0 : 0.0, s.drawer_ext, s.faucet_angle, s.cup.x, s.cup.y,
                     s.camera_offset.x, s.camera_offset.y})
      out += ' ' + format_double(v);
    out += '\n';
  }
  for (std::size_t t = 0; t < tr.actions.size(); ++t) {
    const Action& a = tr.actions[t];
    out += "action " + std::to_string(t) + ' ' + format_double(a.velocity().x) + ' ' + format_double(a.velocity().y) +
           ' ' + std::string(grip_name(a.grip())) + '\n';
  }
  out += "end\n";
  return out;
}

TrajectoryDump parse_trajectory(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) corrupt("empty trajectory file");
  std::istringstream head(line);
  std::string magic, k_task, task, k_steps, k_score, k_success;
  int version = 0, ok = -1;
  std::size_t steps = 0;
  if (!(head >> magic >> version) || magic != "failprompt-trajectory") corrupt("missing trajectory header");
  if (version != kTrajectoryFormatVersion) throw Error(ErrorCode::VersionMismatch, "trajectory version " + std::to_string(version));
  if (!(head >> k_task >> task >> k_steps >> steps >> k_score) || k_task != "task" || k_steps != "steps" ||
      k_score != "score")
    corrupt("malformed trajectory header");
  TrajectoryDump dump;
  const auto parsed = parse_task(task);
  if (!parsed) corrupt("bad task '" + task + "'");
  dump.task = *parsed;
  dump.score = number(head, "score");
  if (!(head >> k_success >> ok) || k_success != "success" || (ok != 0 && ok != 1)) corrupt("malformed trajectory header");
  dump.success = ok == 1;
  expect_done(head);

  for (std::size_t t = 0; t <= steps; ++t) {
    if (!std::getline(in, line)) corrupt("truncated at state " + std::to_string(t));
    std::istringstream rec(line);
    expect_index(rec, "state", t);
    SimState s;
    s.gripper.x = number(rec, "gripper x");
    s.gripper.y = number(rec, "gripper y");
    const double grip = number(rec, "grip");
    if (grip != 0.0 && grip != 1.0) corrupt("bad grip flag");
    s.grip_closed = grip == 1.0;
    s.drawer_ext = number(rec, "drawer");
    s.faucet_angle = number(rec, "faucet");
    s.cup.x = number(rec, "cup x");
    s.cup.y = number(rec, "cup y");
    s.camera_offset.x = number(rec, "camera x");
    s.camera_offset.y = number(rec, "camera y");
    expect_done(rec);
    dump.trajectory.states.push_back(s);
  }
  for (std::size_t t = 0; t < steps; ++t) {
    if (!std::getline(in, line)) corrupt("truncated at action " + std::to_string(t));
    std::istringstream rec(line);
    expect_index(rec, "action", t);
    const double vx = number(rec, "vx");
    const double vy = number(rec, "vy");
    std::string grip;
    if (!(rec >> grip)) corrupt("missing grip");
    expect_done(rec);
    dump.trajectory.actions.emplace_back(vx, vy, parse_grip(grip));
  }
  if (!std::getline(in, line) || line != "end") corrupt("missing end marker");
  while (std::getline(in, line))
    if (!line.empty()) corrupt("content after end marker");
  return dump;
}

void save_trajectory(const TrajectoryDump& dump, const std::string& path) {
  write_text_file(path, serialize_trajectory(dump));
}

TrajectoryDump load_trajectory(const std::string& path) { return parse_trajectory(read_text_file(path)); }

}  // namespace failprompt
