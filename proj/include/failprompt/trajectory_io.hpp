#pragma once

#include "failprompt/simworld.hpp"

#include <string>
#include <string_view>

namespace failprompt {

inline constexpr int kTrajectoryFormatVersion = 1;

/// A rollout plus what produced it. Text layout:
///   failprompt-trajectory <version> task <name> steps <T> score <v|nan> success <0|1>
///   state <t> gx gy grip drawer faucet cup_x cup_y cam_x cam_y    (t = 0..T)
///   action <t> vx vy open|close|hold                             (t = 0..T-1)
///   end
struct TrajectoryDump {
  Task task = Task::CloseDrawer;
  Trajectory trajectory;
  double score = 0.0;  // NaN when nothing scored the rollout
  bool success = false;

  bool operator==(const TrajectoryDump&) const;
};

std::string serialize_trajectory(const TrajectoryDump& dump);
/// Throws CorruptFile, VersionMismatch.
TrajectoryDump parse_trajectory(std::string_view text);
/// Throws IoError.
void save_trajectory(const TrajectoryDump& dump, const std::string& path);
TrajectoryDump load_trajectory(const std::string& path);

}  // namespace failprompt
