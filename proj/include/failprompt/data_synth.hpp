#pragma once

#include "failprompt/encoders.hpp"
#include "failprompt/simworld.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace failprompt {

enum class Archetype { None, Wander, Revert, Incomplete };
std::string_view archetype_name(Archetype a) noexcept;
std::optional<Archetype> parse_archetype(std::string_view name) noexcept;

enum class FailureSource { Random, NearSuccess };

struct FailureSources {
  bool random = true;
  bool near_success = true;

  std::string to_string() const;  // "random", "near_success" or "both"
  /// Accepts random | near_success | both (also a comma list). Throws BadConfig.
  static FailureSources parse(std::string_view text);
};

struct LabeledClip {
  Clip frames;  // L x F
  Domain domain = Domain::Robot;
  Task task = Task::CloseDrawer;
  bool success = true;
  Archetype archetype = Archetype::None;
  std::uint64_t seed = 0;

  bool operator==(const LabeledClip&) const = default;
};

struct Dataset {
  std::vector<LabeledClip> clips;

  std::size_t count(Domain domain, Task task, bool success) const;
  bool operator==(const Dataset&) const = default;
};

struct DataConfig {
  std::vector<Task> tasks{kAllTasks.begin(), kAllTasks.end()};
  int human_per_task = 60;
  int robot_success_per_task = 20;
  int robot_failure_per_task = 20;
  FailureSources sources;
  double noise = 0.05;  // Gaussian feature noise on human clips
  DomainShift shift = DomainShift::standard();
  RenderParams render;
  std::uint64_t seed = 1;
};

/// Frames sampled from a 60-step trajectory at uniform indices 0, 20, 40, 60.
inline constexpr int kClipFrames = 4;
std::vector<std::size_t> clip_frame_indices(std::size_t state_count, int frames = kClipFrames);

/// Renders the sampled frames of a state sequence. Human clips get a random
/// viewpoint offset (shift.viewpoint_std) and Gaussian noise of stddev `noise`.
Clip render_clip(std::span<const SimState> states, Domain domain, const DomainShift& shift,
                 const RenderParams& render, double noise, Rng& rng);

/// Scripted demonstration with uniform [-0.03, 0.03] velocity noise, kept
/// only if it satisfies the task predicate.
Trajectory gen_success_trajectory(Task task, std::uint64_t seed);
/// Random shooting filtered by the task predicate.
Trajectory gen_random_success_trajectory(Task task, std::uint64_t seed);

/// Which archetype a failed trajectory exhibits (nullopt if it succeeds).
std::optional<Archetype> classify_failure(Task task, std::span<const SimState> states);
bool archetype_supported(Task task, Archetype archetype) noexcept;

/// Throws ArchetypeUnsupported.
Trajectory gen_failure_trajectory(Task task, Archetype archetype, std::uint64_t seed);
/// A random-shooting rollout that fails the predicate (any archetype).
Trajectory gen_random_failure_trajectory(Task task, std::uint64_t seed);

/// Throws BadConfig.
Dataset gen_dataset(const DataConfig& config);

inline constexpr int kDatasetFormatVersion = 1;
/// Throws IoError.
void save_dataset(const Dataset& dataset, const std::string& path);
/// Throws IoError, CorruptFile, VersionMismatch.
Dataset load_dataset(const std::string& path);

std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view text);

}  // namespace failprompt
