#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace failprompt {

/// The seven tabletop tasks. The first four are the evaluation targets.
enum class Task : int {
  CloseDrawer = 0,
  MoveCupAway = 1,
  TurnFaucet = 2,
  PushCupLeftToRight = 3,
  OpenDrawer = 4,
  PushCupRightToLeft = 5,
  PokeCup = 6,
};

inline constexpr int kTaskCount = 7;

inline constexpr std::array<Task, kTaskCount> kAllTasks = {
    Task::CloseDrawer, Task::MoveCupAway,        Task::TurnFaucet, Task::PushCupLeftToRight,
    Task::OpenDrawer,  Task::PushCupRightToLeft, Task::PokeCup};

inline constexpr std::array<Task, 4> kTargetTasks = {Task::CloseDrawer, Task::MoveCupAway,
                                                     Task::TurnFaucet, Task::PushCupLeftToRight};

inline constexpr std::array<Task, 3> kDefaultTrainTasks = {Task::OpenDrawer, Task::PushCupRightToLeft,
                                                           Task::PokeCup};

constexpr int task_index(Task t) noexcept { return static_cast<int>(t); }

std::string_view task_name(Task t) noexcept;
std::string_view task_expression(Task t) noexcept;
std::optional<Task> parse_task(std::string_view name) noexcept;
/// Throws UnknownTask.
Task task_from_index(int index);

}  // namespace failprompt
