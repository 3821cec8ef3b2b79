#include "failprompt/tasks.hpp"

#include "failprompt/error.hpp"

#include <string>

namespace failprompt {

std::string_view task_name(Task t) noexcept {
  switch (t) {
    case Task::CloseDrawer: return "close_drawer";
    case Task::MoveCupAway: return "move_cup_away";
    case Task::TurnFaucet: return "turn_faucet";
    case Task::PushCupLeftToRight: return "push_cup_left_to_right";
    case Task::OpenDrawer: return "open_drawer";
    case Task::PushCupRightToLeft: return "push_cup_right_to_left";
    case Task::PokeCup: return "poke_cup";
  }
  return "unknown";
}

std::string_view task_expression(Task t) noexcept {
  switch (t) {
    case Task::CloseDrawer: return "closing drawer";
    case Task::MoveCupAway: return "moving cup away from the camera";
    case Task::TurnFaucet: return "moving the handle of the faucet";
    case Task::PushCupLeftToRight: return "pushing cup from left to right";
    case Task::OpenDrawer: return "opening drawer";
    case Task::PushCupRightToLeft: return "pushing cup from right to left";
    case Task::PokeCup: return "poking cup so lightly that it doesn't or almost doesn't move";
  }
  return "";
}

std::optional<Task> parse_task(std::string_view name) noexcept {
  for (Task t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

Task task_from_index(int index) {
  if (index < 0 || index >= kTaskCount) throw Error(ErrorCode::UnknownTask, "task index " + std::to_string(index));
  return static_cast<Task>(index);
}

}  // namespace failprompt
