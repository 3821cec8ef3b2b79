#include "failprompt/failprompt.h"

#include "failprompt/error.hpp"
#include "failprompt/gradcheck.hpp"
#include "failprompt/harness.hpp"
#include "failprompt/trajectory_io.hpp"

#include "json.hpp"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

struct fp_config {
  failprompt::ExperimentConfig value;
};
struct fp_dataset {
  failprompt::Dataset value;
};
struct fp_model {
  failprompt::ModelParams value;
};
struct fp_dynamics {
  failprompt::DynamicsModel value;
};

namespace {

using namespace failprompt;

thread_local std::string g_last_error;

struct BadArgument {
  std::string what;
};

template <typename F>
fp_status guard(F&& f) {
  try {
    f();
    g_last_error.clear();
    return FP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<fp_status>(static_cast<int>(e.code()));
  } catch (const BadArgument& e) {
    g_last_error = "InvalidArgument: " + e.what;
    return FP_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    g_last_error = std::string("Internal: ") + e.what();
    return FP_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return FP_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw BadArgument{what};
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<Task> task_list(const char* text) {
  const std::string_view v = text ? text : "all";
  if (v == "all") return {kAllTasks.begin(), kAllTasks.end()};
  if (v == "target") return {kTargetTasks.begin(), kTargetTasks.end()};
  if (v == "train") return {kDefaultTrainTasks.begin(), kDefaultTrainTasks.end()};
  std::vector<Task> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t end = std::min(v.find(',', start), v.size());
    const auto name = v.substr(start, end - start);
    const auto t = parse_task(name);
    if (!t) throw Error(ErrorCode::UnknownTask, "unknown task '" + std::string(name) + "'");
    out.push_back(*t);
    start = end + 1;
  }
  return out;
}

Task single_task(const char* text) {
  require(text, "task is required");
  const auto t = parse_task(text);
  if (!t) throw Error(ErrorCode::UnknownTask, std::string("unknown task '") + text + "'");
  return *t;
}

}  // namespace

extern "C" {

const char* fp_version(void) { return "1.0.0"; }

const char* fp_status_string(fp_status status) {
  if (status == FP_OK) return "Ok";
  if (status == FP_ERR_INVALID_ARGUMENT) return "InvalidArgument";
  if (status == FP_ERR_INTERNAL) return "Internal";
  const int code = static_cast<int>(status);
  if (code >= 1 && code <= static_cast<int>(ErrorCode::IoError)) return error_code_name(static_cast<ErrorCode>(code));
  return "UnknownStatus";
}

const char* fp_last_error(void) { return g_last_error.c_str(); }

void fp_string_free(char* s) { std::free(s); }

fp_status fp_config_new(fp_config** out) {
  return guard([&] {
    require(out, "out is null");
    *out = new fp_config{};
  });
}

fp_status fp_config_parse(const char* text, fp_config** out) {
  return guard([&] {
    require(text && out, "null argument");
    *out = new fp_config{parse_config(text)};
  });
}

fp_status fp_config_load(const char* path, fp_config** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new fp_config{load_config(path)};
  });
}

fp_status fp_config_set(fp_config* config, const char* key, const char* value) {
  return guard([&] {
    require(config && key && value, "null argument");
    ExperimentConfig next = config->value;
    set_config_value(next, key, value);
    next.validate();
    config->value = next;
  });
}

fp_status fp_config_format(const fp_config* config, char** out) {
  return guard([&] {
    require(config && out, "null argument");
    *out = dup(format_config(config->value));
  });
}

fp_status fp_config_resolve_seed(fp_config* config, int has_flag, uint64_t flag_seed, uint64_t* resolved) {
  return guard([&] {
    require(config, "config is null");
    config->value.seed =
        resolve_seed(has_flag ? std::optional<std::uint64_t>(flag_seed) : std::nullopt, config->value.seed);
    if (resolved) *resolved = config->value.seed;
  });
}

void fp_config_free(fp_config* config) { delete config; }

fp_status fp_dataset_generate(const char* tasks, int human_per_task, int robot_success_per_task,
                              int robot_failure_per_task, const char* sources, double noise, uint64_t seed,
                              fp_dataset** out) {
  return guard([&] {
    require(out, "out is null");
    DataConfig dc;
    dc.tasks = task_list(tasks);
    dc.human_per_task = human_per_task;
    dc.robot_success_per_task = robot_success_per_task;
    dc.robot_failure_per_task = robot_failure_per_task;
    if (sources) dc.sources = FailureSources::parse(sources);
    dc.noise = noise;
    dc.seed = seed;
    *out = new fp_dataset{gen_dataset(dc)};
  });
}

fp_status fp_dataset_from_config(const fp_config* config, int eval, fp_dataset** out) {
  return guard([&] {
    require(config && out, "null argument");
    *out = new fp_dataset{gen_dataset(eval ? config->value.eval_data_config() : config->value.data_config())};
  });
}

fp_status fp_dataset_load(const char* path, fp_dataset** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new fp_dataset{load_dataset(path)};
  });
}

fp_status fp_dataset_save(const fp_dataset* dataset, const char* path) {
  return guard([&] {
    require(dataset && path, "null argument");
    save_dataset(dataset->value, path);
  });
}

size_t fp_dataset_size(const fp_dataset* dataset) { return dataset ? dataset->value.clips.size() : 0; }

void fp_dataset_free(fp_dataset* dataset) { delete dataset; }

fp_status fp_train(const fp_config* config, const fp_dataset* dataset, fp_model** out, char** metrics_log) {
  return guard([&] {
    require(config && dataset && out, "null argument");
    TrainResult r = train(config->value, dataset->value);
    if (metrics_log) *metrics_log = dup(r.metrics_log());
    *out = new fp_model{std::move(r.params)};
  });
}

fp_status fp_model_load(const char* path, fp_model** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new fp_model{ModelParams::from_checkpoint(Checkpoint::load(path))};
  });
}

fp_status fp_model_save(const fp_model* model, const char* path) {
  return guard([&] {
    require(model && path, "null argument");
    model->value.to_checkpoint().save(path);
  });
}

void fp_model_free(fp_model* model) { delete model; }

fp_status fp_eval_separation(const fp_model* model, const fp_dataset* eval_set, const char* tasks, char** json) {
  return guard([&] {
    require(model && eval_set && json, "null argument");
    const SeparationReport rep = evaluate_separation(model->value, eval_set->value, task_list(tasks));
    nlohmann::ordered_json j;
    j["auc"] = rep.auc;
    j["pooled_auc"] = rep.pooled_auc;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [t, a] : rep.task_auc) per[std::string(task_name(t))] = a;
    j["task_auc"] = per;
    *json = dup(j.dump());
  });
}

fp_status fp_dynamics_ground_truth(fp_dynamics** out) {
  return guard([&] {
    require(out, "out is null");
    *out = new fp_dynamics{DynamicsModel::ground_truth()};
  });
}

fp_status fp_dynamics_train(int episodes, int epochs, uint64_t seed, fp_dynamics** out, char** report) {
  return guard([&] {
    require(out, "out is null");
    require(episodes > 0 && epochs > 0, "episodes and epochs must be positive");
    const auto data = random_episodes(episodes, seed);
    DynamicsTrainConfig tc;
    tc.epochs = epochs;
    tc.seed = mix_seed(seed, 1);
    DynamicsTrainReport rep;
    DynamicsModel model = train_dynamics(data, tc, &rep);
    if (report) {
      const auto held = random_episodes(200, mix_seed(seed, 2));
      nlohmann::ordered_json j;
      j["transitions"] = rep.transitions;
      j["final_loss"] = rep.loss_history.empty() ? 0.0 : rep.loss_history.back();
      j["heldout_open_loop_error"] = dynamics_error(model, held);
      j["heldout_one_chunk_error"] = one_chunk_error(model, held);
      *report = dup(j.dump());
    }
    *out = new fp_dynamics{std::move(model)};
  });
}

fp_status fp_dynamics_load(const char* path, fp_dynamics** out) {
  return guard([&] {
    require(path && out, "null argument");
    *out = new fp_dynamics{DynamicsModel::from_checkpoint(Checkpoint::load(path))};
  });
}

fp_status fp_dynamics_save(const fp_dynamics* dynamics, const char* path) {
  return guard([&] {
    require(dynamics && path, "null argument");
    dynamics->value.to_checkpoint().save(path);
  });
}

void fp_dynamics_free(fp_dynamics* dynamics) { delete dynamics; }

void fp_plan_options_default(fp_plan_options* options) {
  if (!options) return;
  const PlanningOptions d;
  options->reward = "learned";
  options->candidates = d.plan.candidates;
  options->trials = d.trials;
  options->seeds = d.seeds;
  options->seed = d.seed;
  options->refine_with_cem = 0;
  options->env_variant = nullptr;
}

fp_status fp_eval_planning(const fp_model* model, const fp_dynamics* dynamics, const char* tasks,
                           const fp_plan_options* options, char** json_lines) {
  return guard([&] {
    require(dynamics && options && json_lines, "null argument");
    PlanningOptions po;
    po.reward = parse_reward_kind(options->reward ? options->reward : "learned");
    po.plan.candidates = options->candidates;
    po.trials = options->trials;
    po.seeds = options->seeds;
    po.seed = options->seed;
    po.refine_with_cem = options->refine_with_cem != 0;
    if (options->env_variant) po.env_variant = parse_env_variant(options->env_variant);
    const PlanningReport rep = evaluate_planning(model ? &model->value : nullptr, dynamics->value, task_list(tasks), po);
    std::string out;
    for (const auto& t : rep.tasks) {
      nlohmann::ordered_json j;
      j["task"] = std::string(task_name(t.task));
      j["reward"] = std::string(reward_kind_name(po.reward));
      j["success_rate"] = t.mean;
      j["per_seed"] = t.per_seed;
      j["mean_score"] = t.mean_score;
      if (po.refine_with_cem) {
        j["cem_success_rate"] = t.refined_mean;
        j["cem_per_seed"] = t.refined_per_seed;
        j["cem_mean_score"] = t.refined_mean_score;
        j["cem_never_decreased"] = t.cem_never_decreased;
      }
      out += j.dump() + "\n";
    }
    *json_lines = dup(out);
  });
}

fp_status fp_plan_episode(const fp_model* model, const fp_dynamics* dynamics, const char* task, const char* reward,
                          int candidates, uint64_t seed, char** trajectory, double* score, int* success_out) {
  return guard([&] {
    require(dynamics, "dynamics is null");
    const Task t = single_task(task);
    const RewardKind kind = parse_reward_kind(reward ? reward : "learned");
    require(kind != RewardKind::Random, "plan needs a learned or oracle reward");
    if (kind == RewardKind::Learned && !model) throw Error(ErrorCode::BadConfig, "learned reward needs a model");
    const RewardFn fn = kind == RewardKind::Learned
                            ? RewardFn::learned(model->value.encoder, model->value.texts.text_embed(t))
                            : RewardFn::oracle(t);
    Rng rng(seed);
    const SimState s0 = initial_state(t, rng);
    PlanConfig pc;
    pc.candidates = candidates;
    pc.seed = mix_seed(seed, 1);
    const PlanResult plan = vmpc_plan(fn, dynamics->value, s0, pc);
    TrajectoryDump dump;
    dump.task = t;
    dump.trajectory = rollout(s0, plan.actions);
    dump.score = plan.score;
    dump.success = success(t, dump.trajectory);
    if (trajectory) *trajectory = dup(serialize_trajectory(dump));
    if (score) *score = plan.score;
    if (success_out) *success_out = dump.success ? 1 : 0;
  });
}

fp_status fp_sim_rollout(const char* task, uint64_t seed, int horizon, const char* actions_dump, char** trajectory) {
  return guard([&] {
    require(trajectory, "trajectory is null");
    const Task t = single_task(task);
    Rng rng(seed);
    const SimState s0 = initial_state(t, rng);
    std::vector<Action> actions;
    if (actions_dump) {
      actions = parse_trajectory(actions_dump).trajectory.actions;
    } else {
      require(horizon > 0, "horizon must be positive");
      actions = random_actions(rng, horizon);
    }
    TrajectoryDump dump;
    dump.task = t;
    dump.trajectory = rollout(s0, actions);
    dump.score = std::nan("");
    dump.success = success(t, dump.trajectory);
    *trajectory = dup(serialize_trajectory(dump));
  });
}

fp_status fp_ablate(const fp_config* base, const uint64_t* seeds, size_t seed_count, const char* cells,
                    int with_planning, char** csv) {
  return guard([&] {
    require(base && csv && (seeds || seed_count == 0), "null argument");
    std::vector<AblationCell> grid;
    if (!cells) {
      grid = default_ablation_grid();
    } else {
      std::istringstream in(cells);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream rec(line);
        std::string mode, k, source;
        if (!std::getline(rec, mode, ',') || !std::getline(rec, k, ',') || !std::getline(rec, source))
          throw Error(ErrorCode::BadConfig, "ablation cell '" + line + "' is not mode,K,source");
        AblationCell cell;
        cell.mode = parse_training_mode(mode);
        try {
          cell.clusters = std::stoi(k);
        } catch (const std::exception&) {
          throw Error(ErrorCode::BadConfig, "bad K '" + k + "'");
        }
        cell.sources = FailureSources::parse(source);
        grid.push_back(cell);
      }
    }
    const std::vector<std::uint64_t> s(seeds, seeds + seed_count);
    *csv = dup(ablation_csv(run_ablation(grid, base->value, s, with_planning != 0)));
  });
}

fp_status fp_grad_check(int batches, double eps, uint64_t first_seed, char** json_lines) {
  return guard([&] {
    require(json_lines, "null argument");
    require(eps > 0.0, "eps must be positive");
    std::string out;
    for (const auto& e : run_grad_suite(batches, eps, first_seed)) {
      nlohmann::ordered_json j;
      j["function"] = e.name;
      j["max_error"] = e.max_error;
      out += j.dump() + "\n";
    }
    *json_lines = dup(out);
  });
}

}  // extern "C"
