#include "failprompt/error.hpp"
#include "failprompt/harness.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

namespace failprompt {

namespace {

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view want) {
  throw Error(ErrorCode::BadConfig,
              std::string(key) + " = '" + std::string(value) + "': expected " + std::string(want));
}

int to_int(std::string_view key, std::string_view v) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(key, v, "a non-negative integer");
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  if (!parse_double(v, out) || !std::isfinite(out)) bad(key, v, "a finite number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, v, "true or false");
}

std::vector<Task> to_tasks(std::string_view key, std::string_view v) {
  std::vector<Task> out;
  if (v.empty()) return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t end = std::min(v.find(',', start), v.size());
    const auto t = parse_task(v.substr(start, end - start));
    if (!t) bad(key, v, "a comma-separated list of task names");
    out.push_back(*t);
    start = end + 1;
  }
  return out;
}

std::string tasks_string(const std::vector<Task>& tasks) {
  std::string out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (i) out += ',';
    out += task_name(tasks[i]);
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
std::string num(T v) {
  if constexpr (std::is_floating_point_v<T>) return format_double(v);
  else return std::to_string(v);
}

#define FP_INT(name, member)                                                                    \
  Field {                                                                                       \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = to_int(name, v); },          \
        [](const ExperimentConfig& c) { return num(c.member); }                                 \
  }
#define FP_DOUBLE(name, member)                                                                 \
  Field {                                                                                       \
    name, [](ExperimentConfig& c, std::string_view v) { c.member = to_double(name, v); },       \
        [](const ExperimentConfig& c) { return num(c.member); }                                 \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"mode", [](ExperimentConfig& c, std::string_view v) { c.mode = parse_training_mode(v); },
       [](const ExperimentConfig& c) { return std::string(training_mode_name(c.mode)); }},
      FP_INT("K", clusters),
      FP_INT("prompt_length", prompt_length),
      FP_DOUBLE("tau", tau),
      FP_INT("batch_human", batch_human),
      FP_INT("batch_robot", batch_robot),
      FP_INT("batch_failure", batch_failure),
      FP_INT("epochs", epochs),
      FP_INT("steps_per_epoch", steps_per_epoch),
      FP_DOUBLE("lr_encoder", lr_encoder),
      FP_DOUBLE("lr_prompt", lr_prompt),
      FP_DOUBLE("grad_clip", grad_clip),
      {"exclude_self", [](ExperimentConfig& c, std::string_view v) { c.exclude_self = to_bool("exclude_self", v); },
       [](const ExperimentConfig& c) { return std::string(c.exclude_self ? "true" : "false"); }},
      FP_INT("kmeans_iters", kmeans_iters),
      FP_INT("embed_dim", embed_dim),
      FP_INT("hidden", hidden),
      {"seed", [](ExperimentConfig& c, std::string_view v) { c.seed = to_u64("seed", v); },
       [](const ExperimentConfig& c) { return num(c.seed); }},
      {"train_tasks", [](ExperimentConfig& c, std::string_view v) { c.train_tasks = to_tasks("train_tasks", v); },
       [](const ExperimentConfig& c) { return tasks_string(c.train_tasks); }},
      {"target_tasks", [](ExperimentConfig& c, std::string_view v) { c.target_tasks = to_tasks("target_tasks", v); },
       [](const ExperimentConfig& c) { return tasks_string(c.target_tasks); }},
      {"env_variant", [](ExperimentConfig& c, std::string_view v) { c.env_variant = parse_env_variant(v); },
       [](const ExperimentConfig& c) { return std::string(env_variant_name(c.env_variant)); }},
      FP_INT("data.human", data_human),
      FP_INT("data.robot_success", data_robot_success),
      FP_INT("data.robot_failure", data_robot_failure),
      {"data.sources", [](ExperimentConfig& c, std::string_view v) { c.data_sources = FailureSources::parse(v); },
       [](const ExperimentConfig& c) { return c.data_sources.to_string(); }},
      FP_DOUBLE("data.noise", data_noise),
      FP_INT("eval.success", eval_success),
      FP_INT("eval.failure", eval_failure),
      FP_INT("plan.G", plan_candidates),
      FP_INT("plan.H", plan_horizon),
      FP_INT("plan.trials", plan_trials),
      FP_INT("plan.seeds", plan_seeds),
      FP_INT("cem.iterations", cem.iterations),
      FP_INT("cem.population", cem.population),
      FP_DOUBLE("cem.elite_fraction", cem.elite_fraction),
      FP_DOUBLE("cem.init_std", cem.init_std),
      FP_INT("dynamics.episodes", dynamics_episodes),
      FP_INT("dynamics.epochs", dynamics_epochs),
  };
  return f;
}

#undef FP_INT
#undef FP_DOUBLE

}  // namespace

void ExperimentConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::BadConfig, what);
  };
  need(clusters >= 1, "K must be at least 1");
  need(prompt_length >= 1, "prompt_length must be at least 1");
  need(tau > 0.0, "tau must be positive");
  need(batch_human >= 0 && batch_robot >= 0 && batch_failure >= 0, "batch sizes must be non-negative");
  need(batch_human + batch_robot >= 2, "need at least two success samples per batch");
  need(epochs >= 0 && steps_per_epoch >= 0, "epochs and steps_per_epoch must be non-negative");
  need(lr_encoder >= 0.0 && lr_prompt >= 0.0, "learning rates must be non-negative");
  need(grad_clip > 0.0, "grad_clip must be positive");
  need(kmeans_iters >= 1, "kmeans_iters must be at least 1");
  need(embed_dim >= 7, "embed_dim must be at least 7");
  need(hidden >= 1, "hidden must be at least 1");
  need(!train_tasks.empty(), "train_tasks must not be empty");
  need(data_human >= 0 && data_robot_success >= 0 && data_robot_failure >= 0, "data counts must be non-negative");
  need(data_noise >= 0.0, "data.noise must be non-negative");
  need(eval_success >= 0 && eval_failure >= 0, "eval counts must be non-negative");
  need(plan_trials >= 0 && plan_seeds >= 0, "plan trials and seeds must be non-negative");
  need(dynamics_episodes >= 0 && dynamics_epochs >= 0, "dynamics settings must be non-negative");
  PlanConfig pc;
  pc.candidates = plan_candidates;
  pc.horizon = plan_horizon;
  pc.cem = cem;
  pc.validate();
}

std::uint64_t ExperimentConfig::data_seed() const { return mix_seed(seed, 0x64617461); }
std::uint64_t ExperimentConfig::eval_seed() const { return mix_seed(seed, 0x6576616c); }

DataConfig ExperimentConfig::data_config() const {
  DataConfig d;
  d.human_per_task = data_human;
  d.robot_success_per_task = data_robot_success;
  d.robot_failure_per_task = data_robot_failure;
  d.sources = data_sources;
  d.noise = data_noise;
  d.seed = data_seed();
  return d;
}

DataConfig ExperimentConfig::eval_data_config() const {
  DataConfig d;
  d.human_per_task = 0;
  d.robot_success_per_task = eval_success;
  d.robot_failure_per_task = eval_failure;
  d.sources = FailureSources{};
  d.noise = data_noise;
  d.render = RenderParams::for_variant(env_variant);
  d.seed = eval_seed();
  return d;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw Error(ErrorCode::BadConfig, "unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw Error(ErrorCode::BadConfig, "duplicate config key '" + key + "'");
    set_config_value(base, key, value);
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  return parse_config(read_text_file(path), std::move(base));
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t config_seed) {
  if (flag) return *flag;
  if (const char* env = std::getenv("REWARD_SEED"); env && *env) {
    return to_u64("REWARD_SEED", env);
  }
  return config_seed;
}

}  // namespace failprompt
