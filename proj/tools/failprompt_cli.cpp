#include "failprompt/failprompt.h"

#include "CLI11.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

struct CliError : std::runtime_error {
  int code;
  CliError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

void check(fp_status s) {
  if (s == FP_OK) return;
  const std::string msg = fp_last_error();
  throw CliError(static_cast<int>(s), msg.empty() ? fp_status_string(s) : msg);
}

// Owning wrappers around the C handles.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Config = Handle<fp_config, fp_config_free>;
using Dataset = Handle<fp_dataset, fp_dataset_free>;
using Model = Handle<fp_model, fp_model_free>;
using Dynamics = Handle<fp_dynamics, fp_dynamics_free>;

struct Text {
  char* p = nullptr;
  ~Text() { fp_string_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? p : ""; }
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError(FP_ERR_IO, "cannot write " + path);
  out << text;
  if (!out) throw CliError(FP_ERR_IO, "write failed for " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(FP_ERR_IO, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct ConfigArgs {
  std::string path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--config", path, "key = value config file");
    app->add_option("--set", overrides, "override one config key (key=value), repeatable");
    app->add_option("--seed", seed, "seed (beats REWARD_SEED and the config)");
  }

  void load(Config& c) const {
    if (path.empty()) check(fp_config_new(c.out()));
    else check(fp_config_load(path.c_str(), c.out()));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CliError(FP_ERR_BAD_CONFIG, "--set expects key=value, got '" + kv + "'");
      auto trim = [](std::string s) {
        s.erase(0, s.find_first_not_of(" \t"));
        s.erase(s.find_last_not_of(" \t") + 1);
        return s;
      };
      check(fp_config_set(c.get(), trim(kv.substr(0, eq)).c_str(), trim(kv.substr(eq + 1)).c_str()));
    }
    check(fp_config_resolve_seed(c.get(), seed.has_value(), seed.value_or(0), nullptr));
  }
};

void load_dynamics(const std::string& kind, const std::string& path, std::uint64_t seed, Dynamics& d) {
  if (kind == "gt") {
    check(fp_dynamics_ground_truth(d.out()));
  } else if (!path.empty()) {
    check(fp_dynamics_load(path.c_str(), d.out()));
  } else {
    check(fp_dynamics_train(2000, 300, seed, d.out(), nullptr));
  }
}

std::uint64_t resolved_seed(std::optional<std::uint64_t> flag) {
  Config c;
  check(fp_config_new(c.out()));
  std::uint64_t seed = 0;
  check(fp_config_resolve_seed(c.get(), flag.has_value(), flag.value_or(0), &seed));
  return seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"failprompt: failure-aware video-language reward learning on a toy tabletop world"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fp_version());

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a labeled clip dataset");
  std::string g_tasks = "all", g_sources = "both", g_out;
  int g_human = 60, g_success = 20, g_failure = 20;
  double g_noise = 0.05;
  std::optional<std::uint64_t> g_seed;
  gen->add_option("--tasks", g_tasks, "comma list of tasks, or all / train / target");
  gen->add_option("--human-per-task", g_human);
  gen->add_option("--robot-success-per-task", g_success);
  gen->add_option("--robot-failure-per-task", g_failure);
  gen->add_option("--failure-sources", g_sources, "random | near_success | both");
  gen->add_option("--noise", g_noise, "Gaussian feature noise on human clips");
  gen->add_option("--seed", g_seed);
  gen->add_option("--out", g_out)->required();

  // train
  auto* tr = app.add_subcommand("train", "train the video and prompt encoders");
  ConfigArgs t_cfg;
  std::string t_data, t_out, t_metrics;
  t_cfg.add(tr);
  tr->add_option("--data", t_data, "dataset file (generated from the config when absent)");
  tr->add_option("--out", t_out, "parameter checkpoint")->required();
  tr->add_option("--metrics", t_metrics, "metrics log (JSON lines); stdout when absent");

  // eval-sep
  auto* es = app.add_subcommand("eval-sep", "success/failure reward separation (ROC AUC)");
  ConfigArgs e_cfg;
  std::string e_model, e_data, e_tasks = "target", e_out;
  e_cfg.add(es);
  es->add_option("--model", e_model)->required();
  es->add_option("--data", e_data, "evaluation dataset (generated from the config when absent)");
  es->add_option("--tasks", e_tasks, "comma list, or all / train / target");
  es->add_option("--out", e_out);

  // eval-plan
  auto* ep = app.add_subcommand("eval-plan", "planning success rates");
  std::string p_model, p_reward = "learned", p_dyn = "gt", p_dyn_model, p_tasks = "target", p_env, p_out;
  int p_trials = 50, p_seeds = 3, p_g = 300;
  bool p_cem = false;
  std::optional<std::uint64_t> p_seed;
  ep->add_option("--model", p_model, "parameter checkpoint (learned reward)");
  ep->add_option("--reward", p_reward)->check(CLI::IsMember({"learned", "oracle", "random"}));
  ep->add_option("--dynamics", p_dyn)->check(CLI::IsMember({"gt", "learned"}));
  ep->add_option("--dynamics-model", p_dyn_model, "learned dynamics checkpoint (trained on the fly when absent)");
  ep->add_option("--tasks", p_tasks);
  ep->add_option("--trials", p_trials);
  ep->add_option("--seeds", p_seeds);
  ep->add_option("--G", p_g, "candidate action sequences");
  ep->add_option("--seed", p_seed);
  ep->add_option("--env", p_env, "train | shifted_color | shifted_view | shifted_arrangement");
  ep->add_flag("--cem", p_cem, "also report CEM-refined plans");
  ep->add_option("--out", p_out);

  // ablate
  auto* ab = app.add_subcommand("ablate", "run the ablation grid and write the CSV report");
  ConfigArgs a_cfg;
  std::vector<std::uint64_t> a_seeds{1, 2, 3};
  std::string a_cells, a_out;
  bool a_plan = false;
  a_cfg.add(ab);
  ab->add_option("--seeds", a_seeds, "seeds of the grid")->delimiter(',');
  ab->add_option("--cells", a_cells, "file of mode,K,source lines (default grid when absent)");
  ab->add_flag("--plan", a_plan, "also measure planning success");
  ab->add_option("--out", a_out);

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient checks");
  int c_batches = 20;
  double c_eps = 1e-5, c_tol = 1e-4;
  std::uint64_t c_seed = 1;
  gc->add_option("--batches", c_batches);
  gc->add_option("--eps", c_eps);
  gc->add_option("--tol", c_tol, "exit with status 1 above this error");
  gc->add_option("--seed", c_seed, "first batch seed");

  // sim-rollout
  auto* sr = app.add_subcommand("sim-rollout", "roll out random or replayed actions in the simulator");
  std::string r_task, r_actions, r_out;
  int r_horizon = 60;
  std::optional<std::uint64_t> r_seed;
  sr->add_option("--task", r_task)->required();
  sr->add_option("--seed", r_seed);
  sr->add_option("--horizon", r_horizon);
  sr->add_option("--actions", r_actions, "trajectory dump whose actions are replayed");
  sr->add_option("--out", r_out);

  // plan
  auto* pl = app.add_subcommand("plan", "plan and execute one episode");
  std::string l_task, l_reward = "learned", l_dyn = "gt", l_model, l_dyn_model, l_out;
  int l_g = 300;
  std::optional<std::uint64_t> l_seed;
  pl->add_option("--task", l_task)->required();
  pl->add_option("--reward", l_reward)->check(CLI::IsMember({"learned", "oracle"}));
  pl->add_option("--dynamics", l_dyn)->check(CLI::IsMember({"gt", "learned"}));
  pl->add_option("--model", l_model, "parameter checkpoint (learned reward)");
  pl->add_option("--dynamics-model", l_dyn_model);
  pl->add_option("--G", l_g);
  pl->add_option("--seed", l_seed);
  pl->add_option("--out", l_out);

  // train-dynamics
  auto* td = app.add_subcommand("train-dynamics", "fit the chunked dynamics model");
  int d_episodes = 2000, d_epochs = 300;
  std::optional<std::uint64_t> d_seed;
  std::string d_out;
  td->add_option("--episodes", d_episodes);
  td->add_option("--epochs", d_epochs);
  td->add_option("--seed", d_seed);
  td->add_option("--out", d_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      Dataset ds;
      check(fp_dataset_generate(g_tasks.c_str(), g_human, g_success, g_failure, g_sources.c_str(), g_noise,
                                resolved_seed(g_seed), ds.out()));
      check(fp_dataset_save(ds.get(), g_out.c_str()));
      std::cerr << "wrote " << fp_dataset_size(ds.get()) << " clips to " << g_out << "\n";
    } else if (*tr) {
      Config cfg;
      t_cfg.load(cfg);
      Dataset ds;
      if (t_data.empty()) check(fp_dataset_from_config(cfg.get(), 0, ds.out()));
      else check(fp_dataset_load(t_data.c_str(), ds.out()));
      Model model;
      Text log;
      check(fp_train(cfg.get(), ds.get(), model.out(), log.out()));
      check(fp_model_save(model.get(), t_out.c_str()));
      write_output(t_metrics, log.str());
    } else if (*es) {
      Config cfg;
      e_cfg.load(cfg);
      Model model;
      check(fp_model_load(e_model.c_str(), model.out()));
      Dataset ds;
      if (e_data.empty()) check(fp_dataset_from_config(cfg.get(), 1, ds.out()));
      else check(fp_dataset_load(e_data.c_str(), ds.out()));
      Text json;
      check(fp_eval_separation(model.get(), ds.get(), e_tasks.c_str(), json.out()));
      write_output(e_out, json.str() + "\n");
    } else if (*ep) {
      const std::uint64_t seed = resolved_seed(p_seed);
      Model model;
      if (!p_model.empty()) check(fp_model_load(p_model.c_str(), model.out()));
      Dynamics dyn;
      load_dynamics(p_dyn, p_dyn_model, seed, dyn);
      fp_plan_options po;
      fp_plan_options_default(&po);
      po.reward = p_reward.c_str();
      po.candidates = p_g;
      po.trials = p_trials;
      po.seeds = p_seeds;
      po.seed = seed;
      po.refine_with_cem = p_cem ? 1 : 0;
      po.env_variant = p_env.empty() ? nullptr : p_env.c_str();
      Text lines;
      check(fp_eval_planning(model.get(), dyn.get(), p_tasks.c_str(), &po, lines.out()));
      write_output(p_out, lines.str());
    } else if (*ab) {
      Config cfg;
      a_cfg.load(cfg);
      const std::string cells = a_cells.empty() ? std::string() : read_file(a_cells);
      Text csv;
      check(fp_ablate(cfg.get(), a_seeds.data(), a_seeds.size(), a_cells.empty() ? nullptr : cells.c_str(),
                      a_plan ? 1 : 0, csv.out()));
      write_output(a_out, csv.str());
    } else if (*gc) {
      Text lines;
      check(fp_grad_check(c_batches, c_eps, c_seed, lines.out()));
      std::cout << lines.str();
      std::istringstream in(lines.str());
      std::string line;
      bool ok = true;
      while (std::getline(in, line)) {
        const auto pos = line.find("\"max_error\":");
        if (pos != std::string::npos && std::stod(line.substr(pos + 12)) >= c_tol) ok = false;
      }
      return ok ? 0 : 1;
    } else if (*sr) {
      const std::string actions = r_actions.empty() ? std::string() : read_file(r_actions);
      Text dump;
      check(fp_sim_rollout(r_task.c_str(), resolved_seed(r_seed), r_horizon,
                           r_actions.empty() ? nullptr : actions.c_str(), dump.out()));
      write_output(r_out, dump.str());
    } else if (*pl) {
      const std::uint64_t seed = resolved_seed(l_seed);
      Model model;
      if (!l_model.empty()) check(fp_model_load(l_model.c_str(), model.out()));
      Dynamics dyn;
      load_dynamics(l_dyn, l_dyn_model, seed, dyn);
      Text dump;
      double score = 0.0;
      int ok = 0;
      check(fp_plan_episode(model.get(), dyn.get(), l_task.c_str(), l_reward.c_str(), l_g, seed, dump.out(), &score,
                            &ok));
      write_output(l_out, dump.str());
      std::cerr << "score " << score << " success " << ok << "\n";
    } else if (*td) {
      Dynamics dyn;
      Text report;
      check(fp_dynamics_train(d_episodes, d_epochs, resolved_seed(d_seed), dyn.out(), report.out()));
      check(fp_dynamics_save(dyn.get(), d_out.c_str()));
      std::cout << report.str() << "\n";
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
