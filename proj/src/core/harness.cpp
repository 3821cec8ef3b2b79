#include "failprompt/harness.hpp"

#include "failprompt/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <tuple>

namespace failprompt {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string task_key(const std::string& prefix, Task task) { return prefix + std::string(task_name(task)); }

}  // namespace

ModelParams ModelParams::initialize(const ExperimentConfig& config) {
  ModelParams p;
  EncoderDims dims;
  dims.hidden = config.hidden;
  dims.embed = config.embed_dim;
  p.encoder = VideoEncoderParams::initialize(dims, mix_seed(config.seed, 1));
  p.texts = TextTable::initialize(config.embed_dim, mix_seed(config.seed, 2));
  p.pool = FailurePromptPool(config.clusters, config.prompt_length, config.embed_dim);
  Rng rng(mix_seed(config.seed, 3));
  for (Task t : config.train_tasks) p.pool.add_task(t, rng);
  return p;
}

Checkpoint ModelParams::to_checkpoint() const {
  Checkpoint ck;
  ck.put("encoder.frame_proj", encoder.frame_proj);
  ck.put_vector("encoder.frame_bias", encoder.frame_bias);
  ck.put("encoder.temporal_logits", encoder.temporal_logits);
  ck.put("encoder.out_proj", encoder.out_proj);
  ck.put_vector("encoder.out_bias", encoder.out_bias);
  for (const auto& [task, spec] : texts.entries()) ck.put_vector(task_key("text.", task), spec.text_embedding);
  ck.put_scalar("pool.K", pool.clusters());
  ck.put_scalar("pool.prompt_length", pool.prompt_length());
  ck.put("pool.map", pool.pool_map());
  for (Task task : pool.tasks()) {
    for (int k = 0; k < pool.clusters(); ++k) {
      ck.put(task_key("pool.", task) + "." + std::to_string(k), pool.prompt(task, k));
    }
  }
  for (const auto& [task, state] : clusters) {
    Matrix centers(static_cast<Eigen::Index>(state.centers.size()), pool.dim());
    for (std::size_t k = 0; k < state.centers.size(); ++k) centers.row(static_cast<Eigen::Index>(k)) = state.centers[k].transpose();
    ck.put(task_key("clusters.", task), centers);
  }
  return ck;
}

ModelParams ModelParams::from_checkpoint(const Checkpoint& ck) {
  ModelParams p;
  p.encoder.frame_proj = ck.get("encoder.frame_proj");
  p.encoder.frame_bias = ck.get_vector("encoder.frame_bias");
  p.encoder.temporal_logits = ck.get("encoder.temporal_logits");
  p.encoder.out_proj = ck.get("encoder.out_proj");
  p.encoder.out_bias = ck.get_vector("encoder.out_bias");
  const auto& e = p.encoder;
  if (e.frame_bias.size() != e.frame_proj.rows() || e.temporal_logits.cols() != e.frame_proj.rows() ||
      e.out_proj.cols() != e.frame_proj.rows() || e.out_bias.size() != e.out_proj.rows()) {
    throw Error(ErrorCode::CorruptFile, "encoder arrays have inconsistent shapes");
  }
  const int dim = static_cast<int>(e.out_proj.rows());
  for (Task task : kAllTasks) {
    const std::string key = task_key("text.", task);
    if (!ck.has(key)) continue;
    const Vector t = ck.get_vector(key);
    if (t.size() != dim) throw Error(ErrorCode::CorruptFile, key + " has the wrong width");
    p.texts.set(task, t);
  }
  const int k = static_cast<int>(ck.get_scalar("pool.K"));
  const int lp = static_cast<int>(ck.get_scalar("pool.prompt_length"));
  try {
    p.pool = FailurePromptPool(k, lp, dim);
  } catch (const Error& err) {
    throw Error(ErrorCode::CorruptFile, err.what());
  }
  p.pool.pool_map() = ck.get("pool.map");
  if (p.pool.pool_map().rows() != dim || p.pool.pool_map().cols() != dim) {
    throw Error(ErrorCode::CorruptFile, "pool.map has the wrong shape");
  }
  Rng unused(0);
  for (Task task : kAllTasks) {
    const std::string prefix = task_key("pool.", task) + ".";
    if (!ck.has(prefix + "0")) continue;
    p.pool.add_task(task, unused);
    for (int i = 0; i < k; ++i) {
      const Matrix& m = ck.get(prefix + std::to_string(i));
      if (m.rows() != lp || m.cols() != dim) throw Error(ErrorCode::CorruptFile, prefix + std::to_string(i) + " shape");
      p.pool.prompt(task, i) = m;
    }
    if (ck.has(task_key("clusters.", task))) {
      const Matrix& c = ck.get(task_key("clusters.", task));
      if (c.cols() != dim) throw Error(ErrorCode::CorruptFile, "cluster centers have the wrong width");
      ClusterState st;
      st.task = task;
      for (Eigen::Index r = 0; r < c.rows(); ++r) st.centers.push_back(c.row(r).transpose());
      p.clusters[task] = std::move(st);
    }
  }
  return p;
}

double ModelParams::reward(const Clip& clip, Task task) const {
  return sigmoid(encode_video(clip, encoder).dot(texts.text_embed(task)));
}

namespace {

bool contains(const std::vector<Task>& tasks, Task t) { return std::find(tasks.begin(), tasks.end(), t) != tasks.end(); }

struct Strata {
  std::map<Task, std::vector<std::size_t>> human;
  std::map<Task, std::vector<std::size_t>> robot_success;
  std::vector<std::size_t> robot_failure;
};

Strata strata_of(const Dataset& ds, const ExperimentConfig& config) {
  Strata s;
  for (std::size_t i = 0; i < ds.clips.size(); ++i) {
    const LabeledClip& c = ds.clips[i];
    if (c.domain == Domain::Human) {
      if (c.success && (contains(config.train_tasks, c.task) || contains(config.target_tasks, c.task))) {
        s.human[c.task].push_back(i);
      }
    } else if (contains(config.train_tasks, c.task)) {
      if (c.success) s.robot_success[c.task].push_back(i);
      else s.robot_failure.push_back(i);
    }
  }
  return s;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.index(v.size())];
}

}  // namespace

SampledBatch sample_batch(const Dataset& dataset, const ExperimentConfig& config, Rng& rng, const PseudoLabels* labels) {
  const Strata s = strata_of(dataset, config);
  const int bf = config.mode == TrainingMode::NoFailure ? 0 : config.batch_failure;
  if (config.batch_human > 0 && s.human.empty()) throw Error(ErrorCode::InsufficientStratum, "no human clips");
  if (config.batch_robot > 0 && s.robot_success.empty()) {
    throw Error(ErrorCode::InsufficientStratum, "no robot success clips for the train tasks");
  }
  if (bf > 0 && s.robot_failure.empty()) throw Error(ErrorCode::InsufficientStratum, "no robot failure clips");

  std::vector<Task> human_tasks_all, robot_tasks_all;
  for (const auto& [t, _] : s.human) human_tasks_all.push_back(t);
  for (const auto& [t, _] : s.robot_success) robot_tasks_all.push_back(t);

  // Constructive draw: robot tasks first, then human slots complete any
  // singleton task before being filled with same-task pairs.
  SampledBatch b;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Task> robot_tasks, human_tasks;
    for (int i = 0; i < config.batch_robot; ++i) robot_tasks.push_back(pick(robot_tasks_all, rng));
    std::map<Task, int> count;
    for (Task t : robot_tasks) ++count[t];
    for (Task t : robot_tasks) {
      if (count[t] == 1 && static_cast<int>(human_tasks.size()) < config.batch_human && s.human.count(t)) {
        human_tasks.push_back(t);
        ++count[t];
      }
    }
    while (static_cast<int>(human_tasks.size()) < config.batch_human) {
      const Task t = pick(human_tasks_all, rng);
      human_tasks.push_back(t);
      ++count[t];
      if (static_cast<int>(human_tasks.size()) < config.batch_human) {
        human_tasks.push_back(t);
        ++count[t];
      } else if (count[t] == 1) {
        // Odd slot left: reuse a task that is already present.
        human_tasks.back() = human_tasks.size() > 1 ? human_tasks.front() : robot_tasks.empty() ? t : robot_tasks.front();
        --count[t];
        ++count[human_tasks.back()];
      }
    }
    bool ok = true;
    for (const auto& [t, n] : count) ok = ok && (n == 0 || n >= 2);
    if (!ok) continue;
    b = SampledBatch{};
    for (Task t : human_tasks) b.human.push_back(pick(s.human.at(t), rng));
    for (Task t : robot_tasks) b.robot_success.push_back(pick(s.robot_success.at(t), rng));
    for (int i = 0; i < bf; ++i) {
      const std::size_t idx = pick(s.robot_failure, rng);
      b.robot_failure.push_back(idx);
      int label = 0;
      if (labels) {
        auto it = labels->find(idx);
        if (it != labels->end()) label = it->second;
      }
      b.failure_clusters.push_back(label);
    }
    return b;
  }
  throw Error(ErrorCode::InsufficientStratum, "could not build a batch where every success sample has a positive");
}

std::string EpochMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["loss"] = loss;
  j["cdc"] = cdc;
  j["vlc"] = vlc;
  j["failure"] = failure;
  j["grad_norm"] = grad_norm;
  nlohmann::ordered_json obj = nlohmann::ordered_json::object(), churn = nlohmann::ordered_json::object(),
                         sizes = nlohmann::ordered_json::object();
  for (const auto& [t, v] : cluster_objective) obj[std::string(task_name(t))] = v;
  for (const auto& [t, v] : label_churn) churn[std::string(task_name(t))] = v;
  for (const auto& [t, v] : cluster_sizes) sizes[std::string(task_name(t))] = v;
  j["cluster_objective"] = obj;
  j["label_churn"] = churn;
  j["cluster_sizes"] = sizes;
  return j.dump();
}

std::string TrainResult::metrics_log() const {
  std::string out;
  for (const EpochMetrics& m : metrics) out += m.to_json() + "\n";
  return out;
}

namespace {

struct Grads {
  VideoEncoderParams encoder;
  std::map<Task, std::vector<Matrix>> prompts;
  Matrix pool_map;

  double squared_norm() const {
    double s = encoder.frame_proj.squaredNorm() + encoder.frame_bias.squaredNorm() +
               encoder.temporal_logits.squaredNorm() + encoder.out_proj.squaredNorm() + encoder.out_bias.squaredNorm();
    for (const auto& [_, list] : prompts)
      for (const Matrix& m : list) s += m.squaredNorm();
    if (pool_map.size()) s += pool_map.squaredNorm();
    return s;
  }
};

class Trainer {
 public:
  Trainer(const ExperimentConfig& config, const Dataset& dataset)
      : config_(config), dataset_(dataset), params_(ModelParams::initialize(config)) {
    for (std::size_t i = 0; i < dataset.clips.size(); ++i) {
      const LabeledClip& c = dataset.clips[i];
      if (c.domain == Domain::Robot && !c.success && contains(config.train_tasks, c.task)) {
        failures_[c.task].push_back(i);
      }
    }
  }

  TrainResult run() {
    TrainResult result;
    const bool clustering = config_.mode == TrainingMode::Fvlc;
    EpochMetrics initial;
    if (clustering) recluster(0, initial);
    {
      Rng probe(mix_seed(config_.seed, 0x70726f6265));
      accumulate(initial, probe, false);
    }
    result.metrics.push_back(initial);

    Rng rng(mix_seed(config_.seed, 0x747261696e));
    for (int epoch = 1; epoch <= config_.epochs; ++epoch) {
      EpochMetrics m;
      m.epoch = epoch;
      accumulate(m, rng, true);
      if (clustering) recluster(epoch, m);
      result.metrics.push_back(m);
    }
    result.params = std::move(params_);
    return result;
  }

 private:
  FailureTexts failure_texts() const {
    FailureTexts ft;
    for (Task t : params_.pool.tasks()) {
      auto& list = ft[t];
      for (int k = 0; k < params_.pool.clusters(); ++k) {
        list.push_back(compose_failure_context(params_.pool, params_.texts.spec(t), k));
      }
    }
    return ft;
  }

  // Runs steps_per_epoch batches; with `update` each one takes a gradient step.
  void accumulate(EpochMetrics& m, Rng& rng, bool update) {
    const int steps = config_.steps_per_epoch;
    for (int s = 0; s < steps; ++s) {
      const SampledBatch sb = sample_batch(dataset_, config_, rng, &labels_);
      LossBreakdown br;
      double norm = 0.0;
      const double value = step(sb, update, br, norm);
      m.loss += value / steps;
      m.cdc += br.cdc / steps;
      m.vlc += br.vlc / steps;
      m.failure += br.failure / steps;
      m.grad_norm += norm / steps;
    }
  }

  double step(const SampledBatch& sb, bool update, LossBreakdown& br, double& grad_norm) {
    Batch batch;
    batch.tau = config_.tau;
    std::vector<EncodeTrace> human, robot, fail;
    for (std::size_t i : sb.human) {
      human.push_back(encode_video_traced(dataset_.clips[i].frames, params_.encoder));
      batch.human.push_back(human.back().output);
      batch.human_tasks.push_back(dataset_.clips[i].task);
    }
    for (std::size_t i : sb.robot_success) {
      robot.push_back(encode_video_traced(dataset_.clips[i].frames, params_.encoder));
      batch.robot_success.push_back(robot.back().output);
      batch.robot_success_tasks.push_back(dataset_.clips[i].task);
    }
    for (std::size_t i : sb.robot_failure) {
      fail.push_back(encode_video_traced(dataset_.clips[i].frames, params_.encoder));
      batch.robot_failure.push_back(fail.back().output);
      batch.robot_failure_tasks.push_back(dataset_.clips[i].task);
    }
    batch.failure_clusters = sb.failure_clusters;
    auto add_text = [&](Task t) { batch.texts[t] = params_.texts.text_embed(t); };
    for (Task t : batch.human_tasks) add_text(t);
    for (Task t : batch.robot_success_tasks) add_text(t);
    for (Task t : batch.robot_failure_tasks) add_text(t);

    const bool fvlc = config_.mode == TrainingMode::Fvlc;
    const FailureTexts ft = fvlc ? failure_texts() : FailureTexts{};
    CdcOptions cdc;
    cdc.exclude_self = config_.exclude_self;
    const LossGrad g = total_loss(batch, fvlc ? &ft : nullptr, config_.mode, LossWeights{}, cdc, &br);

    Grads grads;
    grads.encoder = VideoEncoderParams::zeros_like(params_.encoder);
    for (std::size_t i = 0; i < human.size(); ++i) encode_video_backward(human[i], g.human[i], params_.encoder, grads.encoder);
    for (std::size_t i = 0; i < robot.size(); ++i) encode_video_backward(robot[i], g.robot_success[i], params_.encoder, grads.encoder);
    for (std::size_t i = 0; i < fail.size(); ++i) {
      if (i < g.robot_failure.size()) encode_video_backward(fail[i], g.robot_failure[i], params_.encoder, grads.encoder);
    }
    if (fvlc) {
      grads.pool_map = Matrix::Zero(params_.pool.dim(), params_.pool.dim());
      for (const auto& [task, list] : g.failure_texts) {
        auto& out = grads.prompts[task];
        for (int k = 0; k < static_cast<int>(list.size()); ++k) {
          const ComposeGrad cg =
              compose_failure_context_backward(params_.pool, params_.texts.spec(task), k, list[static_cast<std::size_t>(k)]);
          out.push_back(cg.prompt);
          grads.pool_map += cg.pool_map;
        }
      }
    }
    grad_norm = std::sqrt(grads.squared_norm());
    if (update) apply(grads, grad_norm);
    return g.value;
  }

  void apply(const Grads& g, double norm) {
    const double scale = norm > config_.grad_clip ? config_.grad_clip / norm : 1.0;
    const double le = config_.lr_encoder * scale;
    const double lp = config_.lr_prompt * scale;
    auto& e = params_.encoder;
    e.frame_proj -= le * g.encoder.frame_proj;
    e.frame_bias -= le * g.encoder.frame_bias;
    e.temporal_logits -= le * g.encoder.temporal_logits;
    e.out_proj -= le * g.encoder.out_proj;
    e.out_bias -= le * g.encoder.out_bias;
    for (const auto& [task, list] : g.prompts) {
      for (std::size_t k = 0; k < list.size(); ++k) params_.pool.prompt(task, static_cast<int>(k)) -= lp * list[k];
    }
    if (g.pool_map.size()) params_.pool.pool_map() -= lp * g.pool_map;
    if (!params_.encoder.all_finite() || !params_.pool.all_finite()) {
      throw Error(ErrorCode::NonFiniteValue, "parameters diverged");
    }
  }

  void recluster(int epoch, EpochMetrics& m) {
    for (const auto& [task, indices] : failures_) {
      std::vector<Embedding> feats;
      feats.reserve(indices.size());
      for (std::size_t i : indices) feats.push_back(encode_video(dataset_.clips[i].frames, params_.encoder));
      const std::uint64_t seed = mix_seed(config_.seed, 0x6b6d00 + static_cast<std::uint64_t>(epoch) * 16 +
                                                            static_cast<std::uint64_t>(task));
      ClusterState st = spherical_kmeans(feats, config_.clusters, config_.kmeans_iters, seed, task);
      auto prev = params_.clusters.find(task);
      std::vector<int> previous_labels;
      if (prev != params_.clusters.end()) {
        apply_alignment(st, align_clusters(prev->second.centers, st.centers));
        previous_labels = prev->second.assignments;
      }
      m.cluster_objective[task] = st.objective;
      m.label_churn[task] = previous_labels.empty() ? 0.0 : label_churn(previous_labels, st.assignments);
      std::vector<int> sizes(static_cast<std::size_t>(config_.clusters), 0);
      for (std::size_t j = 0; j < indices.size(); ++j) {
        labels_[indices[j]] = st.assignments[j];
        ++sizes[static_cast<std::size_t>(st.assignments[j])];
      }
      m.cluster_sizes[task] = sizes;
      params_.clusters[task] = std::move(st);
    }
  }

  const ExperimentConfig& config_;
  const Dataset& dataset_;
  ModelParams params_;
  std::map<Task, std::vector<std::size_t>> failures_;
  PseudoLabels labels_;
};

}  // namespace

TrainResult train(const ExperimentConfig& config, const Dataset& dataset) {
  config.validate();
  return Trainer(config, dataset).run();
}

double roc_auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::SizeMismatch, "scores and labels differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty()) throw Error(ErrorCode::OneClassOnly, "AUC needs both successes and failures");
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

SeparationReport evaluate_separation(const ModelParams& params, const Dataset& eval_set, const std::vector<Task>& tasks) {
  SeparationReport r;
  for (const LabeledClip& c : eval_set.clips) {
    if (c.domain != Domain::Robot || !contains(tasks, c.task)) continue;
    r.scores.push_back(params.reward(c.frames, c.task));
    r.labels.push_back(c.success);
    r.tasks.push_back(c.task);
  }
  r.pooled_auc = roc_auc(r.scores, r.labels);
  double total = 0.0;
  for (Task t : tasks) {
    std::vector<double> s;
    std::vector<bool> l;
    for (std::size_t i = 0; i < r.scores.size(); ++i) {
      if (r.tasks[i] != t) continue;
      s.push_back(r.scores[i]);
      l.push_back(r.labels[i]);
    }
    if (s.empty()) continue;
    r.task_auc[t] = roc_auc(s, l);
    total += r.task_auc[t];
  }
  r.auc = total / static_cast<double>(r.task_auc.size());
  return r;
}

std::string_view reward_kind_name(RewardKind k) noexcept {
  switch (k) {
    case RewardKind::Learned: return "learned";
    case RewardKind::Oracle: return "oracle";
    case RewardKind::Random: return "random";
  }
  return "learned";
}

RewardKind parse_reward_kind(std::string_view name) {
  for (RewardKind k : {RewardKind::Learned, RewardKind::Oracle, RewardKind::Random}) {
    if (reward_kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::BadConfig, "unknown reward kind '" + std::string(name) + "'");
}

const TaskPlanningResult* PlanningReport::find(Task task) const {
  for (const auto& t : tasks)
    if (t.task == task) return &t;
  return nullptr;
}

PlanningReport evaluate_planning(const ModelParams* params, const DynamicsModel& dynamics,
                                 const std::vector<Task>& tasks, const PlanningOptions& options) {
  if (options.reward == RewardKind::Learned && !params) {
    throw Error(ErrorCode::BadConfig, "learned reward needs trained parameters");
  }
  options.plan.validate();
  PlanningReport report;
  const RenderParams render = RenderParams::for_variant(options.env_variant);
  for (Task task : tasks) {
    TaskPlanningResult tr;
    tr.task = task;
    const RewardFn reward = options.reward == RewardKind::Learned
                                ? RewardFn::learned(params->encoder, params->texts.text_embed(task), render)
                                : RewardFn::oracle(task);
    double score_sum = 0.0, refined_score_sum = 0.0;
    int runs = 0;
    for (int s = 0; s < options.seeds; ++s) {
      const std::uint64_t seed = mix_seed(options.seed, static_cast<std::uint64_t>(s));
      int wins = 0, refined_wins = 0;
      for (int trial = 0; trial < options.trials; ++trial) {
        const std::uint64_t trial_seed = mix_seed(seed, static_cast<std::uint64_t>(task) * 100003 + static_cast<std::uint64_t>(trial));
        Rng rng(trial_seed);
        const SimState s0 = initial_state(task, rng);
        std::vector<Action> actions;
        if (options.reward == RewardKind::Random) {
          actions = random_actions(rng, options.plan.horizon);
        } else {
          PlanConfig pc = options.plan;
          pc.seed = mix_seed(trial_seed, 1);
          const PlanResult plan = vmpc_plan(reward, dynamics, s0, pc);
          actions = plan.actions;
          score_sum += plan.score;
          if (options.refine_with_cem) {
            const CemResult cem = cem_refine(plan.actions, plan_scorer(reward, dynamics, s0), pc.cem, mix_seed(trial_seed, 2));
            double last = plan.score;
            for (double b : cem.best_history) {
              if (b < last) tr.cem_never_decreased = false;
              last = b;
            }
            if (cem.score < plan.score) tr.cem_never_decreased = false;
            refined_score_sum += cem.score;
            if (success(task, rollout(s0, cem.actions))) ++refined_wins;
          }
        }
        ++runs;
        if (success(task, rollout(s0, actions))) ++wins;
      }
      if (options.trials > 0) {
        tr.per_seed.push_back(static_cast<double>(wins) / options.trials);
        if (options.refine_with_cem) tr.refined_per_seed.push_back(static_cast<double>(refined_wins) / options.trials);
      }
    }
    auto mean = [](const std::vector<double>& v) {
      return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    tr.mean = mean(tr.per_seed);
    tr.refined_mean = mean(tr.refined_per_seed);
    if (runs > 0) {
      tr.mean_score = score_sum / runs;
      tr.refined_mean_score = refined_score_sum / runs;
    }
    report.tasks.push_back(std::move(tr));
  }
  return report;
}

std::vector<AblationCell> default_ablation_grid() {
  const FailureSources sources[] = {{true, false}, {false, true}, {true, true}};
  std::vector<AblationCell> grid;
  for (TrainingMode mode : {TrainingMode::NoFailure, TrainingMode::Bce}) {
    for (const auto& s : sources) grid.push_back({mode, 0, s});
  }
  for (int k = 1; k <= 5; ++k) {
    for (const auto& s : sources) grid.push_back({TrainingMode::Fvlc, k, s});
  }
  return grid;
}

std::vector<AblationRow> run_ablation(const std::vector<AblationCell>& grid, const ExperimentConfig& base,
                                      const std::vector<std::uint64_t>& seeds, bool with_planning) {
  if (grid.empty()) throw Error(ErrorCode::BadConfig, "ablation grid is empty");
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : seeds) {
    ExperimentConfig seeded = base;
    seeded.seed = seed;
    const Dataset eval_set = gen_dataset(seeded.eval_data_config());
    std::map<std::string, Dataset> datasets;
    for (const AblationCell& cell : grid) {
      ExperimentConfig cfg = seeded;
      cfg.mode = cell.mode;
      if (cell.mode == TrainingMode::Fvlc) cfg.clusters = cell.clusters;
      cfg.data_sources = cell.sources;
      const std::string key = cell.sources.to_string();
      if (!datasets.count(key)) datasets.emplace(key, gen_dataset(cfg.data_config()));
      const TrainResult tr = train(cfg, datasets.at(key));
      AblationRow row;
      row.seed = seed;
      row.cell = cell;
      if (cell.mode != TrainingMode::Fvlc) row.cell.clusters = 0;
      row.auc_seen = evaluate_separation(tr.params, eval_set, cfg.train_tasks).auc;
      row.auc_heldout = evaluate_separation(tr.params, eval_set, cfg.target_tasks).auc;
      row.plan_success = std::numeric_limits<double>::quiet_NaN();
      if (with_planning) {
        PlanningOptions po;
        po.trials = cfg.plan_trials;
        po.seeds = cfg.plan_seeds;
        po.seed = seed;
        po.plan.candidates = cfg.plan_candidates;
        po.plan.horizon = cfg.plan_horizon;
        po.plan.cem = cfg.cem;
        po.env_variant = cfg.env_variant;
        const PlanningReport pr = evaluate_planning(&tr.params, DynamicsModel::ground_truth(), cfg.target_tasks, po);
        double total = 0.0;
        for (const auto& t : pr.tasks) total += t.mean;
        row.plan_success = pr.tasks.empty() ? 0.0 : total / static_cast<double>(pr.tasks.size());
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string ablation_csv(std::vector<AblationRow> rows) {
  auto key = [](const AblationRow& r) {
    return std::make_tuple(r.seed, static_cast<int>(r.cell.mode), r.cell.clusters, r.cell.sources.to_string());
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const AblationRow& a, const AblationRow& b) { return key(a) < key(b); });
  auto num = [](double v) { return std::isnan(v) ? std::string("nan") : format_double(v); };
  std::string out(kAblationHeader);
  out += "\n";
  for (const AblationRow& r : rows) {
    out += std::to_string(r.seed) + "," + std::string(training_mode_name(r.cell.mode)) + "," +
           std::to_string(r.cell.clusters) + "," + r.cell.sources.to_string() + "," + num(r.auc_seen) + "," +
           num(r.auc_heldout) + "," + num(r.plan_success) + "\n";
  }
  return out;
}

}  // namespace failprompt
