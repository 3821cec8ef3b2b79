#include "failprompt/planner.hpp"

#include "failprompt/data_synth.hpp"
#include "failprompt/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace failprompt {

RewardFn RewardFn::learned(const VideoEncoderParams& encoder, Embedding text, RenderParams render) {
  RewardFn r;
  r.encoder_ = &encoder;
  r.text_ = std::move(text);
  r.render_ = std::move(render);
  return r;
}

RewardFn RewardFn::oracle(Task task) {
  RewardFn r;
  r.oracle_ = true;
  r.task_ = task;
  return r;
}

Clip render_prediction(std::span<const SimState> states, const RenderParams& render) {
  const auto idx = clip_frame_indices(states.size());
  Clip clip(static_cast<Eigen::Index>(idx.size()), sim::kFeatureWidth);
  for (std::size_t l = 0; l < idx.size(); ++l) {
    clip.row(static_cast<Eigen::Index>(l)) =
        render_features(states[idx[l]], Domain::Robot, DomainShift::identity(), render).transpose();
  }
  return clip;
}

double RewardFn::operator()(std::span<const SimState> states) const {
  if (oracle_) return success(task_, states) ? 1.0 : 0.0;
  const Embedding v = encode_video(render_prediction(states, render_), *encoder_);
  if (v.size() != text_.size()) throw Error(ErrorCode::DimensionMismatch, "reward text width");
  return 1.0 / (1.0 + std::exp(-v.dot(text_)));
}

int CemConfig::elite_count() const {
  return static_cast<int>(std::floor(elite_fraction * population + 0.5));
}

void PlanConfig::validate() const {
  if (candidates < 1) throw Error(ErrorCode::BadConfig, "G must be at least 1");
  if (horizon <= 0 || horizon % kChunkSize != 0) throw Error(ErrorCode::BadConfig, "H must be a positive multiple of 4");
  if (cem.iterations < 0 || cem.population < 1 || cem.elite_count() < 1 || cem.elite_fraction > 1.0 ||
      !(cem.init_std >= 0.0)) {
    throw Error(ErrorCode::BadConfig, "invalid CEM settings");
  }
}

std::vector<std::vector<Action>> sample_candidates(const PlanConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, 0x706c616e));
  std::vector<std::vector<Action>> out;
  out.reserve(static_cast<std::size_t>(config.candidates));
  for (int g = 0; g < config.candidates; ++g) out.push_back(random_actions(rng, config.horizon));
  return out;
}

ActionScorer plan_scorer(const RewardFn& reward, const DynamicsModel& model, const SimState& s0) {
  return [&reward, &model, s0](std::span<const Action> actions) {
    return reward(chunked_predict(model, s0, actions));
  };
}

PlanResult vmpc_plan(const RewardFn& reward, const DynamicsModel& model, const SimState& s0, const PlanConfig& config) {
  const auto candidates = sample_candidates(config);
  const ActionScorer score = plan_scorer(reward, model, s0);
  PlanResult best;
  for (std::size_t g = 0; g < candidates.size(); ++g) {
    const double s = score(candidates[g]);
    if (g == 0 || s > best.score) {
      best.score = s;
      best.candidate = static_cast<int>(g);
    }
  }
  best.actions = candidates[static_cast<std::size_t>(best.candidate)];
  return best;
}

namespace {

constexpr int kActionDims = 3;

std::vector<Action> decode(const Vector& x) {
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(x.size() / kActionDims));
  for (Eigen::Index i = 0; i + kActionDims <= x.size(); i += kActionDims) {
    out.push_back(Action::from_continuous(x(i), x(i + 1), x(i + 2)));
  }
  return out;
}

void clamp_box(Vector& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double bound = i % kActionDims == 2 ? 1.0 : sim::kMaxSpeed;
    x(i) = std::clamp(x(i), -bound, bound);
  }
}

}  // namespace

CemResult cem_refine(std::span<const Action> initial, const ActionScorer& scorer, const CemConfig& config,
                     std::uint64_t seed) {
  if (initial.empty()) throw Error(ErrorCode::BadConfig, "CEM needs a non-empty initial sequence");
  if (config.iterations < 0 || config.population < 1 || config.elite_count() < 1 || config.elite_fraction > 1.0 ||
      !(config.init_std >= 0.0)) {
    throw Error(ErrorCode::BadConfig, "invalid CEM settings");
  }
  const Eigen::Index dims = static_cast<Eigen::Index>(initial.size()) * kActionDims;
  Vector mean(dims);
  for (std::size_t t = 0; t < initial.size(); ++t) {
    const auto i = static_cast<Eigen::Index>(t) * kActionDims;
    mean(i) = initial[t].velocity().x;
    mean(i + 1) = initial[t].velocity().y;
    mean(i + 2) = initial[t].grip_continuous();
  }
  Vector std_dev = Vector::Constant(dims, config.init_std);

  CemResult result;
  result.actions.assign(initial.begin(), initial.end());
  result.score = scorer(result.actions);

  Rng rng(mix_seed(seed, 0x63656d));
  const int elites = config.elite_count();
  std::vector<Vector> population(static_cast<std::size_t>(config.population));
  std::vector<double> scores(population.size());
  std::vector<std::size_t> order(population.size());
  for (int it = 0; it < config.iterations; ++it) {
    for (std::size_t p = 0; p < population.size(); ++p) {
      Vector x(dims);
      for (Eigen::Index i = 0; i < dims; ++i) x(i) = mean(i) + std_dev(i) * rng.normal();
      clamp_box(x);
      scores[p] = scorer(decode(x));
      population[p] = std::move(x);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (scores[order[0]] > result.score) {
      result.score = scores[order[0]];
      result.actions = decode(population[order[0]]);
    }
    Vector next_mean = Vector::Zero(dims);
    for (int e = 0; e < elites; ++e) next_mean += population[order[static_cast<std::size_t>(e)]];
    next_mean /= elites;
    Vector var = Vector::Zero(dims);
    for (int e = 0; e < elites; ++e) {
      var += (population[order[static_cast<std::size_t>(e)]] - next_mean).array().square().matrix();
    }
    mean = next_mean;
    std_dev = (var / elites).array().sqrt().matrix();
    result.best_history.push_back(result.score);
  }
  result.final_mean.assign(mean.data(), mean.data() + mean.size());
  return result;
}

}  // namespace failprompt
