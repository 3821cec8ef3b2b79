#include "failprompt/gradcheck.hpp"

#include "failprompt/error.hpp"

#include <algorithm>

namespace failprompt {

namespace {

void push(std::vector<double>& out, const Vector& v) { out.insert(out.end(), v.data(), v.data() + v.size()); }

}  // namespace

Embedding random_unit(Rng& rng, int dim) {
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = rng.normal();
  return l2_normalize(v);
}

LossCase random_loss_case(std::uint64_t seed, int dim, int clusters) {
  Rng rng(seed);
  LossCase c;
  const Task a = Task::OpenDrawer, b = Task::PokeCup;
  c.batch.tau = 0.5 + rng.uniform();
  for (Task t : {a, b, a}) {
    c.batch.human.push_back(random_unit(rng, dim));
    c.batch.human_tasks.push_back(t);
  }
  for (Task t : {b, a, b}) {
    c.batch.robot_success.push_back(random_unit(rng, dim));
    c.batch.robot_success_tasks.push_back(t);
  }
  for (Task t : {a, b, b}) {
    c.batch.robot_failure.push_back(random_unit(rng, dim));
    c.batch.robot_failure_tasks.push_back(t);
    c.batch.failure_clusters.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(clusters))));
  }
  for (Task t : {a, b}) {
    c.batch.texts[t] = random_unit(rng, dim);
    auto& list = c.failure_texts[t];
    for (int k = 0; k < clusters; ++k) list.push_back(random_unit(rng, dim));
  }
  return c;
}

std::vector<double> flatten(const LossCase& c) {
  std::vector<double> out;
  for (const auto& v : c.batch.human) push(out, v);
  for (const auto& v : c.batch.robot_success) push(out, v);
  for (const auto& v : c.batch.robot_failure) push(out, v);
  for (const auto& [_, v] : c.batch.texts) push(out, v);
  for (const auto& [_, list] : c.failure_texts)
    for (const auto& v : list) push(out, v);
  return out;
}

LossCase unflatten(const LossCase& shape, std::span<const double> theta) {
  LossCase c = shape;
  std::size_t pos = 0;
  auto take = [&](Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = theta[pos++];
  };
  for (auto& v : c.batch.human) take(v);
  for (auto& v : c.batch.robot_success) take(v);
  for (auto& v : c.batch.robot_failure) take(v);
  for (auto& [_, v] : c.batch.texts) take(v);
  for (auto& [_, list] : c.failure_texts)
    for (auto& v : list) take(v);
  return c;
}

std::vector<double> flatten_grad(const LossCase& shape, const LossGrad& g) {
  std::vector<double> out;
  auto push_or_zero = [&](const std::vector<Vector>& list, std::size_t i, Eigen::Index dim) {
    if (i < list.size()) push(out, list[i]);
    else out.insert(out.end(), static_cast<std::size_t>(dim), 0.0);
  };
  for (std::size_t i = 0; i < shape.batch.human.size(); ++i) push_or_zero(g.human, i, shape.batch.human[i].size());
  for (std::size_t i = 0; i < shape.batch.robot_success.size(); ++i)
    push_or_zero(g.robot_success, i, shape.batch.robot_success[i].size());
  for (std::size_t i = 0; i < shape.batch.robot_failure.size(); ++i)
    push_or_zero(g.robot_failure, i, shape.batch.robot_failure[i].size());
  for (const auto& [task, v] : shape.batch.texts) {
    auto it = g.texts.find(task);
    if (it != g.texts.end()) push(out, it->second);
    else out.insert(out.end(), static_cast<std::size_t>(v.size()), 0.0);
  }
  for (const auto& [task, list] : shape.failure_texts) {
    auto it = g.failure_texts.find(task);
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (it != g.failure_texts.end()) push_or_zero(it->second, k, list[k].size());
      else out.insert(out.end(), static_cast<std::size_t>(list[k].size()), 0.0);
    }
  }
  return out;
}

double loss_grad_error(const CaseLoss& loss, const LossCase& c, double eps) {
  const std::vector<double> theta = flatten(c);
  const std::vector<double> analytic = flatten_grad(c, loss(c));
  return finite_diff_grad_check([&](std::span<const double> t) { return loss(unflatten(c, t)).value; }, theta,
                                analytic, eps);
}

std::vector<double> flatten(const VideoEncoderParams& p) {
  std::vector<double> out;
  for (const Matrix* m : {&p.frame_proj, &p.temporal_logits, &p.out_proj}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) out.push_back((*m)(r, c));
  }
  push(out, p.frame_bias);
  push(out, p.out_bias);
  return out;
}

VideoEncoderParams unflatten(const VideoEncoderParams& shape, std::span<const double> theta) {
  VideoEncoderParams p = shape;
  std::size_t pos = 0;
  for (Matrix* m : {&p.frame_proj, &p.temporal_logits, &p.out_proj}) {
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) (*m)(r, c) = theta[pos++];
  }
  for (Vector* v : {&p.frame_bias, &p.out_bias})
    for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = theta[pos++];
  return p;
}

Clip random_clip(Rng& rng, const EncoderDims& dims) {
  Clip c(dims.frames, dims.features);
  for (Eigen::Index r = 0; r < c.rows(); ++r)
    for (Eigen::Index col = 0; col < c.cols(); ++col) c(r, col) = rng.normal();
  return c;
}

double encoder_grad_error(std::uint64_t seed, const EncoderDims& dims, double eps) {
  Rng rng(seed);
  const VideoEncoderParams params = VideoEncoderParams::initialize(dims, seed);
  const Clip clip = random_clip(rng, dims);
  Vector target(dims.embed);
  for (int i = 0; i < dims.embed; ++i) target(i) = rng.normal();
  const EncodeTrace trace = encode_video_traced(clip, params);
  VideoEncoderParams grads = VideoEncoderParams::zeros_like(params);
  encode_video_backward(trace, 2.0 * (trace.output - target), params, grads);
  return finite_diff_grad_check(
      [&](std::span<const double> t) { return (encode_video(clip, unflatten(params, t)) - target).squaredNorm(); },
      flatten(params), flatten(grads), eps);
}

double compose_grad_error(std::uint64_t seed, int dim, int clusters, int prompt_length, double eps) {
  Rng rng(seed);
  FailurePromptPool pool(clusters, prompt_length, dim);
  pool.add_task(Task::OpenDrawer, rng);
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) pool.pool_map()(r, c) += 0.3 * rng.normal();
  TaskSpec spec{Task::OpenDrawer, "open the drawer", random_unit(rng, dim)};
  const int k = static_cast<int>(rng.index(static_cast<std::size_t>(clusters)));
  Vector w(dim);
  for (int i = 0; i < dim; ++i) w(i) = rng.normal();

  auto pack = [&](const FailurePromptPool& p) {
    std::vector<double> out;
    const Matrix& m = p.prompt(Task::OpenDrawer, k);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    for (Eigen::Index r = 0; r < dim; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) out.push_back(p.pool_map()(r, c));
    return out;
  };
  auto unpack = [&](std::span<const double> t) {
    FailurePromptPool p = pool;
    std::size_t pos = 0;
    Matrix& m = p.prompt(Task::OpenDrawer, k);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t[pos++];
    for (Eigen::Index r = 0; r < dim; ++r)
      for (Eigen::Index c = 0; c < dim; ++c) p.pool_map()(r, c) = t[pos++];
    return p;
  };
  const ComposeGrad g = compose_failure_context_backward(pool, spec, k, w);
  FailurePromptPool gp = pool;
  gp.prompt(Task::OpenDrawer, k) = g.prompt;
  gp.pool_map() = g.pool_map;
  return finite_diff_grad_check(
      [&](std::span<const double> t) { return w.dot(compose_failure_context(unpack(t), spec, k)); }, pack(pool),
      pack(gp), eps);
}

std::vector<GradSuiteEntry> run_grad_suite(int batches, double eps, std::uint64_t first_seed) {
  if (batches < 1) throw Error(ErrorCode::BadConfig, "need at least one batch");
  std::vector<GradSuiteEntry> out;
  auto track = [&](const std::string& name, double err) {
    auto it = std::find_if(out.begin(), out.end(), [&](const GradSuiteEntry& e) { return e.name == name; });
    if (it == out.end()) out.push_back({name, err});
    else it->max_error = std::max(it->max_error, err);
  };
  for (int b = 0; b < batches; ++b) {
    const std::uint64_t seed = first_seed + static_cast<std::uint64_t>(b);
    const LossCase c = random_loss_case(seed);
    track("cdc_loss", loss_grad_error([](const LossCase& x) { return cdc_loss(x.batch); }, c, eps));
    track("cdc_loss_exclude_self", loss_grad_error([](const LossCase& x) { return cdc_loss(x.batch, {true}); }, c, eps));
    track("vlc_loss", loss_grad_error([](const LossCase& x) { return vlc_loss(x.batch); }, c, eps));
    track("vlc_loss_failure_negatives",
          loss_grad_error([](const LossCase& x) { return vlc_loss(x.batch, &x.failure_texts); }, c, eps));
    track("bce_loss", loss_grad_error([](const LossCase& x) { return bce_loss(x.batch); }, c, eps));
    track("fvlc_loss", loss_grad_error([](const LossCase& x) { return fvlc_loss(x.batch, x.failure_texts); }, c, eps));
    track("encode_video", encoder_grad_error(seed, {4, 5, 6, 5}, eps));
    track("compose_failure_context", compose_grad_error(seed, 6, 3, 2, eps));
  }
  return out;
}

}  // namespace failprompt
