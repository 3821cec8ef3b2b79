#include "failprompt/encoders.hpp"

#include "failprompt/error.hpp"

#include <cmath>
#include <string>

namespace failprompt {

namespace {

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

VideoEncoderParams VideoEncoderParams::initialize(const EncoderDims& dims, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x656e63));
  VideoEncoderParams p;
  p.frame_proj = gaussian(dims.hidden, dims.features, 1.0 / std::sqrt(dims.features), rng);
  p.frame_bias = Vector::Zero(dims.hidden);
  p.temporal_logits = gaussian(dims.frames, dims.hidden, 0.1, rng);
  p.out_proj = gaussian(dims.embed, dims.hidden, 1.0 / std::sqrt(dims.hidden), rng);
  p.out_bias = gaussian(dims.embed, 1, 0.1, rng);
  return p;
}

VideoEncoderParams VideoEncoderParams::zeros_like(const VideoEncoderParams& other) {
  VideoEncoderParams p;
  p.frame_proj = Matrix::Zero(other.frame_proj.rows(), other.frame_proj.cols());
  p.frame_bias = Vector::Zero(other.frame_bias.size());
  p.temporal_logits = Matrix::Zero(other.temporal_logits.rows(), other.temporal_logits.cols());
  p.out_proj = Matrix::Zero(other.out_proj.rows(), other.out_proj.cols());
  p.out_bias = Vector::Zero(other.out_bias.size());
  return p;
}

EncoderDims VideoEncoderParams::dims() const {
  return EncoderDims{static_cast<int>(temporal_logits.rows()), static_cast<int>(frame_proj.cols()),
                     static_cast<int>(frame_proj.rows()), static_cast<int>(out_proj.rows())};
}

bool VideoEncoderParams::all_finite() const {
  return frame_proj.allFinite() && frame_bias.allFinite() && temporal_logits.allFinite() &&
         out_proj.allFinite() && out_bias.allFinite();
}

EncodeTrace encode_video_traced(const Clip& clip, const VideoEncoderParams& params) {
  const EncoderDims dims = params.dims();
  if (clip.rows() != dims.frames || clip.cols() != dims.features) {
    throw Error(ErrorCode::ShapeMismatch, "clip is " + std::to_string(clip.rows()) + "x" +
                                              std::to_string(clip.cols()) + ", encoder expects " +
                                              std::to_string(dims.frames) + "x" + std::to_string(dims.features));
  }
  EncodeTrace t;
  t.clip = clip;
  t.hidden = ((clip * params.frame_proj.transpose()).rowwise() + params.frame_bias.transpose()).array().tanh();
  t.weights.resize(dims.frames, dims.hidden);
  for (int h = 0; h < dims.hidden; ++h) {
    const auto col = params.temporal_logits.col(h);
    const double top = col.maxCoeff();
    const Vector e = (col.array() - top).exp();
    t.weights.col(h) = e / e.sum();
  }
  t.pooled = (t.weights.array() * t.hidden.array()).colwise().sum().transpose();
  t.pre_norm = params.out_proj * t.pooled + params.out_bias;
  t.output = l2_normalize(t.pre_norm);
  return t;
}

Embedding encode_video(const Clip& clip, const VideoEncoderParams& params) {
  return encode_video_traced(clip, params).output;
}

void encode_video_backward(const EncodeTrace& trace, const Vector& grad_output,
                           const VideoEncoderParams& params, VideoEncoderParams& grads) {
  const Vector d_pre = l2_normalize_backward(trace.pre_norm, grad_output);
  grads.out_proj += d_pre * trace.pooled.transpose();
  grads.out_bias += d_pre;
  const Vector d_pooled = params.out_proj.transpose() * d_pre;
  const Eigen::Index frames = trace.hidden.rows();
  Matrix d_hidden(frames, trace.hidden.cols());
  for (Eigen::Index h = 0; h < trace.hidden.cols(); ++h) {
    for (Eigen::Index l = 0; l < frames; ++l) {
      const double a = trace.weights(l, h);
      d_hidden(l, h) = a * d_pooled(h);
      grads.temporal_logits(l, h) += a * (trace.hidden(l, h) - trace.pooled(h)) * d_pooled(h);
    }
  }
  const Matrix d_act = d_hidden.array() * (1.0 - trace.hidden.array().square());
  grads.frame_proj += d_act.transpose() * trace.clip;
  grads.frame_bias += d_act.colwise().sum().transpose();
}

TextTable TextTable::initialize(int dim, std::uint64_t seed) {
  if (dim < kTaskCount) throw Error(ErrorCode::BadConfig, "embedding width smaller than task count");
  Rng rng(mix_seed(seed, 0x74657874));
  TextTable table;
  table.dim_ = dim;
  std::vector<Vector> basis;
  for (Task task : kAllTasks) {
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v(i) = rng.normal();
    for (const Vector& b : basis) v -= b * b.dot(v);
    v = l2_normalize(v);
    basis.push_back(v);
    table.specs_[task] = TaskSpec{task, std::string(task_expression(task)), v};
  }
  return table;
}

const TaskSpec& TextTable::spec(Task task) const {
  auto it = specs_.find(task);
  if (it == specs_.end()) throw Error(ErrorCode::UnknownTask, std::string(task_name(task)));
  return it->second;
}

void TextTable::set(Task task, const Embedding& embedding) {
  if (dim_ == 0) dim_ = static_cast<int>(embedding.size());
  if (embedding.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "text embedding width");
  specs_[task] = TaskSpec{task, std::string(task_expression(task)), embedding};
}

FailurePromptPool::FailurePromptPool(int clusters, int prompt_length, int dim)
    : clusters_(clusters), prompt_length_(prompt_length), dim_(dim), pool_map_(Matrix::Identity(dim, dim)) {
  if (clusters < 1 || prompt_length < 1 || dim < 1) {
    throw Error(ErrorCode::BadConfig, "prompt pool needs K >= 1, prompt length >= 1, width >= 1");
  }
}

void FailurePromptPool::add_task(Task task, Rng& rng) {
  std::vector<Matrix> prompts;
  for (int k = 0; k < clusters_; ++k) prompts.push_back(gaussian(prompt_length_, dim_, 1.0 / std::sqrt(dim_), rng));
  prompts_[task] = std::move(prompts);
}

std::vector<Task> FailurePromptPool::tasks() const {
  std::vector<Task> out;
  for (const auto& [task, _] : prompts_) out.push_back(task);
  return out;
}

std::vector<Matrix>& FailurePromptPool::prompts(Task task) {
  auto it = prompts_.find(task);
  if (it == prompts_.end()) throw Error(ErrorCode::UnknownTask, "no prompt pool for " + std::string(task_name(task)));
  return it->second;
}

const std::vector<Matrix>& FailurePromptPool::prompts(Task task) const {
  auto it = prompts_.find(task);
  if (it == prompts_.end()) throw Error(ErrorCode::UnknownTask, "no prompt pool for " + std::string(task_name(task)));
  return it->second;
}

const Matrix& FailurePromptPool::prompt(Task task, int k) const {
  const auto& list = prompts(task);
  if (k < 0 || k >= clusters_) throw Error(ErrorCode::BadClusterIndex, "cluster " + std::to_string(k));
  return list[static_cast<std::size_t>(k)];
}

Matrix& FailurePromptPool::prompt(Task task, int k) {
  auto& list = prompts(task);
  if (k < 0 || k >= clusters_) throw Error(ErrorCode::BadClusterIndex, "cluster " + std::to_string(k));
  return list[static_cast<std::size_t>(k)];
}

bool FailurePromptPool::all_finite() const {
  if (!pool_map_.allFinite()) return false;
  for (const auto& [_, list] : prompts_)
    for (const Matrix& p : list)
      if (!p.allFinite()) return false;
  return true;
}

namespace {

Vector pooled_tokens(const Matrix& prompt, const Embedding& text) {
  return (prompt.colwise().sum().transpose() + text) / static_cast<double>(prompt.rows() + 1);
}

}  // namespace

Embedding compose_failure_context(const FailurePromptPool& pool, const TaskSpec& task, int k) {
  const Matrix& prompt = pool.prompt(task.task, k);
  return l2_normalize(pool.pool_map() * pooled_tokens(prompt, task.text_embedding));
}

ComposeGrad compose_failure_context_backward(const FailurePromptPool& pool, const TaskSpec& task, int k,
                                             const Vector& grad_output) {
  const Matrix& prompt = pool.prompt(task.task, k);
  const Vector mean = pooled_tokens(prompt, task.text_embedding);
  const Vector mapped = pool.pool_map() * mean;
  const Vector d_mapped = l2_normalize_backward(mapped, grad_output);
  ComposeGrad g;
  g.pool_map = d_mapped * mean.transpose();
  const Vector d_mean = pool.pool_map().transpose() * d_mapped / static_cast<double>(prompt.rows() + 1);
  g.prompt = d_mean.transpose().replicate(prompt.rows(), 1);
  return g;
}

}  // namespace failprompt
