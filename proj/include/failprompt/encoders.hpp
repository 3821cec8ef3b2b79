#pragma once

#include "failprompt/embedding.hpp"
#include "failprompt/rng.hpp"
#include "failprompt/tasks.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace failprompt {

/// A clip is L frames (rows) of F raw frame features (columns).
using Clip = Matrix;

struct EncoderDims {
  int frames = 4;     // L
  int features = 16;  // F
  int hidden = 32;    // H
  int embed = 32;     // D
};

/// Per-frame projection F->H with tanh, a per-unit softmax over the L frame
/// slots (temporal_logits is L x H), then H->D and normalization.
struct VideoEncoderParams {
  Matrix frame_proj;       // H x F
  Vector frame_bias;       // H
  Matrix temporal_logits;  // L x H
  Matrix out_proj;         // D x H
  Vector out_bias;         // D

  static VideoEncoderParams initialize(const EncoderDims& dims, std::uint64_t seed);
  static VideoEncoderParams zeros_like(const VideoEncoderParams& other);

  EncoderDims dims() const;
  bool all_finite() const;
};

/// Intermediate values of one forward pass, kept for the backward pass.
struct EncodeTrace {
  Clip clip;
  Matrix hidden;   // L x H, post-tanh
  Matrix weights;  // L x H, softmax over frames per unit
  Vector pooled;   // H
  Vector pre_norm; // D
  Embedding output;
};

Embedding encode_video(const Clip& clip, const VideoEncoderParams& params);
EncodeTrace encode_video_traced(const Clip& clip, const VideoEncoderParams& params);
/// Accumulates d loss / d params into grads given d loss / d output.
void encode_video_backward(const EncodeTrace& trace, const Vector& grad_output,
                           const VideoEncoderParams& params, VideoEncoderParams& grads);

struct TaskSpec {
  Task task;
  std::string expression;
  Embedding text_embedding;  // frozen y_T
};

/// Frozen per-task text embeddings. Gaussian draws orthogonalised in task
/// order (Gram-Schmidt) and normalized, so distinct tasks start orthogonal.
class TextTable {
 public:
  TextTable() = default;
  static TextTable initialize(int dim, std::uint64_t seed);

  /// Throws UnknownTask if the task has no entry.
  const TaskSpec& spec(Task task) const;
  const Embedding& text_embed(Task task) const { return spec(task).text_embedding; }
  bool contains(Task task) const { return specs_.count(task) != 0; }
  int dim() const { return dim_; }

  void set(Task task, const Embedding& embedding);
  const std::map<Task, TaskSpec>& entries() const { return specs_; }

 private:
  int dim_ = 0;
  std::map<Task, TaskSpec> specs_;
};

/// K trainable prompts (prompt_length x D) per task plus one shared D x D
/// pooling map. The failure context of (task, k) is
/// normalize(pool_map * mean_rows([P_k; y_T])).
class FailurePromptPool {
 public:
  FailurePromptPool() = default;
  FailurePromptPool(int clusters, int prompt_length, int dim);

  void add_task(Task task, Rng& rng);
  bool has_task(Task task) const { return prompts_.count(task) != 0; }
  std::vector<Task> tasks() const;

  int clusters() const { return clusters_; }
  int prompt_length() const { return prompt_length_; }
  int dim() const { return dim_; }

  /// Throws UnknownTask / BadClusterIndex.
  const Matrix& prompt(Task task, int k) const;
  Matrix& prompt(Task task, int k);
  std::vector<Matrix>& prompts(Task task);
  const std::vector<Matrix>& prompts(Task task) const;
  const Matrix& pool_map() const { return pool_map_; }
  Matrix& pool_map() { return pool_map_; }

  bool all_finite() const;

 private:
  int clusters_ = 0;
  int prompt_length_ = 0;
  int dim_ = 0;
  std::map<Task, std::vector<Matrix>> prompts_;
  Matrix pool_map_;
};

Embedding compose_failure_context(const FailurePromptPool& pool, const TaskSpec& task, int k);

/// Gradient of a loss through compose_failure_context.
struct ComposeGrad {
  Matrix prompt;    // same shape as the prompt
  Matrix pool_map;  // D x D
};
ComposeGrad compose_failure_context_backward(const FailurePromptPool& pool, const TaskSpec& task, int k,
                                             const Vector& grad_output);

}  // namespace failprompt
