#pragma once

#include "failprompt/embedding.hpp"
#include "failprompt/tasks.hpp"

#include <map>
#include <string_view>
#include <vector>

namespace failprompt {

/// Embedded training batch. Success samples (human then robot) form the
/// contrastive set of size B = B_h + B_r.
struct Batch {
  std::vector<Embedding> human;
  std::vector<Task> human_tasks;
  std::vector<Embedding> robot_success;
  std::vector<Task> robot_success_tasks;
  std::vector<Embedding> robot_failure;
  std::vector<Task> robot_failure_tasks;
  std::vector<int> failure_clusters;  // assigned k* per failure sample
  std::map<Task, Embedding> texts;    // t_T per task
  double tau = kDefaultTemperature;
};

/// Failure-context features t^f_{T,1..K} per task.
using FailureTexts = std::map<Task, std::vector<Embedding>>;

/// Loss value with gradients for every embedding that entered it.
struct LossGrad {
  double value = 0.0;
  std::vector<Vector> human;
  std::vector<Vector> robot_success;
  std::vector<Vector> robot_failure;
  std::map<Task, Vector> texts;
  std::map<Task, std::vector<Vector>> failure_texts;

  /// Zero gradients shaped like the batch.
  static LossGrad zeros_for(const Batch& batch, const FailureTexts* failure_texts = nullptr);
  LossGrad& add_scaled(const LossGrad& other, double weight);
};

struct CdcOptions {
  /// Drop the anchor from its own positive set and denominator (SupCon variant).
  bool exclude_self = false;
};

LossGrad cdc_loss(const Batch& batch, const CdcOptions& options = {});

/// Bidirectional video-text InfoNCE. With failure texts, the video->text
/// denominator of every anchor whose task has a pool also sums its K
/// failure contexts. Robot success anchors must have a pool in that mode.
LossGrad vlc_loss(const Batch& batch, const FailureTexts* failure_texts = nullptr);

/// Standard binary cross-entropy of sigma(v . t_T) over robot success (r=1)
/// and robot failure (r=0) samples.
LossGrad bce_loss(const Batch& batch);

/// Failure video-language contrastive loss over the failure samples.
LossGrad fvlc_loss(const Batch& batch, const FailureTexts& failure_texts);

enum class TrainingMode { NoFailure, Bce, Fvlc };

std::string_view training_mode_name(TrainingMode mode) noexcept;
/// Throws BadConfig.
TrainingMode parse_training_mode(std::string_view name);

struct LossWeights {
  double cdc = 1.0;
  double vlc = 1.0;
  double failure = 1.0;  // BCE or fVLC depending on mode
};

struct LossBreakdown {
  double cdc = 0.0;
  double vlc = 0.0;
  double failure = 0.0;
};

LossGrad total_loss(const Batch& batch, const FailureTexts* failure_texts, TrainingMode mode,
                    const LossWeights& weights = {}, const CdcOptions& cdc = {},
                    LossBreakdown* breakdown = nullptr);

}  // namespace failprompt
