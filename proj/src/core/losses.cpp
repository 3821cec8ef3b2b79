#include "failprompt/losses.hpp"

#include "failprompt/error.hpp"

#include <cmath>
#include <string>

namespace failprompt {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const Embedding& text_for(const Batch& batch, Task task) {
  auto it = batch.texts.find(task);
  if (it == batch.texts.end()) throw Error(ErrorCode::UnknownTask, "batch has no text for " + std::string(task_name(task)));
  return it->second;
}

void check_sizes(const Batch& b) {
  if (b.human.size() != b.human_tasks.size() || b.robot_success.size() != b.robot_success_tasks.size() ||
      b.robot_failure.size() != b.robot_failure_tasks.size() ||
      b.robot_failure.size() != b.failure_clusters.size()) {
    throw Error(ErrorCode::ShapeMismatch, "batch strata and their labels differ in length");
  }
}

// Views over the B = B_h + B_r success samples.
struct SuccessSet {
  std::vector<const Embedding*> videos;
  std::vector<Task> tasks;
  std::vector<bool> robot;
};

SuccessSet success_set(const Batch& b) {
  SuccessSet s;
  for (std::size_t i = 0; i < b.human.size(); ++i) {
    s.videos.push_back(&b.human[i]);
    s.tasks.push_back(b.human_tasks[i]);
    s.robot.push_back(false);
  }
  for (std::size_t i = 0; i < b.robot_success.size(); ++i) {
    s.videos.push_back(&b.robot_success[i]);
    s.tasks.push_back(b.robot_success_tasks[i]);
    s.robot.push_back(true);
  }
  return s;
}

Vector& success_grad(LossGrad& g, const Batch& b, std::size_t i) {
  return i < b.human.size() ? g.human[i] : g.robot_success[i - b.human.size()];
}

}  // namespace

LossGrad LossGrad::zeros_for(const Batch& batch, const FailureTexts* failure_texts) {
  LossGrad g;
  for (const auto& v : batch.human) g.human.push_back(Vector::Zero(v.size()));
  for (const auto& v : batch.robot_success) g.robot_success.push_back(Vector::Zero(v.size()));
  for (const auto& v : batch.robot_failure) g.robot_failure.push_back(Vector::Zero(v.size()));
  for (const auto& [task, t] : batch.texts) g.texts[task] = Vector::Zero(t.size());
  if (failure_texts) {
    for (const auto& [task, list] : *failure_texts) {
      auto& out = g.failure_texts[task];
      for (const auto& t : list) out.push_back(Vector::Zero(t.size()));
    }
  }
  return g;
}

LossGrad& LossGrad::add_scaled(const LossGrad& other, double weight) {
  value += weight * other.value;
  auto add_list = [weight](std::vector<Vector>& dst, const std::vector<Vector>& src) {
    if (dst.size() < src.size()) dst.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (dst[i].size() == 0) dst[i] = Vector::Zero(src[i].size());
      dst[i] += weight * src[i];
    }
  };
  add_list(human, other.human);
  add_list(robot_success, other.robot_success);
  add_list(robot_failure, other.robot_failure);
  for (const auto& [task, g] : other.texts) {
    auto it = texts.find(task);
    if (it == texts.end()) texts[task] = weight * g;
    else it->second += weight * g;
  }
  for (const auto& [task, list] : other.failure_texts) add_list(failure_texts[task], list);
  return *this;
}

LossGrad cdc_loss(const Batch& batch, const CdcOptions& options) {
  check_sizes(batch);
  if (batch.human.empty() || batch.robot_success.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "CDC needs at least one human and one robot success sample");
  }
  const SuccessSet s = success_set(batch);
  const std::size_t n = s.videos.size();
  LossGrad g = LossGrad::zeros_for(batch);
  std::vector<double> sims;
  std::vector<double> targets;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) {
    sims.clear();
    targets.clear();
    index.clear();
    std::size_t others_same = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && s.tasks[j] == s.tasks[i]) ++others_same;
      if (options.exclude_self && j == i) continue;
      sims.push_back(s.videos[i]->dot(*s.videos[j]));
      targets.push_back(s.tasks[j] == s.tasks[i] ? 1.0 : 0.0);
      index.push_back(j);
    }
    if (others_same == 0) {
      throw Error(ErrorCode::EmptyPositiveSet,
                  "anchor " + std::to_string(i) + " (" + std::string(task_name(s.tasks[i])) + ") has no positive");
    }
    double positives = 0.0;
    for (double t : targets) positives += t;
    for (double& t : targets) t /= positives;
    const NceResult r = nce_term_with_grad(sims, targets, batch.tau);
    g.value += r.value;
    Vector& gi = success_grad(g, batch, i);
    for (std::size_t c = 0; c < index.size(); ++c) {
      const std::size_t j = index[c];
      gi += r.grad[c] * *s.videos[j];
      success_grad(g, batch, j) += r.grad[c] * *s.videos[i];
    }
  }
  return g;
}

LossGrad vlc_loss(const Batch& batch, const FailureTexts* failure_texts) {
  check_sizes(batch);
  const SuccessSet s = success_set(batch);
  const std::size_t n = s.videos.size();
  LossGrad g = LossGrad::zeros_for(batch, failure_texts);
  std::vector<const Embedding*> texts;
  for (Task t : s.tasks) texts.push_back(&text_for(batch, t));
  for (std::size_t i = 0; i < n; ++i) {
    if (s.videos[i]->size() != texts[i]->size()) throw Error(ErrorCode::ShapeMismatch, "video/text width differ");
  }

  std::vector<double> sims;
  std::vector<double> targets;
  // video -> text
  for (std::size_t i = 0; i < n; ++i) {
    const Embedding& v = *s.videos[i];
    const std::vector<Embedding>* negatives = nullptr;
    if (failure_texts) {
      auto it = failure_texts->find(s.tasks[i]);
      if (it != failure_texts->end() && !it->second.empty()) {
        negatives = &it->second;
      } else if (s.robot[i]) {
        throw Error(ErrorCode::MissingFailureTexts,
                    "no failure texts for robot task " + std::string(task_name(s.tasks[i])));
      }
    }
    sims.assign(n, 0.0);
    targets.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) sims[j] = v.dot(*texts[j]);
    targets[i] = 1.0;
    if (negatives) {
      for (const Embedding& tf : *negatives) {
        sims.push_back(v.dot(tf));
        targets.push_back(0.0);
      }
    }
    const NceResult r = nce_term_with_grad(sims, targets, batch.tau);
    g.value += r.value;
    Vector& gv = success_grad(g, batch, i);
    for (std::size_t j = 0; j < n; ++j) {
      gv += r.grad[j] * *texts[j];
      g.texts[s.tasks[j]] += r.grad[j] * v;
    }
    if (negatives) {
      auto& gf = g.failure_texts[s.tasks[i]];
      for (std::size_t k = 0; k < negatives->size(); ++k) {
        gv += r.grad[n + k] * (*negatives)[k];
        gf[k] += r.grad[n + k] * v;
      }
    }
  }
  // text -> video
  for (std::size_t i = 0; i < n; ++i) {
    const Embedding& t = *texts[i];
    sims.assign(n, 0.0);
    targets.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) sims[j] = t.dot(*s.videos[j]);
    targets[i] = 1.0;
    const NceResult r = nce_term_with_grad(sims, targets, batch.tau);
    g.value += r.value;
    Vector& gt = g.texts[s.tasks[i]];
    for (std::size_t j = 0; j < n; ++j) {
      gt += r.grad[j] * *s.videos[j];
      success_grad(g, batch, j) += r.grad[j] * t;
    }
  }
  return g;
}

LossGrad bce_loss(const Batch& batch) {
  check_sizes(batch);
  LossGrad g = LossGrad::zeros_for(batch);
  auto term = [&](const Embedding& v, Task task, double label, Vector& gv) {
    const Embedding& t = text_for(batch, task);
    if (v.size() != t.size()) throw Error(ErrorCode::ShapeMismatch, "video/text width differ");
    const double s = v.dot(t);
    g.value += label > 0.5 ? softplus(-s) : softplus(s);
    const double ds = sigmoid(s) - label;
    gv += ds * t;
    g.texts[task] += ds * v;
  };
  for (std::size_t i = 0; i < batch.robot_success.size(); ++i)
    term(batch.robot_success[i], batch.robot_success_tasks[i], 1.0, g.robot_success[i]);
  for (std::size_t i = 0; i < batch.robot_failure.size(); ++i)
    term(batch.robot_failure[i], batch.robot_failure_tasks[i], 0.0, g.robot_failure[i]);
  return g;
}

LossGrad fvlc_loss(const Batch& batch, const FailureTexts& failure_texts) {
  check_sizes(batch);
  LossGrad g = LossGrad::zeros_for(batch, &failure_texts);
  std::vector<double> sims;
  std::vector<double> targets;
  for (std::size_t i = 0; i < batch.robot_failure.size(); ++i) {
    const Task task = batch.robot_failure_tasks[i];
    auto it = failure_texts.find(task);
    if (it == failure_texts.end() || it->second.empty()) {
      throw Error(ErrorCode::MissingFailureTexts, "no failure texts for " + std::string(task_name(task)));
    }
    const auto& negatives = it->second;
    const int k_star = batch.failure_clusters[i];
    if (k_star < 0 || k_star >= static_cast<int>(negatives.size())) {
      throw Error(ErrorCode::BadClusterIndex, "assigned cluster " + std::to_string(k_star));
    }
    const Embedding& v = batch.robot_failure[i];
    const Embedding& t = text_for(batch, task);
    sims.assign(1, v.dot(t));
    targets.assign(1 + negatives.size(), 0.0);
    for (const Embedding& tf : negatives) sims.push_back(v.dot(tf));
    targets[1 + static_cast<std::size_t>(k_star)] = 1.0;
    const NceResult r = nce_term_with_grad(sims, targets, batch.tau);
    g.value += r.value;
    Vector& gv = g.robot_failure[i];
    gv += r.grad[0] * t;
    g.texts[task] += r.grad[0] * v;
    auto& gf = g.failure_texts[task];
    for (std::size_t k = 0; k < negatives.size(); ++k) {
      gv += r.grad[1 + k] * negatives[k];
      gf[k] += r.grad[1 + k] * v;
    }
  }
  return g;
}

std::string_view training_mode_name(TrainingMode mode) noexcept {
  switch (mode) {
    case TrainingMode::NoFailure: return "no_failure";
    case TrainingMode::Bce: return "bce";
    case TrainingMode::Fvlc: return "fvlc";
  }
  return "unknown";
}

TrainingMode parse_training_mode(std::string_view name) {
  if (name == "no_failure") return TrainingMode::NoFailure;
  if (name == "bce") return TrainingMode::Bce;
  if (name == "fvlc") return TrainingMode::Fvlc;
  throw Error(ErrorCode::BadConfig, "unknown training mode '" + std::string(name) + "'");
}

LossGrad total_loss(const Batch& batch, const FailureTexts* failure_texts, TrainingMode mode,
                    const LossWeights& weights, const CdcOptions& cdc, LossBreakdown* breakdown) {
  LossGrad total = LossGrad::zeros_for(batch, mode == TrainingMode::Fvlc ? failure_texts : nullptr);
  const LossGrad c = cdc_loss(batch, cdc);
  total.add_scaled(c, weights.cdc);
  LossBreakdown parts;
  parts.cdc = c.value;
  switch (mode) {
    case TrainingMode::NoFailure: {
      const LossGrad v = vlc_loss(batch, nullptr);
      total.add_scaled(v, weights.vlc);
      parts.vlc = v.value;
      break;
    }
    case TrainingMode::Bce: {
      const LossGrad v = vlc_loss(batch, nullptr);
      const LossGrad b = bce_loss(batch);
      total.add_scaled(v, weights.vlc).add_scaled(b, weights.failure);
      parts.vlc = v.value;
      parts.failure = b.value;
      break;
    }
    case TrainingMode::Fvlc: {
      if (!failure_texts) throw Error(ErrorCode::MissingFailureTexts, "fvlc mode needs failure texts");
      const LossGrad v = vlc_loss(batch, failure_texts);
      const LossGrad f = fvlc_loss(batch, *failure_texts);
      total.add_scaled(v, weights.vlc).add_scaled(f, weights.failure);
      parts.vlc = v.value;
      parts.failure = f.value;
      break;
    }
  }
  if (breakdown) *breakdown = parts;
  return total;
}

}  // namespace failprompt
