#pragma once

#include "failprompt/encoders.hpp"
#include "failprompt/losses.hpp"
#include "failprompt/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace failprompt {

Embedding random_unit(Rng& rng, int dim);

struct LossCase {
  Batch batch;
  FailureTexts failure_texts;
};

/// Random unit-norm batch over two tasks where every success anchor has a
/// same-task partner.
LossCase random_loss_case(std::uint64_t seed, int dim = 6, int clusters = 3);

std::vector<double> flatten(const LossCase& c);
LossCase unflatten(const LossCase& shape, std::span<const double> theta);
/// Gradient in flatten() order; entries the loss did not touch are zero.
std::vector<double> flatten_grad(const LossCase& shape, const LossGrad& g);

using CaseLoss = std::function<LossGrad(const LossCase&)>;

/// Max relative error between the analytic gradient and central differences.
double loss_grad_error(const CaseLoss& loss, const LossCase& c, double eps = 1e-5);

std::vector<double> flatten(const VideoEncoderParams& p);
VideoEncoderParams unflatten(const VideoEncoderParams& shape, std::span<const double> theta);
Clip random_clip(Rng& rng, const EncoderDims& dims);

/// Gradient check of ||encode_video(clip) - target||^2 over every encoder parameter.
double encoder_grad_error(std::uint64_t seed, const EncoderDims& dims = {4, 5, 6, 5}, double eps = 1e-5);
/// Gradient check of w . compose_failure_context(pool, task, k) w.r.t. prompt k and the pooling map.
double compose_grad_error(std::uint64_t seed, int dim = 6, int clusters = 3, int prompt_length = 2, double eps = 1e-5);

struct GradSuiteEntry {
  std::string name;
  double max_error = 0.0;
};

/// Max error of each differentiable function over seeds first_seed .. first_seed + batches - 1.
std::vector<GradSuiteEntry> run_grad_suite(int batches, double eps = 1e-5, std::uint64_t first_seed = 1);

}  // namespace failprompt
