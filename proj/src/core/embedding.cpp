#include "failprompt/embedding.hpp"

#include "failprompt/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace failprompt {

Embedding l2_normalize(const Vector& v, double eps) {
  const double norm = v.norm();
  if (!(norm > eps)) throw Error(ErrorCode::ZeroVector, "cannot normalize vector of norm " + std::to_string(norm));
  return v / norm;
}

Vector l2_normalize_backward(const Vector& u, const Vector& grad_normalized) {
  const double norm = u.norm();
  const Vector unit = u / norm;
  return (grad_normalized - unit * unit.dot(grad_normalized)) / norm;
}

SimilarityMatrix similarity_matrix(std::span<const Embedding> a, std::span<const Embedding> b) {
  SimilarityMatrix out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (a[i].size() != b[j].size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "width " + std::to_string(a[i].size()) + " vs " + std::to_string(b[j].size()));
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i].dot(b[j]);
    }
  }
  return out;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

namespace {

void check_temperature(double tau) {
  if (!(tau > 0.0)) throw Error(ErrorCode::NonPositiveTemperature, "tau = " + std::to_string(tau));
}

}  // namespace

double nce_term(std::span<const double> sims, std::size_t pos_index, double tau) {
  check_temperature(tau);
  if (pos_index >= sims.size()) {
    throw Error(ErrorCode::BadIndex,
                "positive index " + std::to_string(pos_index) + " of " + std::to_string(sims.size()));
  }
  std::vector<double> logits(sims.begin(), sims.end());
  for (double& l : logits) l /= tau;
  return log_sum_exp(logits) - logits[pos_index];
}

NceResult nce_term_with_grad(std::span<const double> sims, std::span<const double> target_weights,
                             double tau) {
  check_temperature(tau);
  if (sims.size() != target_weights.size() || sims.empty()) {
    throw Error(ErrorCode::BadIndex, "target weights do not match similarity count");
  }
  std::vector<double> logits(sims.begin(), sims.end());
  for (double& l : logits) l /= tau;
  const double lse = log_sum_exp(logits);
  NceResult out;
  out.value = lse;
  out.grad.resize(sims.size());
  for (std::size_t j = 0; j < sims.size(); ++j) {
    out.value -= target_weights[j] * logits[j];
    out.grad[j] = (std::exp(logits[j] - lse) - target_weights[j]) / tau;
  }
  return out;
}

std::vector<double> central_difference(const ScalarFunction& f, std::span<const double> theta,
                                       double eps) {
  std::vector<double> probe(theta.begin(), theta.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(probe);
    probe[i] = saved - eps;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw Error(ErrorCode::NonFiniteValue, "function not finite near coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double finite_diff_grad_check(const ScalarFunction& f, std::span<const double> theta,
                              std::span<const double> analytic_grad, double eps) {
  if (analytic_grad.size() != theta.size()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient length differs from parameter length");
  }
  if (!std::isfinite(f(theta))) throw Error(ErrorCode::NonFiniteValue, "function not finite at theta");
  const std::vector<double> numeric = central_difference(f, theta, eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double err = std::abs(analytic_grad[i] - numeric[i]) / std::max(1.0, std::abs(numeric[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace failprompt
