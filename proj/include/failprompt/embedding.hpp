#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace failprompt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A feature vector in the shared embedding space. Producers in this library
/// always hand out unit-norm embeddings; loss functions accept arbitrary
/// vectors so that finite-difference checks can perturb them freely.
using Embedding = Vector;

/// Similarity matrix, entry (i, j) = a[i] . b[j].
using SimilarityMatrix = Matrix;

inline constexpr double kDefaultNormEpsilon = 1e-12;
inline constexpr double kDefaultTemperature = 0.07;

Embedding l2_normalize(const Vector& v, double eps = kDefaultNormEpsilon);

/// Pulls a gradient with respect to `l2_normalize(u)` back to `u`.
Vector l2_normalize_backward(const Vector& u, const Vector& grad_normalized);

SimilarityMatrix similarity_matrix(std::span<const Embedding> a, std::span<const Embedding> b);

double log_sum_exp(std::span<const double> values);

/// -log softmax(sims / tau)[pos_index], stabilised by max subtraction.
double nce_term(std::span<const double> sims, std::size_t pos_index, double tau);

struct NceResult {
  double value = 0.0;
  std::vector<double> grad;  // d value / d sims
};

/// Same as nce_term but with the gradient with respect to each similarity.
/// A general form: value = lse(sims / tau) - sum_j target[j] * sims[j] / tau,
/// where the target weights sum to one.
NceResult nce_term_with_grad(std::span<const double> sims, std::span<const double> target_weights,
                             double tau);

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient of f at theta.
std::vector<double> central_difference(const ScalarFunction& f, std::span<const double> theta,
                                       double eps = 1e-5);

/// max_i |analytic_i - numeric_i| / max(1, |numeric_i|) with central differences.
/// Throws NonFiniteValue if f is non-finite at any probe.
double finite_diff_grad_check(const ScalarFunction& f, std::span<const double> theta,
                              std::span<const double> analytic_grad, double eps = 1e-5);

}  // namespace failprompt
