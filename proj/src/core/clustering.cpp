#include "failprompt/clustering.hpp"

#include "failprompt/error.hpp"
#include "failprompt/rng.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace failprompt {

std::vector<int> assign_pseudo_labels(std::span<const Embedding> centers, std::span<const Embedding> features) {
  std::vector<int> out(features.size(), 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double c = features[i].dot(centers[k]);
      if (c > best) {
        best = c;
        out[i] = static_cast<int>(k);
      }
    }
  }
  return out;
}

std::vector<int> assign_pseudo_labels(const ClusterState& state, std::span<const Embedding> features) {
  return assign_pseudo_labels(std::span<const Embedding>(state.centers), features);
}

double clustering_objective(std::span<const Embedding> centers, std::span<const Embedding> features,
                            std::span<const int> assignments) {
  if (features.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i)
    acc -= features[i].dot(centers[static_cast<std::size_t>(assignments[i])]);
  return acc / static_cast<double>(features.size());
}

namespace {

std::vector<Embedding> kmeans_pp_seed(std::span<const Embedding> features, int k, Rng& rng) {
  std::vector<Embedding> centers;
  centers.push_back(features[rng.index(features.size())]);
  std::vector<double> dist(features.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      double best = -1.0;
      for (const auto& c : centers) best = std::max(best, features[i].dot(c));
      dist[i] = std::max(0.0, 1.0 - best);
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      // Every sample coincides with a center; pick uniformly.
      pick = rng.index(features.size());
    } else {
      double r = rng.uniform() * total;
      pick = features.size() - 1;
      for (std::size_t i = 0; i < features.size(); ++i) {
        if (dist[i] <= 0.0) continue;
        r -= dist[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
      while (dist[pick] <= 0.0 && pick > 0) --pick;
    }
    centers.push_back(features[pick]);
  }
  return centers;
}

}  // namespace

namespace {

ClusterState kmeans_once(std::span<const Embedding> features, int k, int max_iters, Rng& rng, Task task) {
  ClusterState st;
  st.task = task;
  st.sample_count = features.size();
  st.centers = kmeans_pp_seed(features, k, rng);
  st.assignments = assign_pseudo_labels(std::span<const Embedding>(st.centers), features);
  st.objective = clustering_objective(st.centers, features, st.assignments);
  st.objective_history.push_back(st.objective);

  const std::size_t kk = static_cast<std::size_t>(k);
  for (int iter = 0; iter < max_iters; ++iter) {
    // Center update.
    std::vector<Vector> sums(kk, Vector::Zero(features[0].size()));
    std::vector<std::size_t> counts(kk, 0);
    for (std::size_t i = 0; i < features.size(); ++i) {
      sums[static_cast<std::size_t>(st.assignments[i])] += features[i];
      ++counts[static_cast<std::size_t>(st.assignments[i])];
    }
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] > 0 && sums[c].norm() > kDefaultNormEpsilon) st.centers[c] = sums[c].normalized();
    }
    // Empty-cluster repair.
    for (std::size_t c = 0; c < kk; ++c) {
      if (counts[c] != 0) continue;
      std::size_t farthest = 0;
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < features.size(); ++i) {
        const auto own = static_cast<std::size_t>(st.assignments[i]);
        if (counts[own] <= 1) continue;
        const double cos = features[i].dot(st.centers[own]);
        if (cos < worst) {
          worst = cos;
          farthest = i;
        }
      }
      if (worst == std::numeric_limits<double>::infinity()) continue;
      --counts[static_cast<std::size_t>(st.assignments[farthest])];
      st.centers[c] = features[farthest];
      st.assignments[farthest] = static_cast<int>(c);
      counts[c] = 1;
    }
    // Assignment step.
    std::vector<int> next = assign_pseudo_labels(std::span<const Embedding>(st.centers), features);
    const bool fixed_point = next == st.assignments;
    st.assignments = std::move(next);
    st.objective = clustering_objective(st.centers, features, st.assignments);
    st.objective_history.push_back(st.objective);
    st.iterations = iter + 1;
    if (fixed_point) break;
  }
  return st;
}

}  // namespace

ClusterState spherical_kmeans(std::span<const Embedding> features, int k, int max_iters, std::uint64_t seed,
                              Task task, int restarts) {
  if (k < 1) throw Error(ErrorCode::BadConfig, "K must be positive");
  if (restarts < 1) throw Error(ErrorCode::BadConfig, "restarts must be positive");
  if (features.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(features.size()) + " samples for " + std::to_string(k) + " clusters");
  }
  ClusterState best;
  for (int r = 0; r < restarts; ++r) {
    Rng rng(mix_seed(seed, 0x6b6d + static_cast<std::uint64_t>(r)));
    ClusterState st = kmeans_once(features, k, max_iters, rng, task);
    if (r == 0 || st.objective < best.objective) best = std::move(st);
  }
  return best;
}

std::vector<int> hungarian_max(const Matrix& weights) {
  const int n = static_cast<int>(weights.rows());
  if (weights.cols() != n) throw Error(ErrorCode::SizeMismatch, "assignment matrix must be square");
  // Minimization form of the O(n^3) potentials algorithm on cost = -weights.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = -weights(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> result(static_cast<std::size_t>(n), 0);
  for (int j = 1; j <= n; ++j) result[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return result;
}

std::vector<int> align_clusters(std::span<const Embedding> prev_centers, std::span<const Embedding> new_centers) {
  if (prev_centers.size() != new_centers.size()) {
    throw Error(ErrorCode::SizeMismatch, std::to_string(prev_centers.size()) + " previous vs " +
                                             std::to_string(new_centers.size()) + " new centers");
  }
  return hungarian_max(similarity_matrix(prev_centers, new_centers));
}

void apply_alignment(ClusterState& state, std::span<const int> permutation) {
  const std::size_t k = permutation.size();
  if (k != state.centers.size()) throw Error(ErrorCode::SizeMismatch, "permutation length");
  std::vector<Embedding> centers(k);
  std::vector<int> inverse(k);
  for (std::size_t i = 0; i < k; ++i) {
    centers[i] = state.centers[static_cast<std::size_t>(permutation[i])];
    inverse[static_cast<std::size_t>(permutation[i])] = static_cast<int>(i);
  }
  state.centers = std::move(centers);
  for (int& a : state.assignments) a = inverse[static_cast<std::size_t>(a)];
}

double label_churn(std::span<const int> previous, std::span<const int> current) {
  if (previous.size() != current.size()) throw Error(ErrorCode::SizeMismatch, "assignment lengths differ");
  if (previous.empty()) return 0.0;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < previous.size(); ++i) changed += previous[i] != current[i] ? 1 : 0;
  return static_cast<double>(changed) / static_cast<double>(previous.size());
}

}  // namespace failprompt
