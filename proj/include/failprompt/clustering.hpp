#pragma once

#include "failprompt/embedding.hpp"
#include "failprompt/tasks.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace failprompt {

struct ClusterState {
  Task task = Task::CloseDrawer;
  std::vector<Embedding> centers;  // K unit vectors
  std::vector<int> assignments;    // one per sample
  double objective = 0.0;          // (1/M) sum_i -v_i . C q_i
  std::size_t sample_count = 0;    // M
  int iterations = 0;
  std::vector<double> objective_history;  // after seeding, then after every iteration
};

/// Argmax-cosine assignment; ties go to the lowest cluster index.
std::vector<int> assign_pseudo_labels(std::span<const Embedding> centers, std::span<const Embedding> features);
std::vector<int> assign_pseudo_labels(const ClusterState& state, std::span<const Embedding> features);

double clustering_objective(std::span<const Embedding> centers, std::span<const Embedding> features,
                            std::span<const int> assignments);

inline constexpr int kDefaultKmeansRestarts = 8;

/// Spherical K-means with k-means++ seeding under cosine distance. Empty
/// clusters are reseeded with the sample farthest from its current center.
/// The run with the lowest objective out of `restarts` seedings is kept.
/// Throws TooFewSamples if features.size() < k.
ClusterState spherical_kmeans(std::span<const Embedding> features, int k, int max_iters, std::uint64_t seed,
                              Task task = Task::CloseDrawer, int restarts = kDefaultKmeansRestarts);

/// Permutation pi maximizing sum_k prev[k] . next[pi[k]] (Hungarian method).
/// Throws SizeMismatch.
std::vector<int> align_clusters(std::span<const Embedding> prev_centers, std::span<const Embedding> new_centers);

/// Relabels `state` so that new cluster pi[k] becomes cluster k.
void apply_alignment(ClusterState& state, std::span<const int> permutation);

/// Fraction of labels that differ between two assignment vectors.
double label_churn(std::span<const int> previous, std::span<const int> current);

/// Max-weight perfect matching on a square matrix; result[row] = column.
std::vector<int> hungarian_max(const Matrix& weights);

}  // namespace failprompt
