#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "failprompt/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace failprompt;
using fp_test::angle;
using fp_test::brute_force_optimum;
using fp_test::random_unit;
using fp_test::throws_code;

namespace {

std::vector<int> brute_argmax(const std::vector<Embedding>& centers, const std::vector<Embedding>& xs) {
  std::vector<int> out;
  for (const auto& x : xs) {
    int best = 0;
    for (int k = 1; k < static_cast<int>(centers.size()); ++k)
      if (x.dot(centers[static_cast<std::size_t>(k)]) > x.dot(centers[static_cast<std::size_t>(best)])) best = k;
    out.push_back(best);
  }
  return out;
}

bool is_fixed_point(const ClusterState& st, const std::vector<Embedding>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double own = xs[i].dot(st.centers[static_cast<std::size_t>(st.assignments[i])]);
    for (const auto& c : st.centers)
      if (xs[i].dot(c) > own + 1e-12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("kmeans with M = K puts each point in its own cluster") {
  Rng rng(5);
  std::vector<Embedding> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(random_unit(rng, 6));
  const ClusterState st = spherical_kmeans(xs, 4, 20, 1);
  CHECK(st.objective == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<int> sorted = st.assignments;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("kmeans on two duplicated groups recovers them") {
  Rng rng(8);
  const Embedding a = random_unit(rng, 5), b = random_unit(rng, 5);
  std::vector<Embedding> xs = {a, b, a, a, b, b, a};
  const ClusterState st = spherical_kmeans(xs, 2, 20, 3);
  CHECK(st.objective == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(st.assignments[0] != st.assignments[1]);
  const Embedding& ca = st.centers[static_cast<std::size_t>(st.assignments[0])];
  CHECK((ca - a).norm() < 1e-12);
}

TEST_CASE("kmeans on four angles matches exhaustive enumeration") {
  std::vector<Embedding> xs = {angle(0), angle(10), angle(180), angle(190)};
  const double oracle = brute_force_optimum(xs, 2);
  CHECK(oracle == doctest::Approx(-std::cos(5.0 * std::acos(-1.0) / 180.0)).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(-0.996195).epsilon(1e-6));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ClusterState st = spherical_kmeans(xs, 2, 50, seed);
    CHECK(std::abs(st.objective - oracle) < 1e-12);
    CHECK(st.assignments[0] == st.assignments[1]);
    CHECK(st.assignments[2] == st.assignments[3]);
    CHECK(st.assignments[0] != st.assignments[2]);
  }
}

TEST_CASE("kmeans reaches the brute-force optimum on small instances") {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(mix_seed(seed, 91));
    const int m = 4 + static_cast<int>(rng.index(5));
    const int k = 1 + static_cast<int>(rng.index(3));
    const int dim = 2 + static_cast<int>(rng.index(4));
    std::vector<Embedding> xs;
    for (int i = 0; i < m; ++i) xs.push_back(random_unit(rng, dim));
    const ClusterState st = spherical_kmeans(xs, k, 100, seed);
    if (std::abs(st.objective - brute_force_optimum(xs, k)) < 1e-9) ++hits;
    else CHECK(is_fixed_point(st, xs));
  }
  CHECK(hits >= 45);
}

TEST_CASE("kmeans invariants on random data") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed + 1000);
    const int k = 1 + static_cast<int>(rng.index(5));
    const int m = k + static_cast<int>(rng.index(40));
    const int dim = 2 + static_cast<int>(rng.index(10));
    std::vector<Embedding> xs;
    for (int i = 0; i < m; ++i) xs.push_back(random_unit(rng, dim));
    const ClusterState st = spherical_kmeans(xs, k, 100, seed);
    INFO("seed " << seed);
    CHECK(st.centers.size() == static_cast<std::size_t>(k));
    CHECK(st.sample_count == static_cast<std::size_t>(m));
    for (const auto& c : st.centers) CHECK(std::abs(c.norm() - 1.0) < 1e-6);
    CHECK(st.objective >= -1.0);
    CHECK(st.objective <= 1.0);
    for (std::size_t i = 1; i < st.objective_history.size(); ++i)
      CHECK(st.objective_history[i] <= st.objective_history[i - 1] + 1e-12);
    CHECK(st.objective == doctest::Approx(clustering_objective(st.centers, xs, st.assignments)).epsilon(1e-12));
    CHECK(is_fixed_point(st, xs));

    const ClusterState again = spherical_kmeans(xs, k, 100, seed);
    CHECK(again.assignments == st.assignments);
    CHECK(again.objective == st.objective);
  }
}

TEST_CASE("kmeans errors") {
  Rng rng(1);
  std::vector<Embedding> xs = {random_unit(rng, 3), random_unit(rng, 3)};
  CHECK(throws_code([&] { spherical_kmeans(xs, 3, 10, 0); }, ErrorCode::TooFewSamples));
  CHECK(throws_code([&] { spherical_kmeans(xs, 0, 10, 0); }, ErrorCode::BadConfig));
}

TEST_CASE("pseudo-label assignment") {
  Rng rng(2);
  std::vector<Embedding> centers = {random_unit(rng, 4), random_unit(rng, 4), random_unit(rng, 4)};
  CHECK(assign_pseudo_labels(centers, std::vector<Embedding>{centers[1]}) == std::vector<int>{1});

  // Equal cosine to centers 0 and 2.
  std::vector<Embedding> tie = {Vector::Unit(3, 0), -Vector::Unit(3, 0), Vector::Unit(3, 1)};
  CHECK(assign_pseudo_labels(tie, std::vector<Embedding>{Vector::Unit(3, 2)}) == std::vector<int>{0});
  std::vector<Embedding> tie2 = {Vector::Unit(3, 0), Vector::Unit(3, 2), Vector::Unit(3, 0)};
  CHECK(assign_pseudo_labels(tie2, std::vector<Embedding>{Vector::Unit(3, 0)}) == std::vector<int>{0});

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    std::vector<Embedding> cs, xs;
    for (int k = 0; k < 5; ++k) cs.push_back(random_unit(r, 6));
    for (int i = 0; i < 30; ++i) xs.push_back(random_unit(r, 6));
    CHECK(assign_pseudo_labels(cs, xs) == brute_argmax(cs, xs));
  }
}

TEST_CASE("cluster alignment") {
  Rng rng(4);
  std::vector<Embedding> prev;
  for (int k = 0; k < 4; ++k) prev.push_back(random_unit(rng, 5));
  CHECK(align_clusters(prev, prev) == std::vector<int>{0, 1, 2, 3});
  std::vector<Embedding> swapped = {prev[1], prev[0], prev[2], prev[3]};
  CHECK(align_clusters(prev, swapped) == std::vector<int>{1, 0, 2, 3});

  // Exhaustive search over 3! permutations.
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng r(seed);
    std::vector<Embedding> a, b;
    for (int k = 0; k < 3; ++k) a.push_back(random_unit(r, 4));
    for (int k = 0; k < 3; ++k) b.push_back(random_unit(r, 4));
    std::vector<int> perm = {0, 1, 2}, best;
    double best_score = -1e9;
    do {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[static_cast<std::size_t>(k)].dot(b[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])]);
      if (s > best_score) {
        best_score = s;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(align_clusters(a, b) == best);
  }

  // align(A, A permuted) recovers every permutation.
  std::vector<Embedding> a;
  Rng r(77);
  for (int k = 0; k < 4; ++k) a.push_back(random_unit(r, 8));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) REQUIRE(a[i].dot(a[j]) < 0.99);
  std::vector<int> perm = {0, 1, 2, 3};
  do {
    std::vector<Embedding> b(4);
    for (std::size_t k = 0; k < 4; ++k) b[static_cast<std::size_t>(perm[k])] = a[k];
    CHECK(align_clusters(a, b) == perm);
  } while (std::next_permutation(perm.begin(), perm.end()));

  CHECK(throws_code([&] { align_clusters(a, std::vector<Embedding>(a.begin(), a.begin() + 3)); },
                    ErrorCode::SizeMismatch));
}

TEST_CASE("apply_alignment relabels centers and assignments") {
  ClusterState st;
  st.centers = {Vector::Unit(3, 0), Vector::Unit(3, 1), Vector::Unit(3, 2)};
  st.assignments = {0, 1, 2, 2};
  const std::vector<Embedding> old_centers = st.centers;
  const std::vector<int> pi = {2, 0, 1};
  apply_alignment(st, pi);
  for (std::size_t k = 0; k < 3; ++k) CHECK((st.centers[k] - old_centers[static_cast<std::size_t>(pi[k])]).norm() == 0.0);
  CHECK(st.assignments == std::vector<int>{1, 2, 0, 0});
}

TEST_CASE("label churn") {
  CHECK(label_churn(std::vector<int>{0, 1, 2, 1}, std::vector<int>{0, 1, 2, 1}) == 0.0);
  CHECK(label_churn(std::vector<int>{0, 1, 2, 1}, std::vector<int>{0, 2, 2, 0}) == 0.5);
  CHECK(throws_code([] { label_churn(std::vector<int>{0}, std::vector<int>{0, 1}); }, ErrorCode::SizeMismatch));
}

TEST_CASE("hungarian matches brute force on random square matrices") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const int n = 1 + static_cast<int>(rng.index(6));
    Matrix w(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) w(i, j) = rng.normal();
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    double best = -1e18;
    do {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += w(i, perm[static_cast<std::size_t>(i)]);
      best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const std::vector<int> got = hungarian_max(w);
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += w(i, got[static_cast<std::size_t>(i)]);
    CHECK(s == doctest::Approx(best).epsilon(1e-12));
    std::vector<int> sorted = got;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < n; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  }
}
