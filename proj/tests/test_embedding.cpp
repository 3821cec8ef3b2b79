#include "doctest.h"
#include "support.hpp"

#include "failprompt/embedding.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

using namespace failprompt;
using fp_test::random_unit;
using fp_test::throws_code;

TEST_CASE("l2_normalize") {
  Vector v(2);
  v << 3, 4;
  const Embedding u = l2_normalize(v);
  CHECK(u(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(u(1) == doctest::Approx(0.8).epsilon(1e-15));

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const Embedding w = random_unit(rng, 1 + i % 40);
    CHECK(std::abs(l2_normalize(w).norm() - 1.0) < 1e-12);
    CHECK((l2_normalize(w) - w).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK(throws_code([] { l2_normalize(Vector::Zero(2)); }, ErrorCode::ZeroVector));
  CHECK(throws_code([] { l2_normalize(Vector::Constant(3, 1e-14)); }, ErrorCode::ZeroVector));
}

TEST_CASE("l2_normalize_backward matches central differences") {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    Vector u(5), w(5);
    for (int i = 0; i < 5; ++i) {
      u(i) = rng.normal();
      w(i) = rng.normal();
    }
    const Vector g = l2_normalize_backward(u, w);
    std::vector<double> theta(u.data(), u.data() + 5), analytic(g.data(), g.data() + 5);
    const double err = finite_diff_grad_check(
        [&](std::span<const double> t) { return w.dot(l2_normalize(Eigen::Map<const Vector>(t.data(), 5))); }, theta,
        analytic);
    CHECK(err < 1e-8);
  }
}

TEST_CASE("similarity_matrix") {
  std::vector<Embedding> e{Vector::Unit(2, 0), Vector::Unit(2, 1)};
  CHECK(similarity_matrix(e, e).isApprox(Matrix::Identity(2, 2)));

  Vector a(2), b(2), c(2);
  a << 1, 0;
  b << 0.6, 0.8;
  c << 0, 1;
  std::vector<Embedding> left{a, b}, right{c};
  const SimilarityMatrix s = similarity_matrix(left, right);
  REQUIRE(s.rows() == 2);
  REQUIRE(s.cols() == 1);
  CHECK(s(0, 0) == 0.0);
  CHECK(s(1, 0) == doctest::Approx(0.8).epsilon(1e-15));

  Rng rng(1);
  std::vector<Embedding> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(random_unit(rng, 7));
  const SimilarityMatrix g = similarity_matrix(pts, pts);
  for (int i = 0; i < 12; ++i) {
    CHECK(std::abs(g(i, i) - 1.0) < 1e-12);
    for (int j = 0; j < 12; ++j) {
      CHECK(g(i, j) == g(j, i));
      CHECK(g(i, j) <= 1.0 + 1e-9);
      CHECK(g(i, j) >= -1.0 - 1e-9);
    }
  }
  std::vector<Embedding> wide{Vector::Zero(3)};
  CHECK(throws_code([&] { similarity_matrix(left, wide); }, ErrorCode::DimensionMismatch));
}

TEST_CASE("nce_term closed forms") {
  const std::vector<double> four{0.3, 0.3, 0.3, 0.3};
  for (std::size_t pos = 0; pos < 4; ++pos) {
    for (double tau : {0.01, 0.07, 1.0, 50.0}) CHECK(std::abs(nce_term(four, pos, tau) - std::log(4.0)) < 1e-12);
  }
  const std::vector<double> one{0.9};
  CHECK(nce_term(one, 0, 0.07) == 0.0);

  // -log(e^2 / (e^2 + 2)) evaluated in long double.
  const std::vector<double> sims{1.0, 0.0, 0.0};
  const long double e2 = std::exp(2.0L);
  const long double expected = -std::log(e2 / (e2 + 2.0L));
  CHECK(std::abs(nce_term(sims, 0, 0.5) - static_cast<double>(expected)) < 1e-14);

  for (int n = 1; n <= 1024; n *= 2) {
    std::vector<double> flat(static_cast<std::size_t>(n), -0.25);
    CHECK(std::abs(nce_term(flat, static_cast<std::size_t>(n - 1), 0.07) - std::log(static_cast<double>(n))) < 1e-9);
  }
}

TEST_CASE("nce_term is shift invariant and non-negative") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<double> sims(n), shifted(n);
    const double c = rng.uniform(-3, 3);
    for (std::size_t i = 0; i < n; ++i) {
      sims[i] = rng.uniform(-1, 1);
      shifted[i] = sims[i] + c;
    }
    const std::size_t pos = rng.index(n);
    const double tau = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    const double v = nce_term(sims, pos, tau);
    CHECK(v >= 0.0);
    CHECK(std::isfinite(v));
    CHECK(std::abs(v - nce_term(shifted, pos, tau)) < 1e-9 * std::max(1.0, v));
  }
}

TEST_CASE("nce_term errors") {
  const std::vector<double> sims{0.1, 0.2};
  CHECK(throws_code([&] { nce_term(sims, 2, 0.1); }, ErrorCode::BadIndex));
  CHECK(throws_code([&] { nce_term(sims, 0, 0.0); }, ErrorCode::NonPositiveTemperature));
  CHECK(throws_code([&] { nce_term(sims, 0, -1.0); }, ErrorCode::NonPositiveTemperature));
  const std::vector<double> none;
  CHECK(throws_code([&] { nce_term(none, 0, 0.1); }, ErrorCode::BadIndex));
}

TEST_CASE("nce_term_with_grad agrees with nce_term and central differences") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.index(6);
    std::vector<double> sims(n), target(n, 0.0);
    for (auto& s : sims) s = rng.uniform(-1, 1);
    const std::size_t pos = rng.index(n);
    target[pos] = 1.0;
    const double tau = rng.uniform(0.05, 2.0);
    const NceResult r = nce_term_with_grad(sims, target, tau);
    CHECK(std::abs(r.value - nce_term(sims, pos, tau)) < 1e-12);
    const double err = finite_diff_grad_check([&](std::span<const double> t) { return nce_term(t, pos, tau); }, sims,
                                              r.grad);
    CHECK(err < 1e-7);
  }
}

TEST_CASE("finite_diff_grad_check") {
  Rng rng(2);
  std::vector<double> theta(8);
  for (auto& t : theta) t = rng.normal();
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) grad[i] = 2.0 * theta[i];
  auto sq = [](std::span<const double> t) {
    double s = 0.0;
    for (double x : t) s += x * x;
    return s;
  };
  CHECK(finite_diff_grad_check(sq, theta, grad) < 1e-7);

  const std::vector<double> zero(theta.size(), 0.0);
  CHECK(finite_diff_grad_check([](std::span<const double>) { return 4.0; }, theta, zero) == 0.0);

  // A wrong gradient is caught.
  std::vector<double> wrong = grad;
  wrong[3] += 0.5;
  CHECK(finite_diff_grad_check(sq, theta, wrong) > 0.1);

  CHECK(throws_code(
      [&] {
        finite_diff_grad_check([](std::span<const double>) { return std::log(-1.0); }, theta, grad);
      },
      ErrorCode::NonFiniteValue));
}

TEST_CASE("cdc_loss gradient on a six-sample batch") {
  const auto c = fp_test::random_loss_case(606);
  const double err = fp_test::loss_grad_error([](const fp_test::LossCase& lc) { return cdc_loss(lc.batch); }, c);
  CHECK(err < 1e-4);
}

TEST_CASE("log_sum_exp is stable") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> small{-1000.0, -1000.0, -1000.0};
  CHECK(log_sum_exp(small) == doctest::Approx(-1000.0 + std::log(3.0)));
}
