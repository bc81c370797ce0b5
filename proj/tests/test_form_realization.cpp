#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"
#include "utori/errors.hpp"
#include "utori/form_realization.hpp"

#include <cmath>
#include <numbers>

using namespace utori;
using utori::testing::random_series;
using utori::testing::with_norm;

namespace {

const Complex I(0.0, 1.0);

PeriodicSeries z_power(int n, int N, const MultiIndex& k, Complex c) { return PeriodicSeries::monomial(n, N, k, c); }

MultiIndex idx(std::initializer_list<int> v) {
  MultiIndex m(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (int x : v) m(i++) = x;
  return m;
}

PeriodicSeries random_mean_zero(std::mt19937_64& rng, int n, int N, double r, double size) {
  PeriodicSeries a = random_series(rng, n, N, false);
  a.set_coeff(MultiIndex::Constant(n, -1), 0.0);
  return with_norm(a, r, size);
}

}  // namespace

TEST_CASE("K decomposition") {
  const double eps = 1e-3;
  const auto a1 = z_power(1, 3, idx({1}), eps);
  const auto K1 = k_decompose(a1);
  REQUIRE(K1.size() == 2);
  CHECK((K1[0] - a1).is_zero());
  CHECK(K1[1].is_zero());

  const auto obstruction = z_power(2, 3, idx({-1, -1}), 0.7);
  const auto K2 = k_decompose(obstruction);
  CHECK(K2[0].is_zero());
  CHECK(K2[1].is_zero());
  CHECK((K2[2] - obstruction).is_zero());

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const auto a = random_series(rng, n, 4, false);
    const auto K = k_decompose(a);
    PeriodicSeries sum(n, 4, false);
    for (const auto& k : K) sum += k;
    CHECK((sum - a).coeffs().cwiseAbs().maxCoeff() == 0.0);
    for (int j = 1; j <= n; ++j) CHECK(coeff_norm(K[j - 1], 0.5) <= 2 * std::exp(j) * coeff_norm(a, 0.5));
  }
}

TEST_CASE("mean zero check") {
  CHECK(mean_zero_check(z_power(2, 2, idx({1, 0}), 1e-3)).ok);
  CHECK(mean_zero_check(z_power(2, 2, idx({1, 0}), 1e-3)).defect == 0.0);
  const auto bad = mean_zero_check(z_power(2, 2, idx({-1, -1}), 1.0));
  CHECK_FALSE(bad.ok);
  CHECK(bad.defect == 1.0);
  std::mt19937_64 rng(6);
  CHECK(mean_zero_check(random_mean_zero(rng, 3, 3, 0.5, 1.0)).ok);
}

TEST_CASE("divergence field") {
  const double eps = 1e-3;
  const auto q1 = build_divergence_vector_field(z_power(1, 3, idx({1}), eps));
  const auto expect = z_power(1, 4, idx({2}), eps / 2);
  CHECK((q1.q[0] - expect).coeffs().cwiseAbs().maxCoeff() < 1e-20);

  const auto q0 = build_divergence_vector_field(PeriodicSeries(2, 3, false));
  for (const auto& q : q0.q) CHECK(q.is_zero());

  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const double r = 0.5;
    const auto a = random_mean_zero(rng, n, 4, r, 1.0);
    const auto v = build_divergence_vector_field(a);
    const auto div = holo_divergence(v);
    CHECK(coeff_norm(div - resize(a, div.degree()), 0.0) <= 1e-12);
    for (int j = 0; j < n; ++j) {
      CHECK(coeff_norm(v.q[j], r) <= 4 * std::numbers::pi * std::exp(j + 2) * coeff_norm(a, r));
      bool gauge = true;
      for_each_index(n, v.q[j].degree(), [&](Eigen::Index lin, const MultiIndex& k) {
        if (k(j) == 0 && v.q[j].coeffs()(lin) != Complex(0.0)) gauge = false;
      });
      CHECK(gauge);
    }
    // p_j(theta) = -i exp(-i theta_j) q_j(exp(i theta)) at a complex point
    const auto p = v.theta_field();
    Eigen::VectorXcd th(n);
    for (int j = 0; j < n; ++j) th(j) = Complex(0.3 + j, 0.1 * (j - 1));
    for (int j = 0; j < n; ++j)
      CHECK(std::abs(eval(p.p[j], th) - (-I * std::exp(-I * th(j)) * eval(v.q[j], th))) < 1e-12);
  }

  try {
    build_divergence_vector_field(z_power(2, 2, idx({-1, -1}), 1e-3));
    FAIL("expected refusal");
  } catch (const HypothesisError& e) {
    CHECK(e.bound() == "(kn)");
  }
}

TEST_CASE("zero form step") {
  const auto step = realization_step(PeriodicSeries(2, 3, false), 0.5, 0.05, 8);
  CHECK(step.psi.lift.perturbation_norm(0.5) == 0.0);
  CHECK(step.a_next.is_zero());
}

TEST_CASE("Riccati step matches the closed form") {
  const double eps = 1e-3;
  const auto a = z_power(1, 1, idx({1}), eps);
  const double r = 0.5, delta = RealizationSchedule::delta(0, 1);
  const auto step = realization_step(a, r, delta, 16);
  for (int g = 0; g < 16; ++g) {
    const double th = 2 * std::numbers::pi * (g + 0.37) / 16;
    Eigen::VectorXcd z(1);
    z(0) = std::exp(I * th);
    // psi(z) = z / (1 + eps z / 2)
    CHECK(std::abs(step.psi(z)(0) - z(0) / (1.0 + eps * z(0) / 2.0)) < 1e-10);
  }
  // 1 + a^ = (1 + 3x/2) / (1 + x/2)^3 with x = eps z
  double dev_exact = 0.0, dev_leading = 0.0;
  for (int g = 0; g < 64; ++g) {
    Eigen::VectorXd th(1);
    th(0) = 2 * std::numbers::pi * (g + 0.5) / 64;
    const Complex x = eps * std::exp(I * th(0));
    const Complex ah = eval(step.a_next, th);
    dev_exact = std::max(dev_exact, std::abs(ah - ((1.0 + 1.5 * x) / std::pow(1.0 + 0.5 * x, 3) - 1.0)));
    dev_leading = std::max(dev_leading, std::abs(ah + 0.75 * x * x));
  }
  CHECK(dev_exact < 1e-10);
  CHECK(dev_leading < 2 * eps * eps * eps);
  CHECK(step.reconstruction < 1e-9);
  CHECK(step.a_next_norm * r * delta / (step.a_norm * step.a_norm) <= KamConstants{}.c7 / 2);
}

TEST_CASE("random step: reconstruction and decay constant") {
  std::mt19937_64 rng(8);
  const KamConstants defaults;
  double c7 = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const double r = 0.5, delta = RealizationSchedule::delta(0, 2);
    const auto a = random_mean_zero(rng, 2, 4, r, 1e-4);
    const auto step = realization_step(a, r, delta, 16);
    CHECK(step.reconstruction < 1e-9);
    CHECK(step.flow_defect < 1e-12);
    CHECK(mean_zero_check(step.a_next).ok);
    c7 = std::max(c7, step.a_next_norm * r * delta / (step.a_norm * step.a_norm));
  }
  MESSAGE("measured c7 = " << c7);
  CHECK(c7 <= defaults.c7 / 2);
  CHECK(c7 <= 1e3);
}

TEST_CASE("realize the zero form") {
  const auto res = realize_form(PeriodicSeries(2, 3, false), RealizationSchedule{});
  CHECK(res.converged);
  CHECK(res.phi.lift.perturbation_norm(0.5) == 0.0);
  CHECK(res.det_residual < 1e-15);
}

TEST_CASE("realize the Riccati form") {
  const double eps = 1e-3;
  RealizationOptions o;
  o.eps = 0.01;  // ||eps z||_0.5 = 1.65e-3 is above the default eps r0
  const auto res = realize_form(z_power(1, 1, idx({1}), eps), RealizationSchedule{}, o);
  REQUIRE(res.converged);
  CHECK(res.det_residual <= 1e-8);
  CHECK(res.inverse_residual <= 1e-9);
  CHECK(res.totally_real);
  CHECK(res.noncritical);
  CHECK(res.embedding);
}

TEST_CASE("realize random forms in two variables") {
  std::mt19937_64 rng(9);
  const RealizationSchedule sched;
  for (int trial = 0; trial < 2; ++trial) {
    const auto a = random_mean_zero(rng, 2, 4, sched.r0, 1e-4);
    const auto res = realize_form(a, sched);
    REQUIRE(res.converged);
    CHECK(res.det_residual <= 1e-7);
    CHECK(res.inverse_residual <= 1e-9);
    CHECK(res.inverse_contraction < 1.0);
    CHECK(res.embedding);
    CHECK(res.noncritical);
    for (std::size_t m = 0; m + 2 < res.trace.size(); ++m) {
      CHECK(res.trace[m + 1].b < res.trace[m].b);
      CHECK(res.trace[m].contraction <= 1e3);
    }
  }
}

TEST_CASE("realization refusals") {
  try {
    realize_form(z_power(2, 2, idx({-1, -1}), 1e-5), RealizationSchedule{});
    FAIL("expected refusal");
  } catch (const HypothesisError& e) {
    CHECK(e.bound() == "(kn)");
  }
  try {
    realize_form(z_power(2, 2, idx({1, 0}), 0.1), RealizationSchedule{});
    FAIL("expected refusal");
  } catch (const HypothesisError& e) {
    CHECK(e.bound() == "(smalla)");
  }
  CHECK_THROWS_AS(realization_step(z_power(2, 2, idx({1, 0}), 0.5), 0.5, 0.01, 8), HypothesisError);
}
