#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"
#include "utori/errors.hpp"
#include "utori/kam_fibering.hpp"

#include <cmath>
#include <numbers>

using namespace utori;
using utori::testing::random_divergence_free;
using utori::testing::random_series;
using utori::testing::scaled;
using utori::testing::with_norm;

namespace {

MultiIndex e(int dim, int axis) {
  MultiIndex m = MultiIndex::Zero(dim);
  m(axis) = 1;
  return m;
}

PeriodicSeries sin_axis(int dim, int N, int axis, double c) {
  return PeriodicSeries::real_mode(dim, N, e(dim, axis), Complex(0.0, -0.5 * c));
}

PeriodicSeries cos_axis(int dim, int N, int axis, double c) {
  return PeriodicSeries::real_mode(dim, N, e(dim, axis), 0.5 * c);
}

}  // namespace

TEST_CASE("exact one-step shear example") {
  const double eps = 1e-3;
  const auto h = sin_axis(2, 6, 1, eps);
  const auto step = fibering_step(h, 0.5, KamSchedule::delta(0), 24);
  CHECK((step.p.p[0] - resize(h, 24)).coeffs().cwiseAbs().maxCoeff() < 1e-18);
  CHECK(step.p.p[1].is_zero());
  CHECK((step.phi.periodic(0) + resize(h, 24)).coeffs().cwiseAbs().maxCoeff() < 1e-17);
  CHECK(coeff_norm(step.k_next, 0.5) < 1e-15);
}

TEST_CASE("phase depending on theta_1 only is a fixed point") {
  const auto h = sin_axis(2, 6, 0, 1e-3);
  const auto step = fibering_step(h, 0.5, 0.05, 24);
  CHECK(step.b == 0.0);
  CHECK(step.phi.perturbation_norm(0.5) == 0.0);
  CHECK((step.k_next - resize(h, 24)).coeffs().cwiseAbs().maxCoeff() < 1e-18);
}

TEST_CASE("field is divergence free and step constants stay below the defaults") {
  std::mt19937_64 rng(101);
  const KamConstants defaults;
  double c2 = 0.0, c4 = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    const double r = 0.5, delta = KamSchedule::delta(0);
    const auto h = with_norm(random_series(rng, 2, 6, true), r, 1e-3 * r * r * r);
    const auto step = fibering_step(h, r, delta, 24);
    CHECK(step.divergence < 1e-14);
    CHECK(step.flow_defect < 1e-12);
    c2 = std::max(c2, step.p.norm((1 - delta) * r) * r * delta / step.b);
    c4 = std::max(c4, step.b_next * std::pow(r * delta, 3) / (step.b * step.b));
    // it3: ||f(., -1)||_{(1-2 delta) r} <= r delta
    CHECK(step.phi.perturbation_norm((1 - 2 * delta) * r) <= r * delta);
  }
  MESSAGE("measured c2 = " << c2 << ", c4 = " << c4);
  CHECK(c2 <= defaults.c2 / 2);
  CHECK(c4 <= defaults.c4 / 2);
  CHECK(c4 <= 1e4);
}

TEST_CASE("zero phase") {
  const auto res = fibering_normalize(PeriodicSeries(2, 6, true), KamSchedule{});
  CHECK(res.converged);
  CHECK(res.k.is_zero());
  CHECK(res.Phi.perturbation_norm(0.5) == 0.0);
}

TEST_CASE("shear example converges in one step") {
  FiberingOptions o;
  o.eps = 0.02;  // ||eps sin theta_2||_0.5 = 1.65e-3 is above the default eps r0^3
  const auto res = fibering_normalize(sin_axis(2, 6, 1, 1e-3), KamSchedule{}, o);
  CHECK(res.converged);
  CHECK(res.trace.size() == 2);
  CHECK(coeff_norm(res.k, 0.5) < 1e-12);
  CHECK(res.residual < 1e-12);
}

TEST_CASE("leading-order example") {
  const double eps = 1e-3;
  const auto h = sin_axis(2, 6, 0, eps) + multiply(cos_axis(2, 6, 0, eps), sin_axis(2, 6, 1, 1.0), 6).series;
  FiberingOptions o;
  o.check_smallh = false;
  const auto res = fibering_normalize(h, KamSchedule{}, o);
  REQUIRE(res.converged);
  CHECK(res.residual <= 1e-8);
  CHECK(res.volume_defect <= 1e-8);
  CHECK(std::abs(res.k.constant_term()) < 1e-15);
  const auto lead = restrict_leading(sin_axis(1, 6, 0, eps), 1);
  CHECK(coeff_norm(res.k - resize(lead, res.k.degree()), 0.0) < 10 * eps * eps);
}

TEST_CASE("random admissible phases: contraction, residual, volume") {
  std::mt19937_64 rng(202);
  const KamSchedule sched;
  for (int trial = 0; trial < 3; ++trial) {
    const auto h = with_norm(random_series(rng, 2, 6, true), sched.r0, 1e-3 * std::pow(sched.r0, 3));
    const auto res = fibering_normalize(h, sched);
    REQUIRE(res.converged);
    CHECK(res.residual <= 1e-8);
    CHECK(res.volume_defect <= 1e-8);
    CHECK(std::abs(res.k.constant_term()) == 0.0);
    for (std::size_t m = 1; m + 1 < res.trace.size(); ++m) CHECK(res.trace[m].b < res.trace[m - 1].b);
  }
}

TEST_CASE("k is invariant under volume-preserving precomposition") {
  std::mt19937_64 rng(303);
  const KamSchedule sched;
  const auto h = with_norm(random_series(rng, 2, 6, true), sched.r0, 0.5e-3 * std::pow(sched.r0, 3));
  const auto base = fibering_normalize(h, sched);
  REQUIRE(base.converged);
  const auto v = scaled(random_divergence_free(rng, 2, 4), sched.r0, 2e-5);
  const auto psi = flow(v, 1.0, sched.r0, 0.25).map;
  const PeriodicSeries h2 = (psi.periodic(0) + compose(h, psi, 24).series).as_real();
  FiberingOptions o;
  o.check_smallh = false;
  const auto other = fibering_normalize(h2, sched, o);
  REQUIRE(other.converged);
  CHECK(k_uniqueness_residual(base.k, other.k, false) <= 1e-6);
}

TEST_CASE("refusals and partial traces") {
  std::mt19937_64 rng(404);
  const auto big = with_norm(random_series(rng, 2, 6, true), 0.5, 0.1);
  try {
    fibering_normalize(big, KamSchedule{});
    FAIL("expected refusal");
  } catch (const HypothesisError& err) {
    CHECK(err.bound() == "(smallh)");
  }
  FiberingOptions o;
  o.check_smallh = false;
  const auto res = fibering_normalize(big, KamSchedule{}, o);
  CHECK_FALSE(res.converged);
  CHECK(res.failed_bound == "(b)");
  CHECK(res.trace.size() == 1);
  CHECK_THROWS_AS(fibering_step(big, 0.5, 0.3, 24), HypothesisError);
}

TEST_CASE("k uniqueness residual") {
  const auto s = restrict_leading(sin_axis(1, 4, 0, 1.0), 1);
  const auto c = restrict_leading(cos_axis(1, 4, 0, 1.0), 1);
  CHECK(k_uniqueness_residual(s, s, false) == 0.0);
  Eigen::VectorXd pi(1);
  pi << std::numbers::pi;
  CHECK(k_uniqueness_residual(s, translate(s, pi), true) < 1e-15);
  CHECK(k_uniqueness_residual(s, translate(s, pi), false) > 1.0);
  CHECK(std::abs(k_uniqueness_residual(s, c, true) - std::sqrt(2.0)) < 1e-3);
  CHECK_THROWS_AS(k_uniqueness_residual(PeriodicSeries::constant(1, 2, 1.0), s, false), HypothesisError);
}
