#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"
#include "utori/curve_tools.hpp"
#include "utori/errors.hpp"

#include <cmath>
#include <numbers>

using namespace utori;

namespace {

const Complex I(0.0, 1.0);
constexpr double kTwoPi = 2 * std::numbers::pi;

MultiIndex at(int k) {
  MultiIndex m(1);
  m << k;
  return m;
}

// curve with f' = sum_k c_k exp(i k theta), k != 0
PeriodicSeries curve_from_derivative(std::initializer_list<std::pair<int, Complex>> terms) {
  int N = 0;
  for (const auto& t : terms) N = std::max(N, std::abs(t.first));
  PeriodicSeries f(1, N, false);
  for (const auto& [k, c] : terms) f.set_coeff(at(k), c / (I * static_cast<double>(k)));
  return f;
}

PeriodicSeries circle() { return curve_from_derivative({{1, 1.0}}); }

// cos theta + 2 i sin theta
PeriodicSeries ellipse() {
  PeriodicSeries f(1, 1, false);
  f.set_coeff(at(1), 1.5);
  f.set_coeff(at(-1), -0.5);
  return f;
}

Complex value(const PeriodicSeries& f, double th) {
  Eigen::VectorXd t(1);
  t << th;
  return eval(f, t);
}

}  // namespace

TEST_CASE("Gauss degree") {
  CHECK(gauss_degree(circle()) == 1);
  CHECK(gauss_degree(curve_from_derivative({{2, 1.0}})) == 2);
  CHECK(gauss_degree(ellipse()) == 1);
  CHECK(gauss_degree(curve_from_derivative({{-1, 1.0}})) == -1);
  CHECK(gauss_degree(reparametrize_by_phase(ellipse())) == 1);
  CHECK_THROWS_AS(gauss_degree(PeriodicSeries(1, 2, false)), HypothesisError);
}

TEST_CASE("phase derivative") {
  const auto c = noncritical_phase(circle());
  CHECK(c.noncritical);
  CHECK((c.dmu.array() - 1.0).abs().maxCoeff() < 1e-13);

  const auto e = noncritical_phase(ellipse());
  CHECK(e.noncritical);
  CHECK(e.dmu.minCoeff() > 0.0);
  // (x' y'' - y' x'') / |f'|^2 = 2 / (sin^2 + 4 cos^2)
  for (int g = 0; g < 4096; g += 97) {
    const double th = kTwoPi * g / 4096;
    CHECK(std::abs(e.dmu(g) - 2.0 / (std::sin(th) * std::sin(th) + 4 * std::cos(th) * std::cos(th))) < 1e-12);
  }

  // f' = exp(i theta) + 0.9 exp(2 i theta) is immersed with an inflection
  const auto bent = curve_from_derivative({{1, 1.0}, {2, 0.9}});
  CHECK(gauss_degree(bent) == 1);
  const auto b = noncritical_phase(bent);
  CHECK_FALSE(b.noncritical);
  CHECK(b.dmu.minCoeff() < 0.0);
  CHECK(b.dmu.maxCoeff() > 0.0);
}

TEST_CASE("phase reparametrization") {
  const auto c = reparametrize_by_phase(circle());
  CHECK((c - resize(circle(), c.degree())).coeffs().cwiseAbs().maxCoeff() < 1e-13);
  // same ellipse, and the new phase is s
  const auto e = reparametrize_by_phase(ellipse());
  const auto ep = derivative(e, 0);
  double on_curve = 0.0, phase = 0.0;
  for (int g = 0; g < 200; ++g) {
    const double s = kTwoPi * (g + 0.5) / 200;
    const Complex p = value(e, s);
    on_curve = std::max(on_curve, std::abs(p.real() * p.real() + p.imag() * p.imag() / 4 - 1.0));
    phase = std::max(phase, std::abs(std::remainder(std::arg(value(ep, s)) - s, kTwoPi)));
  }
  CHECK(on_curve < 1e-10);
  CHECK(phase < 1e-10);
  CHECK_THROWS_AS(reparametrize_by_phase(curve_from_derivative({{1, 1.0}, {2, 0.9}})), HypothesisError);
}

TEST_CASE("Whitney-Graustein homotopy") {
  const auto c = circle();
  for (double t : {0.0, 0.4, 1.0}) {
    const auto ft = whitney_homotopy(c, c, t);
    CHECK((ft - resize(c, ft.degree())).coeffs().cwiseAbs().maxCoeff() < 1e-13);
  }
  const auto e = ellipse();
  const auto e_rep = reparametrize_by_phase(e);
  CHECK((whitney_homotopy(c, e, 0.0) - resize(c, 64)).coeffs().cwiseAbs().maxCoeff() < 1e-13);
  CHECK((whitney_homotopy(c, e, 1.0) - e_rep).coeffs().cwiseAbs().maxCoeff() < 1e-13);
  double worst = 1e300;
  for (int s = 0; s < 50; ++s) {
    const auto ft = whitney_homotopy(c, e, s / 49.0);
    const auto ph = noncritical_phase(ft);
    CHECK(ph.noncritical);
    worst = std::min(worst, ph.min_abs);
    CHECK(gauss_degree(ft) == 1);
    // rho_t is a convex combination of the radii of curvature, 1 and at least 1/2
    CHECK(to_grid(derivative(ft, 0), 1024).cwiseAbs().minCoeff() >= 0.5 - 1e-9);
  }
  CHECK(worst > 0.1);

  try {
    whitney_homotopy(c, curve_from_derivative({{2, 1.0}}), 0.5);
    FAIL("expected refusal");
  } catch (const HypothesisError& err) {
    CHECK(err.bound() == "(degree)");
  }
}

TEST_CASE("embedding criterion") {
  const auto c = embedding_check(circle());
  CHECK(c.is_embedding);
  CHECK(c.I_f == 0);
  CHECK(c.grid_injective);

  const auto twice = embedding_check(curve_from_derivative({{2, 1.0}}));
  CHECK(twice.degree == 2);
  CHECK(twice.I_f == 1);
  CHECK_FALSE(twice.is_embedding);
  CHECK_FALSE(twice.grid_injective);

  const auto back = embedding_check(curve_from_derivative({{-1, 1.0}}));
  CHECK(back.I_f == 0);
  CHECK(back.is_embedding);

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    PeriodicSeries f = circle();
    const auto noise = utori::testing::with_norm(utori::testing::random_series(rng, 1, 4, false), 0.0, 0.02);
    f = resize(f, 4) + noise;
    const auto rep = embedding_check(f);
    CHECK(rep.is_embedding);
    CHECK(rep.I_f == 0);
    CHECK(rep.grid_injective);
  }
  CHECK_THROWS_AS(embedding_check(curve_from_derivative({{1, 1.0}, {2, 0.9}})), HypothesisError);
}
