#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"
#include "utori/errors.hpp"
#include "utori/flows.hpp"
#include "utori/torus_map.hpp"

#include <cmath>

using namespace utori;
using utori::testing::random_divergence_free;
using utori::testing::random_series;
using utori::testing::scaled;
using utori::testing::with_norm;

namespace {

MultiIndex e(int dim, int axis, int k = 1) {
  MultiIndex m = MultiIndex::Zero(dim);
  m(axis) = k;
  return m;
}

PeriodicSeries sin_axis(int dim, int N, int axis, double c) {
  return PeriodicSeries::real_mode(dim, N, e(dim, axis), Complex(0.0, -0.5 * c));
}

double max_coeff_diff(const PeriodicSeries& a, const PeriodicSeries& b) {
  return (a - b).coeffs().cwiseAbs().maxCoeff();
}

// Central finite-difference Jacobian determinant of a map at theta.
double fd_det(const TorusMapLift& phi, const Eigen::VectorXd& th, double step = 1e-5) {
  const int n = phi.dim();
  Eigen::MatrixXd J(n, n);
  for (int l = 0; l < n; ++l) {
    Eigen::VectorXd a = th, b = th;
    a(l) += step;
    b(l) -= step;
    J.col(l) = (phi(a) - phi(b)) / (2 * step);
  }
  return J.determinant();
}

}  // namespace

TEST_CASE("flow of zero and constant fields") {
  const PeriodicVectorField zero({PeriodicSeries(2, 4, true), PeriodicSeries(2, 4, true)});
  const auto id = flow(zero, -1.0, 0.5, 0.25);
  CHECK(id.map.perturbation_norm(0.5) == 0.0);

  const double c = 1e-3;
  const PeriodicVectorField cst({PeriodicSeries::constant(2, 4, c), PeriodicSeries(2, 4, true)});
  const auto fr = flow(cst, 0.7, 0.5, 0.25);
  CHECK(std::abs(fr.map.periodic(0).constant_term() - 0.7 * c) < 1e-16);
  CHECK(fr.map.periodic(1).coeffs().cwiseAbs().maxCoeff() < 1e-18);
  CHECK(fr.step_count == 32);
}

TEST_CASE("shear flow is affine in time") {
  const double eps = 1e-3;
  const PeriodicVectorField v({sin_axis(2, 4, 1, eps), PeriodicSeries(2, 4, true)});
  for (double t : {-1.0, 0.3, 1.0}) {
    const auto fr = flow(v, t, 0.5, 0.25);
    CHECK(max_coeff_diff(fr.map.periodic(0), t * sin_axis(2, 4, 1, eps)) < 1e-17);
    CHECK(fr.map.periodic(1).coeffs().cwiseAbs().maxCoeff() < 1e-18);
    CHECK(fr.defect < 1e-15);
  }
}

TEST_CASE("flow refuses outside the z1 regime") {
  const PeriodicVectorField v({sin_axis(2, 4, 1, 0.2), PeriodicSeries(2, 4, true)});
  try {
    flow(v, 1.0, 0.5, 0.1);
    FAIL("expected refusal");
  } catch (const HypothesisError& err) {
    CHECK(err.bound() == "(z1)");
  }
  CHECK_THROWS_AS(flow(v, 1.0, 0.5, 0.6), HypothesisError);
}

TEST_CASE("divergence") {
  CHECK(divergence(PeriodicVectorField({sin_axis(2, 3, 1, 1.0), PeriodicSeries(2, 3, true)})).is_zero());
  const auto d = divergence(PeriodicVectorField({sin_axis(2, 3, 0, 1.0), PeriodicSeries(2, 3, true)}));
  CHECK(max_coeff_diff(d, PeriodicSeries::real_mode(2, 3, e(2, 0), 0.5)) < 1e-16);
  std::mt19937_64 rng(1);
  for (int n = 2; n <= 3; ++n) CHECK(divergence(random_divergence_free(rng, n, 4)).coeffs().cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("flow estimates z2 and z3 on random fields") {
  std::mt19937_64 rng(31);
  const double r1 = 0.5, delta = 0.2;
  for (int trial = 0; trial < 6; ++trial) {
    const int n = 2;
    std::vector<PeriodicSeries> comps;
    for (int j = 0; j < n; ++j) comps.push_back(random_series(rng, n, 4, true));
    const auto v = scaled(PeriodicVectorField(comps), r1, 0.05 * r1 * delta);
    const double p = v.norm(r1);
    for (double t : {-1.0, 0.5}) {
      FlowOptions o;
      o.degree = 16;
      const auto fr = flow(v, t, r1, delta, o);
      CHECK(fr.map.perturbation_norm((1 - delta) * r1) <= p);
      for (int j = 0; j < n; ++j) {
        const double dev = coeff_norm(fr.map.periodic(j) - t * v.p[j], (1 - 2 * delta) * r1);
        CHECK(dev <= n * p * p / (r1 * delta));
      }
    }
  }
}

TEST_CASE("divergence-free flows preserve volume and obey the group law") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 3; ++trial) {
    const auto v = scaled(random_divergence_free(rng, 2, 4), 0.5, 5e-3);
    FlowOptions o;
    o.degree = 20;
    o.log_det = true;
    const auto f1 = flow(v, 1.0, 0.5, 0.25, o);
    CHECK(f1.log_det.coeffs().cwiseAbs().maxCoeff() < 1e-10);
    const int M = default_grid(20);
    const auto det = jacobian_det_on_grid(f1.map, M, 0.5);
    CHECK((det.array() - 1.0).abs().maxCoeff() < 1e-8);
    Eigen::VectorXd th(2);
    th << 0.4, 2.5;
    CHECK(std::abs(fd_det(f1.map, th) - 1.0) < 1e-8);

    const auto fs = flow(v, 0.4, 0.5, 0.25, o).map;
    const auto ft = flow(v, -0.9, 0.5, 0.25, o).map;
    const auto fst = flow(v, -0.5, 0.5, 0.25, o).map;
    const auto comp = compose_maps(fs, ft, 20);
    for (int j = 0; j < 2; ++j) CHECK(max_coeff_diff(comp.periodic(j), fst.periodic(j)) < 1e-10);
  }
}

TEST_CASE("log-det for a compressible field matches finite differences") {
  const double eps = 5e-3;
  const PeriodicVectorField v({sin_axis(2, 3, 0, eps), PeriodicSeries(2, 3, true)});
  FlowOptions o;
  o.degree = 20;
  o.log_det = true;
  for (double t : {0.0, 0.6, -1.0}) {
    const auto fr = flow(v, t, 0.5, 0.25, o);
    for (double a : {0.3, 1.7, 4.0}) {
      Eigen::VectorXd th(2);
      th << a, 0.8;
      const double ld = eval(fr.log_det, th).real();
      if (t == 0.0)
        CHECK(std::abs(ld) == 0.0);
      else
        CHECK(std::abs(ld - std::log(fd_det(fr.map, th))) < 1e-6);
    }
  }
}

TEST_CASE("map inversion") {
  const auto id = TorusMapLift::identity(2, 4);
  const auto inv = invert_map(id, 0.5, 4);
  CHECK(inv.map.perturbation_norm(0.5) < 1e-18);

  Eigen::VectorXd c(2);
  c << 0.02, 0.0;
  const auto tr = invert_map(TorusMapLift::translation(c, 4), 0.5, 4);
  CHECK(std::abs(tr.map.periodic(0).constant_term() + 0.02) < 1e-15);

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<PeriodicSeries> f;
    for (int k = 0; k < 2; ++k) f.push_back(with_norm(random_series(rng, 2, 4, true), 0.5, 2e-3));
    const TorusMapLift phi(Eigen::MatrixXi::Identity(2, 2), f);
    const auto r = invert_map(phi, 0.5, 24);
    CHECK(r.residual <= 1e-10);
    CHECK(r.contraction < 1.0);
    const auto round = compose_maps(phi, r.map, 24);
    CHECK(round.perturbation_norm(0.0) <= 1e-9);
  }

  std::vector<PeriodicSeries> big{with_norm(random_series(rng, 2, 3, true), 0.5, 0.2), PeriodicSeries(2, 3, true)};
  try {
    invert_map(TorusMapLift(Eigen::MatrixXi::Identity(2, 2), big), 0.5, 8);
    FAIL("expected refusal");
  } catch (const HypothesisError& err) {
    CHECK(err.bound() == "(nf)");
  }
}

TEST_CASE("compose_maps algebra") {
  std::mt19937_64 rng(51);
  auto rnd_map = [&]() {
    std::vector<PeriodicSeries> f;
    for (int k = 0; k < 2; ++k) f.push_back(with_norm(random_series(rng, 2, 3, true), 0.0, 1e-3));
    return TorusMapLift(Eigen::MatrixXi::Identity(2, 2), f);
  };
  const auto a = rnd_map(), b = rnd_map(), c = rnd_map();
  const auto id = TorusMapLift::identity(2, 3);
  const auto aid = compose_maps(a, id, 3);
  for (int j = 0; j < 2; ++j) CHECK(max_coeff_diff(aid.periodic(j), a.periodic(j)) < 1e-15);

  const int N = 24;
  const auto left = compose_maps(compose_maps(a, b, N), c, N);
  const auto right = compose_maps(a, compose_maps(b, c, N), N);
  Eigen::VectorXd th(2);
  th << 1.1, 5.2;
  CHECK((left(th) - right(th)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((left(th) - a(b(c(th)))).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::MatrixXi S(2, 2);
  S << 1, 1, 0, 1;
  const auto shear = TorusMapLift::linear(S, 0);
  const auto inv = invert_map(shear, 0.5, 0).map;
  const auto prod = compose_maps(shear, inv, 0);
  CHECK(prod.linear_part() == Eigen::MatrixXi::Identity(2, 2));
  CHECK(prod.perturbation_norm(0.0) == 0.0);
  // shear with a periodic part
  const TorusMapLift sp(S, a.periodic());
  const auto spi = invert_map(sp, 0.5, N);
  const auto rt = compose_maps(sp, spi.map, N);
  CHECK(rt.linear_part() == Eigen::MatrixXi::Identity(2, 2));
  CHECK(rt.perturbation_norm(0.0) < 1e-9);
}
