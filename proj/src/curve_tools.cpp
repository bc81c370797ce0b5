#include "utori/curve_tools.hpp"

#include "utori/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace utori {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const Complex kI(0.0, 1.0);

void require_curve(const PeriodicSeries& f) {
  if (f.dim() != 1) throw DimensionError("curves are series in one variable");
}

double wrap(double x) { return std::remainder(x, kTwoPi); }

Complex value_at(const PeriodicSeries& h, double theta) {
  Eigen::VectorXd t(1);
  t(0) = theta;
  return eval(h, t);
}

struct PhaseSamples {
  int degree = 0;
  Eigen::VectorXd theta, mu;  // mu unwrapped, samples + 1 entries including theta = 2 pi
};

PhaseSamples sample_phase(const PeriodicSeries& f, int samples) {
  require_curve(f);
  const Eigen::VectorXcd fp = to_grid(derivative(f, 0), samples);
  const double scale = std::max(1.0, fp.cwiseAbs().maxCoeff());
  const double smallest = fp.cwiseAbs().minCoeff();
  if (smallest <= 1e-12 * scale)
    throw HypothesisError("(immersion)", "|f'| = " + std::to_string(smallest) + " on the sample grid");
  PhaseSamples out;
  out.theta.resize(samples + 1);
  out.mu.resize(samples + 1);
  out.mu(0) = std::arg(fp(0));
  for (int g = 1; g <= samples; ++g) {
    const Complex next = fp(g % samples);
    out.mu(g) = out.mu(g - 1) + wrap(std::arg(next) - std::arg(fp(g - 1)));
  }
  for (int g = 0; g <= samples; ++g) out.theta(g) = kTwoPi * g / samples;
  const double turns = (out.mu(samples) - out.mu(0)) / kTwoPi;
  out.degree = static_cast<int>(std::lround(turns));
  if (std::abs(turns - out.degree) > 1e-6)
    throw ComputationError("accumulated phase is not a whole number of turns: " + std::to_string(turns));
  return out;
}

// rho~(s) exp(i d s) on the uniform s grid with psi(theta) = mu(theta) / d.
Eigen::VectorXcd phase_parametrized_derivative(const PeriodicSeries& f, int M, int& d) {
  const PhaseSamples ps = sample_phase(f, kCurveSamples);
  d = ps.degree;
  if (d == 0) throw HypothesisError("(degree)", "the Gauss map has degree 0");
  if (!noncritical_phase(f).noncritical) throw HypothesisError("(noncritical)", "the phase derivative vanishes");
  const PeriodicSeries fp = derivative(f, 0);
  const PeriodicSeries fpp = derivative(fp, 0);
  // nu = mu / d increases by 2 pi over one turn of theta
  const Eigen::VectorXd nu = ps.mu.array() / d;
  Eigen::VectorXcd out(M);
  for (int m = 0; m < M; ++m) {
    const double s_m = kTwoPi * m / M;
    double s = nu(0) + std::fmod(s_m - nu(0), kTwoPi);
    if (s < nu(0)) s += kTwoPi;
    const auto it = std::upper_bound(nu.data(), nu.data() + nu.size(), s);
    const int hi = std::clamp(static_cast<int>(it - nu.data()), 1, static_cast<int>(nu.size()) - 1);
    const int lo = hi - 1;
    double theta = ps.theta(lo) + (s - nu(lo)) / (nu(hi) - nu(lo)) * (ps.theta(hi) - ps.theta(lo));
    Complex fpv = value_at(fp, theta);
    for (int k = 0; k < 30; ++k) {
      const double cur = nu(lo) + wrap(std::arg(fpv) - ps.mu(lo)) / d;
      const double dnu = (value_at(fpp, theta) / fpv).imag() / d;
      const double step = (cur - s) / dnu;
      theta -= step;
      fpv = value_at(fp, theta);
      if (std::abs(step) < 1e-15) break;
    }
    const double dmu = (value_at(fpp, theta) / fpv).imag();
    out(m) = (d * std::abs(fpv) / dmu) * std::exp(kI * (d * s_m));
  }
  return out;
}

// Zero-mean antiderivative of grid values of a mean-zero derivative.
PeriodicSeries antiderivative_from_values(const Eigen::VectorXcd& g, int degree, double* dropped) {
  const int M = static_cast<int>(g.size());
  Reexpanded r = from_grid(g, 1, M, degree, false);
  if (dropped) *dropped = r.dropped_mass;
  Eigen::VectorXcd c = r.series.coeffs();
  for (int k = -degree; k <= degree; ++k)
    c(k + degree) = k == 0 ? Complex(0.0) : c(k + degree) / (kI * static_cast<double>(k));
  return PeriodicSeries(1, degree, std::move(c), false);
}

int homotopy_grid(int degree) { return fft_size(std::max(8 * degree, 512)); }

}  // namespace

int gauss_degree(const PeriodicSeries& f, int samples) { return sample_phase(f, samples).degree; }

PhaseDerivative noncritical_phase(const PeriodicSeries& f, int samples, double tol) {
  require_curve(f);
  const PeriodicSeries fp = derivative(f, 0);
  const Eigen::VectorXcd a = to_grid(fp, samples);
  const Eigen::VectorXcd b = to_grid(derivative(fp, 0), samples);
  PhaseDerivative out;
  out.dmu = (b.array() / a.array()).imag();
  out.min_abs = out.dmu.cwiseAbs().minCoeff();
  // a sign change between samples is critical even if no sample is small
  out.noncritical = out.min_abs > tol && (out.dmu.minCoeff() > 0.0 || out.dmu.maxCoeff() < 0.0);
  return out;
}

PeriodicSeries reparametrize_by_phase(const PeriodicSeries& f, int degree, double* dropped) {
  int d = 0;
  return antiderivative_from_values(phase_parametrized_derivative(f, homotopy_grid(degree), d), degree, dropped);
}

PeriodicSeries whitney_homotopy(const PeriodicSeries& f0, const PeriodicSeries& f1, double t, int degree) {
  if (!(t >= 0.0 && t <= 1.0)) throw DimensionError("homotopy parameter must lie in [0, 1]");
  const int d0 = gauss_degree(f0), d1 = gauss_degree(f1);
  if (d0 != d1)
    throw HypothesisError("(degree)", "Gauss degrees differ (" + std::to_string(d0) + " vs " + std::to_string(d1) +
                                          "); no regular homotopy exists");
  const int M = homotopy_grid(degree);
  int d = 0;
  const Eigen::VectorXcd g0 = phase_parametrized_derivative(f0, M, d);
  const Eigen::VectorXcd g1 = phase_parametrized_derivative(f1, M, d);
  return antiderivative_from_values((1.0 - t) * g0 + t * g1, degree, nullptr);
}

EmbeddingReport embedding_check(const PeriodicSeries& f, int samples) {
  if (!noncritical_phase(f).noncritical) throw HypothesisError("(noncritical)", "the phase derivative vanishes");
  EmbeddingReport out;
  out.degree = gauss_degree(f);
  out.I_f = out.degree - (out.degree > 0) + (out.degree < 0);
  out.is_embedding = std::abs(out.degree) == 1;

  const Eigen::VectorXcd x = to_grid(f, samples);
  const int gap = std::max(1, samples / 64);
  double best = std::numeric_limits<double>::infinity();
  double step = 0.0;
  for (int a = 0; a < samples; ++a) {
    step = std::max(step, std::abs(x((a + 1) % samples) - x(a)));
    for (int b = a + gap; b < samples; ++b)
      if (samples - (b - a) >= gap) best = std::min(best, std::abs(x(a) - x(b)));
  }
  out.min_separated_distance = best;
  // separated samples must stay apart by more than the sampling resolution
  out.grid_injective = best > 2.0 * step;
  return out;
}

}  // namespace utori
