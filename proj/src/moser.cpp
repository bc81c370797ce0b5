#include "utori/moser.hpp"

#include "utori/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace utori {

MoserResult moser_normalize(const PeriodicSeries& b, double r, const MoserOptions& opts) {
  const int n = b.dim();
  if (!(r > 0.0 && r < 1.0)) throw HypothesisError("(na)", "strip width must satisfy 0 < r < 1");
  if (b.reality_defect() > 1e-12)
    throw HypothesisError("(real)", "density perturbation is not real on R^n (defect " +
                                        std::to_string(b.reality_defect()) + ")");
  MoserResult out;
  out.b_norm = coeff_norm(b, r);
  const double bound = r / (32.0 * n * std::numbers::pi);
  if (out.b_norm > bound)
    throw HypothesisError("(na)", "||b||_r = " + std::to_string(out.b_norm) + " exceeds r/(32 n pi) = " +
                                      std::to_string(bound));

  const int W = opts.degree > 0 ? opts.degree : std::max(3 * b.degree(), 12);
  const int M = fft_size(2 * W + 2);
  const auto L = l_decompose(b.as_real());
  out.mean = L[0].constant_term().real();

  // f_j lives in the first j variables; compute it there and extend.
  std::vector<PeriodicSeries> f;
  for (int j = 1; j <= n; ++j) {
    const PeriodicSeries num = restrict_leading(antiderivative(L[j], j - 1), j);
    PeriodicSeries den = PeriodicSeries::constant(j, 0, 1.0);
    for (int l = 0; l < j; ++l) den += restrict_leading(L[l], j);
    Reexpanded q;
    try {
      q = quotient(num, den, W, M, 1e-3);
    } catch (const ComputationError&) {
      throw ComputationError("density factor 1 + L_0 b + ... + L_" + std::to_string(j - 1) +
                             " b vanishes on the grid");
    }
    out.dropped_mass = std::max(out.dropped_mass, q.dropped_mass);
    f.push_back(extend_dim(q.series.as_real(), n));
  }
  for (const auto& fj : f) out.f_norm = std::max(out.f_norm, coeff_norm(fj, r));

  // Residual of (1 + [b]) prod (1 + D_j f_j) = 1 + b on the half-cell offset grid.
  const Eigen::VectorXcd target = to_grid(b, M, 0.5).array() + 1.0;
  Eigen::VectorXcd det = Eigen::VectorXcd::Ones(target.size());
  for (int j = 0; j < n; ++j) det.array() *= to_grid(derivative(f[j], j), M, 0.5).array() + 1.0;
  out.residual = ((1.0 + out.mean) * det - target).cwiseAbs().maxCoeff();
  out.volume_balance = std::abs(det.mean() - 1.0);
  out.map = TorusMapLift(Eigen::MatrixXi::Identity(n, n), std::move(f));
  return out;
}

}  // namespace utori
