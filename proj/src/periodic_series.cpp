#include "utori/periodic_series.hpp"

#include "utori/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace utori {

namespace {

Eigen::Index ipow(Eigen::Index base, int exp) {
  Eigen::Index out = 1;
  for (int i = 0; i < exp; ++i) out *= base;
  return out;
}

void require_same_dim(const PeriodicSeries& a, const PeriodicSeries& b) {
  if (a.dim() != b.dim()) throw DimensionError("series dimensions differ");
}

// exp(i k theta) for k = -N..N, stored at k + N.
Eigen::VectorXcd exponent_table(Complex theta, int N) {
  Eigen::VectorXcd e(2 * N + 1);
  const Complex w = std::exp(Complex(0, 1) * theta);
  const Complex winv = std::exp(Complex(0, -1) * theta);
  e(N) = 1.0;
  for (int k = 1; k <= N; ++k) {
    e(N + k) = e(N + k - 1) * w;
    e(N - k) = e(N - k + 1) * winv;
  }
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

PeriodicSeries::PeriodicSeries(int dim, int degree, bool real)
    : dim_(dim), degree_(degree), real_(real) {
  if (dim < 1) throw DimensionError("series dimension must be positive");
  if (degree < 0) throw DimensionError("degree bound must be non-negative");
  coeffs_ = Eigen::VectorXcd::Zero(ipow(2 * degree + 1, dim));
}

PeriodicSeries::PeriodicSeries(int dim, int degree, Eigen::VectorXcd coeffs, bool real)
    : PeriodicSeries(dim, degree, real) {
  if (coeffs.size() != coeffs_.size()) throw DimensionError("coefficient vector has the wrong length");
  coeffs_ = std::move(coeffs);
}

PeriodicSeries PeriodicSeries::constant(int dim, int degree, Complex value) {
  PeriodicSeries h(dim, degree, value.imag() == 0.0);
  h.coeffs_(h.linear_index(MultiIndex::Zero(dim))) = value;
  return h;
}

PeriodicSeries PeriodicSeries::monomial(int dim, int degree, const MultiIndex& k, Complex c) {
  PeriodicSeries h(dim, degree, false);
  h.set_coeff(k, c);
  return h;
}

PeriodicSeries PeriodicSeries::real_mode(int dim, int degree, const MultiIndex& k, Complex c) {
  PeriodicSeries h(dim, degree, false);
  h.set_coeff(k, h.coeff(k) + c);
  const MultiIndex mk = -k;
  h.set_coeff(mk, h.coeff(mk) + std::conj(c));
  h.real_ = true;
  return h;
}

bool PeriodicSeries::in_range(const MultiIndex& k) const {
  if (k.size() != dim_) return false;
  for (int j = 0; j < dim_; ++j)
    if (std::abs(k(j)) > degree_) return false;
  return true;
}

Eigen::Index PeriodicSeries::linear_index(const MultiIndex& k) const {
  Eigen::Index lin = 0;
  Eigen::Index stride = 1;
  for (int j = 0; j < dim_; ++j) {
    lin += (k(j) + degree_) * stride;
    stride *= side();
  }
  return lin;
}

MultiIndex PeriodicSeries::multi_index(Eigen::Index linear) const {
  MultiIndex k(dim_);
  for (int j = 0; j < dim_; ++j) {
    k(j) = static_cast<int>(linear % side()) - degree_;
    linear /= side();
  }
  return k;
}

Complex PeriodicSeries::coeff(const MultiIndex& k) const {
  if (!in_range(k)) return 0.0;
  return coeffs_(linear_index(k));
}

Complex PeriodicSeries::constant_term() const { return coeff(MultiIndex::Zero(dim_)); }

void PeriodicSeries::set_coeff(const MultiIndex& k, Complex c) {
  if (k.size() != dim_) throw DimensionError("multi-index has the wrong length");
  if (!in_range(k)) throw DimensionError("multi-index exceeds the degree bound");
  coeffs_(linear_index(k)) = c;
}

PeriodicSeries PeriodicSeries::as_real() const {
  PeriodicSeries out(dim_, degree_, true);
  // Reflection k -> -k reverses the linear index.
  const Eigen::Index n = coeffs_.size();
  for (Eigen::Index i = 0; i < n; ++i)
    out.coeffs_(i) = 0.5 * (coeffs_(i) + std::conj(coeffs_(n - 1 - i)));
  return out;
}

PeriodicSeries PeriodicSeries::as_complex() const {
  PeriodicSeries out = *this;
  out.real_ = false;
  return out;
}

double PeriodicSeries::reality_defect() const {
  const Eigen::Index n = coeffs_.size();
  double d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) d = std::max(d, std::abs(coeffs_(n - 1 - i) - std::conj(coeffs_(i))));
  return d;
}

bool PeriodicSeries::is_zero() const { return coeffs_.size() == 0 || coeffs_.cwiseAbs().maxCoeff() == 0.0; }

PeriodicSeries& PeriodicSeries::operator+=(const PeriodicSeries& other) {
  require_same_dim(*this, other);
  if (other.degree_ > degree_) *this = resize(*this, other.degree_);
  if (other.degree_ == degree_) {
    coeffs_ += other.coeffs_;
  } else {
    const PeriodicSeries padded = resize(other, degree_);
    coeffs_ += padded.coeffs_;
  }
  real_ = real_ && other.real_;
  return *this;
}

PeriodicSeries& PeriodicSeries::operator-=(const PeriodicSeries& other) { return *this += -other; }

PeriodicSeries& PeriodicSeries::operator*=(Complex s) {
  coeffs_ *= s;
  real_ = real_ && s.imag() == 0.0;
  return *this;
}

PeriodicSeries operator+(PeriodicSeries a, const PeriodicSeries& b) { return a += b; }
PeriodicSeries operator-(PeriodicSeries a, const PeriodicSeries& b) { return a -= b; }
PeriodicSeries operator-(PeriodicSeries a) { return a *= -1.0; }
PeriodicSeries operator*(Complex s, PeriodicSeries a) { return a *= s; }
PeriodicSeries operator*(PeriodicSeries a, Complex s) { return a *= s; }

void for_each_index(int dim, int degree, const std::function<void(Eigen::Index, const MultiIndex&)>& fn) {
  MultiIndex k = MultiIndex::Constant(dim, -degree);
  const Eigen::Index total = ipow(2 * degree + 1, dim);
  for (Eigen::Index lin = 0; lin < total; ++lin) {
    fn(lin, k);
    for (int j = 0; j < dim; ++j) {
      if (++k(j) <= degree) break;
      k(j) = -degree;
    }
  }
}

// ---------------------------------------------------------------------------

Complex eval(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXcd>& theta) {
  if (theta.size() != h.dim()) throw DimensionError("evaluation point has the wrong dimension");
  const int S = h.side();
  // Contract one axis at a time, axis 0 first.
  Eigen::VectorXcd work = h.coeffs();
  for (int j = 0; j < h.dim(); ++j) {
    const Eigen::VectorXcd e = exponent_table(theta(j), h.degree());
    const Eigen::Index rest = work.size() / S;
    Eigen::Map<const Eigen::MatrixXcd> block(work.data(), S, rest);
    Eigen::VectorXcd next = block.transpose() * e;
    work.swap(next);
  }
  return work(0);
}

Complex eval(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  const Eigen::VectorXcd t = theta.cast<Complex>();
  return eval(h, t);
}

double coeff_norm(const PeriodicSeries& h, double r) {
  double total = 0.0;
  const auto& c = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    const double a = std::abs(c(lin));
    if (a != 0.0) total += a * std::exp(r * k.cwiseAbs().sum());
  });
  return total;
}

NormEstimate strip_norm(const PeriodicSeries& h, double r, int grid) {
  if (!(r > 0.0 && r < 1.0)) throw HypothesisError("(strip)", "strip half-width must satisfy 0 < r < 1");
  NormEstimate out;
  out.coeff_bound = coeff_norm(h, r);
  const int M = grid > 0 ? grid : fft_size(std::max(64, 4 * h.side()));
  const int patterns = 1 << h.dim();
  for (int p = 0; p < patterns; ++p) {
    Eigen::VectorXd s(h.dim());
    for (int j = 0; j < h.dim(); ++j) s(j) = (p >> j) & 1 ? r : -r;
    const Eigen::VectorXcd v = to_grid(imaginary_shift(h, s), M);
    out.sampled_sup = std::max(out.sampled_sup, v.cwiseAbs().maxCoeff());
  }
  return out;
}

// ---------------------------------------------------------------------------

PeriodicSeries average(const PeriodicSeries& h, std::span<const int> axes) {
  PeriodicSeries out = h;
  Eigen::VectorXcd c = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    for (int a : axes) {
      if (a < 0 || a >= h.dim()) throw DimensionError("averaging axis out of range");
      if (k(a) != 0) {
        c(lin) = 0.0;
        break;
      }
    }
  });
  return PeriodicSeries(h.dim(), h.degree(), std::move(c), h.is_real());
}

PeriodicSeries average_all(const PeriodicSeries& h) {
  std::vector<int> axes(h.dim());
  for (int j = 0; j < h.dim(); ++j) axes[j] = j;
  return average(h, axes);
}

double axis_mean_size(const PeriodicSeries& h, int axis) {
  if (axis < 0 || axis >= h.dim()) throw DimensionError("axis out of range");
  double m = 0.0;
  const auto& c = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    if (k(axis) == 0) m = std::max(m, std::abs(c(lin)));
  });
  return m;
}

std::vector<PeriodicSeries> l_decompose(const PeriodicSeries& h) {
  const int n = h.dim();
  std::vector<Eigen::VectorXcd> parts(n + 1, Eigen::VectorXcd::Zero(h.size()));
  const auto& c = h.coeffs();
  for_each_index(n, h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    // Piece j collects indices whose last nonzero entry sits on axis j-1.
    int last = 0;
    for (int j = n - 1; j >= 0; --j)
      if (k(j) != 0) {
        last = j + 1;
        break;
      }
    parts[last](lin) = c(lin);
  });
  std::vector<PeriodicSeries> out;
  out.reserve(n + 1);
  for (auto& p : parts) out.emplace_back(n, h.degree(), std::move(p), h.is_real());
  return out;
}

PeriodicSeries derivative(const PeriodicSeries& h, int axis) {
  if (axis < 0 || axis >= h.dim()) throw DimensionError("axis out of range");
  Eigen::VectorXcd c = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    c(lin) *= Complex(0.0, static_cast<double>(k(axis)));
  });
  return PeriodicSeries(h.dim(), h.degree(), std::move(c), h.is_real());
}

PeriodicSeries antiderivative(const PeriodicSeries& h, int axis, double tol) {
  if (axis < 0 || axis >= h.dim()) throw DimensionError("axis out of range");
  const double mean = axis_mean_size(h, axis);
  if (mean > tol)
    throw HypothesisError("(i2)", "anti-derivative needs zero mean along axis " + std::to_string(axis) +
                                      " (largest mean coefficient " + std::to_string(mean) + ")");
  Eigen::VectorXcd c = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    c(lin) = k(axis) == 0 ? Complex(0.0) : c(lin) / Complex(0.0, static_cast<double>(k(axis)));
  });
  return PeriodicSeries(h.dim(), h.degree(), std::move(c), h.is_real());
}

PeriodicSeries translate(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXd>& a) {
  if (a.size() != h.dim()) throw DimensionError("translation has the wrong dimension");
  Eigen::VectorXcd c = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    c(lin) *= std::exp(Complex(0.0, k.cast<double>().dot(a)));
  });
  return PeriodicSeries(h.dim(), h.degree(), std::move(c), h.is_real());
}

PeriodicSeries imaginary_shift(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXd>& s) {
  if (s.size() != h.dim()) throw DimensionError("shift has the wrong dimension");
  Eigen::VectorXcd c = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    c(lin) *= std::exp(-k.cast<double>().dot(s));
  });
  return PeriodicSeries(h.dim(), h.degree(), std::move(c), false);
}

PeriodicSeries chop(const PeriodicSeries& h, double tol) {
  Eigen::VectorXcd c = h.coeffs();
  for (auto& x : c)
    if (std::abs(x) <= tol) x = 0.0;
  return PeriodicSeries(h.dim(), h.degree(), std::move(c), h.is_real());
}

PeriodicSeries trim(const PeriodicSeries& h, double tol) {
  int deg = 0;
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    if (std::abs(h.coeffs()(lin)) > tol) deg = std::max(deg, static_cast<int>(k.cwiseAbs().maxCoeff()));
  });
  return resize(h, deg);
}

PeriodicSeries resize(const PeriodicSeries& h, int degree, double* dropped) {
  PeriodicSeries out(h.dim(), degree, h.is_real());
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(out.size());
  double mass = 0.0;
  const auto& src = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    if (out.in_range(k))
      c(out.linear_index(k)) = src(lin);
    else
      mass += std::abs(src(lin));
  });
  if (dropped) *dropped = mass;
  return PeriodicSeries(h.dim(), degree, std::move(c), h.is_real());
}

PeriodicSeries restrict_leading(const PeriodicSeries& h, int keep) {
  if (keep < 1 || keep > h.dim()) throw DimensionError("invalid number of leading axes");
  PeriodicSeries out(keep, h.degree(), h.is_real());
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(out.size());
  const auto& src = h.coeffs();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    if (k.tail(h.dim() - keep).cwiseAbs().sum() == 0) c(out.linear_index(k.head(keep))) = src(lin);
  });
  return PeriodicSeries(keep, h.degree(), std::move(c), h.is_real());
}

PeriodicSeries extend_dim(const PeriodicSeries& h, int dim) {
  if (dim < h.dim()) throw DimensionError("cannot extend to a smaller dimension");
  // Leading axes keep their stride, so the block is copied verbatim.
  PeriodicSeries out(dim, h.degree(), h.is_real());
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(out.size());
  const Eigen::Index offset = out.linear_index(MultiIndex::Zero(dim)) - h.linear_index(MultiIndex::Zero(h.dim()));
  c.segment(offset, h.size()) = h.coeffs();
  return PeriodicSeries(dim, h.degree(), std::move(c), h.is_real());
}

// ---------------------------------------------------------------------------

int fft_size(int min_points) {
  for (int m = std::max(1, min_points);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

int default_grid(int degree) { return fft_size(2 * (2 * degree + 1)); }

Eigen::VectorXd grid_axis(int M) {
  Eigen::VectorXd x(M);
  for (int i = 0; i < M; ++i) x(i) = 2.0 * std::numbers::pi * i / M;
  return x;
}

Eigen::Index grid_count(int dim, int M) { return ipow(M, dim); }

Eigen::VectorXd grid_point(int dim, int M, Eigen::Index linear, double offset) {
  Eigen::VectorXd x(dim);
  for (int j = 0; j < dim; ++j) {
    x(j) = 2.0 * std::numbers::pi * (static_cast<double>(linear % M) + offset) / M;
    linear /= M;
  }
  return x;
}

namespace detail {

void fft_nd(Eigen::VectorXcd& data, int dim, int M, bool forward) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<Complex> in(M), out(M);
  const Eigen::Index total = data.size();
  Eigen::Index stride = 1;
  for (int axis = 0; axis < dim; ++axis) {
    const Eigen::Index block = stride * M;
    for (Eigen::Index base = 0; base < total; base += block) {
      for (Eigen::Index off = 0; off < stride; ++off) {
        for (int i = 0; i < M; ++i) in[i] = data(base + off + i * stride);
        if (forward)
          fft.fwd(out.data(), in.data(), M);
        else
          fft.inv(out.data(), in.data(), M);
        for (int i = 0; i < M; ++i) data(base + off + i * stride) = out[i];
      }
    }
    stride = block;
  }
}

}  // namespace detail

Eigen::VectorXcd to_grid(const PeriodicSeries& h, int M) {
  const int n = h.dim();
  Eigen::VectorXcd data = Eigen::VectorXcd::Zero(ipow(M, n));
  const auto& c = h.coeffs();
  for_each_index(n, h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    if (c(lin) == Complex(0.0)) return;
    Eigen::Index g = 0;
    Eigen::Index stride = 1;
    for (int j = 0; j < n; ++j) {
      g += (((k(j) % M) + M) % M) * stride;
      stride *= M;
    }
    data(g) += c(lin);
  });
  detail::fft_nd(data, n, M, false);
  return data;
}

Eigen::VectorXcd to_grid(const PeriodicSeries& h, int M, double offset) {
  if (offset == 0.0) return to_grid(h, M);
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(h.dim(), 2.0 * std::numbers::pi * offset / M);
  return to_grid(translate(h, a), M);
}

Reexpanded from_grid(const Eigen::VectorXcd& values, int dim, int M, int degree, bool real) {
  if (2 * degree + 1 > M) throw DimensionError("grid too coarse for the requested degree");
  if (values.size() != ipow(M, dim)) throw DimensionError("grid value array has the wrong length");
  Eigen::VectorXcd data = values;
  detail::fft_nd(data, dim, M, true);
  data /= static_cast<double>(data.size());

  PeriodicSeries out(dim, degree, false);
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(out.size());
  double dropped = 0.0;
  // Bin m represents the frequency in (-M/2, M/2].
  const Eigen::Index total = data.size();
  MultiIndex k(dim);
  for (Eigen::Index g = 0; g < total; ++g) {
    Eigen::Index rem = g;
    bool keep = true;
    for (int j = 0; j < dim; ++j) {
      int m = static_cast<int>(rem % M);
      rem /= M;
      if (2 * m > M) m -= M;
      k(j) = m;
      if (std::abs(m) > degree) keep = false;
    }
    if (keep)
      c(out.linear_index(k)) = data(g);
    else
      dropped += std::abs(data(g));
  }
  Reexpanded r{PeriodicSeries(dim, degree, std::move(c), false), dropped};
  if (real) r.series = r.series.as_real();
  return r;
}

Reexpanded apply_pointwise(std::span<const PeriodicSeries> inputs, const PointwiseFn& fn, int degree, bool real,
                           int grid) {
  if (inputs.empty()) throw DimensionError("apply_pointwise needs at least one input");
  const int n = inputs.front().dim();
  int maxdeg = degree;
  for (const auto& h : inputs) {
    if (h.dim() != n) throw DimensionError("series dimensions differ");
    maxdeg = std::max(maxdeg, h.degree());
  }
  const int M = grid > 0 ? grid : default_grid(maxdeg);
  std::vector<Eigen::VectorXcd> vals;
  vals.reserve(inputs.size());
  for (const auto& h : inputs) vals.push_back(to_grid(h, M));
  Eigen::VectorXcd out(ipow(M, n));
  std::vector<Complex> args(inputs.size());
  for (Eigen::Index g = 0; g < out.size(); ++g) {
    for (std::size_t i = 0; i < vals.size(); ++i) args[i] = vals[i](g);
    out(g) = fn(args);
  }
  return from_grid(out, n, M, degree, real);
}

Reexpanded multiply(const PeriodicSeries& a, const PeriodicSeries& b, int degree, int grid) {
  require_same_dim(a, b);
  const int M = grid > 0 ? grid : fft_size(std::max(2 * (2 * degree + 1), a.degree() + b.degree() + degree + 1));
  const PeriodicSeries in[] = {a, b};
  return apply_pointwise(in, [](std::span<const Complex> v) { return v[0] * v[1]; }, degree,
                         a.is_real() && b.is_real(), M);
}

Reexpanded quotient(const PeriodicSeries& a, const PeriodicSeries& b, int degree, int grid, double min_denominator) {
  require_same_dim(a, b);
  const int M = grid > 0 ? grid : default_grid(std::max({degree, a.degree(), b.degree()}));
  if (to_grid(b, M).cwiseAbs().minCoeff() < min_denominator)
    throw ComputationError("quotient: denominator vanishes on the grid");
  const PeriodicSeries in[] = {a, b};
  return apply_pointwise(in, [](std::span<const Complex> v) { return v[0] / v[1]; }, degree,
                         a.is_real() && b.is_real(), M);
}

double max_abs_on_grid(const PeriodicSeries& h, int M) { return to_grid(h, M).cwiseAbs().maxCoeff(); }

}  // namespace utori
