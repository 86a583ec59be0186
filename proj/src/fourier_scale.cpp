#include "tame/fourier_scale.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace tame {

FrequencyGrid::FrequencyGrid(int d, int n, int c) : dim(d), max_mode(n), components(c) {
  if (d < 1 || n < 0 || c < 1) throw std::invalid_argument("FrequencyGrid: nonpositive shape");
}

std::size_t FrequencyGrid::modes_per_component() const {
  std::size_t m = 1;
  for (int i = 0; i < dim; ++i) m *= static_cast<std::size_t>(axis_size());
  return m;
}

void FrequencyGrid::decode(std::size_t flat, std::span<int> k) const {
  const int a = axis_size();
  for (int i = dim - 1; i >= 0; --i) {
    k[static_cast<std::size_t>(i)] = static_cast<int>(flat % static_cast<std::size_t>(a)) - max_mode;
    flat /= static_cast<std::size_t>(a);
  }
}

std::size_t FrequencyGrid::encode(std::span<const int> k) const {
  const int a = axis_size();
  std::size_t flat = 0;
  for (int i = 0; i < dim; ++i) {
    const int ki = k[static_cast<std::size_t>(i)];
    if (ki < -max_mode || ki > max_mode) throw std::out_of_range("FrequencyGrid: mode outside grid");
    flat = flat * static_cast<std::size_t>(a) + static_cast<std::size_t>(ki + max_mode);
  }
  return flat;
}

Real FrequencyGrid::mode_abs2(std::size_t flat) const {
  const int a = axis_size();
  Real s = 0;
  for (int i = dim - 1; i >= 0; --i) {
    const int ki = static_cast<int>(flat % static_cast<std::size_t>(a)) - max_mode;
    s += static_cast<Real>(ki) * ki;
    flat /= static_cast<std::size_t>(a);
  }
  return s;
}

ScaleFunction::ScaleFunction(FrequencyGrid grid, double epsilon_weight)
    : grid_(grid), coef_(grid.size(), Complex{0.0, 0.0}), epsilon_(epsilon_weight) {
  if (!(epsilon_weight > 0)) throw std::invalid_argument("ScaleFunction: epsilon_weight must be positive");
}

ScaleFunction ScaleFunction::single_mode(const FrequencyGrid& grid, std::span<const int> k,
                                         Complex amplitude, int component) {
  ScaleFunction u(grid);
  u.at(component, k) = amplitude;
  return u;
}

void ScaleFunction::set_epsilon_weight(double eps) {
  if (!(eps > 0)) throw std::invalid_argument("ScaleFunction: epsilon_weight must be positive");
  epsilon_ = eps;
}

Complex& ScaleFunction::at(int component, std::span<const int> k) {
  return coef_[static_cast<std::size_t>(component) * grid_.modes_per_component() + grid_.encode(k)];
}

Complex ScaleFunction::at(int component, std::span<const int> k) const {
  return coef_[static_cast<std::size_t>(component) * grid_.modes_per_component() + grid_.encode(k)];
}

namespace {
void require_same_grid(const ScaleFunction& a, const ScaleFunction& b) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument("grid mismatch");
}
} // namespace

ScaleFunction& ScaleFunction::operator+=(const ScaleFunction& o) {
  require_same_grid(*this, o);
  for (std::size_t i = 0; i < coef_.size(); ++i) coef_[i] += o.coef_[i];
  return *this;
}

ScaleFunction& ScaleFunction::operator-=(const ScaleFunction& o) {
  require_same_grid(*this, o);
  for (std::size_t i = 0; i < coef_.size(); ++i) coef_[i] -= o.coef_[i];
  return *this;
}

ScaleFunction& ScaleFunction::operator*=(Complex c) {
  for (auto& v : coef_) v *= c;
  return *this;
}

SobolevWeights::SobolevWeights(const FrequencyGrid& grid, double s, double eps_factor)
    : grid_(grid), w_(grid.modes_per_component()) {
  const Real f2 = eps_factor > 0 ? static_cast<Real>(eps_factor) * eps_factor : 1.0L;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    const Real k2 = grid.mode_abs2(i);
    w_[i] = expl(0.5L * static_cast<Real>(s) * log1pl(f2 * k2));
  }
}

Real SobolevWeights::eval(const ScaleFunction& u) const {
  if (!(u.grid() == grid_)) throw std::invalid_argument("grid mismatch");
  const auto& c = u.coefficients();
  const std::size_t m = w_.size();
  Real peak = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Real v = w_[i % m] * static_cast<Real>(std::abs(c[i]));
    if (v > peak) peak = v;
  }
  if (peak == 0) return 0;
  Real acc = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Real v = w_[i % m] * static_cast<Real>(std::abs(c[i])) / peak;
    acc += v * v;
  }
  return peak * sqrtl(acc);
}

Real norm(const ScaleFunction& u, const NormSpec& spec) {
  if (spec.variant == NormVariant::time_banded)
    throw std::invalid_argument("time_banded norms apply to time-sampled families");
  if (!(spec.s >= 0.0) || spec.s > spec.s_max)
    throw std::domain_error("norm: regularity index outside [0, S]");
  double epsf = 0.0;
  if (spec.variant == NormVariant::epsilon_sobolev)
    epsf = spec.epsilon > 0 ? spec.epsilon : u.epsilon_weight();
  return SobolevWeights(u.grid(), spec.s, epsf).eval(u);
}

ScaleFunction project(const ScaleFunction& u, Real lambda, CutoffKind kind, bool floor_lambda) {
  if (!(lambda >= 1)) throw std::domain_error("project: lambda must be >= 1");
  if (floor_lambda) lambda = floorl(lambda);
  const Real eps = static_cast<Real>(u.epsilon_weight());
  ScaleFunction out = u;
  const std::size_t m = u.grid().modes_per_component();
  for (std::size_t i = 0; i < out.coefficients().size(); ++i) {
    const Real k2 = u.grid().mode_abs2(i % m);
    const Real key = kind == CutoffKind::plain ? mode_bracket(k2) : eps * sqrtl(k2);
    if (key > lambda) out.coefficients()[i] = Complex{0.0, 0.0};
  }
  return out;
}

RatioReport verify_growth(const ScaleFunction& u, double s, double t, Real lambda, CutoffKind kind) {
  const NormVariant v = kind == CutoffKind::plain ? NormVariant::plain_sobolev : NormVariant::epsilon_sobolev;
  RatioReport r;
  r.numerator = norm(project(u, lambda, kind), NormSpec{v, t, 0.0, std::numeric_limits<double>::infinity()});
  const Real gap = static_cast<Real>(t) - static_cast<Real>(s);
  r.denominator = powl(lambda, gap > 0 ? gap : 0.0L) *
                  norm(u, NormSpec{v, s, 0.0, std::numeric_limits<double>::infinity()});
  r.ratio = r.denominator == 0 ? 0 : r.numerator / r.denominator;
  return r;
}

RatioReport verify_approx(const ScaleFunction& u, double s, double t, Real lambda, CutoffKind kind) {
  if (t > s) throw std::domain_error("verify_approx: requires t <= s");
  const NormVariant v = kind == CutoffKind::plain ? NormVariant::plain_sobolev : NormVariant::epsilon_sobolev;
  RatioReport r;
  const ScaleFunction tail = u - project(u, lambda, kind);
  r.numerator = norm(tail, NormSpec{v, t, 0.0, std::numeric_limits<double>::infinity()}) *
                powl(lambda, static_cast<Real>(s) - static_cast<Real>(t));
  r.denominator = norm(u, NormSpec{v, s, 0.0, std::numeric_limits<double>::infinity()});
  r.ratio = r.denominator == 0 ? 0 : r.numerator / r.denominator;
  return r;
}

InterpolationReport interpolation_check(const ScaleFunction& u, double t1, double s, double t2,
                                        NormVariant variant, double eps, Real a3, Real rel_slack) {
  if (!(t1 <= s && s <= t2)) throw std::domain_error("interpolation_check: requires t1 <= s <= t2");
  InterpolationReport rep;
  const auto spec = [&](double idx) {
    return NormSpec{variant, idx, eps, std::numeric_limits<double>::infinity()};
  };
  rep.lhs = norm(u, spec(s));
  if (t1 == t2) {
    // Degenerate window: identity check.
    rep.rhs = a3 * norm(u, spec(t1));
  } else {
    const Real mu = (static_cast<Real>(t2) - s) / (static_cast<Real>(t2) - t1);
    const Real n1 = norm(u, spec(t1));
    const Real n2 = norm(u, spec(t2));
    rep.rhs = a3 * powl(n1, mu) * powl(n2, 1.0L - mu);
  }
  rep.ok = rep.lhs <= rep.rhs * (1.0L + rel_slack) || rep.lhs == 0;
  return rep;
}

ScaleFunction derivative(const ScaleFunction& u, int axis) {
  if (axis < 0 || axis >= u.grid().dim) throw std::invalid_argument("derivative: bad axis");
  ScaleFunction out = u;
  const std::size_t m = u.grid().modes_per_component();
  std::vector<int> k(static_cast<std::size_t>(u.grid().dim));
  for (std::size_t i = 0; i < out.coefficients().size(); ++i) {
    u.grid().decode(i % m, k);
    out.coefficients()[i] *= Complex{0.0, static_cast<double>(k[static_cast<std::size_t>(axis)])};
  }
  return out;
}

ScaleFunction apply_multiplier(const ScaleFunction& u,
                               const std::function<Complex(std::span<const int>)>& symbol) {
  ScaleFunction out = u;
  const std::size_t m = u.grid().modes_per_component();
  std::vector<int> k(static_cast<std::size_t>(u.grid().dim));
  for (std::size_t i = 0; i < out.coefficients().size(); ++i) {
    u.grid().decode(i % m, k);
    out.coefficients()[i] *= symbol(k);
  }
  return out;
}

ScaleFunction product(const ScaleFunction& a, const ScaleFunction& b) {
  require_same_grid(a, b);
  if (a.grid().components != 1)
    throw std::invalid_argument("product: single-component inputs only");
  const FrequencyGrid& g = a.grid();
  const int N = g.max_mode;
  const int d = g.dim;
  ScaleFunction out(g, a.epsilon_weight());

  if (d == 1) {
    const auto& ca = a.coefficients();
    const auto& cb = b.coefficients();
    auto& co = out.coefficients();
    for (int k = -N; k <= N; ++k) {
      Complex s{0.0, 0.0};
      const int lo = std::max(-N, k - N), hi = std::min(N, k + N);
      for (int k1 = lo; k1 <= hi; ++k1) s += ca[static_cast<std::size_t>(k1 + N)] * cb[static_cast<std::size_t>(k - k1 + N)];
      co[static_cast<std::size_t>(k + N)] = s;
    }
    return out;
  }

  // Generic d: odometer over the output box and the per-axis summation window.
  std::vector<int> k(static_cast<std::size_t>(d)), k1(static_cast<std::size_t>(d));
  const std::size_t m = g.modes_per_component();
  for (std::size_t flat = 0; flat < m; ++flat) {
    g.decode(flat, k);
    Complex s{0.0, 0.0};
    for (int i = 0; i < d; ++i) k1[static_cast<std::size_t>(i)] = std::max(-N, k[static_cast<std::size_t>(i)] - N);
    while (true) {
      std::size_t f1 = 0, f2 = 0;
      for (int i = 0; i < d; ++i) {
        f1 = f1 * static_cast<std::size_t>(g.axis_size()) + static_cast<std::size_t>(k1[static_cast<std::size_t>(i)] + N);
        f2 = f2 * static_cast<std::size_t>(g.axis_size()) +
             static_cast<std::size_t>(k[static_cast<std::size_t>(i)] - k1[static_cast<std::size_t>(i)] + N);
      }
      s += a.coefficients()[f1] * b.coefficients()[f2];
      int axis = d - 1;
      while (axis >= 0) {
        ++k1[static_cast<std::size_t>(axis)];
        if (k1[static_cast<std::size_t>(axis)] <= std::min(N, k[static_cast<std::size_t>(axis)] + N)) break;
        k1[static_cast<std::size_t>(axis)] = std::max(-N, k[static_cast<std::size_t>(axis)] - N);
        --axis;
      }
      if (axis < 0) break;
    }
    out.coefficients()[flat] = s;
  }
  return out;
}

ScaleFunction conjugate(const ScaleFunction& u) {
  const FrequencyGrid& g = u.grid();
  ScaleFunction out(g, u.epsilon_weight());
  const std::size_t m = g.modes_per_component();
  std::vector<int> k(static_cast<std::size_t>(g.dim)), nk(static_cast<std::size_t>(g.dim));
  for (int c = 0; c < g.components; ++c) {
    for (std::size_t i = 0; i < m; ++i) {
      g.decode(i, k);
      for (int j = 0; j < g.dim; ++j) nk[static_cast<std::size_t>(j)] = -k[static_cast<std::size_t>(j)];
      out.coefficients()[static_cast<std::size_t>(c) * m + i] =
          std::conj(u.coefficients()[static_cast<std::size_t>(c) * m + g.encode(nk)]);
    }
  }
  return out;
}

ScaleFunction extract_component(const ScaleFunction& u, int component) {
  const FrequencyGrid& g = u.grid();
  if (component < 0 || component >= g.components) throw std::out_of_range("extract_component");
  FrequencyGrid g1(g.dim, g.max_mode, 1);
  ScaleFunction out(g1, u.epsilon_weight());
  const std::size_t m = g.modes_per_component();
  for (std::size_t i = 0; i < m; ++i)
    out.coefficients()[i] = u.coefficients()[static_cast<std::size_t>(component) * m + i];
  return out;
}

void set_component(ScaleFunction& u, int component, const ScaleFunction& single) {
  const FrequencyGrid& g = u.grid();
  if (component < 0 || component >= g.components) throw std::out_of_range("set_component");
  if (single.grid().dim != g.dim || single.grid().max_mode != g.max_mode || single.grid().components != 1)
    throw std::invalid_argument("set_component: shape mismatch");
  const std::size_t m = g.modes_per_component();
  for (std::size_t i = 0; i < m; ++i)
    u.coefficients()[static_cast<std::size_t>(component) * m + i] = single.coefficients()[i];
}

Real max_abs_coefficient(const ScaleFunction& u) {
  Real peak = 0;
  for (const auto& c : u.coefficients()) peak = std::max(peak, static_cast<Real>(std::abs(c)));
  return peak;
}

bool conjugate_symmetric(const ScaleFunction& u, double tol) {
  const ScaleFunction d = u - conjugate(u);
  const Real scale = std::max<Real>(max_abs_coefficient(u), 1.0L);
  return max_abs_coefficient(d) <= static_cast<Real>(tol) * scale;
}

void ScaleConstants::validate() const {
  if (!(a1 >= 1 && a2 >= 1 && a3 >= 1)) throw std::invalid_argument("ScaleConstants: a1,a2,a3 must be >= 1");
  if (!(S > 0)) throw std::invalid_argument("ScaleConstants: S must be positive");
}

ScaleConstants declared_scale_constants(double S) {
  ScaleConstants c;
  c.a1 = powl(2.0L, static_cast<Real>(S) / 2.0L);
  c.a2 = 1;
  c.a3 = 1;
  c.S = static_cast<Real>(S);
  c.validate();
  return c;
}

void save_text(std::ostream& os, const ScaleFunction& u) {
  os << "tame-scale-function 1\n";
  os.precision(17);
  os << u.grid().dim << ' ' << u.grid().max_mode << ' ' << u.grid().components << ' '
     << u.epsilon_weight() << '\n';
  for (const auto& c : u.coefficients()) os << c.real() << ' ' << c.imag() << '\n';
}

ScaleFunction load_text(std::istream& is) {
  std::string magic, version;
  is >> magic >> version;
  if (magic != "tame-scale-function" || version != "1")
    throw std::runtime_error("load_text: not a scale-function record");
  int d = 0, n = 0, c = 0;
  double eps = 0;
  is >> d >> n >> c >> eps;
  ScaleFunction u(FrequencyGrid(d, n, c), eps);
  for (auto& v : u.coefficients()) {
    double re = 0, im = 0;
    is >> re >> im;
    v = Complex{re, im};
  }
  if (!is) throw std::runtime_error("load_text: truncated record");
  return u;
}

} // namespace tame
