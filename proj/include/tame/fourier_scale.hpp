#pragma once

// Truncated Fourier realization of a smoothing-projector Banach scale.
//
// Functions live on the d-torus as complex coefficient arrays over the
// frequency box {k : |k_i| <= N}, optionally vector-valued. Norms are
// weighted l2 sums with <k>^s or <eps k>^s weights, projectors are
// frequency cutoffs, and products are exact coefficient convolutions
// truncated back to the box (equivalent to fully zero-padded spectral
// products, so there is no aliasing in the retained band).
//
// Norm values can reach very large magnitudes when the regularity index
// is large; all norm arithmetic is done in long double with scaled
// accumulation so that squares never overflow.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace tame {

using Real = long double;
using Complex = std::complex<double>;

/// <k> = (1 + |k|^2)^{1/2} given |k|^2.
inline Real mode_bracket(Real abs2) { return sqrtl(1.0L + abs2); }

struct FrequencyGrid {
  int dim = 1;
  int max_mode = 0;   // N: modes range over |k_i| <= N per axis
  int components = 1; // vector-valued functions

  FrequencyGrid() = default;
  FrequencyGrid(int d, int n, int c = 1);

  int axis_size() const { return 2 * max_mode + 1; }
  std::size_t modes_per_component() const;
  std::size_t size() const { return modes_per_component() * components; }

  // Flat index within one component <-> frequency vector, row-major,
  // axis index i in [0, 2N] maps to mode i - N.
  void decode(std::size_t flat, std::span<int> k) const;
  std::size_t encode(std::span<const int> k) const;
  Real mode_abs2(std::size_t flat) const;

  bool operator==(const FrequencyGrid&) const = default;
};

class ScaleFunction {
 public:
  ScaleFunction() = default;
  explicit ScaleFunction(FrequencyGrid grid, double epsilon_weight = 1.0);

  static ScaleFunction single_mode(const FrequencyGrid& grid, std::span<const int> k,
                                   Complex amplitude, int component = 0);

  const FrequencyGrid& grid() const { return grid_; }
  double epsilon_weight() const { return epsilon_; }
  void set_epsilon_weight(double eps);

  std::vector<Complex>& coefficients() { return coef_; }
  const std::vector<Complex>& coefficients() const { return coef_; }

  Complex& at(int component, std::span<const int> k);
  Complex at(int component, std::span<const int> k) const;

  bool empty() const { return coef_.empty(); }

  ScaleFunction& operator+=(const ScaleFunction& o);
  ScaleFunction& operator-=(const ScaleFunction& o);
  ScaleFunction& operator*=(Complex c);

  friend ScaleFunction operator+(ScaleFunction a, const ScaleFunction& b) { return a += b; }
  friend ScaleFunction operator-(ScaleFunction a, const ScaleFunction& b) { return a -= b; }
  friend ScaleFunction operator*(ScaleFunction a, Complex c) { return a *= c; }
  friend ScaleFunction operator*(Complex c, ScaleFunction a) { return a *= c; }

 private:
  FrequencyGrid grid_;
  std::vector<Complex> coef_;
  double epsilon_ = 1.0;
};

enum class NormVariant { plain_sobolev, epsilon_sobolev, time_banded };
enum class CutoffKind { plain, epsilon };

struct NormSpec {
  NormVariant variant = NormVariant::plain_sobolev;
  double s = 0.0;
  double epsilon = 0.0; // 0: use the function's own epsilon_weight
  double s_max = std::numeric_limits<double>::infinity(); // scale ceiling S
};

inline NormSpec plain_norm(double s, double s_max = std::numeric_limits<double>::infinity()) {
  return NormSpec{NormVariant::plain_sobolev, s, 0.0, s_max};
}
inline NormSpec eps_norm(double s, double eps,
                         double s_max = std::numeric_limits<double>::infinity()) {
  return NormSpec{NormVariant::epsilon_sobolev, s, eps, s_max};
}

/// Precomputed per-mode weights <k>^s (eps_factor = 0) or <eps k>^s, for hot loops.
class SobolevWeights {
 public:
  SobolevWeights(const FrequencyGrid& grid, double s, double eps_factor = 0.0);
  /// Weighted l2 norm with scaled accumulation (never squares a huge value).
  Real eval(const ScaleFunction& u) const;
  const FrequencyGrid& grid() const { return grid_; }

 private:
  FrequencyGrid grid_;
  std::vector<Real> w_; // one entry per mode (shared across components)
};

/// Weighted l2 norm of the coefficients; monotone nondecreasing in spec.s.
/// Throws std::domain_error if spec.s lies outside [0, spec.s_max].
Real norm(const ScaleFunction& u, const NormSpec& spec);

/// Frequency cutoff projector. Plain kind keeps <k> <= lambda, epsilon kind
/// keeps |eps k| <= lambda. Idempotent; nested cutoffs compose to the
/// smaller one. With floor_lambda the discrete family at integer cutoffs
/// is used instead.
ScaleFunction project(const ScaleFunction& u, Real lambda, CutoffKind kind = CutoffKind::plain,
                      bool floor_lambda = false);

struct RatioReport {
  Real ratio = 0;
  Real numerator = 0;
  Real denominator = 0;
};

/// Growth bound check: ||P(lambda)u||_t / (lambda^{(t-s)+} ||u||_s).
/// Zero input reports ratio 0.
RatioReport verify_growth(const ScaleFunction& u, double s, double t, Real lambda,
                          CutoffKind kind = CutoffKind::plain);

/// Approximation bound check: ||(1-P(lambda))u||_t lambda^{s-t} / ||u||_s, t <= s.
RatioReport verify_approx(const ScaleFunction& u, double s, double t, Real lambda,
                          CutoffKind kind = CutoffKind::plain);

struct InterpolationReport {
  bool ok = false;
  Real lhs = 0; // ||u||_s
  Real rhs = 0; // a3 * ||u||_t1^mu ||u||_t2^{1-mu}
};

/// Interpolation inequality ||u||_s <= a3 ||u||_t1^{(t2-s)/(t2-t1)} ||u||_t2^{(s-t1)/(t2-t1)}
/// for t1 <= s <= t2. The degenerate case t1 == t2 requires s == t1 and reduces
/// to an identity. Holds with a3 = 1 for both weight families (log-convexity).
InterpolationReport interpolation_check(const ScaleFunction& u, double t1, double s, double t2,
                                        NormVariant variant = NormVariant::plain_sobolev,
                                        double eps = 0.0, Real a3 = 1.0L,
                                        Real rel_slack = 1e-12L);

// Arithmetic beyond +,-,scalar: all pure, grids must match.
ScaleFunction derivative(const ScaleFunction& u, int axis = 0);
ScaleFunction apply_multiplier(const ScaleFunction& u,
                               const std::function<Complex(std::span<const int>)>& symbol);
/// Pointwise product computed as an exact coefficient convolution truncated
/// to the grid. Single-component inputs only.
ScaleFunction product(const ScaleFunction& a, const ScaleFunction& b);
/// Complex conjugate of the function: c(k) -> conj(c(-k)).
ScaleFunction conjugate(const ScaleFunction& u);

ScaleFunction extract_component(const ScaleFunction& u, int component);
void set_component(ScaleFunction& u, int component, const ScaleFunction& single);

Real max_abs_coefficient(const ScaleFunction& u);
bool conjugate_symmetric(const ScaleFunction& u, double tol = 1e-12);

/// Growth/approximation/interpolation constants declared for a scale,
/// plus the ceiling S. The declared growth constant is the provable
/// worst case 2^{S/2} for |.|-style cutoffs; measured ratios are far
/// smaller for the bracket cutoff.
struct ScaleConstants {
  Real a1 = 1;
  Real a2 = 1;
  Real a3 = 1;
  Real S = 0;
  void validate() const;
};

ScaleConstants declared_scale_constants(double S);

// Textual checkpoint format: header "tame-scale-function 1", then
// "d N components epsilon", then one "re im" line per coefficient in
// row-major frequency order, component-major.
void save_text(std::ostream& os, const ScaleFunction& u);
ScaleFunction load_text(std::istream& is);

} // namespace tame
