#pragma once

// Concrete model problems implementing the tame-map contract, a dense
// brute-force oracle, and the concentrated-data Schroedinger residual
// scaling verifier.

#include <memory>
#include <span>
#include <vector>

#include "tame/fourier_scale.hpp"
#include "tame/param_solver.hpp"
#include "tame/surjection_solver.hpp"

namespace tame {

/// Family F_eps between two scales with a right-invertible differential.
/// F_eps(0) = 0 always; the differential is consistent with first-order
/// finite differences (checked in the suites, not assumed).
class ModelProblem {
 public:
  virtual ~ModelProblem() = default;
  virtual const TameSignature& signature() const = 0;
  virtual const FrequencyGrid& grid() const = 0;
  virtual ScaleFunction eval(const ScaleFunction& u, double eps) const = 0;
  virtual ScaleFunction apply_d(const ScaleFunction& u, const ScaleFunction& h,
                                double eps) const = 0;
  virtual ScaleFunction right_inverse_zero(const ScaleFunction& k, double eps) const = 0;
  /// Approximate right inverse at a base point; defaults to the one at 0.
  virtual LinearMap right_inverse_at(const ScaleFunction& u, double eps) const;
  /// Exact right inverse of the square projected block (for the Galerkin
  /// right-invertible route); null when the problem does not provide one.
  virtual LinearMap block_inverse_at(const ScaleFunction& u, double eps, Real lambda) const;
};

/// Engineered small-divisor model on the 1-torus:
///   F_eps(u) = A_eps u + mu d_x(u^2),  A_eps k-symbol eps^g <k>^{-ell'},
///   DF_eps(u) h = A_eps h + 2 mu d_x(u h).
/// The inverse at 0 is the exact diagonal eps^{-g} <k>^{ell'}; away from 0
/// the right inverse is the grid-dense factorization of DF_eps(u), so the
/// tame right-invertibility holds at every base point the iteration visits
/// and the measured inverse constant can be compared with the u = 0 value.
class SmallDivisorProblem : public ModelProblem {
 public:
  SmallDivisorProblem(int max_mode, double g, double mu = 1.0, double ell = 1.0, double s0 = 1.0);

  const TameSignature& signature() const override { return sig_; }
  const FrequencyGrid& grid() const override { return grid_; }
  ScaleFunction eval(const ScaleFunction& u, double eps) const override;
  ScaleFunction apply_d(const ScaleFunction& u, const ScaleFunction& h, double eps) const override;
  ScaleFunction right_inverse_zero(const ScaleFunction& k, double eps) const override;
  LinearMap right_inverse_at(const ScaleFunction& u, double eps) const override;
  LinearMap block_inverse_at(const ScaleFunction& u, double eps, Real lambda) const override;

  double mu() const { return mu_; }
  double g() const { return sig_.g; }

 private:
  FrequencyGrid grid_;
  TameSignature sig_;
  double mu_;
};

/// Adversarial instance with a kernel mode: the k = 0 symbol vanishes, so no
/// bounded right inverse exists on any block containing it.
class KernelModeProblem : public ModelProblem {
 public:
  explicit KernelModeProblem(int max_mode);
  const TameSignature& signature() const override { return sig_; }
  const FrequencyGrid& grid() const override { return grid_; }
  ScaleFunction eval(const ScaleFunction& u, double eps) const override;
  ScaleFunction apply_d(const ScaleFunction& u, const ScaleFunction& h, double eps) const override;
  ScaleFunction right_inverse_zero(const ScaleFunction& k, double eps) const override;

 private:
  FrequencyGrid grid_;
  TameSignature sig_;
};

class OracleUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Damped dense Newton from 0 on the fully truncated square system
/// P' F(u) = P' v over the block <k> <= lambda. The Jacobian is assembled
/// column by column from apply_d on basis vectors, independently of any
/// symbol shortcut the problem uses internally. Throws OracleUnavailable
/// when Newton stalls at oracle scale.
ScaleFunction oracle_dense_solve(const ModelProblem& problem, const ScaleFunction& v,
                                 Real lambda_small, double eps, Real tol, int max_iter = 60);

/// One grid function per time node; the carrier for time-banded data.
struct TimeSampledFunction {
  std::vector<double> times;
  std::vector<ScaleFunction> samples;
};

enum class TimeNodes { uniform, chebyshev };

/// Coupled-species Schroedinger system with transparent first-order
/// coupling, realized in the concentration chart y = x/eps: coefficients sit
/// at integer modes m, the eps-weighted Sobolev weight becomes the plain
/// <m>^s weight, eps d_x acts as the multiplier i m, and L2 norms carry the
/// concentration Jacobian eps^{d/2} of the change of variables.
class NlsResidualProblem {
 public:
  // lambda must be pairwise distinct; the default two-species instance
  // (1, -1) exhibits the resonant pair. Coupling fields are the real
  // (|u|^2)^{p/2} with unit multipliers, so the transparency symmetries
  // hold structurally; p must be even.
  NlsResidualProblem(int d, int species, int p, double kappa, double time_horizon, int max_mode,
                     std::vector<double> lambda, double amplitude = 1.0, double profile_width = 2.0,
                     double strength = 1.0);

  int dimension() const { return d_; }
  int species() const { return n_; }
  int p() const { return p_; }
  double kappa() const { return kappa_; }
  const FrequencyGrid& grid() const { return grid_; }
  const ScaleFunction& profile() const { return profile_; }

  /// Transparency structure: diagonal couplings real, lambdas pairwise
  /// distinct, symmetric cross coupling on resonant pairs.
  bool transparent() const;

  std::vector<double> time_grid(int nodes, TimeNodes kind = TimeNodes::uniform) const;

  /// Free-evolution ansatz at the given nodes: species j evolves by the
  /// phase exp(i t lambda_j |m|^2 / eps^2), the conjugate block by the
  /// opposite phase, both scaled by eps^kappa.
  TimeSampledFunction ansatz(double eps, std::span<const double> t_nodes) const;

  /// First block of the functional at the ansatz: -eps B(u, eps d_x) u.
  ScaleFunction nonlinearity(const ScaleFunction& u, double eps) const;
  ScaleFunction nonlinearity_derivative(const ScaleFunction& u, const ScaleFunction& h,
                                        double eps) const;

  /// sup over nodes of the eps-weighted Sobolev norm at index s, realized as
  /// eps^{d/2} times the plain norm in the concentration chart.
  Real banded_norm(const TimeSampledFunction& f, double s, double eps) const;

  struct ResidualRow {
    double eps = 0;
    Real norm = 0;
  };
  /// Residual norms across an eps list plus the log-log slope; requires
  /// kappa > d / (2(p-1)).
  std::vector<ResidualRow> residual_scan(std::span<const double> eps_list, int nodes, double s,
                                         TimeNodes kind = TimeNodes::uniform) const;

 private:
  int d_, n_, p_;
  double kappa_, time_horizon_;
  FrequencyGrid grid_;       // components = 2 * species
  FrequencyGrid scalar_grid_;
  ScaleFunction profile_;    // single-component real profile, shared by species
  std::vector<double> lambda_;
  double strength_;
};

/// Predicted residual exponent 1 + kappa (p+1) + d/2.
double nls_residual_exponent(double kappa, int p, int d);

} // namespace tame
