#pragma once

// Outer Galerkin scheme: cutoff sequences, block norms, initialization,
// induction step, convergence detection. Each level solves a projected
// block equation through the local-surjection machinery; the per-level
// cutoffs grow doubly exponentially and the block norms weigh a base and a
// high regularity index simultaneously.

#include <optional>
#include <vector>

#include "tame/param_solver.hpp"
#include "tame/problems.hpp"
#include "tame/surjection_solver.hpp"

namespace tame {

struct IterationParams {
  FeasibleParams params;
  UserTargets targets;
  double K = 2;            // cutoff prefactor, >= 2
  Real tol_final = 1e-8L;  // base-norm residual defining convergence
  int n_max = 10;
  Real r = 0;              // solvable-threshold constant; 0 = uncalibrated
  bool enforce_regime = true; // gate ||v||'_delta <= r eps^{g'} when r > 0
  Real inner_tol = 1e-10L;
  int inner_budget = 3000;
  Real q_max = 0.5L;
  Real term_tol = 1e-10L;
  Real bound_const = 8;    // cap for the measured initialization constants
  double K_max = 4096;
  // Base-point amplitude for the cutoff-adaptation probes. The contraction
  // property is stated on the whole unit ball, but a desk-scale problem with
  // a transport-dominated inverse is only contractive near the iterates the
  // run visits; every inner solve re-measures contraction at its actual
  // base points, so the probe scale trades pessimism, not safety.
  Real contraction_probe_scale = 0.01L;
  std::uint64_t seed = 1;
  void validate() const;
};

struct Lambdas {
  Real lambda0 = 0, lambda1 = 0, m0 = 0, m1 = 0;
};

/// lambda0 = (K eps^{-eta})^{1/alpha}, lambda1 = K eps^{-eta}, m_i = lambda_i^theta.
/// The strict interleaving m0 < lambda0 < m1 < lambda1 requires alpha theta > 1
/// and theta < 1; with theta = 1 the two families coincide levelwise.
Lambdas init_lambdas(double K, double eps, double eta, double alpha, double theta);

struct StepRecord {
  int n = 0;
  Real lambda_n = 0, m_n = 0;
  Real r_n = 0;             // prescribed ball radius (levels >= 2)
  Real diff_s0 = 0;         // ||u_n - u_{n-1}||_{s0}
  Real diff_sigma = 0;      // ||u_n - u_{n-1}||_{sigma}
  Real delta_v_norm = 0;    // shell data norm in the level norm
  Real e_n_norm = 0;        // spill term norm in the level norm
  Real q_n = 0;             // largest contraction factor seen in the level solve
  Real bound_c_s0 = 0;      // measured constants of the two increment bounds
  Real bound_c_sigma = 0;
  Real delta_v_c = 0;       // measured constant of the shell-data majorant
  Real e_n_c = 0;           // measured constant of the spill majorant
  Real margin = 0;          // radius / (||T|| (shell + spill)); > 1 is the sufficient zone
  std::string dominant;     // which exponent pair dominates the margin bookkeeping
  Real telescope_err = 0;   // entry consistency of the previous level equation
  bool saturated = false;   // cutoff at or above the grid ceiling
  int inner_iterations = 0;
  Real inner_residual = 0;
  bool inner_success = false;
  std::string inner_failure;
  Real u_s1 = 0;            // ||u_n||_{s1}
  Real residual_s0 = 0;     // ||F(u_n) - v||_{s0}
};

enum class Verdict { converged, stalled, contraction_failure, budget, rejected };

const char* verdict_name(Verdict v);

struct ConvergenceReport {
  ScaleFunction u;
  Real residual_s0 = std::numeric_limits<Real>::infinity();
  Real u_s1 = 0;
  std::vector<StepRecord> steps;
  Verdict verdict = Verdict::stalled;
  Real final_bound = 0; // r^{-1} eps^{-g'} ||v||'_delta, 0 when uncalibrated
  bool cauchy_ok = false;
  Real cauchy_c = 0;    // measured constant of the increment partial sums
  std::string note;
};

class GalerkinIteration {
 public:
  GalerkinIteration(const ModelProblem& problem, IterationParams ip, double eps);

  Real lambda_level(int n) const; // lambda_1^{alpha^{n-1}}
  Real m_level(int n) const;      // lambda_level(n)^theta
  const Lambdas& lambdas() const { return l_; }

  /// Level norm: base + delta weighting at level 1, base + sigma weighting at
  /// levels >= 2, identical formula on both scales.
  Real block_norm(const ScaleFunction& u, int level) const;

  /// Level-1 solve of the projected equation against the coarsest data slice.
  /// Returns the record and the starting point, or a failure record.
  std::pair<ScaleFunction, StepRecord> initialize(const ScaleFunction& v);

  /// Induction step n >= 2 from the given state.
  StepRecord step(const ScaleFunction& v, const ScaleFunction& u_prev, int n,
                  ScaleFunction* u_next);

  ConvergenceReport run(const ScaleFunction& v);

  const ModelProblem& problem() const { return *problem_; }
  const IterationParams& params() const { return ip_; }
  double eps() const { return eps_; }

 private:
  NormSpec spec(double s) const;
  BlockNorm level_norm_fn(int level) const;
  BlockSampler sampler(Real cutoff, std::uint64_t salt) const;
  InverseFactory inverse_factory(const ScaleFunction& center, int level, Real cutoff_e,
                                 Real cutoff_ep, std::mt19937_64& rng);
  Real inverse_norm_probe(const ScaleFunction& base, int level, Real cutoff_e, Real cutoff_ep,
                          std::mt19937_64& rng);

  const ModelProblem* problem_;
  IterationParams ip_;
  double eps_;
  Lambdas l_;
  Real grid_ceiling_; // <N> of the problem grid
};

struct AdaptedK {
  double K = 0;
  bool ok = false;
  Real worst_factor = 0;
};

/// Doubles K from 2 until the measured level-1 and level-2 contraction
/// factors at unit-ball probe points drop to 1/2, capped at ip.K_max.
/// Galerkin-variant parameter sets skip the level-2 probe and use the
/// problem block inverse directly, so only level 1 is measured.
AdaptedK adapt_K(const ModelProblem& problem, const IterationParams& ip, double eps);

/// Coarse pre-sweep for the solvable-threshold constant: the largest r in
/// the halving sequence 1, 1/2, ... whose runs converge at every probe eps.
/// build_v(amplitude, eps) must produce data with ||v||'_delta = amplitude.
std::optional<Real> calibrate_r(const ModelProblem& problem, IterationParams ip,
                                std::span<const double> probe_eps,
                                const std::function<ScaleFunction(Real, double)>& build_v,
                                int max_halvings = 60);

} // namespace tame
