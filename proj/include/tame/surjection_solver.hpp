#pragma once

// Local surjection on a finite Galerkin block. Given a nonlinear block map
// with a right-invertible differential, solves f(u) = v inside a prescribed
// norm ball. The right inverse is assembled from an approximate one by a
// Neumann series whose contraction factor is measured, and the solve itself
// is a damped continuation along targets t*v: the existence proof behind it
// is topological, so the scheme never forms quadratic-correction steps.

#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include "tame/fourier_scale.hpp"

namespace tame {

using BlockNorm = std::function<Real(const ScaleFunction&)>;
using BlockSampler = std::function<ScaleFunction(std::mt19937_64&)>;
using LinearMap = std::function<ScaleFunction(const ScaleFunction&)>;

/// Matrix-free linear action between Galerkin blocks, closed over a base point.
struct BlockOperator {
  LinearMap apply;
  FrequencyGrid grid;
  Real domain_cutoff = 0;   // informational
  Real codomain_cutoff = 0; // informational
};

/// Spot check of linearity: apply(x+y) vs apply(x)+apply(y) on random draws.
bool verify_linearity(const BlockOperator& op, const BlockNorm& norm_out,
                      const BlockSampler& sample, std::mt19937_64& rng, int trials = 4,
                      Real rel_tol = 1e-10L);

/// Largest Rayleigh growth of a same-space operator over restarted power
/// iterations; coefficients are rescaled between iterations so only norm
/// ratios enter.
Real power_iteration_norm(const LinearMap& op, const BlockNorm& nrm, const BlockSampler& sample,
                          std::mt19937_64& rng, int iters = 20, int restarts = 5);

/// Probe-max estimate of the operator norm of a map between different blocks.
Real probe_operator_norm(const LinearMap& op, const BlockNorm& norm_in, const BlockNorm& norm_out,
                         const BlockSampler& sample, std::mt19937_64& rng, int probes = 20);

/// Contraction factor of I - Df∘L on the codomain block, in the given norm.
Real contraction_factor(const BlockOperator& df, const BlockOperator& l, const BlockNorm& nrm,
                        const BlockSampler& sample, std::mt19937_64& rng, int probes = 5,
                        int iters = 20);

class ContractionFailure : public std::runtime_error {
 public:
  ContractionFailure(Real q, Real q_max)
      : std::runtime_error("contraction factor " + std::to_string(static_cast<double>(q)) +
                           " exceeds " + std::to_string(static_cast<double>(q_max))),
        q_(q) {}
  Real q() const { return q_; }

 private:
  Real q_;
};

/// Thrown by a problem when its approximate right inverse cannot be formed
/// at the requested base point.
class RightInverseFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Composed right inverse T = L * sum_{i<=I} (I - Df L)^i with the geometric
/// tail below term_tol. When q <= 1/2 the series norm bound ||T|| <= 2||L||
/// applies.
struct NeumannInverse {
  BlockOperator df;
  BlockOperator l;
  int series_terms = 0; // I: number of correction terms beyond L itself
  Real q = 0;           // measured contraction factor
  ScaleFunction apply(const ScaleFunction& k) const;
};

/// Measures q; throws ContractionFailure when it exceeds q_max (the signal
/// that the cutoff constant K is too small upstream). With verify_probes > 0
/// the right-inverse identity ||Df(Tk) - k|| <= 2 term_tol ||k|| is checked
/// on random draws.
NeumannInverse neumann_right_inverse(const BlockOperator& df, const BlockOperator& l,
                                     const BlockNorm& nrm, const BlockSampler& sample,
                                     std::mt19937_64& rng, Real q_max = 0.5L,
                                     Real term_tol = 1e-10L, int verify_probes = 5);

struct SolveReport {
  ScaleFunction solution;
  int iterations = 0; // accepted inverse applications
  Real residual = std::numeric_limits<Real>::infinity();
  Real max_norm = 0; // largest ||u|| reached, domain block norm
  bool success = false;
  std::string failure; // "", precondition, contraction, budget, ball, norm-bound, divergence
  Real m_est = 0;      // measured sup of ||T|| over probed base points
  Real q_seen = 0;     // largest contraction factor met along the way
};

using NonlinearMap = std::function<ScaleFunction(const ScaleFunction&)>;
using InverseFactory = std::function<NeumannInverse(const ScaleFunction& base)>;

/// Continuation solve of f(u) = v with f(0) = 0 inside the ball
/// ||u||_domain <= radius. Marches t from 0 to 1 along targets t*v with
/// updates u += T(u)(t v - f(u)), halving the step whenever the residual
/// fails to decrease or the ball would be left, doubling it after two
/// consecutive successful stages. Success requires the final residual to
/// meet tol, the ball constraint, and the surjection-theorem norm bound
/// ||u|| <= m_est ||v|| + 1e-8. Failures are reports, not exceptions.
SolveReport solve_local(const NonlinearMap& f, const ScaleFunction& v, const InverseFactory& t_at,
                        Real radius, const BlockNorm& norm_domain, const BlockNorm& norm_codomain,
                        Real tol, int budget, const BlockSampler& sample, std::mt19937_64& rng,
                        const ScaleFunction& zero_u);

/// Classical frozen-direction iteration u <- u - L(u)(F(u) - v), no ball
/// control during the march. Divergence or a final point outside the ball
/// is the baseline's expected failure mode for large data.
SolveReport newton_baseline(const NonlinearMap& f,
                            const std::function<LinearMap(const ScaleFunction&)>& l_at,
                            const ScaleFunction& v, Real radius, const BlockNorm& norm_domain,
                            const BlockNorm& norm_codomain, Real tol, int budget,
                            const ScaleFunction& zero_u);

} // namespace tame
