#pragma once

// Feasibility and construction of the exponent tuple (eta, alpha, beta,
// theta, sigma) that drives the Galerkin iteration. The checker evaluates
// the raw inequalities only, so it serves as an independent oracle for the
// constructive solver.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tame {

struct TameSignature {
  double s0 = 0;        // regularity base
  double m = 0;         // loss of the differential
  double ell = 0;       // base-point loss of the right inverse
  double ell_prime = 0; // data loss of the right inverse
  double g = 0;         // singular strength: inverse blows up like eps^{-g}
  double a = 1;         // tame direct constant
  double b = 1;         // tame inverse constant
  double S = 0;         // scale ceiling; 0 = to be fixed later
  void validate() const;
};

struct UserTargets {
  double s1 = 0;      // solution regularity
  double delta = 0;   // data regularity
  double g_prime = 0; // solvable-threshold exponent, > g
  void validate(const TameSignature& sig) const;
};

enum class ParamVariant { full, galerkin };

struct FeasibleParams {
  double eta = 0;
  double alpha = 0;
  double beta = 0;
  double theta = 0;
  double sigma = 0;
  double tau = 0;
  double ell_second = 0;
  ParamVariant variant = ParamVariant::full;
  double sigma_bar = 0; // lower edge of the feasible sigma half-line
  double zeta = 0;      // reported a posteriori as sigma_bar * eta / g
};

struct ConstraintCheck {
  std::string id;
  double lhs = 0;
  double rhs = 0;     // constraint is lhs < rhs (or |lhs-rhs| small for equalities)
  double margin = 0;  // (rhs - lhs) / max(1, |rhs|)
  bool equality = false;
  bool ok = false;
};

class InfeasibleTargets : public std::runtime_error {
 public:
  InfeasibleTargets(const std::string& hypothesis, const std::string& detail)
      : std::runtime_error("infeasible targets: " + hypothesis + " (" + detail + ")"),
        hypothesis_(hypothesis) {}
  const std::string& hypothesis() const { return hypothesis_; }

 private:
  std::string hypothesis_;
};

/// ell'' = max{(alpha-1) ell + ell', alpha theta ell'}.
double ell_double_prime(double alpha, double theta, double ell, double ell_prime);

/// Full margin table for every inequality of the variant's constraint set.
std::vector<ConstraintCheck> constraint_table(const TameSignature& sig, const UserTargets& tgt,
                                              const FeasibleParams& p);

/// Identifiers of the violated constraints; empty iff p is feasible.
std::vector<std::string> check_constraints(const TameSignature& sig, const UserTargets& tgt,
                                           const FeasibleParams& p);

/// Constructive solver. Full variant: theta = alpha^{-1/2}, alpha as large
/// as the delta-condition allows (bisection, capped to [1+1e-4, 2]), tau at
/// the midpoint of its window, beta tied to sigma, sigma = sigma_bar + 1%
/// slack. Galerkin variant: theta = 1 and the reduced constraint set.
/// Throws InfeasibleTargets naming the failed hypothesis.
FeasibleParams solve_params(const TameSignature& sig, const UserTargets& tgt, double eta,
                            ParamVariant variant = ParamVariant::full);

/// Scale ceiling the iteration requires: sigma + max(ell, ell', m) + margin.
double minimal_S(const FeasibleParams& p, const TameSignature& sig, double margin = 1.0);

/// Move sigma further into the feasible half-line, keeping beta tied to it.
/// A wider sigma - delta gap strengthens the cutoff-gap suppression of the
/// level contractions at the price of stiffer high-index weights. The result
/// is re-verified against the raw constraint set.
FeasibleParams widen_sigma(const FeasibleParams& p, const TameSignature& sig,
                           const UserTargets& tgt, double extra);

struct SigmaScanRow {
  double eta = 0;
  double g_over_eta = 0;
  double sigma_bar = 0;
  double S0 = 0;
};

/// sigma_bar and S0 across an eta grid (alpha, theta, tau are eta-free, so
/// sigma_bar is exactly a max of affine functions of g/eta).
std::vector<SigmaScanRow> sigma_growth_scan(const TameSignature& sig, const UserTargets& tgt,
                                            std::span<const double> eta_grid,
                                            ParamVariant variant = ParamVariant::full);

/// Canonical eta = (g'-g) / (2 max{ell', ell}); always inside the admissible
/// range since theta <= 1.
double canonical_eta(const TameSignature& sig, const UserTargets& tgt);

} // namespace tame
