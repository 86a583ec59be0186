#include "tame/param_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tame {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_div(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : (num > 0 ? kInf : -kInf);
  return num / den;
}

double strict_slack(double bound) { return std::max(0.01, 0.01 * std::fabs(bound)); }

} // namespace

void TameSignature::validate() const {
  if (s0 < 0 || m < 0 || ell < 0 || ell_prime < 0 || g < 0)
    throw std::invalid_argument("TameSignature: losses and exponents must be nonnegative");
  if (!(a > 0 && b > 0)) throw std::invalid_argument("TameSignature: tame constants must be positive");
  if (S > 0 && !(S > s0 + std::max(m, ell) + ell_prime))
    throw std::invalid_argument("TameSignature: S must exceed s0 + max(m, ell) + ell'");
}

void UserTargets::validate(const TameSignature& sig) const {
  if (!(s1 >= sig.s0 + std::max(sig.m, sig.ell)))
    throw InfeasibleTargets("s1-minimum", "requires s1 >= s0 + max(m, ell)");
  if (!(delta > s1 + sig.ell_prime))
    throw InfeasibleTargets("delta-minimum", "requires delta > s1 + ell'");
  if (!(g_prime > sig.g)) throw InfeasibleTargets("gprime-minimum", "requires g' > g");
}

double ell_double_prime(double alpha, double theta, double ell, double ell_prime) {
  return std::max((alpha - 1.0) * ell + ell_prime, alpha * theta * ell_prime);
}

std::vector<ConstraintCheck> constraint_table(const TameSignature& sig, const UserTargets& tgt,
                                              const FeasibleParams& p) {
  std::vector<ConstraintCheck> out;
  const double s0 = sig.s0, m = sig.m, l = sig.ell, lp = sig.ell_prime, g = sig.g;
  const double s1 = tgt.s1, delta = tgt.delta, gp = tgt.g_prime;
  const double eta = p.eta, alpha = p.alpha, beta = p.beta, theta = p.theta, sigma = p.sigma;
  const double lpp = p.ell_second;
  const bool full = p.variant == ParamVariant::full;

  auto strict = [&](const std::string& id, double lhs, double rhs) {
    ConstraintCheck c{id, lhs, rhs, 0, false, false};
    c.margin = safe_div(rhs - lhs, std::max(1.0, std::fabs(rhs)));
    c.ok = lhs < rhs;
    out.push_back(c);
  };
  auto equal = [&](const std::string& id, double lhs, double rhs) {
    ConstraintCheck c{id, lhs, rhs, 0, true, false};
    const double err = std::fabs(lhs - rhs) / std::max(1.0, std::fabs(rhs));
    c.margin = -err;
    c.ok = err <= 1e-9;
    out.push_back(c);
  };

  strict("alpha-above-one", 1.0, alpha);
  strict("eta-positive", 0.0, eta);
  strict("eta-range", eta, safe_div(gp - g, std::max(theta * lp, l)));
  strict("theta-above-inverse-alpha", 1.0 / alpha, theta);
  if (full)
    strict("theta-below-one", theta, 1.0);
  else
    strict("theta-at-most-one", theta, 1.0 + 1e-12);

  if (full)
    strict("separation", theta * m + std::max(l, theta * lp) + safe_div(g, eta),
           (1.0 - theta) * (sigma - delta));
  else
    strict("sigma-above-delta", delta, sigma);

  strict("sigma-above-alpha-beta", alpha * beta + s1, sigma);

  if (full) {
    strict("block-tail-high", alpha * beta + alpha * (m + l) + lp + safe_div(g, eta),
           (1.0 + alpha - theta * alpha) * (sigma - s0));
    strict("block-tail-low", m + theta * lp + safe_div(g, alpha * eta),
           (1.0 - theta) * (sigma - s0));
  }

  strict("delta-window", s0 + (alpha / theta) * (sigma - s0 - alpha * beta + lpp), delta);
  strict("beta-growth", (1.0 - theta) * (sigma - s0) + theta * m + lpp + safe_div(g, eta),
         (alpha - 1.0) * beta);
  equal("ell-second-formula", lpp, ell_double_prime(alpha, theta, l, lp));

  // Derived from the delta-window by dropping nonnegative terms.
  strict("beta-above-shell-ratio", (sigma - delta) / alpha, beta);

  if (full) {
    strict("sigma-tail-floor",
           delta + safe_div(theta * m + std::max(l, theta * lp) + safe_div(g, eta), 1.0 - theta),
           sigma);
    strict("beta-ceiling", beta,
           (1.0 / alpha + 1.0 - theta) * sigma - m - l - lp / alpha -
               (1.0 / alpha + 1.0 - theta) * s0 - safe_div(g, alpha * eta));
    strict("sigma-base-floor",
           s0 + safe_div(m + theta * lp + safe_div(g, alpha * eta), 1.0 - theta), sigma);
  }
  strict("beta-floor",
         safe_div((1.0 - theta) * sigma + theta * m + lpp + safe_div(g, eta) - (1.0 - theta) * s0,
                  alpha - 1.0),
         beta);

  return out;
}

std::vector<std::string> check_constraints(const TameSignature& sig, const UserTargets& tgt,
                                           const FeasibleParams& p) {
  std::vector<std::string> violated;
  for (const auto& c : constraint_table(sig, tgt, p))
    if (!c.ok) violated.push_back(c.id);
  return violated;
}

namespace {

struct Recipe {
  double alpha = 0;
  double theta = 0;
  double tau = 0;
  double ell_second = 0;
};

// Largest alpha in [1+1e-4, 2] whose delta-condition holds with 1% slack.
// The condition margin is decreasing in alpha, so plain bisection applies.
Recipe make_recipe(const TameSignature& sig, const UserTargets& tgt, ParamVariant variant) {
  const bool full = variant == ParamVariant::full;
  auto margin = [&](double alpha) {
    const double theta = full ? 1.0 / std::sqrt(alpha) : 1.0;
    const double lpp = ell_double_prime(alpha, theta, sig.ell, sig.ell_prime);
    const double bound = sig.s0 + (alpha / theta) * (tgt.s1 - sig.s0 + lpp);
    return tgt.delta - bound - strict_slack(bound);
  };

  double lo = 1.0 + 1e-4, hi = 2.0;
  if (margin(lo) < 0)
    throw InfeasibleTargets("delta-window",
                            "delta leaves no room above s0 + (alpha/theta)(s1 - s0 + ell'')");
  if (margin(hi) >= 0) {
    lo = hi;
  } else {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (margin(mid) >= 0 ? lo : hi) = mid;
    }
  }

  Recipe r;
  r.alpha = lo;
  r.theta = full ? 1.0 / std::sqrt(r.alpha) : 1.0;
  r.ell_second = ell_double_prime(r.alpha, r.theta, sig.ell, sig.ell_prime);
  const double window =
      (r.theta / r.alpha) * (tgt.delta - sig.s0) - (tgt.s1 - sig.s0) - r.ell_second;
  r.tau = 0.5 * window;
  if (!(r.tau > 0)) throw InfeasibleTargets("delta-window", "empty tau window");
  return r;
}

double sigma_bar_for(const TameSignature& sig, const UserTargets& tgt, const Recipe& r,
                     double eta, ParamVariant variant) {
  const double s0 = sig.s0, m = sig.m, l = sig.ell, lp = sig.ell_prime, g = sig.g;
  const double alpha = r.alpha, theta = r.theta, tau = r.tau, lpp = r.ell_second;
  const double s1t = tgt.s1 + tau;

  if (variant == ParamVariant::galerkin) {
    const double from_beta = s1t + alpha * (m + lpp + g / eta) / (alpha - 1.0);
    return std::max(tgt.delta, from_beta);
  }

  const double one_minus = 1.0 - theta;
  const double tail = tgt.delta + (theta * m + std::max(l, theta * lp) + g / eta) / one_minus;
  const double base = s0 + (m + theta * lp + g / (alpha * eta)) / one_minus;
  const double from_ceiling =
      (m + l + lp / alpha + (1.0 / alpha + one_minus) * s0 + g / (alpha * eta) - s1t / alpha) /
      one_minus;
  const double from_floor = (s1t / alpha + (theta * m + lpp + g / eta - one_minus * s0) /
                                               (alpha - 1.0)) *
                            alpha * (alpha - 1.0) / (alpha * theta - 1.0);
  return std::max({tail, base, from_ceiling, from_floor});
}

} // namespace

FeasibleParams solve_params(const TameSignature& sig, const UserTargets& tgt, double eta,
                            ParamVariant variant) {
  sig.validate();
  tgt.validate(sig);
  const Recipe r = make_recipe(sig, tgt, variant);

  const double denom = std::max(r.theta * sig.ell_prime, sig.ell);
  const double eta_max = safe_div(tgt.g_prime - sig.g, denom);
  if (!(eta > 0) || !(eta < eta_max))
    throw InfeasibleTargets("eta-range", "requires 0 < eta < (g'-g)/max(theta ell', ell)");

  FeasibleParams p;
  p.variant = variant;
  p.eta = eta;
  p.alpha = r.alpha;
  p.theta = r.theta;
  p.tau = r.tau;
  p.ell_second = r.ell_second;
  p.sigma_bar = sigma_bar_for(sig, tgt, r, eta, variant);
  p.sigma = p.sigma_bar + strict_slack(p.sigma_bar);
  p.beta = (p.sigma - tgt.s1 - r.tau) / r.alpha;
  p.zeta = sig.g > 0 ? p.sigma_bar * eta / sig.g : 0.0;

  const auto violated = check_constraints(sig, tgt, p);
  if (!violated.empty()) {
    std::string msg = "solve_params produced an infeasible tuple:";
    for (const auto& id : violated) msg += " " + id;
    throw std::logic_error(msg);
  }
  return p;
}

double minimal_S(const FeasibleParams& p, const TameSignature& sig, double margin) {
  if (margin < 0) throw std::invalid_argument("minimal_S: margin must be nonnegative");
  return p.sigma + std::max({sig.ell, sig.ell_prime, sig.m}) + margin;
}

FeasibleParams widen_sigma(const FeasibleParams& p, const TameSignature& sig,
                           const UserTargets& tgt, double extra) {
  if (extra < 0) throw std::invalid_argument("widen_sigma: extra must be nonnegative");
  FeasibleParams q = p;
  q.sigma = p.sigma + extra;
  q.beta = (q.sigma - tgt.s1 - q.tau) / q.alpha;
  const auto violated = check_constraints(sig, tgt, q);
  if (!violated.empty()) {
    std::string msg = "widen_sigma left the feasible wedge:";
    for (const auto& id : violated) msg += " " + id;
    throw std::logic_error(msg);
  }
  return q;
}

std::vector<SigmaScanRow> sigma_growth_scan(const TameSignature& sig, const UserTargets& tgt,
                                            std::span<const double> eta_grid,
                                            ParamVariant variant) {
  sig.validate();
  tgt.validate(sig);
  const Recipe r = make_recipe(sig, tgt, variant);
  const double denom = std::max(r.theta * sig.ell_prime, sig.ell);
  const double eta_max = safe_div(tgt.g_prime - sig.g, denom);

  std::vector<SigmaScanRow> rows;
  rows.reserve(eta_grid.size());
  for (double eta : eta_grid) {
    if (!(eta > 0) || !(eta < eta_max))
      throw std::domain_error("sigma_growth_scan: eta outside (0, (g'-g)/max(theta ell', ell))");
    SigmaScanRow row;
    row.eta = eta;
    row.g_over_eta = sig.g / eta;
    row.sigma_bar = sigma_bar_for(sig, tgt, r, eta, variant);
    FeasibleParams p;
    p.sigma = row.sigma_bar + strict_slack(row.sigma_bar);
    row.S0 = minimal_S(p, sig, 1.0);
    rows.push_back(row);
  }
  return rows;
}

double canonical_eta(const TameSignature& sig, const UserTargets& tgt) {
  const double denom = std::max(sig.ell_prime, sig.ell);
  if (denom == 0.0) return 0.5 * (tgt.g_prime - sig.g);
  return (tgt.g_prime - sig.g) / (2.0 * denom);
}

} // namespace tame
