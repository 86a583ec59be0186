#include "tame/surjection_solver.hpp"

#include <algorithm>
#include <cmath>

namespace tame {

namespace {

// Rescale coefficients to unit sup so repeated operator applications stay
// inside double range; norm ratios are unaffected.
void renormalize(ScaleFunction& x) {
  const Real peak = max_abs_coefficient(x);
  if (peak > 0) x *= Complex{static_cast<double>(1.0L / peak), 0.0};
}

} // namespace

bool verify_linearity(const BlockOperator& op, const BlockNorm& norm_out,
                      const BlockSampler& sample, std::mt19937_64& rng, int trials, Real rel_tol) {
  for (int t = 0; t < trials; ++t) {
    ScaleFunction x = sample(rng);
    ScaleFunction y = sample(rng);
    const ScaleFunction lhs = op.apply(x + y);
    const ScaleFunction rhs = op.apply(x) + op.apply(y);
    const Real scale = norm_out(lhs) + norm_out(rhs);
    if (scale == 0) continue;
    if (norm_out(lhs - rhs) > rel_tol * scale) return false;
  }
  return true;
}

Real power_iteration_norm(const LinearMap& op, const BlockNorm& nrm, const BlockSampler& sample,
                          std::mt19937_64& rng, int iters, int restarts) {
  Real best = 0;
  for (int r = 0; r < restarts; ++r) {
    ScaleFunction x = sample(rng);
    renormalize(x);
    for (int it = 0; it < iters; ++it) {
      const Real nx = nrm(x);
      if (nx == 0) break;
      ScaleFunction y = op(x);
      const Real ny = nrm(y);
      best = std::max(best, ny / nx);
      if (ny == 0) break;
      x = std::move(y);
      renormalize(x);
    }
  }
  return best;
}

Real probe_operator_norm(const LinearMap& op, const BlockNorm& norm_in, const BlockNorm& norm_out,
                         const BlockSampler& sample, std::mt19937_64& rng, int probes) {
  Real best = 0;
  for (int p = 0; p < probes; ++p) {
    ScaleFunction x = sample(rng);
    const Real nx = norm_in(x);
    if (nx == 0) continue;
    best = std::max(best, norm_out(op(x)) / nx);
  }
  return best;
}

Real contraction_factor(const BlockOperator& df, const BlockOperator& l, const BlockNorm& nrm,
                        const BlockSampler& sample, std::mt19937_64& rng, int probes, int iters) {
  auto residual_op = [&](const ScaleFunction& k) { return k - df.apply(l.apply(k)); };
  return power_iteration_norm(residual_op, nrm, sample, rng, iters, probes);
}

ScaleFunction NeumannInverse::apply(const ScaleFunction& k) const {
  ScaleFunction acc = k;
  ScaleFunction term = k;
  for (int i = 0; i < series_terms; ++i) {
    term -= df.apply(l.apply(term));
    acc += term;
  }
  return l.apply(acc);
}

NeumannInverse neumann_right_inverse(const BlockOperator& df, const BlockOperator& l,
                                     const BlockNorm& nrm, const BlockSampler& sample,
                                     std::mt19937_64& rng, Real q_max, Real term_tol,
                                     int verify_probes) {
  NeumannInverse t;
  t.df = df;
  t.l = l;
  t.q = contraction_factor(df, l, nrm, sample, rng);
  if (t.q > q_max) throw ContractionFailure(t.q, q_max);

  if (t.q <= term_tol) {
    t.series_terms = 0; // series collapses: T = L
  } else {
    // smallest I with q^{I+1} / (1-q) <= term_tol
    const Real need = logl(term_tol * (1.0L - t.q)) / logl(t.q);
    t.series_terms = std::max(0, static_cast<int>(ceill(need)) - 1);
  }

  for (int p = 0; p < verify_probes; ++p) {
    ScaleFunction k = sample(rng);
    const Real nk = nrm(k);
    if (nk == 0) continue;
    const Real err = nrm(df.apply(t.apply(k)) - k);
    if (err > 2.0L * term_tol * nk) throw ContractionFailure(err / nk, 2.0L * term_tol);
  }
  return t;
}

SolveReport solve_local(const NonlinearMap& f, const ScaleFunction& v, const InverseFactory& t_at,
                        Real radius, const BlockNorm& norm_domain, const BlockNorm& norm_codomain,
                        Real tol, int budget, const BlockSampler& sample, std::mt19937_64& rng,
                        const ScaleFunction& zero_u) {
  SolveReport rep;
  rep.solution = zero_u;
  const Real nv = norm_codomain(v);
  if (nv == 0) { // f(0) = 0, nothing to do
    rep.residual = 0;
    rep.success = true;
    return rep;
  }

  auto t_norm = [&](const NeumannInverse& t) {
    return probe_operator_norm([&](const ScaleFunction& k) { return t.apply(k); }, norm_codomain,
                               norm_domain, sample, rng, 8);
  };

  NeumannInverse t_cur;
  try {
    t_cur = t_at(zero_u);
  } catch (const ContractionFailure& e) {
    rep.failure = "contraction";
    rep.q_seen = e.q();
    return rep;
  } catch (const RightInverseFailure&) {
    rep.failure = "contraction";
    return rep;
  }
  rep.q_seen = t_cur.q;
  rep.m_est = t_norm(t_cur);
  // The data direction is a probe too; applied updates refine m_est below.
  rep.m_est = std::max(rep.m_est, norm_domain(t_cur.apply(v)) / nv);

  if (rep.m_est > 0 && nv > radius / rep.m_est) {
    rep.failure = "precondition";
    rep.residual = nv;
    return rep;
  }

  ScaleFunction u = zero_u;
  Real t_committed = 0;
  Real dt = 0.125L;
  int streak = 0;
  bool t_fresh = true; // t_cur is centered at the current iterate

  auto refresh = [&](const ScaleFunction& base) -> bool {
    try {
      t_cur = t_at(base);
    } catch (const ContractionFailure& e) {
      rep.q_seen = std::max(rep.q_seen, e.q());
      return false;
    } catch (const RightInverseFailure&) {
      return false;
    }
    rep.q_seen = std::max(rep.q_seen, t_cur.q);
    rep.m_est = std::max(rep.m_est, t_norm(t_cur));
    t_fresh = true;
    return true;
  };

  while (budget > 0) {
    const Real t_next = std::min(1.0L, t_committed + dt);
    const ScaleFunction target = Complex{static_cast<double>(t_next), 0.0} * v;
    const Real stage_tol = t_next >= 1.0L ? tol : std::max(tol, 1e-3L * dt * nv);

    // Corrector loop at the fixed stage target.
    ScaleFunction w = u;
    Real res = norm_codomain(f(w) - target);
    bool stage_ok = res <= stage_tol;
    bool stage_failed = false;
    Real lambda = 1.0L; // warm-started damping factor
    int slow_streak = 0;
    while (!stage_ok && !stage_failed && budget > 0) {
      if (!t_fresh && !refresh(w)) {
        rep.failure = "contraction";
        rep.solution = u;
        rep.residual = norm_codomain(f(u) - v);
        return rep;
      }
      const ScaleFunction r = target - f(w);
      const ScaleFunction upd = t_cur.apply(r);
      const Real nr = norm_codomain(r);
      if (nr > 0) rep.m_est = std::max(rep.m_est, norm_domain(upd) / nr);
      --budget;
      ++rep.iterations;

      // Damped correction: a full inverse step overshoots once the update
      // leaves the linearization zone, so back off until the residual
      // decreases by the sufficient fraction.
      lambda = std::min(1.0L, 4.0L * lambda);
      bool accepted = false;
      while (lambda >= 1e-6L) {
        ScaleFunction trial = w + Complex{static_cast<double>(lambda), 0.0} * upd;
        const Real nu = norm_domain(trial);
        const Real res_trial = norm_codomain(f(trial) - target);
        if (nu <= radius && res_trial <= (1.0L - 0.25L * lambda) * res) {
          w = std::move(trial);
          res = res_trial;
          rep.max_norm = std::max(rep.max_norm, nu);
          accepted = true;
          break;
        }
        lambda *= 0.5L;
      }
      // A persistently tiny damping factor means the stage entered the
      // crawl regime; shrinking the path step is far cheaper than creeping.
      slow_streak = accepted && lambda < 0.125L ? slow_streak + 1 : 0;
      if (!accepted || slow_streak >= 3) {
        stage_failed = true;
        break;
      }
      t_fresh = false; // recenter the inverse before the next correction
      if (res <= stage_tol) stage_ok = true;
    }

    if (stage_ok) {
      u = std::move(w);
      t_committed = t_next;
      if (t_committed >= 1.0L) break;
      if (++streak >= 2) {
        dt = std::min(0.25L, dt * 2.0L);
        streak = 0;
      }
    } else {
      streak = 0;
      dt *= 0.5L;
      if (dt < 1e-8L) break;
    }
  }

  rep.solution = u;
  rep.residual = norm_codomain(f(u) - v);
  if (t_committed < 1.0L || rep.residual > tol) {
    rep.failure = "budget";
    return rep;
  }
  const Real nu = norm_domain(u);
  rep.max_norm = std::max(rep.max_norm, nu);
  if (nu > radius) {
    rep.failure = "ball";
    return rep;
  }
  if (nu > rep.m_est * nv + 1e-8L) {
    rep.failure = "norm-bound";
    return rep;
  }
  rep.success = true;
  return rep;
}

SolveReport newton_baseline(const NonlinearMap& f,
                            const std::function<LinearMap(const ScaleFunction&)>& l_at,
                            const ScaleFunction& v, Real radius, const BlockNorm& norm_domain,
                            const BlockNorm& norm_codomain, Real tol, int budget,
                            const ScaleFunction& zero_u) {
  SolveReport rep;
  rep.solution = zero_u;
  ScaleFunction u = zero_u;
  for (int it = 0; it < budget; ++it) {
    const ScaleFunction r = f(u) - v;
    const Real res = norm_codomain(r);
    rep.residual = res;
    if (!std::isfinite(static_cast<double>(res))) {
      rep.failure = "divergence";
      rep.solution = u;
      return rep;
    }
    if (res <= tol) {
      const Real nu = norm_domain(u);
      rep.max_norm = std::max(rep.max_norm, nu);
      rep.solution = u;
      if (nu > radius) {
        rep.failure = "ball";
        return rep;
      }
      rep.success = true;
      return rep;
    }
    LinearMap l;
    try {
      l = l_at(u);
    } catch (const RightInverseFailure&) {
      rep.failure = "contraction";
      rep.solution = u;
      return rep;
    }
    u -= l(r);
    ++rep.iterations;
    const Real nu = norm_domain(u);
    rep.max_norm = std::max(rep.max_norm, nu);
    if (!std::isfinite(static_cast<double>(nu)) || nu > 100.0L * std::max(radius, 1.0L)) {
      rep.failure = "divergence";
      rep.solution = u;
      return rep;
    }
  }
  rep.failure = "budget";
  rep.solution = u;
  return rep;
}

} // namespace tame
