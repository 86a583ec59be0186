#include "tame/galerkin_iteration.hpp"

#include <algorithm>
#include <cmath>

#include "tame/random.hpp"

namespace tame {

namespace {

Real pow_log(Real base, Real expo) { return expl(expo * logl(base)); }

} // namespace

void IterationParams::validate() const {
  if (!(K >= 2)) throw std::invalid_argument("IterationParams: K >= 2 required");
  if (!(tol_final > 0) || !(inner_tol > 0)) throw std::invalid_argument("IterationParams: tolerances must be positive");
  if (n_max < 1) throw std::invalid_argument("IterationParams: n_max >= 1");
  if (!(q_max > 0 && q_max < 1)) throw std::invalid_argument("IterationParams: q_max in (0,1)");
  if (!(params.alpha > 1)) throw std::invalid_argument("IterationParams: alpha > 1 required");
}

Lambdas init_lambdas(double K, double eps, double eta, double alpha, double theta) {
  if (!(K >= 2)) throw std::invalid_argument("init_lambdas: K >= 2");
  if (!(eps > 0 && eps <= 1)) throw std::invalid_argument("init_lambdas: eps in (0,1]");
  if (!(alpha > 1) || !(theta > 0 && theta <= 1) || !(alpha * theta > 1))
    throw std::invalid_argument("init_lambdas: need alpha > 1, 0 < theta <= 1, alpha theta > 1");
  Lambdas l;
  l.lambda1 = static_cast<Real>(K) * powl(static_cast<Real>(eps), -static_cast<Real>(eta));
  l.lambda0 = pow_log(l.lambda1, 1.0L / static_cast<Real>(alpha));
  l.m0 = pow_log(l.lambda0, static_cast<Real>(theta));
  l.m1 = pow_log(l.lambda1, static_cast<Real>(theta));
  if (theta < 1 && !(l.m0 < l.lambda0 && l.lambda0 < l.m1 && l.m1 < l.lambda1))
    throw std::invalid_argument("init_lambdas: cutoff interleaving violated");
  return l;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::converged: return "converged";
    case Verdict::stalled: return "stalled";
    case Verdict::contraction_failure: return "contraction_failure";
    case Verdict::budget: return "budget";
    case Verdict::rejected: return "rejected";
  }
  return "unknown";
}

GalerkinIteration::GalerkinIteration(const ModelProblem& problem, IterationParams ip, double eps)
    : problem_(&problem), ip_(std::move(ip)), eps_(eps) {
  ip_.validate();
  l_ = init_lambdas(ip_.K, eps, ip_.params.eta, ip_.params.alpha, ip_.params.theta);
  const FrequencyGrid& g = problem.grid();
  grid_ceiling_ = mode_bracket(static_cast<Real>(g.dim) * g.max_mode * g.max_mode);
}

Real GalerkinIteration::lambda_level(int n) const {
  if (n < 0) return l_.m0; // level "-0" cutoff only used through m_level
  return expl(powl(static_cast<Real>(ip_.params.alpha), n - 1) * logl(l_.lambda1));
}

Real GalerkinIteration::m_level(int n) const {
  if (n <= 0) return l_.m0;
  return pow_log(lambda_level(n), static_cast<Real>(ip_.params.theta));
}

NormSpec GalerkinIteration::spec(double s) const {
  return plain_norm(s, minimal_S(ip_.params, problem_->signature()));
}

Real GalerkinIteration::block_norm(const ScaleFunction& u, int level) const {
  const auto& p = ip_.params;
  if (level <= 1) {
    const Real w = pow_log(l_.lambda1, -(static_cast<Real>(p.theta) / p.alpha) *
                                           (static_cast<Real>(p.sigma) - ip_.targets.delta));
    return norm(u, spec(ip_.targets.delta)) + w * norm(u, spec(p.sigma));
  }
  const Real w = pow_log(lambda_level(level - 1),
                         -(static_cast<Real>(p.sigma) - problem_->signature().s0));
  return norm(u, spec(problem_->signature().s0)) + w * norm(u, spec(p.sigma));
}

BlockNorm GalerkinIteration::level_norm_fn(int level) const {
  const auto& p = ip_.params;
  const double s_cap = minimal_S(p, problem_->signature());
  const FrequencyGrid g = problem_->grid();
  const double lo_index = level <= 1 ? ip_.targets.delta : problem_->signature().s0;
  const Real w = level <= 1
                     ? pow_log(l_.lambda1, -(static_cast<Real>(p.theta) / p.alpha) *
                                               (static_cast<Real>(p.sigma) - ip_.targets.delta))
                     : pow_log(lambda_level(level - 1),
                               -(static_cast<Real>(p.sigma) - problem_->signature().s0));
  auto lo = std::make_shared<SobolevWeights>(g, lo_index);
  auto hi = std::make_shared<SobolevWeights>(g, p.sigma);
  (void)s_cap;
  return [lo, hi, w](const ScaleFunction& u) { return lo->eval(u) + w * hi->eval(u); };
}

BlockSampler GalerkinIteration::sampler(Real cutoff, std::uint64_t salt) const {
  // Mild decay cycle only: deeply decayed probes would collapse the weighted
  // norm while leaving coefficient-level roundoff at the cutoff edge, turning
  // float noise into spurious contraction readings.
  const FrequencyGrid g = problem_->grid();
  auto counter = std::make_shared<int>(static_cast<int>(salt % 3));
  return [g, cutoff, counter](std::mt19937_64& rng) {
    const int c = (*counter)++;
    const double decay = c % 3 == 0 ? 0.0 : (c % 3 == 1 ? 1.0 : 2.0);
    return project(random_function(g, rng, 1.0, true, decay), cutoff);
  };
}

InverseFactory GalerkinIteration::inverse_factory(const ScaleFunction& center, int level,
                                                  Real cutoff_e, Real cutoff_ep,
                                                  std::mt19937_64& rng) {
  const bool galerkin = ip_.params.variant == ParamVariant::galerkin;
  const BlockNorm nrm = level_norm_fn(level);
  const BlockSampler smp = sampler(cutoff_ep, static_cast<std::uint64_t>(level));
  auto rng_ptr = std::make_shared<std::mt19937_64>(rng());
  const ModelProblem* prob = problem_;
  const double eps = eps_;
  const Real q_max = ip_.q_max, term_tol = ip_.term_tol;
  const FrequencyGrid g = prob->grid();

  return [=, this](const ScaleFunction& z) {
    const ScaleFunction base = center + z;
    LinearMap raw;
    if (galerkin) raw = prob->block_inverse_at(base, eps, cutoff_e);
    if (!raw) raw = prob->right_inverse_at(base, eps);

    BlockOperator l_op;
    l_op.grid = g;
    l_op.domain_cutoff = cutoff_ep;
    l_op.codomain_cutoff = cutoff_e;
    l_op.apply = [raw, cutoff_e](const ScaleFunction& k) { return project(raw(k), cutoff_e); };

    BlockOperator df_op;
    df_op.grid = g;
    df_op.domain_cutoff = cutoff_e;
    df_op.codomain_cutoff = cutoff_ep;
    df_op.apply = [prob, base, eps, cutoff_ep](const ScaleFunction& h) {
      return project(prob->apply_d(base, h, eps), cutoff_ep);
    };

    return neumann_right_inverse(df_op, l_op, nrm, smp, *rng_ptr, q_max, term_tol, 3);
  };
}

std::pair<ScaleFunction, StepRecord> GalerkinIteration::initialize(const ScaleFunction& v) {
  const auto& p = ip_.params;
  const TameSignature& sig = problem_->signature();
  StepRecord rec;
  rec.n = 1;
  rec.lambda_n = l_.lambda1;
  rec.m_n = l_.m1;
  rec.r_n = 1; // unit ball in the level-1 norm
  rec.saturated = l_.lambda1 >= grid_ceiling_;

  const ScaleFunction target = project(v, l_.m0);
  const ScaleFunction zero(problem_->grid(), v.epsilon_weight());
  std::mt19937_64 rng(ip_.seed ^ 0x51d71f3u);

  auto f1 = [this, &zero](const ScaleFunction& u) {
    return project(problem_->eval(u, eps_), l_.m1);
  };
  const BlockNorm n1 = level_norm_fn(1);
  const Real nt = n1(target);
  const Real tol1 = std::max(0.02L * ip_.tol_final, 1e-13L * nt);

  auto factory = inverse_factory(zero, 1, l_.lambda1, l_.m1, rng);
  SolveReport rep = solve_local(f1, target, factory, 1.0L, n1, n1, tol1, ip_.inner_budget,
                                sampler(l_.m1, 1), rng, zero);

  rec.inner_success = rep.success;
  rec.inner_failure = rep.failure;
  rec.inner_iterations = rep.iterations;
  rec.inner_residual = rep.residual;
  rec.q_n = rep.q_seen;
  rec.margin = rep.m_est > 0 && nt > 0 ? 1.0L / (rep.m_est * nt) : std::numeric_limits<Real>::infinity();

  const ScaleFunction& u1 = rep.solution;
  rec.diff_s0 = norm(u1, spec(sig.s0));
  rec.diff_sigma = norm(u1, spec(p.sigma));
  rec.u_s1 = norm(u1, spec(ip_.targets.s1));
  rec.residual_s0 = norm(problem_->eval(u1, eps_) - v, spec(sig.s0));

  // Measured constants of the two starting-point bounds.
  const Real nv = norm(v, spec(ip_.targets.delta));
  const Real lam_fac = pow_log(l_.m1, sig.ell_prime) + pow_log(l_.lambda1, sig.ell);
  const Real denom_delta = powl(static_cast<Real>(eps_), -static_cast<Real>(sig.g)) * lam_fac * nv;
  rec.bound_c_s0 = denom_delta > 0 ? norm(u1, spec(ip_.targets.delta)) / denom_delta : 0;
  const Real denom_sigma = pow_log(l_.lambda1, (static_cast<Real>(p.theta) / p.alpha) *
                                                   (static_cast<Real>(p.sigma) - ip_.targets.delta));
  rec.bound_c_sigma = rec.diff_sigma / denom_sigma;

  return {u1, rec};
}

StepRecord GalerkinIteration::step(const ScaleFunction& v, const ScaleFunction& u_prev, int n,
                                   ScaleFunction* u_next) {
  if (n < 2) throw std::invalid_argument("step: levels start at n = 2");
  const auto& p = ip_.params;
  const TameSignature& sig = problem_->signature();
  StepRecord rec;
  rec.n = n;
  const Real lam_n = lambda_level(n), lam_p = lambda_level(n - 1);
  const Real m_n = m_level(n), m_p = m_level(n - 1), m_pp = m_level(n - 2);
  rec.lambda_n = lam_n;
  rec.m_n = m_n;
  rec.saturated = lam_n >= grid_ceiling_;

  rec.telescope_err = norm(project(problem_->eval(u_prev, eps_), m_p) - project(v, m_pp),
                           spec(sig.s0));

  const ScaleFunction dv = project(v, m_p) - project(v, m_pp);
  const ScaleFunction fu_prev = problem_->eval(u_prev, eps_);
  const ScaleFunction en =
      Complex{-1.0, 0.0} * (project(fu_prev, m_n) - project(fu_prev, m_p));
  const ScaleFunction target = dv + en;

  const Real nv = norm(v, spec(ip_.targets.delta));
  const Real lam_fac = pow_log(l_.m1, sig.ell_prime) + pow_log(l_.lambda1, sig.ell);
  const Real eps_g = powl(static_cast<Real>(eps_), -static_cast<Real>(sig.g));
  rec.r_n = eps_g * pow_log(lam_p, p.alpha * p.beta - p.sigma + sig.s0) * lam_fac * nv;

  const BlockNorm nn = level_norm_fn(n);
  rec.delta_v_norm = nn(dv);
  rec.e_n_norm = nn(en);

  // Measured constants of the shell and spill majorants.
  const Real dv_den = pow_log(m_pp, sig.s0 - ip_.targets.delta) * nv;
  rec.delta_v_c = dv_den > 0 ? rec.delta_v_norm / dv_den : 0;
  const Real en_den =
      eps_g * pow_log(lam_p, p.beta) * pow_log(m_p, sig.m + sig.s0 - p.sigma) * lam_fac * nv;
  rec.e_n_c = en_den > 0 ? rec.e_n_norm / en_den : 0;

  // Exponent bookkeeping for the sufficient condition, in powers of
  // lambda_{n-1}: the inverse branch maximum plus the data branch maximum
  // must stay below the radius exponent.
  {
    const double th = p.theta, al = p.alpha, be = p.beta, si = p.sigma;
    const double inverse_high = al * (be + sig.ell) - si + sig.s0 + sig.ell_prime;
    const double inverse_low = al * th * sig.ell_prime;
    const double shell = th * (sig.s0 - ip_.targets.delta) / al;
    const double spill = sig.g / p.eta + be + th * (sig.m + sig.s0 - si);
    rec.dominant = std::string(inverse_high >= inverse_low ? "inverse-high" : "inverse-low") +
                   "+" + (shell >= spill ? "shell" : "spill");
  }

  const ScaleFunction zero(problem_->grid(), v.epsilon_weight());
  std::mt19937_64 rng(ip_.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(n)));
  auto fn = [this, &u_prev, &fu_prev, m_n](const ScaleFunction& z) {
    return project(problem_->eval(u_prev + z, eps_) - fu_prev, m_n);
  };
  const Real nt = nn(target);
  const Real toln = std::max(0.02L * ip_.tol_final, 1e-13L * nt);
  auto factory = inverse_factory(u_prev, n, lam_n, m_n, rng);
  SolveReport rep = solve_local(fn, target, factory, rec.r_n, nn, nn, toln, ip_.inner_budget,
                                sampler(m_n, static_cast<std::uint64_t>(n)), rng, zero);

  rec.inner_success = rep.success;
  rec.inner_failure = rep.failure;
  rec.inner_iterations = rep.iterations;
  rec.inner_residual = rep.residual;
  rec.q_n = rep.q_seen;
  rec.margin = rep.m_est > 0 && nt > 0 ? rec.r_n / (rep.m_est * nt)
                                       : std::numeric_limits<Real>::infinity();

  if (!rep.success) return rec;

  const ScaleFunction& z = rep.solution;
  *u_next = u_prev + z;
  rec.diff_s0 = norm(z, spec(sig.s0));
  rec.diff_sigma = norm(z, spec(p.sigma));
  rec.bound_c_s0 = rec.r_n > 0 ? rec.diff_s0 / rec.r_n : 0;
  const Real rhs_sigma = rec.r_n * pow_log(lam_p, p.sigma - sig.s0);
  rec.bound_c_sigma = rhs_sigma > 0 ? rec.diff_sigma / rhs_sigma : 0;
  rec.u_s1 = norm(*u_next, spec(ip_.targets.s1));
  rec.residual_s0 = norm(problem_->eval(*u_next, eps_) - v, spec(sig.s0));
  return rec;
}

ConvergenceReport GalerkinIteration::run(const ScaleFunction& v) {
  const auto& p = ip_.params;
  const TameSignature& sig = problem_->signature();
  ConvergenceReport rep;
  rep.u = ScaleFunction(problem_->grid(), v.epsilon_weight());

  const Real nv = norm(v, spec(ip_.targets.delta));
  if (ip_.r > 0) {
    rep.final_bound = powl(static_cast<Real>(eps_), -static_cast<Real>(ip_.targets.g_prime)) * nv /
                      ip_.r;
    if (ip_.enforce_regime && nv > ip_.r * powl(static_cast<Real>(eps_),
                                                static_cast<Real>(ip_.targets.g_prime))) {
      rep.verdict = Verdict::rejected;
      rep.note = "data above the solvable-threshold regime";
      return rep;
    }
  }

  auto [u1, rec1] = initialize(v);
  rep.steps.push_back(rec1);
  if (!rec1.inner_success) {
    rep.verdict = rec1.inner_failure == "precondition" ? Verdict::rejected
                  : rec1.inner_failure == "contraction" ? Verdict::contraction_failure
                  : rec1.inner_failure == "budget"      ? Verdict::budget
                                                        : Verdict::stalled;
    rep.note = "level 1: " + rec1.inner_failure;
    return rep;
  }

  ScaleFunction u = u1;
  rep.residual_s0 = rec1.residual_s0;
  rep.u_s1 = rec1.u_s1;

  // Increment norms at the intermediate index for the summability check.
  const double t1 = 0.5 * (ip_.targets.s1 + (p.sigma - p.alpha * p.beta));
  std::vector<Real> diffs_t1;

  auto finish = [&](Verdict verdict, const std::string& note) {
    rep.verdict = verdict;
    rep.note = note;
    rep.u = u;

    // Partial sums of increments against the geometric majorant.
    Real sum = 0;
    for (Real d : diffs_t1) sum += d;
    const Real e = static_cast<Real>(p.alpha) * p.beta - p.sigma + t1;
    Real majorant = 0;
    for (int j = 0; j < 600; ++j) {
      const Real term = exp2l(powl(static_cast<Real>(p.alpha), j) * e);
      majorant += term;
      if (term < 1e-34L) break;
    }
    const Real lam_fac = pow_log(l_.m1, sig.ell_prime) + pow_log(l_.lambda1, sig.ell);
    const Real bound = powl(static_cast<Real>(eps_), -static_cast<Real>(sig.g)) * lam_fac *
                       majorant * nv;
    rep.cauchy_c = bound > 0 ? sum / bound : 0;
    rep.cauchy_ok = diffs_t1.empty() || rep.cauchy_c <= 1.0L + 1e-6L;
    return rep;
  };

  if (rep.residual_s0 <= ip_.tol_final) {
    if (rep.u_s1 > 1.0L) return finish(Verdict::stalled, "solution left the unit ball");
    if (ip_.r > 0 && rep.u_s1 > rep.final_bound + 1e-12L)
      return finish(Verdict::stalled, "threshold-scaling bound exceeded");
    return finish(Verdict::converged, "");
  }

  for (int n = 2; n <= ip_.n_max; ++n) {
    ScaleFunction u_next;
    StepRecord rec = step(v, u, n, &u_next);
    rep.steps.push_back(rec);
    if (!rec.inner_success) {
      const Verdict verd = rec.inner_failure == "contraction" ? Verdict::contraction_failure
                           : rec.inner_failure == "budget"    ? Verdict::budget
                                                              : Verdict::stalled;
      return finish(verd, "level " + std::to_string(n) + ": " + rec.inner_failure +
                              " (dominant " + rec.dominant + ")");
    }
    diffs_t1.push_back(norm(u_next - u, spec(t1)));
    u = std::move(u_next);
    rep.residual_s0 = rec.residual_s0;
    rep.u_s1 = rec.u_s1;

    if (rep.u_s1 > 1.0L) return finish(Verdict::stalled, "solution left the unit ball");
    if (rep.residual_s0 <= ip_.tol_final) {
      if (ip_.r > 0 && rep.u_s1 > rep.final_bound + 1e-12L)
        return finish(Verdict::stalled, "threshold-scaling bound exceeded");
      return finish(Verdict::converged, "");
    }
  }
  return finish(Verdict::budget, "level budget exhausted before the residual target");
}

AdaptedK adapt_K(const ModelProblem& problem, const IterationParams& ip, double eps) {
  AdaptedK out;
  const bool galerkin = ip.params.variant == ParamVariant::galerkin;
  for (double K = 2; K <= ip.K_max; K *= 2) {
    IterationParams trial = ip;
    trial.K = K;
    GalerkinIteration it(problem, trial, eps);
    std::mt19937_64 rng(ip.seed ^ 0xada9f1ull ^ static_cast<std::uint64_t>(K));
    Real worst = 0;

    const int levels = galerkin ? 1 : 2;
    bool all_ok = true;
    for (int level = 1; level <= levels && all_ok; ++level) {
      const Real cutoff_e = it.lambda_level(level);
      const Real cutoff_ep = it.m_level(level);
      const BlockNorm nrm = [&it, level](const ScaleFunction& u) { return it.block_norm(u, level); };

      // Probe bases: the origin and a random point at the probe amplitude.
      std::vector<ScaleFunction> bases;
      bases.emplace_back(problem.grid(), 1.0);
      {
        ScaleFunction u = project(random_function(problem.grid(), rng, 1.0, true), cutoff_e);
        const Real scale_norm = level == 1 ? it.block_norm(u, 1)
                                           : norm(u, plain_norm(ip.targets.s1));
        if (scale_norm > 0)
          u *= Complex{static_cast<double>(ip.contraction_probe_scale / scale_norm), 0.0};
        bases.push_back(std::move(u));
      }

      for (const auto& base : bases) {
        LinearMap raw;
        if (galerkin) raw = problem.block_inverse_at(base, eps, cutoff_e);
        if (!raw) raw = problem.right_inverse_at(base, eps);
        BlockOperator l_op{[raw, cutoff_e](const ScaleFunction& k) { return project(raw(k), cutoff_e); },
                           problem.grid(), cutoff_ep, cutoff_e};
        BlockOperator df_op{[&problem, &base, eps, cutoff_ep](const ScaleFunction& h) {
                              return project(problem.apply_d(base, h, eps), cutoff_ep);
                            },
                            problem.grid(), cutoff_e, cutoff_ep};
        auto smp = [&problem, cutoff_ep](std::mt19937_64& r) {
          return project(random_function(problem.grid(), r, 1.0, true), cutoff_ep);
        };
        const Real q = contraction_factor(df_op, l_op, nrm, smp, rng);
        worst = std::max(worst, q);
        if (q > 0.5L) all_ok = false;
      }
    }
    out.worst_factor = worst;
    if (all_ok) {
      out.K = K;
      out.ok = true;
      return out;
    }
  }
  out.K = ip.K_max;
  return out;
}

std::optional<Real> calibrate_r(const ModelProblem& problem, IterationParams ip,
                                std::span<const double> probe_eps,
                                const std::function<ScaleFunction(Real, double)>& build_v,
                                int max_halvings) {
  Real r = 1;
  for (int h = 0; h < max_halvings; ++h, r *= 0.5L) {
    ip.r = r;
    bool all = true;
    for (double eps : probe_eps) {
      const Real amp = r * powl(static_cast<Real>(eps), static_cast<Real>(ip.targets.g_prime)) *
                       (1.0L - 1e-9L);
      GalerkinIteration it(problem, ip, eps);
      const ConvergenceReport rep = it.run(build_v(amp, eps));
      if (rep.verdict != Verdict::converged) {
        all = false;
        break;
      }
    }
    if (all) return r;
  }
  return std::nullopt;
}

} // namespace tame
