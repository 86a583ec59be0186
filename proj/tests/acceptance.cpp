// Acceptance suite: every headline property of the library at desk scale,
// one pass/fail line per criterion, with tolerances pinned in code.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "tame/bench.hpp"
#include "tame/fit.hpp"
#include "tame/galerkin_iteration.hpp"
#include "tame/problems.hpp"
#include "tame/random.hpp"

using namespace tame;

namespace {

int failures = 0;

void criterion(int id, const std::string& name, const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%d] %-28s %s (%.1fs)%s%s\n", id, name.c_str(), ok ? "PASS" : "FAIL", secs,
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

bool check(bool cond, const std::string& what, std::string& detail) {
  if (!cond && detail.empty()) detail = what;
  return cond;
}

ExperimentConfig p1_bench_config() {
  ExperimentConfig cfg;
  cfg.problem = "p1";
  cfg.p1 = P1Config{1.0, 0.05, 0.25, 1.0, 8};
  cfg.targets = UserTargets{2.0, 4.5, 1.25};
  cfg.run.eta = 0.9;
  cfg.run.sigma_margin = 4;
  cfg.run.n_max = 8;
  cfg.run.tol_final = 1e-8L;
  cfg.seed = 20240711;
  return cfg;
}

// 1. Scale axioms on 1d grids, randomized.
bool scale_axioms(std::string& detail) {
  const double S = 8.0;
  const ScaleConstants consts = declared_scale_constants(S);
  bool ok = true;
  for (int n : {16, 32, 64}) {
    const FrequencyGrid g(1, n, 1);
    std::mt19937_64 rng(1000 + n);
    std::uniform_real_distribution<double> us(0.0, S), ul(1.0, 1.5 * n);
    Real worst_growth = 0, worst_approx = 0;
    for (int i = 0; i < 1000; ++i) {
      const auto u = random_function(g, rng);
      const double s = us(rng), t = us(rng);
      const Real lam = static_cast<Real>(ul(rng));
      worst_growth = std::max(worst_growth, verify_growth(u, s, t, lam).ratio);
      const double tt = std::min(s, t);
      worst_approx = std::max(worst_approx, verify_approx(u, std::max(s, t), tt, lam).ratio);
      ok = ok && interpolation_check(u, tt, 0.5 * (s + t), std::max(s, t), NormVariant::plain_sobolev,
                                     0.0, consts.a3, 1e-10L)
                     .ok;
    }
    ok = check(worst_growth <= consts.a1, "growth bound exceeded on N=" + std::to_string(n), detail) && ok;
    ok = check(worst_approx <= consts.a2, "approximation bound exceeded on N=" + std::to_string(n),
               detail) && ok;
  }
  check(ok, "interpolation violated", detail);
  return ok;
}

// 2. Parameter solver on the concentrated-Schroedinger signature.
bool parameter_solver(std::string& detail) {
  TameSignature sig;
  sig.s0 = 3.5;
  sig.m = 2;
  sig.ell = 2;
  sig.ell_prime = 0;
  sig.g = 2;
  const UserTargets tgt{5.5, 6.0, 2.5};

  const auto p = solve_params(sig, tgt, 0.1);
  bool ok = check(check_constraints(sig, tgt, p).empty(), "returned tuple fails the checker", detail);

  // piecewise affinity of sigma_bar in g/eta over 10 points
  std::vector<double> etas;
  for (int i = 0; i < 10; ++i) etas.push_back(0.02 + 0.022 * i);
  const auto rows = sigma_growth_scan(sig, tgt, etas);
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    xs.push_back(r.g_over_eta);
    ys.push_back(r.sigma_bar);
  }
  // split at curvature, fit each maximal run
  std::vector<std::size_t> cuts{0};
  for (std::size_t i = 2; i < xs.size(); ++i) {
    const double interp = ys[i - 2] + (ys[i] - ys[i - 2]) * (xs[i - 1] - xs[i - 2]) / (xs[i] - xs[i - 2]);
    if (std::fabs(interp - ys[i - 1]) > 1e-8 * std::max(1.0, std::fabs(ys[i - 1])))
      cuts.push_back(i - 1);
  }
  cuts.push_back(xs.size());
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const std::size_t a = cuts[c], b = cuts[c + 1];
    if (b - a < 3) continue; // two points fit exactly
    const LineFit f = fit_line(std::span(xs).subspan(a, b - a), std::span(ys).subspan(a, b - a));
    ok = check(f.r2 >= 0.999, "piecewise fit below R^2 = 0.999", detail) && ok;
  }

  // S0 * (g'-g) stays within a 3x band across one decade of gaps
  double lo = 1e300, hi = 0;
  for (int i = 1; i <= 10; ++i) {
    UserTargets t2 = tgt;
    t2.g_prime = sig.g + 0.1 * i;
    const auto pi = solve_params(sig, t2, canonical_eta(sig, t2));
    const double prod = minimal_S(pi, sig) * (t2.g_prime - sig.g);
    lo = std::min(lo, prod);
    hi = std::max(hi, prod);
  }
  ok = check(hi / lo <= 3.0, "S0 x gap band wider than 3x", detail) && ok;
  return ok;
}

// 3. Neumann right-inverse machinery on blocks up to 64.
bool right_inverse_machinery(std::string& detail) {
  SmallDivisorProblem p1(64, 1.0); // unit losses, the default instance
  const FrequencyGrid& g = p1.grid();
  const double eps = 0.5;
  const double s0 = 1.0, sigma = 6.0;
  bool ok = true;
  std::mt19937_64 rng(77);
  for (Real lam : {8.0L, 16.0L, 32.0L, 64.0L}) {
    const Real w = powl(lam, -(static_cast<Real>(sigma) - s0));
    SobolevWeights lo(g, s0), hi(g, sigma);
    const BlockNorm nrm = [&lo, &hi, w](const ScaleFunction& u) {
      return lo.eval(u) + w * hi.eval(u);
    };
    const BlockSampler sam = [&g, lam](std::mt19937_64& r) {
      return project(random_function(g, r, 1.0, true), lam);
    };
    ScaleFunction base = project(random_function(g, rng, 1.0, true), lam);
    base *= Complex{static_cast<double>(0.02L / (lam * lam)), 0.0};

    BlockOperator df{[&p1, base, eps, lam](const ScaleFunction& h) {
                       return project(p1.apply_d(base, h, eps), lam);
                     },
                     g, lam, lam};
    BlockOperator l{[&p1, eps, lam](const ScaleFunction& k) {
                      return project(p1.right_inverse_zero(k, eps), lam);
                    },
                    g, lam, lam};
    const auto t = neumann_right_inverse(df, l, nrm, sam, rng, 0.5L, 1e-8L, 0);
    for (int i = 0; i < 20; ++i) {
      const auto k = sam(rng);
      const Real err = nrm(df.apply(t.apply(k)) - k);
      ok = ok && err <= 2e-8L * nrm(k);
    }
    ok = check(ok, "right-inverse identity failed at block " + format_real(lam), detail);
    if (t.q <= 0.5L) {
      const Real tn = probe_operator_norm([&t](const ScaleFunction& k) { return t.apply(k); }, nrm,
                                          nrm, sam, rng);
      const Real ln = probe_operator_norm([&l](const ScaleFunction& k) { return l.apply(k); }, nrm,
                                          nrm, sam, rng);
      ok = check(tn <= 2.0L * 1.05L * ln, "series norm bound failed at block " + format_real(lam),
                 detail) && ok;
    }
  }
  return ok;
}

// 4. End-to-end convergence across three eps values in the calibrated regime.
bool end_to_end(std::string& detail) {
  ExperimentConfig cfg = p1_bench_config();
  ResolvedSetup setup = resolve_p1_setup(cfg);
  const std::vector<double> probes{0.5, 0.25, 0.125};

  const AdaptedK ak = adapt_K(setup.problem, setup.ip, 0.125);
  if (!check(ak.ok, "cutoff adaptation failed", detail)) return false;
  setup.ip.K = ak.K;

  auto build_v = [&](Real amp, double) {
    return target_profile(setup.problem.grid(), setup.tgt.delta, cfg.v, amp);
  };
  const auto r = calibrate_r(setup.problem, setup.ip, probes, build_v);
  if (!check(r.has_value(), "threshold-constant calibration failed", detail)) return false;
  setup.ip.r = *r;

  bool ok = true;
  for (double eps : probes) {
    GalerkinIteration it(setup.problem, setup.ip, eps);
    const Real amp = 0.5L * *r * powl(static_cast<Real>(eps), static_cast<Real>(setup.tgt.g_prime));
    const auto rep = it.run(build_v(amp, eps));
    ok = check(rep.verdict == Verdict::converged,
               "run not converged at eps " + format_real(static_cast<Real>(eps)) + " (" +
                   verdict_name(rep.verdict) + ")",
               detail) && ok;
    if (rep.verdict != Verdict::converged) continue;
    ok = check(static_cast<double>(rep.steps.size()) <= 8, "needed more than 8 levels", detail) && ok;
    ok = check(rep.residual_s0 <= 1e-8L, "residual above 1e-8", detail) && ok;
    ok = check(rep.u_s1 <= rep.final_bound + 1e-12L, "threshold-scaling bound violated", detail) && ok;

    // increment bounds with n-independent constants: max over n within 2x of
    // the first induction level, among levels with a live drive
    std::vector<Real> cs0, csig;
    for (const auto& s : rep.steps)
      if (s.n >= 2 && s.inner_success && (s.delta_v_norm > 0 || s.e_n_norm > 0) && s.diff_s0 > 0) {
        cs0.push_back(s.bound_c_s0);
        csig.push_back(s.bound_c_sigma);
      }
    for (std::size_t i = 0; i < cs0.size(); ++i) {
      ok = check(cs0[i] <= 1.0L + 1e-9L && csig[i] <= 1.0L + 1e-9L,
                 "increment bound exceeded the ball radius", detail) && ok;
      ok = check(cs0[i] <= 2.0L * cs0[0] + 1e-30L, "base-norm constant drifts with n", detail) && ok;
      ok = check(csig[i] <= 2.0L * csig[0] + 1e-30L, "high-norm constant drifts with n", detail) && ok;
    }
  }
  if (ok) detail = "r = " + format_real(*r);
  return ok;
}

// 5. Scheme vs dense oracle at a square truncation.
bool oracle_equivalence(std::string& detail) {
  ExperimentConfig cfg = p1_bench_config();
  cfg.p1.max_mode = 7;
  cfg.run.K = 8; // cutoff covers the whole grid immediately
  ResolvedSetup setup = resolve_p1_setup(cfg);
  setup.ip.r = 0;
  const double eps = 0.5;
  const auto v = target_profile(setup.problem.grid(), setup.tgt.delta, cfg.v, 1e-5L);

  GalerkinIteration it(setup.problem, setup.ip, eps);
  const auto rep = it.run(v);
  bool ok = check(rep.verdict == Verdict::converged, "scheme did not converge", detail);
  if (!ok) return false;
  ok = check(rep.residual_s0 <= 1e-8L, "scheme residual above 1e-8", detail) && ok;

  const auto u_oracle = oracle_dense_solve(setup.problem, v, 8.0L, eps, 1e-12L);
  const Real oracle_res = norm(setup.problem.eval(u_oracle, eps) - v, plain_norm(setup.sig.s0));
  ok = check(oracle_res <= 1e-8L, "oracle residual above 1e-8", detail) && ok;
  const Real dist = norm(rep.u - u_oracle, plain_norm(setup.sig.s0));
  ok = check(dist <= 1e-6L, "scheme and oracle disagree: " + format_real(dist), detail) && ok;
  if (ok) detail = "distance " + format_real(dist);
  return ok;
}

// 6. Headline scaling contrast: topological scheme vs the quadratic barrier.
bool threshold_contrast(std::string& detail) {
  ExperimentConfig cfg = p1_bench_config();
  cfg.eps_grid = {0.5, 0.25, 0.125, 0.0625, 0.03125};
  cfg.v.max_mode = 1; // single-band data: the threshold channels stay clean
  const double g = cfg.p1.g, gp = cfg.targets.g_prime;

  const ThresholdResult galerkin = threshold_sweep(cfg, "galerkin");
  const ThresholdResult newton = threshold_sweep(cfg, "newton");
  bool ok = true;
  int usable_g = 0, usable_n = 0;
  for (const auto& pt : galerkin.points) usable_g += pt.usable && pt.bracket_verified;
  for (const auto& pt : newton.points) usable_n += pt.usable && pt.bracket_verified;
  ok = check(usable_g >= 4, "fewer than 4 verified scheme thresholds", detail) && ok;
  ok = check(usable_n >= 4, "fewer than 4 verified baseline thresholds", detail) && ok;
  ok = check(galerkin.exponent <= gp + 0.2,
             "scheme exponent " + format_real(static_cast<Real>(galerkin.exponent)) + " above " +
                 format_real(static_cast<Real>(gp + 0.2)),
             detail) && ok;
  ok = check(newton.exponent >= 2 * g - 0.3,
             "baseline exponent " + format_real(static_cast<Real>(newton.exponent)) + " below " +
                 format_real(static_cast<Real>(2 * g - 0.3)),
             detail) && ok;
  ok = check(newton.exponent - galerkin.exponent >= g - gp + 0.5 * g, "exponent gap too small",
             detail) && ok;
  if (ok)
    detail = "scheme " + format_real(static_cast<Real>(galerkin.exponent)) + ", baseline " +
             format_real(static_cast<Real>(newton.exponent));
  return ok;
}

// 7. Concentrated-data residual scaling.
bool nls_residual_scaling(std::string& detail) {
  NlsResidualProblem p2(2, 2, 2, 1.5, 1.0, 16, {1.0, -1.0});
  std::vector<double> eps_list{0.25, 0.125, 0.0625, 0.03125, 0.015625};
  const auto rows = p2.residual_scan(eps_list, 8, 4.5);
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    xs.push_back(r.eps);
    ys.push_back(static_cast<double>(r.norm));
  }
  const double slope = fit_loglog(xs, ys).slope;
  const double want = nls_residual_exponent(1.5, 2, 2);
  detail = "fitted " + format_real(static_cast<Real>(slope)) + " vs predicted " +
           format_real(static_cast<Real>(want));
  return slope >= want - 0.15;
}

// 8. Directional derivatives converge at first order on both problems.
bool gateaux_consistency(std::string& detail) {
  const std::vector<double> ts{1e-3, 1e-4, 1e-5};
  auto slope_of = [&](const std::function<ScaleFunction(const ScaleFunction&)>& f,
                      const std::function<ScaleFunction(const ScaleFunction&, const ScaleFunction&)>& df,
                      const ScaleFunction& u, const ScaleFunction& h, double s) {
    std::vector<double> errs;
    const ScaleFunction want = df(u, h);
    for (double t : ts) {
      const ScaleFunction fd = (f(u + h * Complex{t, 0.0}) - f(u)) * Complex{1.0 / t, 0.0};
      errs.push_back(static_cast<double>(norm(fd - want, plain_norm(s))));
    }
    return fit_loglog(ts, errs).slope;
  };

  SmallDivisorProblem p1(16, 1.0);
  std::mt19937_64 rng(31337);
  const auto u1 = random_function(p1.grid(), rng, 0.2, true, 1.0);
  const auto h1 = random_function(p1.grid(), rng, 1.0, true, 1.0);
  const double eps = 0.5;
  const double s1 = slope_of([&](const ScaleFunction& w) { return p1.eval(w, eps); },
                             [&](const ScaleFunction& w, const ScaleFunction& d) {
                               return p1.apply_d(w, d, eps);
                             },
                             u1, h1, 1.0);

  NlsResidualProblem p2(1, 2, 2, 1.5, 1.0, 8, {1.0, -1.0});
  const auto a = p2.ansatz(0.5, std::vector<double>{0.3});
  const auto h2 = random_function(p2.grid(), rng, 0.5);
  const double s2 = slope_of([&](const ScaleFunction& w) { return p2.nonlinearity(w, 0.5); },
                             [&](const ScaleFunction& w, const ScaleFunction& d) {
                               return p2.nonlinearity_derivative(w, d, 0.5);
                             },
                             a.samples[0], h2, 2.0);
  detail = "slopes " + format_real(static_cast<Real>(s1)) + ", " + format_real(static_cast<Real>(s2));
  return s1 >= 0.9 && s1 <= 1.1 && s2 >= 0.9 && s2 <= 1.1;
}

} // namespace

int main() {
  criterion(1, "scale axioms", scale_axioms);
  criterion(2, "parameter solver", parameter_solver);
  criterion(3, "right-inverse machinery", right_inverse_machinery);
  criterion(4, "end-to-end convergence", end_to_end);
  criterion(5, "oracle equivalence", oracle_equivalence);
  criterion(6, "threshold contrast", threshold_contrast);
  criterion(7, "residual scaling", nls_residual_scaling);
  criterion(8, "derivative consistency", gateaux_consistency);
  if (failures) std::printf("%d criterion(s) FAILED\n", failures);
  return failures;
}
