#include "tame/problems.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace tame {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<std::size_t> block_indices(const FrequencyGrid& g, Real lambda) {
  std::vector<std::size_t> idx;
  const std::size_t m = g.modes_per_component();
  for (int c = 0; c < g.components; ++c)
    for (std::size_t i = 0; i < m; ++i)
      if (mode_bracket(g.mode_abs2(i)) <= lambda) idx.push_back(static_cast<std::size_t>(c) * m + i);
  return idx;
}

} // namespace

LinearMap ModelProblem::right_inverse_at(const ScaleFunction&, double eps) const {
  return [this, eps](const ScaleFunction& k) { return right_inverse_zero(k, eps); };
}

LinearMap ModelProblem::block_inverse_at(const ScaleFunction&, double, Real) const {
  return LinearMap{};
}

SmallDivisorProblem::SmallDivisorProblem(int max_mode, double g, double mu, double ell, double s0)
    : grid_(1, max_mode, 1), mu_(mu) {
  if (!(g >= 0) || !(ell >= 0)) throw std::invalid_argument("SmallDivisorProblem: g, ell >= 0");
  sig_.s0 = s0;
  sig_.m = 1;
  sig_.ell = ell;
  sig_.ell_prime = ell;
  sig_.g = g;
  sig_.a = 1.0 + 2.0 * std::fabs(mu); // nominal; the suites measure the sharp value
  sig_.b = 1.0;                       // attained by the diagonal inverse at 0
}

ScaleFunction SmallDivisorProblem::eval(const ScaleFunction& u, double eps) const {
  const double gexp = sig_.g, lp = sig_.ell_prime;
  ScaleFunction lin = apply_multiplier(u, [&](std::span<const int> k) {
    const double k2 = static_cast<double>(k[0]) * k[0];
    return Complex{std::pow(eps, gexp) * std::pow(1.0 + k2, -lp / 2.0), 0.0};
  });
  return lin + Complex{mu_, 0.0} * derivative(product(u, u));
}

ScaleFunction SmallDivisorProblem::apply_d(const ScaleFunction& u, const ScaleFunction& h,
                                           double eps) const {
  const double gexp = sig_.g, lp = sig_.ell_prime;
  ScaleFunction lin = apply_multiplier(h, [&](std::span<const int> k) {
    const double k2 = static_cast<double>(k[0]) * k[0];
    return Complex{std::pow(eps, gexp) * std::pow(1.0 + k2, -lp / 2.0), 0.0};
  });
  return lin + Complex{2.0 * mu_, 0.0} * derivative(product(u, h));
}

ScaleFunction SmallDivisorProblem::right_inverse_zero(const ScaleFunction& k, double eps) const {
  const double gexp = sig_.g, lp = sig_.ell_prime;
  return apply_multiplier(k, [&](std::span<const int> kk) {
    const double k2 = static_cast<double>(kk[0]) * kk[0];
    return Complex{std::pow(eps, -gexp) * std::pow(1.0 + k2, lp / 2.0), 0.0};
  });
}

namespace {

// Grid matrix of DF_eps(u): diagonal symbol plus the transport convolution.
Eigen::MatrixXcd p1_jacobian(const FrequencyGrid& g, const ScaleFunction& u, double eps,
                             double gexp, double lp, double mu) {
  const int n = g.axis_size(), nn = g.max_mode;
  Eigen::MatrixXcd m(n, n);
  m.setZero();
  for (int r = 0; r < n; ++r) {
    const int k = r - nn;
    const double sym = std::pow(eps, gexp) * std::pow(1.0 + static_cast<double>(k) * k, -lp / 2.0);
    m(r, r) = Complex{sym, 0.0};
    for (int c = 0; c < n; ++c) {
      const int diff = k - (c - nn);
      if (diff < -nn || diff > nn) continue;
      const Complex uc = u.coefficients()[static_cast<std::size_t>(diff + nn)];
      m(r, c) += Complex{0.0, 2.0 * mu * k} * uc;
    }
  }
  return m;
}

} // namespace

LinearMap SmallDivisorProblem::right_inverse_at(const ScaleFunction& u, double eps) const {
  if (max_abs_coefficient(u) == 0.0L) return ModelProblem::right_inverse_at(u, eps);
  auto lu = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXcd>>(
      p1_jacobian(grid_, u, eps, sig_.g, sig_.ell_prime, mu_));
  const FrequencyGrid g = grid_;
  return [lu, g](const ScaleFunction& k) {
    const int n = g.axis_size();
    Eigen::VectorXcd rhs(n);
    for (int i = 0; i < n; ++i) rhs(i) = k.coefficients()[static_cast<std::size_t>(i)];
    Eigen::VectorXcd sol = lu->solve(rhs);
    if (!sol.allFinite()) throw RightInverseFailure("singular transport block");
    ScaleFunction out(g, k.epsilon_weight());
    for (int i = 0; i < n; ++i) out.coefficients()[static_cast<std::size_t>(i)] = sol(i);
    return out;
  };
}

LinearMap SmallDivisorProblem::block_inverse_at(const ScaleFunction& u, double eps,
                                                Real lambda) const {
  const auto idx = block_indices(grid_, lambda);
  const int nb = static_cast<int>(idx.size());
  Eigen::MatrixXcd full = p1_jacobian(grid_, u, eps, sig_.g, sig_.ell_prime, mu_);
  Eigen::MatrixXcd sub(nb, nb);
  for (int r = 0; r < nb; ++r)
    for (int c = 0; c < nb; ++c)
      sub(r, c) = full(static_cast<int>(idx[static_cast<std::size_t>(r)]),
                       static_cast<int>(idx[static_cast<std::size_t>(c)]));
  auto lu = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXcd>>(sub);
  const FrequencyGrid g = grid_;
  auto indices = std::make_shared<std::vector<std::size_t>>(idx);
  return [lu, g, indices](const ScaleFunction& k) {
    Eigen::VectorXcd rhs(static_cast<int>(indices->size()));
    for (std::size_t i = 0; i < indices->size(); ++i)
      rhs(static_cast<int>(i)) = k.coefficients()[(*indices)[i]];
    Eigen::VectorXcd sol = lu->solve(rhs);
    if (!sol.allFinite()) throw RightInverseFailure("singular projected block");
    ScaleFunction out(g, k.epsilon_weight());
    for (std::size_t i = 0; i < indices->size(); ++i)
      out.coefficients()[(*indices)[i]] = sol(static_cast<int>(i));
    return out;
  };
}

KernelModeProblem::KernelModeProblem(int max_mode) : grid_(1, max_mode, 1) {
  sig_.s0 = 1;
  sig_.m = 0;
  sig_.ell = 0;
  sig_.ell_prime = 0;
  sig_.g = 1;
}

ScaleFunction KernelModeProblem::eval(const ScaleFunction& u, double eps) const {
  return apply_multiplier(u, [&](std::span<const int> k) {
    return k[0] == 0 ? Complex{0.0, 0.0} : Complex{eps, 0.0};
  });
}

ScaleFunction KernelModeProblem::apply_d(const ScaleFunction&, const ScaleFunction& h,
                                         double eps) const {
  return eval(h, eps);
}

ScaleFunction KernelModeProblem::right_inverse_zero(const ScaleFunction& k, double eps) const {
  // Pseudo-inverse: the kernel mode cannot be matched.
  return apply_multiplier(k, [&](std::span<const int> kk) {
    return kk[0] == 0 ? Complex{0.0, 0.0} : Complex{1.0 / eps, 0.0};
  });
}

ScaleFunction oracle_dense_solve(const ModelProblem& problem, const ScaleFunction& v,
                                 Real lambda_small, double eps, Real tol, int max_iter) {
  const FrequencyGrid& g = problem.grid();
  const auto idx = block_indices(g, lambda_small);
  const int nb = static_cast<int>(idx.size());
  if (nb == 0 || nb > 4096) throw OracleUnavailable("oracle block size out of range");

  auto gather = [&](const ScaleFunction& f) {
    Eigen::VectorXcd x(nb);
    for (int i = 0; i < nb; ++i) x(i) = f.coefficients()[idx[static_cast<std::size_t>(i)]];
    return x;
  };
  auto scatter = [&](const Eigen::VectorXcd& x) {
    ScaleFunction f(g, v.epsilon_weight());
    for (int i = 0; i < nb; ++i) f.coefficients()[idx[static_cast<std::size_t>(i)]] = x(i);
    return f;
  };

  const Eigen::VectorXcd vb = gather(v);
  ScaleFunction u(g, v.epsilon_weight());
  Eigen::VectorXcd res = gather(problem.eval(u, eps)) - vb;
  double rn = res.norm();

  for (int it = 0; it < max_iter; ++it) {
    if (rn <= static_cast<double>(tol)) return u;
    Eigen::MatrixXcd jac(nb, nb);
    for (int c = 0; c < nb; ++c) {
      ScaleFunction e(g, v.epsilon_weight());
      e.coefficients()[idx[static_cast<std::size_t>(c)]] = Complex{1.0, 0.0};
      jac.col(c) = gather(problem.apply_d(u, e, eps));
    }
    const Eigen::VectorXcd step = jac.partialPivLu().solve(res);
    if (!step.allFinite()) throw OracleUnavailable("singular oracle Jacobian");

    double damp = 1.0;
    bool accepted = false;
    while (damp >= 1.0 / 1048576.0) {
      ScaleFunction trial = u - scatter(damp * step);
      Eigen::VectorXcd r2 = gather(problem.eval(trial, eps)) - vb;
      if (r2.norm() <= (1.0 - 0.25 * damp) * rn) {
        u = std::move(trial);
        res = std::move(r2);
        rn = res.norm();
        accepted = true;
        break;
      }
      damp *= 0.5;
    }
    if (!accepted) throw OracleUnavailable("oracle Newton stalled");
  }
  if (rn <= static_cast<double>(tol)) return u;
  throw OracleUnavailable("oracle Newton did not reach tolerance");
}

double nls_residual_exponent(double kappa, int p, int d) {
  return 1.0 + kappa * (p + 1) + 0.5 * d;
}

NlsResidualProblem::NlsResidualProblem(int d, int species, int p, double kappa,
                                       double time_horizon, int max_mode,
                                       std::vector<double> lambda, double amplitude,
                                       double profile_width, double strength)
    : d_(d),
      n_(species),
      p_(p),
      kappa_(kappa),
      time_horizon_(time_horizon),
      grid_(d, max_mode, 2 * species),
      scalar_grid_(d, max_mode, 1),
      profile_(scalar_grid_),
      lambda_(std::move(lambda)),
      strength_(strength) {
  if (d < 1 || d > 2) throw std::invalid_argument("NlsResidualProblem: d in {1,2}");
  if (p < 2 || p % 2 != 0) throw std::invalid_argument("NlsResidualProblem: p must be even, >= 2");
  if (static_cast<int>(lambda_.size()) != species)
    throw std::invalid_argument("NlsResidualProblem: one lambda per species");
  for (int i = 0; i < species; ++i)
    for (int j = i + 1; j < species; ++j)
      if (lambda_[static_cast<std::size_t>(i)] == lambda_[static_cast<std::size_t>(j)])
        throw std::invalid_argument("NlsResidualProblem: lambdas must be pairwise distinct");

  const std::size_t m = scalar_grid_.modes_per_component();
  for (std::size_t i = 0; i < m; ++i) {
    const double k2 = static_cast<double>(scalar_grid_.mode_abs2(i));
    profile_.coefficients()[i] =
        Complex{amplitude * std::exp(-k2 / (2.0 * profile_width * profile_width)), 0.0};
  }
}

bool NlsResidualProblem::transparent() const {
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if (lambda_[static_cast<std::size_t>(i)] == lambda_[static_cast<std::size_t>(j)]) return false;
  // Unit multipliers on a real coupling field: diagonal entries real and
  // cross coupling symmetric, in particular on resonant pairs.
  return conjugate_symmetric(profile_);
}

std::vector<double> NlsResidualProblem::time_grid(int nodes, TimeNodes kind) const {
  if (nodes < 1) throw std::invalid_argument("time_grid: nodes >= 1");
  std::vector<double> t(static_cast<std::size_t>(nodes));
  if (nodes == 1) return t;
  for (int i = 0; i < nodes; ++i) {
    if (kind == TimeNodes::uniform)
      t[static_cast<std::size_t>(i)] = time_horizon_ * i / (nodes - 1);
    else
      t[static_cast<std::size_t>(i)] = 0.5 * time_horizon_ * (1.0 - std::cos(kPi * i / (nodes - 1)));
  }
  return t;
}

TimeSampledFunction NlsResidualProblem::ansatz(double eps, std::span<const double> t_nodes) const {
  TimeSampledFunction out;
  const double amp = std::pow(eps, kappa_);
  const std::size_t m = scalar_grid_.modes_per_component();
  const ScaleFunction conj_profile = conjugate(profile_);
  for (double t : t_nodes) {
    ScaleFunction s(grid_, eps);
    for (int j = 0; j < n_; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const double phase = t * lambda_[static_cast<std::size_t>(j)] *
                             static_cast<double>(grid_.mode_abs2(i)) / (eps * eps);
        const Complex rot{std::cos(phase), std::sin(phase)};
        s.coefficients()[static_cast<std::size_t>(j) * m + i] =
            amp * rot * profile_.coefficients()[i];
        s.coefficients()[static_cast<std::size_t>(n_ + j) * m + i] =
            amp * std::conj(rot) * conj_profile.coefficients()[i];
      }
    }
    out.times.push_back(t);
    out.samples.push_back(std::move(s));
  }
  return out;
}

ScaleFunction NlsResidualProblem::nonlinearity(const ScaleFunction& u, double eps) const {
  const int nc = 2 * n_;
  ScaleFunction w(scalar_grid_, eps); // |u|^2
  for (int c = 0; c < nc; ++c) {
    const ScaleFunction uc = extract_component(u, c);
    w += product(uc, conjugate(uc));
  }
  ScaleFunction field = w; // (|u|^2)^{p/2}
  for (int q = 1; q < p_ / 2; ++q) field = product(field, w);

  // Unit multiplier tensors: every row couples to the same derivative sum.
  ScaleFunction colsum(scalar_grid_, eps);
  for (int c = 0; c < nc; ++c) colsum += extract_component(u, c);
  ScaleFunction dsum(scalar_grid_, eps);
  for (int ax = 0; ax < d_; ++ax) dsum += derivative(colsum, ax);

  const ScaleFunction row = product(field, dsum) * Complex{-eps * strength_, 0.0};
  ScaleFunction out(grid_, eps);
  for (int c = 0; c < nc; ++c) set_component(out, c, row);
  return out;
}

ScaleFunction NlsResidualProblem::nonlinearity_derivative(const ScaleFunction& u,
                                                          const ScaleFunction& h,
                                                          double eps) const {
  const int nc = 2 * n_;
  ScaleFunction w(scalar_grid_, eps);
  ScaleFunction dw(scalar_grid_, eps);
  for (int c = 0; c < nc; ++c) {
    const ScaleFunction uc = extract_component(u, c);
    const ScaleFunction hc = extract_component(h, c);
    w += product(uc, conjugate(uc));
    dw += product(hc, conjugate(uc)) + product(uc, conjugate(hc));
  }
  ScaleFunction field = w;
  ScaleFunction dfield = dw;
  if (p_ > 2) {
    ScaleFunction wpow = w; // w^{p/2 - 1}
    for (int q = 1; q < p_ / 2 - 1; ++q) wpow = product(wpow, w);
    dfield = product(wpow, dw) * Complex{0.5 * p_, 0.0};
    field = product(wpow, w);
  }

  ScaleFunction colsum_u(scalar_grid_, eps), colsum_h(scalar_grid_, eps);
  for (int c = 0; c < nc; ++c) {
    colsum_u += extract_component(u, c);
    colsum_h += extract_component(h, c);
  }
  ScaleFunction dsum_u(scalar_grid_, eps), dsum_h(scalar_grid_, eps);
  for (int ax = 0; ax < d_; ++ax) {
    dsum_u += derivative(colsum_u, ax);
    dsum_h += derivative(colsum_h, ax);
  }

  const ScaleFunction row =
      (product(dfield, dsum_u) + product(field, dsum_h)) * Complex{-eps * strength_, 0.0};
  ScaleFunction out(grid_, eps);
  for (int c = 0; c < nc; ++c) set_component(out, c, row);
  return out;
}

Real NlsResidualProblem::banded_norm(const TimeSampledFunction& f, double s, double eps) const {
  Real best = 0;
  for (const auto& sample : f.samples) best = std::max(best, norm(sample, plain_norm(s)));
  return best * powl(static_cast<Real>(eps), static_cast<Real>(d_) / 2.0L);
}

std::vector<NlsResidualProblem::ResidualRow> NlsResidualProblem::residual_scan(
    std::span<const double> eps_list, int nodes, double s, TimeNodes kind) const {
  if (!(kappa_ > static_cast<double>(d_) / (2.0 * (p_ - 1))))
    throw std::domain_error("residual_scan: requires kappa > d / (2(p-1))");
  std::vector<ResidualRow> rows;
  const auto t = time_grid(nodes, kind);
  for (double eps : eps_list) {
    TimeSampledFunction a = ansatz(eps, t);
    TimeSampledFunction r;
    r.times = a.times;
    for (const auto& sample : a.samples) r.samples.push_back(nonlinearity(sample, eps));
    rows.push_back({eps, banded_norm(r, s, eps)});
  }
  return rows;
}

} // namespace tame
