#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "tame/problems.hpp"
#include "tame/random.hpp"
#include "tame/surjection_solver.hpp"

using namespace tame;

namespace {

const FrequencyGrid kGrid(1, 8, 1);

BlockNorm l2_norm() {
  return [](const ScaleFunction& u) { return norm(u, plain_norm(0.0)); };
}

BlockSampler grid_sampler(Real cutoff = 1e9L) {
  return [cutoff](std::mt19937_64& rng) {
    return project(random_function(kGrid, rng, 1.0, true), cutoff);
  };
}

BlockOperator diag_op(double factor) {
  return BlockOperator{[factor](const ScaleFunction& u) { return u * Complex{factor, 0.0}; },
                       kGrid, 0, 0};
}

} // namespace

TEST_CASE("linearity spot check") {
  std::mt19937_64 rng(1);
  CHECK(verify_linearity(diag_op(2.0), l2_norm(), grid_sampler(), rng));
  BlockOperator affine{[](const ScaleFunction& u) {
                         ScaleFunction v = u;
                         std::array<int, 1> k0{0};
                         v.at(0, k0) += Complex{1.0, 0.0};
                         return v;
                       },
                       kGrid, 0, 0};
  CHECK_FALSE(verify_linearity(affine, l2_norm(), grid_sampler(), rng));
}

TEST_CASE("contraction factor: exact inverse, scaled identity, diagonal model") {
  std::mt19937_64 rng(2);
  // L exact inverse of Df
  CHECK(static_cast<double>(contraction_factor(diag_op(2.0), diag_op(0.5), l2_norm(),
                                               grid_sampler(), rng)) == doctest::Approx(0.0));
  // Df = 2I, L = I on a small block: I - 2I = -I
  CHECK(static_cast<double>(contraction_factor(diag_op(2.0), diag_op(1.0), l2_norm(),
                                               grid_sampler(2.5L), rng)) == doctest::Approx(1.0));
  // small-divisor linearization at 0 with its exact diagonal inverse
  SmallDivisorProblem p1(8, 1.0);
  const double eps = 0.5;
  ScaleFunction zero(kGrid);
  BlockOperator df{[&](const ScaleFunction& h) { return p1.apply_d(zero, h, eps); }, kGrid, 0, 0};
  BlockOperator l{[&](const ScaleFunction& k) { return p1.right_inverse_zero(k, eps); }, kGrid, 0, 0};
  CHECK(static_cast<double>(contraction_factor(df, l, l2_norm(), grid_sampler(), rng)) ==
        doctest::Approx(0.0));
}

TEST_CASE("neumann series term count and collapse") {
  std::mt19937_64 rng(3);
  // q = 0: series collapses to L itself
  auto t0 = neumann_right_inverse(diag_op(2.0), diag_op(0.5), l2_norm(), grid_sampler(), rng);
  CHECK(t0.series_terms == 0);
  CHECK(t0.q == doctest::Approx(0.0));

  // q = 0.5 exactly: Df L = I/2, geometric tail arithmetic gives >= 26 terms
  auto t1 = neumann_right_inverse(diag_op(1.0), diag_op(0.5), l2_norm(), grid_sampler(), rng,
                                  0.5L + 1e-9L, 1e-8L);
  CHECK(t1.q == doctest::Approx(0.5));
  CHECK(t1.series_terms >= 26);
  std::mt19937_64 rng2(4);
  auto probe = grid_sampler()(rng2);
  const Real err = l2_norm()(diag_op(1.0).apply(t1.apply(probe)) - probe);
  CHECK(static_cast<double>(err) <= 2e-8 * static_cast<double>(l2_norm()(probe)));

  // beyond q_max: contraction failure propagates
  CHECK_THROWS_AS(neumann_right_inverse(diag_op(1.0), diag_op(0.2), l2_norm(), grid_sampler(), rng),
                  ContractionFailure);
}

TEST_CASE("neumann right inverse on the small-divisor block away from zero") {
  SmallDivisorProblem p1(8, 1.0);
  const double eps = 0.5;
  std::mt19937_64 rng(5);
  ScaleFunction u = random_function(kGrid, rng, 1.0, true);
  u *= Complex{5e-4, 0.0}; // small base point keeps the frozen inverse contractive

  BlockOperator df{[&](const ScaleFunction& h) { return p1.apply_d(u, h, eps); }, kGrid, 0, 0};
  BlockOperator l{[&](const ScaleFunction& k) { return p1.right_inverse_zero(k, eps); }, kGrid, 0, 0};
  auto t = neumann_right_inverse(df, l, l2_norm(), grid_sampler(), rng, 0.5L, 1e-8L, 0);
  CHECK(t.q > 0.0L);
  for (int i = 0; i < 20; ++i) {
    auto k = grid_sampler()(rng);
    const Real err = l2_norm()(df.apply(t.apply(k)) - k);
    CHECK(static_cast<double>(err) <= 2e-8 * static_cast<double>(l2_norm()(k)));
  }
  // series norm bound against the one-term inverse
  const Real tn = probe_operator_norm([&](const ScaleFunction& k) { return t.apply(k); }, l2_norm(),
                                      l2_norm(), grid_sampler(), rng);
  const Real ln = probe_operator_norm([&](const ScaleFunction& k) { return l.apply(k); }, l2_norm(),
                                      l2_norm(), grid_sampler(), rng);
  CHECK(static_cast<double>(tn) <= 2.0 * 1.05 * static_cast<double>(ln));
}

TEST_CASE("solve_local: linear problem, zero data, ball discipline") {
  std::mt19937_64 rng(6);
  auto f = [](const ScaleFunction& u) { return u * Complex{2.0, 0.0}; };
  InverseFactory t_at = [&rng](const ScaleFunction&) {
    NeumannInverse t;
    t.df = diag_op(2.0);
    t.l = diag_op(0.5);
    t.series_terms = 0;
    t.q = 0;
    return t;
  };
  ScaleFunction zero(kGrid);

  SUBCASE("zero target returns immediately") {
    auto rep = solve_local(f, zero, t_at, 1.0L, l2_norm(), l2_norm(), 1e-12L, 100, grid_sampler(),
                           rng, zero);
    CHECK(rep.success);
    CHECK(rep.iterations == 0);
    CHECK(rep.residual == 0.0L);
  }

  SUBCASE("linear solve lands on T v") {
    std::array<int, 1> k2{2};
    auto v = ScaleFunction::single_mode(kGrid, k2, {0.4, 0.1});
    auto rep = solve_local(f, v, t_at, 1.0L, l2_norm(), l2_norm(), 1e-12L, 100, grid_sampler(), rng,
                           zero);
    CHECK(rep.success);
    CHECK(static_cast<double>(l2_norm()(rep.solution - v * Complex{0.5, 0.0})) <= 1e-12);
    CHECK(rep.max_norm <= 1.0L);
    CHECK(static_cast<double>(l2_norm()(rep.solution)) <=
          static_cast<double>(rep.m_est * l2_norm()(v)) + 1e-8);
  }

  SUBCASE("target beyond radius/M is rejected before marching") {
    std::array<int, 1> k1{1};
    auto v = ScaleFunction::single_mode(kGrid, k1, {10.0, 0.0});
    auto rep = solve_local(f, v, t_at, 1.0L, l2_norm(), l2_norm(), 1e-12L, 100, grid_sampler(), rng,
                           zero);
    CHECK_FALSE(rep.success);
    CHECK(rep.failure == "precondition");
  }
}

TEST_CASE("solve_local on the small-divisor block agrees with the dense oracle") {
  SmallDivisorProblem p1(8, 1.0);
  const double eps = 0.5;
  std::mt19937_64 rng(7);
  ScaleFunction zero(kGrid);
  const Real lam = 8.0L;

  std::array<int, 1> k1{1}, k2{2};
  ScaleFunction v(kGrid);
  v.at(0, k1) = Complex{1.0, 0.0};
  v.at(0, k2) = Complex{0.25, 0.0};
  v += conjugate(v);
  v *= Complex{0.005, 0.0};

  auto f = [&](const ScaleFunction& u) { return project(p1.eval(u, eps), lam); };
  auto sam = grid_sampler(lam);
  // Square block at matching cutoffs: the problem's exact block inverse makes
  // the series collapse, which is the Galerkin right-invertible route.
  InverseFactory t_at = [&](const ScaleFunction& base) {
    BlockOperator df{[&p1, base, eps, lam](const ScaleFunction& h) {
                       return project(p1.apply_d(base, h, eps), lam);
                     },
                     kGrid, lam, lam};
    auto raw = p1.block_inverse_at(base, eps, lam);
    BlockOperator l{[raw, lam](const ScaleFunction& k) { return project(raw(k), lam); }, kGrid, lam,
                    lam};
    return neumann_right_inverse(df, l, l2_norm(), sam, rng, 0.5L, 1e-10L, 2);
  };

  const ScaleFunction pv = project(v, lam);
  auto rep = solve_local(f, pv, t_at, 10.0L, l2_norm(), l2_norm(), 1e-9L, 200, sam, rng, zero);
  REQUIRE(rep.success);
  CHECK(static_cast<double>(rep.residual) <= 1e-9);

  auto u_oracle = oracle_dense_solve(p1, v, lam, eps, 1e-12L);
  CHECK(static_cast<double>(norm(rep.solution - u_oracle, plain_norm(1.0))) <= 1e-6);
}

TEST_CASE("newton baseline: linear one step, scalar quadratic threshold") {
  FrequencyGrid g0(1, 0, 1); // single mode: a scalar problem carrier
  ScaleFunction zero(g0);
  std::array<int, 1> k0{0};
  auto l2 = l2_norm();

  SUBCASE("linear map converges in one step") {
    auto f = [](const ScaleFunction& u) { return u * Complex{3.0, 0.0}; };
    auto l_at = [](const ScaleFunction&) {
      return LinearMap{[](const ScaleFunction& r) { return r * Complex{1.0 / 3.0, 0.0}; }};
    };
    auto v = ScaleFunction::single_mode(g0, k0, {0.9, 0.0});
    auto rep = newton_baseline(f, l_at, v, 10.0L, l2, l2, 1e-12L, 50, zero);
    CHECK(rep.success);
    CHECK(rep.iterations == 1);
  }

  // F(u) = eps u + u^2 with the exact derivative inverse: the solvability
  // edge sits at |v| = eps^2/4 (negative targets lose the real fixed point
  // beyond it, matching the classical quadratic-barrier bound with K = 2,
  // M = 1).
  const double eps = 0.25;
  auto f = [eps](const ScaleFunction& u) {
    return u * Complex{eps, 0.0} + product(u, u);
  };
  auto l_at = [eps, &k0](const ScaleFunction& u) {
    const Complex du = Complex{eps, 0.0} + 2.0 * u.at(0, k0);
    return LinearMap{[du](const ScaleFunction& r) { return r * (Complex{1.0, 0.0} / du); }};
  };
  const double edge = eps * eps / 4.0;

  SUBCASE("slightly below the edge converges") {
    auto v = ScaleFunction::single_mode(g0, k0, {-0.9 * edge, 0.0});
    auto rep = newton_baseline(f, l_at, v, 10.0L, l2, l2, 1e-12L, 200, zero);
    CHECK(rep.success);
  }
  SUBCASE("slightly above the edge fails") {
    auto v = ScaleFunction::single_mode(g0, k0, {-1.1 * edge, 0.0});
    auto rep = newton_baseline(f, l_at, v, 10.0L, l2, l2, 1e-12L, 200, zero);
    CHECK_FALSE(rep.success);
  }
}
