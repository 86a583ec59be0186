#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <random>
#include <sstream>

#include "tame/fourier_scale.hpp"
#include "tame/random.hpp"

using namespace tame;

namespace {

FrequencyGrid grid1d(int n) { return FrequencyGrid(1, n, 1); }

ScaleFunction mode1d(const FrequencyGrid& g, int k, Complex amp = {1.0, 0.0}) {
  std::array<int, 1> kk{k};
  return ScaleFunction::single_mode(g, kk, amp);
}

} // namespace

TEST_CASE("grid shape and index round trip") {
  FrequencyGrid g(2, 3, 2);
  CHECK(g.modes_per_component() == 49);
  CHECK(g.size() == 98);
  std::array<int, 2> k{-3, 2};
  std::array<int, 2> back{};
  g.decode(g.encode(k), back);
  CHECK(back == k);
  CHECK(g.mode_abs2(g.encode(k)) == doctest::Approx(13.0));
  CHECK_THROWS_AS(FrequencyGrid(0, 4, 1), std::invalid_argument);
}

TEST_CASE("plain and epsilon norms of a single mode") {
  auto g = grid1d(8);
  auto u = mode1d(g, 3);
  CHECK(static_cast<double>(norm(u, plain_norm(2.0))) == doctest::Approx(10.0));
  CHECK(static_cast<double>(norm(u, plain_norm(0.0))) == doctest::Approx(1.0));
  CHECK(static_cast<double>(norm(u, eps_norm(2.0, 0.5))) == doctest::Approx(3.25));
  CHECK_THROWS_AS(norm(u, plain_norm(-1.0)), std::domain_error);
  NormSpec over = plain_norm(5.0, 4.0); // s beyond the ceiling
  CHECK_THROWS_AS(norm(u, over), std::domain_error);
}

TEST_CASE("norm monotone in s") {
  auto g = grid1d(12);
  std::mt19937_64 rng(7);
  auto u = random_function(g, rng);
  Real prev = norm(u, plain_norm(0.0));
  for (double s : {0.5, 1.0, 2.0, 3.5, 7.0}) {
    Real cur = norm(u, plain_norm(s));
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("projector cutoff cases") {
  auto g = grid1d(8);
  auto u3 = mode1d(g, 3);
  CHECK(max_abs_coefficient(project(u3, 2.0L)) == 0.0L); // <3> > 2
  auto u = mode1d(g, 1) + mode1d(g, 5);
  auto p = project(u, 4.0L);
  std::array<int, 1> k1{1}, k5{5};
  CHECK(p.at(0, k1) == Complex{1.0, 0.0});
  CHECK(p.at(0, k5) == Complex{0.0, 0.0});
  // lambda at or above <N> is the identity
  auto id = project(u, mode_bracket(64.0L));
  CHECK(max_abs_coefficient(id - u) == 0.0L);
  CHECK_THROWS_AS(project(u, 0.5L), std::domain_error);
}

TEST_CASE("projector idempotence and nesting, exactly") {
  auto g = grid1d(16);
  std::mt19937_64 rng(11);
  auto u = random_function(g, rng);
  for (Real lam : {1.5L, 3.0L, 9.0L}) {
    auto p1 = project(u, lam);
    CHECK(max_abs_coefficient(project(p1, lam) - p1) == 0.0L);
  }
  const Real lo = 3.0L, hi = 7.5L;
  auto a = project(project(u, hi), lo);
  auto b = project(project(u, lo), hi);
  auto c = project(u, lo);
  CHECK(max_abs_coefficient(a - c) == 0.0L);
  CHECK(max_abs_coefficient(b - c) == 0.0L);
}

TEST_CASE("floored projector family") {
  auto g = grid1d(8);
  auto u = mode1d(g, 2); // <2> = 2.236
  CHECK(max_abs_coefficient(project(u, 2.9L, CutoffKind::plain, true)) == 0.0L);
  CHECK(max_abs_coefficient(project(u, 3.0L, CutoffKind::plain, true) - u) == 0.0L);
}

TEST_CASE("growth bound ratios") {
  auto g = grid1d(8);
  auto u = mode1d(g, 3);
  CHECK(static_cast<double>(verify_growth(u, 0, 0, 4.0L).ratio) == doctest::Approx(1.0));
  CHECK(static_cast<double>(verify_growth(u, 2, 0, 4.0L).ratio) == doctest::Approx(0.1));
  ScaleFunction zero(g);
  CHECK(verify_growth(zero, 1, 3, 4.0L).ratio == 0.0L);
}

TEST_CASE("growth bound randomized within declared constant") {
  auto g = grid1d(16);
  std::mt19937_64 rng(3);
  const auto consts = declared_scale_constants(8.0);
  Real worst = 0;
  for (int i = 0; i < 1000; ++i) {
    auto u = random_function(g, rng);
    worst = std::max(worst, verify_growth(u, 1, 3, 8.0L).ratio);
  }
  CHECK(worst <= consts.a1);
  CHECK(worst <= 1.0L + 1e-12L); // bracket cutoff makes the sharp constant 1
}

TEST_CASE("approximation bound") {
  auto g = grid1d(8);
  auto u3 = mode1d(g, 3);
  CHECK(verify_approx(u3, 2, 0, 4.0L).ratio == 0.0L); // empty tail
  auto u5 = mode1d(g, 5);
  CHECK(static_cast<double>(verify_approx(u5, 2, 0, 4.0L).ratio) == doctest::Approx(16.0 / 26.0));
  std::mt19937_64 rng(5);
  Real worst = 0;
  for (int i = 0; i < 300; ++i) {
    auto u = random_function(g, rng);
    for (Real lam : {2.0L, 4.0L, 8.0L, 16.0L})
      worst = std::max(worst, verify_approx(u, 2.0, 0.5, lam).ratio);
  }
  CHECK(worst <= 1.0L + 1e-12L);
}

TEST_CASE("interpolation inequality") {
  auto g = grid1d(8);
  auto single = mode1d(g, 4);
  auto rep = interpolation_check(single, 0.5, 1.7, 3.1);
  CHECK(rep.ok);
  CHECK(static_cast<double>(rep.lhs) == doctest::Approx(static_cast<double>(rep.rhs))); // equality for one mode

  // two-mode case, both sides evaluated directly
  auto u = mode1d(g, 1) + mode1d(g, 4);
  auto rep2 = interpolation_check(u, 0, 1, 2);
  const double lhs = std::sqrt(2.0 + 17.0);            // ||u||_1
  const double rhs = std::pow(2.0 * (4.0 + 289.0), 0.25); // ||u||_0^{1/2} ||u||_2^{1/2}
  CHECK(static_cast<double>(rep2.lhs) == doctest::Approx(lhs));
  CHECK(static_cast<double>(rep2.rhs) == doctest::Approx(rhs));
  CHECK(rep2.ok);

  // degenerate window
  CHECK(interpolation_check(u, 1.5, 1.5, 1.5).ok);
  CHECK_THROWS_AS(interpolation_check(u, 1.5, 1.6, 1.5), std::domain_error);

  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    auto w = random_function(g, rng);
    CHECK(interpolation_check(w, 0.3, 1.1, 2.9).ok);
    CHECK(interpolation_check(w, 0.3, 1.1, 2.9, NormVariant::epsilon_sobolev, 0.37).ok);
  }
}

TEST_CASE("arithmetic: derivative, product, multiplier") {
  auto g = grid1d(8);
  auto u3 = mode1d(g, 3);
  auto du = derivative(u3);
  std::array<int, 1> k3{3};
  CHECK(du.at(0, k3) == Complex{0.0, 3.0});

  auto prod = product(mode1d(g, 1), mode1d(g, 2));
  CHECK(prod.at(0, k3) == Complex{1.0, 0.0});
  CHECK(static_cast<double>(norm(prod, plain_norm(0.0))) == doctest::Approx(1.0));

  auto same = apply_multiplier(u3, [](std::span<const int>) { return Complex{1.0, 0.0}; });
  CHECK(max_abs_coefficient(same - u3) == 0.0L);
}

TEST_CASE("product truncates to the grid and matches hand convolution") {
  auto g = grid1d(2);
  // (e^{-ix} + 2 e^{ix})^2 = e^{-2ix} + 4 + 4 e^{2ix}; all modes inside
  auto u = mode1d(g, -1) + mode1d(g, 1, {2.0, 0.0});
  auto sq = product(u, u);
  std::array<int, 1> km2{-2}, k0{0}, k2{2};
  CHECK(sq.at(0, km2) == Complex{1.0, 0.0});
  CHECK(sq.at(0, k0) == Complex{4.0, 0.0});
  CHECK(sq.at(0, k2) == Complex{4.0, 0.0});
  // mode-2 square truncates: only the 0 mode survives
  auto v = mode1d(g, 2) + mode1d(g, -2);
  auto vsq = product(v, v);
  CHECK(vsq.at(0, k0) == Complex{2.0, 0.0});
  CHECK(static_cast<double>(norm(vsq, plain_norm(0.0))) == doctest::Approx(2.0));
}

TEST_CASE("2d product agrees with separable 1d factors") {
  FrequencyGrid g2(2, 3, 1);
  std::array<int, 2> a{1, 0}, b{0, 2}, c{1, 2};
  auto ua = ScaleFunction::single_mode(g2, a, {1.0, 0.0});
  auto ub = ScaleFunction::single_mode(g2, b, {0.0, 1.0});
  auto p = product(ua, ub);
  CHECK(p.at(0, c) == Complex{0.0, 1.0});
}

TEST_CASE("conjugate and reality preservation") {
  auto g = grid1d(6);
  std::mt19937_64 rng(17);
  auto u = random_function(g, rng, 1.0, true);
  auto h = random_function(g, rng, 1.0, true);
  CHECK(conjugate_symmetric(u));
  CHECK(conjugate_symmetric(product(u, h)));
  CHECK(conjugate_symmetric(derivative(u)));
  CHECK(max_abs_coefficient(conjugate(u) - u) <= 1e-15L);
}

TEST_CASE("epsilon rescaling commutes with norms and cutoffs") {
  // u on the fine grid carries modes k = q*m only; utilde holds the same
  // coefficients at modes m. The eps = 1/q weights and |eps k| cutoffs on u
  // then match the plain-weight norms and |m| cutoffs on utilde exactly.
  const int q = 4, nm = 4;
  FrequencyGrid fine(1, q * nm, 1), coarse(1, nm, 1);
  std::mt19937_64 rng(23);
  auto ut = random_function(coarse, rng);
  ScaleFunction u(fine, 1.0 / q);
  for (int mm = -nm; mm <= nm; ++mm) {
    std::array<int, 1> kc{mm}, kf{q * mm};
    u.at(0, kf) = ut.at(0, kc);
  }
  for (double s : {0.0, 1.0, 2.5}) {
    const Real en = norm(u, eps_norm(s, 1.0 / q));
    const Real pn = norm(ut, plain_norm(s));
    CHECK(static_cast<double>(en) == doctest::Approx(static_cast<double>(pn)));
  }
  const Real lam = 2.5L;
  auto pu = project(u, lam, CutoffKind::epsilon);
  for (int mm = -nm; mm <= nm; ++mm) {
    std::array<int, 1> kc{mm}, kf{q * mm};
    const Complex want = std::abs(mm) <= lam ? ut.at(0, kc) : Complex{0.0, 0.0};
    CHECK(pu.at(0, kf) == want);
  }
}

TEST_CASE("serialization round trip") {
  FrequencyGrid g(2, 2, 3);
  std::mt19937_64 rng(29);
  auto u = random_function(g, rng);
  u.set_epsilon_weight(0.125);
  std::stringstream ss;
  save_text(ss, u);
  auto v = load_text(ss);
  CHECK(v.grid() == u.grid());
  CHECK(v.epsilon_weight() == u.epsilon_weight());
  CHECK(max_abs_coefficient(v - u) == 0.0L);
}

TEST_CASE("component extraction") {
  FrequencyGrid g(1, 3, 2);
  std::array<int, 1> k{2};
  ScaleFunction u(g);
  u.at(1, k) = Complex{5.0, -1.0};
  auto c1 = extract_component(u, 1);
  CHECK(c1.at(0, k) == Complex{5.0, -1.0});
  auto c0 = extract_component(u, 0);
  c0.at(0, k) = Complex{0.0, 2.0};
  set_component(u, 0, c0);
  CHECK(u.at(0, k) == Complex{0.0, 2.0});
  CHECK_THROWS_AS(extract_component(u, 2), std::out_of_range);
}
