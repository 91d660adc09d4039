#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ioss/comparison.hpp"

using namespace ioss;

TEST_CASE("eval_k closed forms and tables") {
  CHECK(eval_k(ScalarFn::linear(0.5), 2.0) == 1.0);
  CHECK(eval_k(ScalarFn::power(1.0, 3.0), 2.0) == 8.0);
  // Any K-function vanishes at zero.
  CHECK(eval_k(ScalarFn::power(2.5, 1.7), 0.0) == 0.0);
  auto tbl = ScalarFn::table({{0.0, 0.0}, {1.0, 2.0}, {3.0, 4.0}});
  CHECK(eval_k(tbl, 2.0) == 3.0);  // midpoint interpolation
  CHECK(eval_k(tbl, 0.0) == 0.0);
  CHECK(eval_k(tbl, 3.0) == 4.0);
  CHECK_THROWS_AS(eval_k(tbl, 3.5), DomainExceeded);
}

TEST_CASE("table validation") {
  CHECK_THROWS_AS(ScalarFn::table({{0.0, 0.0}, {0.0, 1.0}}), NotKFunction);
  CHECK_THROWS_AS(ScalarFn::table({{0.0, 0.0}, {1.0, 2.0}, {2.0, 2.0}}),
                  NotKFunction);
  CHECK_THROWS_AS(ScalarFn::table({{0.0, 0.5}, {1.0, 2.0}}), NotKFunction);
}

TEST_CASE("invert_k") {
  CHECK(invert_k(ScalarFn::linear(2.0), 3.0) == Catch::Approx(1.5).margin(1e-9));
  // Bisection against the analytic cube root.
  auto cube = ScalarFn::power(1.0, 3.0, 100.0);
  CHECK(invert_k(cube, 8.0) == Catch::Approx(2.0).margin(1e-9));
  CHECK(invert_k(cube, 0.0) == 0.0);
  CHECK_THROWS_AS(invert_k(ScalarFn::linear(1.0, 10.0), 11.0), RangeExceeded);
  CHECK_THROWS_AS(invert_k(ScalarFn::zero(), 1.0), NotKFunction);
}

TEST_CASE("invert_k round-trips eval_k", "[property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto fns = {ScalarFn::linear(0.7, 50.0), ScalarFn::power(2.0, 2.0, 50.0),
              ScalarFn::table({{0.0, 0.0}, {1.0, 0.5}, {10.0, 3.0}, {50.0, 7.0}})};
  for (const auto& f : fns) {
    for (int i = 0; i < 50; ++i) {
      double r = 50.0 * unif(rng);
      double y = eval_k(f, r);
      double back = invert_k(f, y, 1e-10);
      CHECK(std::abs(eval_k(f, back) - y) <= 2e-9 * std::max(1.0, y));
    }
  }
}

TEST_CASE("construct_kappa analytic cases") {
  // alpha3 = r/2 -> kappa = 3r/4 (inner max attained at r' = r).
  auto a3_half = ScalarFn::linear(0.5, 10.0);
  auto k1 = construct_kappa(a3_half, 0.01);
  for (double r : {0.5, 1.0, 3.3, 10.0})
    CHECK(eval_k(k1, r) == Catch::Approx(0.75 * r).margin(1e-10));
  CHECK(eval_k(k1, 0.0) == 0.0);

  // alpha3 = r -> kappa = r/2 (inner max is 0).
  auto k2 = construct_kappa(ScalarFn::linear(1.0, 10.0), 0.01);
  for (double r : {0.5, 1.0, 7.0})
    CHECK(eval_k(k2, r) == Catch::Approx(0.5 * r).margin(1e-10));
}

TEST_CASE("construct_kappa sandwich", "[property]") {
  auto min_r_r2 = [] {
    // table approximation of min(r, r^2) on [0, 4]
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i <= 400; ++i) {
      double r = 0.01 * i;
      pts.push_back({r, std::min(r, r * r)});
    }
    pts[0] = {0.0, 0.0};
    return ScalarFn::table(std::move(pts));
  }();
  for (const auto& a3 :
       {ScalarFn::linear(0.5, 4.0), ScalarFn::linear(1.0, 4.0), min_r_r2}) {
    auto kappa = construct_kappa(a3, 0.002);
    const auto& pts = std::get<ScalarFn::Table>(kappa.repr).points;
    REQUIRE(pts.size() >= 1000);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      double r = pts[i][0], kr = pts[i][1];
      CHECK(r > kr);
      CHECK(kr > r - eval_k(a3, r));
    }
  }
}

TEST_CASE("construct_kappa rejects degenerate alpha3") {
  // Numerically zero near the origin and everywhere: sandwich cannot be
  // certified strictly.
  auto tiny = ScalarFn::power(1e-300, 1.0, 1.0);
  tiny.is_K = true;
  CHECK_THROWS_AS(construct_kappa(tiny, 0.25), RefinementFailed);
}

TEST_CASE("iterate_kappa") {
  CHECK(iterate_kappa(ScalarFn::linear(0.5, 100.0), 8.0, 3) == 1.0);
  CHECK(iterate_kappa(ScalarFn::linear(0.5, 100.0), 8.0, 0) == 8.0);
  CHECK(iterate_kappa(ScalarFn::linear(0.75, 100.0), 1.0, 4) ==
        Catch::Approx(0.31640625).margin(1e-15));
  CHECK_THROWS_AS(iterate_kappa(ScalarFn::linear(1.5, 100.0), 1.0, 2),
                  NotContraction);
}

TEST_CASE("iterate_kappa monotone in t", "[property]") {
  auto kappa = construct_kappa(ScalarFn::linear(0.3, 20.0), 0.01);
  for (double r : {0.1, 1.0, 5.0, 19.0}) {
    double prev = iterate_kappa(kappa, r, 0);
    for (int t = 1; t <= 30; ++t) {
      double cur = iterate_kappa(kappa, r, t);
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("summability_sigma branches") {
  auto alpha = ScalarFn::linear(0.5, 100.0);
  auto env = summability_sigma(alpha, 0.5, 1.0);
  CHECK(eval_k(env.sigma, 0.5) == 2.5);
  CHECK(eval_k(env.sigma, 2.0) == 10.5);
  CHECK(eval_k(env.sigma, 0.0) == 0.0);
}

TEST_CASE("summability_sigma premise violation") {
  // alpha = r^2 has no linear lower bound near 0 on [0, 1].
  CHECK_THROWS_AS(summability_sigma(ScalarFn::power(1.0, 2.0, 10.0), 0.5, 1.0),
                  PremiseViolated);
}

TEST_CASE("sigma dominates brute-force kappa sums", "[property]") {
  auto alpha = ScalarFn::linear(0.5, 100.0);
  auto env = summability_sigma(alpha, 0.5, 1.0);
  auto kappa = construct_kappa(alpha, 0.01);
  for (double r : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    double sum = 0.0, v = r;
    for (int tau = 0; tau <= 10000; ++tau) {
      sum += v;
      v = eval_k(kappa, v);
    }
    CHECK(sum <= eval_k(env.sigma, r));
  }
}

TEST_CASE("exp_sum_to_max") {
  auto b = exp_sum_to_max(0.25, ScalarFn::linear(1.0));
  // coefficient (0.5/0.5) * 0.25 at tau = 2
  CHECK(b(1.0, 2) == Catch::Approx(0.25).margin(1e-15));
  auto z = exp_sum_to_max(0.0, ScalarFn::linear(1.0));
  CHECK(z(3.0, 1) == 0.0);
  auto c = exp_sum_to_max(0.81, ScalarFn::linear(2.0));
  CHECK(c(1.0, 1) == Catch::Approx(16.2).margin(1e-12));
}

TEST_CASE("sum-to-max chain dominates geometric sums", "[property]") {
  // sum_{tau=1}^{t} eta^tau theta <= eta^{1/2}/(1-eta^{1/2}) max eta^{tau/2} theta
  for (double eta : {0.1, 0.5, 0.9}) {
    double theta = 1.7;
    auto b = exp_sum_to_max(eta, ScalarFn::linear(theta));
    for (int t = 1; t <= 100; ++t) {
      double sum = 0.0;
      double max_term = 0.0;
      for (int tau = 1; tau <= t; ++tau) {
        sum += std::pow(eta, tau) * theta;
        max_term = std::max(max_term, b(1.0, tau));
      }
      CHECK(sum <= max_term * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("kl_to_classical") {
  auto s1 = kl_to_classical(KLFn::exponential(0.5, ScalarFn::linear(1.0)));
  CHECK(eval_k(s1, 1.0) == Catch::Approx(2.0).margin(1e-15));
  auto s0 = kl_to_classical(KLFn::exponential(0.5, ScalarFn::zero()));
  CHECK(eval_k(s0, 5.0) == 0.0);
  auto s2 = kl_to_classical(KLFn::exponential(0.75, ScalarFn::linear(2.0)));
  CHECK(eval_k(s2, 1.0) == Catch::Approx(8.0).margin(1e-12));
  CHECK_THROWS_AS(kl_to_classical(KLFn::slope_table({1.0, 0.5})), NotSummable);
}

TEST_CASE("kl_to_classical with envelope") {
  auto alpha = ScalarFn::linear(0.5, 100.0);
  auto kappa = construct_kappa(alpha, 0.01);
  auto beta = KLFn::composed(std::nullopt, kappa, ScalarFn::linear(1.0, 100.0));
  auto env = summability_sigma(alpha, 0.5, 1.0);
  auto sigma_beta = kl_to_classical(beta, env);
  for (double r : {0.2, 1.0, 4.0}) {
    double sum = 0.0;
    for (int tau = 0; tau <= 5000; ++tau) sum += beta(r, tau);
    CHECK(sum <= eval_k(sigma_beta, r));
  }
}

TEST_CASE("KLFn class invariants", "[property]") {
  auto kappa = construct_kappa(ScalarFn::linear(0.4, 50.0), 0.01);
  auto beta = KLFn::composed(ScalarFn::linear(0.5, 200.0), kappa,
                             ScalarFn::linear(2.0, 50.0));
  // non-increasing in t, decaying to ~0; increasing in r for fixed t
  for (double r : {0.5, 3.0, 20.0}) {
    double prev = beta(r, 0);
    for (int t = 1; t <= 60; ++t) {
      double cur = beta(r, t);
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
    CHECK(prev <= 1e-3 * beta(r, 0));
  }
  for (int t : {0, 3, 10}) {
    double prev = -1.0;
    for (double r : {0.1, 0.5, 2.0, 10.0, 24.0}) {
      double cur = beta(r, t);
      CHECK(cur > prev);
      prev = cur;
    }
  }
}

TEST_CASE("JSON round-trip preserves evaluations", "[property]") {
  std::vector<ScalarFn> fns = {
      ScalarFn::linear(1.25, 40.0), ScalarFn::power(0.3, 2.5, 40.0),
      ScalarFn::table({{0.0, 0.0}, {2.0, 1.0}, {40.0, 9.0}}),
      ScalarFn::sigma_envelope(0.5, 1.0, 40.0),
      ScalarFn::gain_composite(ScalarFn::power(1.0, 2.0, 1e6),
                               ScalarFn::power(0.5, 1.0, 1e6),
                               ScalarFn::power(2.0, 1.5, 10.0))};
  for (const auto& f : fns) {
    auto g = scalar_fn_from_json(to_json(f));
    for (double frac : {0.0, 0.1, 0.37, 0.9, 1.0}) {
      double r = frac * std::min(f.domain_cap, g.domain_cap);
      double a = eval_k(f, r), b = eval_k(g, r);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
  auto kl = KLFn::exponential(0.5, ScalarFn::linear(3.0));
  auto kl2 = kl_fn_from_json(to_json(kl));
  CHECK(kl(2.0, 5) == kl2(2.0, 5));
}
