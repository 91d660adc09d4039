// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and uses its own oracle.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "ioss/verifier.hpp"

using namespace ioss;

namespace {

int g_failures = 0;

void criterion(int id, const char* name, const std::function<bool()>& body) {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = body();
  } catch (const std::exception& e) {
    std::printf("FAIL %2d %s (exception: %s)\n", id, name, e.what());
    ++g_failures;
    return;
  }
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %2d %s (%.2f s)\n", ok ? "PASS" : "FAIL", id, name, secs);
  if (!ok) ++g_failures;
}

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

LinearSystem scalar_demo() {
  return LinearSystem{m1(0.5), m1(1.0), m1(1.0), m1(0.0), m1(1.0), m1(1.0)};
}

std::mt19937_64& rng() {
  static std::mt19937_64 gen(2024);
  return gen;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = unif(rng());
  return M;
}

Matrix random_schur_stable(Eigen::Index n, double radius = 0.95) {
  Matrix M = random_matrix(n, n);
  double sr = spectral_radius(M);
  if (sr > 0.0)
    M *= (radius / sr) *
         std::uniform_real_distribution<double>(0.3, 1.0)(rng());
  return M;
}

LinearSystem random_detectable_system(Eigen::Index n_x) {
  LinearSystem sys;
  sys.A = random_schur_stable(n_x);
  sys.B = random_matrix(n_x, 2);
  sys.C = random_matrix(1, n_x);
  sys.D = random_matrix(1, 2);
  sys.E = random_matrix(n_x, 2);
  sys.F = random_matrix(1, 1);
  return sys;
}

SignalSpec box(Eigen::Index n, double amp) {
  return SignalSpec::uniform_box(Vector::Constant(n, -amp),
                                 Vector::Constant(n, amp));
}

MonteCarloConfig mixed_campaign(const LinearSystem& sys, int variant,
                                std::int64_t trials, std::int64_t T,
                                int threads) {
  MonteCarloConfig cfg;
  cfg.n_trials = trials;
  cfg.T = T;
  cfg.seed = 100 + static_cast<std::uint64_t>(variant);
  cfg.threads = threads;
  cfg.x0_spec = box(sys.n_x(), 1.0);
  cfg.chi0_spec = box(sys.n_x(), 1.0);
  cfg.signals.u = box(sys.n_u(), 0.5);
  cfg.signals.upsilon = box(sys.n_u(), 0.5);
  switch (variant % 3) {
    case 0:
      cfg.signals.w = SignalSpec::decaying_exp(
          Vector::Constant(sys.n_w(), 0.3), 0.9);
      break;
    case 1:
      cfg.signals.w = SignalSpec::step(Vector::Constant(sys.n_w(), 0.2), 50);
      break;
    default:
      cfg.signals.w = box(sys.n_w(), 0.3);
      break;
  }
  cfg.signals.omega = box(sys.n_w(), 0.3);
  cfg.signals.v = (variant % 2) ? box(sys.n_v(), 0.2)
                                : SignalSpec::constant(
                                      Vector::Constant(sys.n_v(), 0.1));
  cfg.signals.nu = SignalSpec::zero(sys.n_v());
  return cfg;
}

}  // namespace

int main() {
  criterion(1, "scalar certificate ground truth", [] {
    auto sys = scalar_demo();
    auto mc = max_certificate(sys, m1(0.0), m1(1.0));
    auto sc = sum_certificate(sys, m1(0.0), m1(1.0), 50);
    const double s = std::sqrt(4.0 / 3.0);
    bool ok = std::abs(mc.lyap.P(0, 0) - 4.0 / 3.0) <= 1e-12 &&
              std::abs(mc.decrease_rate - 0.5) <= 1e-12 &&
              std::abs(mc.rho_w - s) <= 1e-12 &&
              std::abs(mc.rho_u - s) <= 1e-12 &&
              mc.rho_v <= 1e-12 && mc.rho_y <= 1e-12 &&
              std::abs(sc.alpha1_slope - s) <= 1e-12;
    for (std::int64_t t = 1; t <= 50 && ok; ++t)
      ok = std::abs(sc.gamma_t[static_cast<std::size_t>(t)] -
                    s * std::pow(0.5, static_cast<double>(t - 1))) <= 1e-12;
    return ok;
  });

  criterion(2, "Lyapunov solve matches the series oracle", [] {
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::Index n = 1 + static_cast<Eigen::Index>(trial % 6);
      Matrix A_L = random_schur_stable(n);
      Matrix Q = Matrix::Identity(n, n);
      Matrix P = solve_dlyap(A_L, Q);
      if ((A_L.transpose() * P * A_L - P + Q).norm() > 1e-10 * P.norm())
        return false;
      Matrix S = Matrix::Zero(n, n);
      Matrix term = Q;
      Matrix pw = Matrix::Identity(n, n);
      for (int k = 0; k < 100000; ++k) {
        S += term;
        pw = (A_L * pw).eval();
        term = (pw.transpose() * Q * pw).eval();
        if (term.norm() <= 1e-12) break;
      }
      if ((P - S).norm() > 1e-8) return false;
    }
    return true;
  });

  criterion(3, "weighted-norm dual identity", [] {
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::Index n = 2 + static_cast<Eigen::Index>(trial % 5);
      LinearSystem sys = random_detectable_system(n);
      Matrix L = synthesize_observer_gain(sys);
      Matrix A_L = sys.A + L * sys.C;
      Matrix Q = Matrix::Identity(n, n);
      Matrix P = solve_dlyap(A_L, Q);
      // p_induced_norm computes both routes and throws past 1e-9 drift.
      double val = p_induced_norm(A_L, P, Q);
      if (!(val >= 0.0 && val < 1.0)) return false;
    }
    return true;
  });

  std::vector<LinearSystem> soundness_systems;
  for (int i = 0; i < 20; ++i)
    soundness_systems.push_back(
        random_detectable_system(1 + static_cast<Eigen::Index>(i % 6)));

  std::string sys0_report_8;
  criterion(4, "certified bounds hold on random trajectories", [&] {
    for (int i = 0; i < 20; ++i) {
      const auto& sys = soundness_systems[static_cast<std::size_t>(i)];
      auto [mc, sc] = certify(sys, {.horizon = 200});
      auto cfg = mixed_campaign(sys, i, 1000, 200, 8);
      auto agg = monte_carlo_verify(wrap_linear(sys), linear_sum_family(sc),
                                    linear_max_family(sc), cfg);
      if (i == 0) sys0_report_8 = to_json(agg).dump();
      if (agg.violations_sum != 0 || agg.violations_max != 0) return false;
    }
    return true;
  });

  criterion(5, "scalar tightness witnesses", [] {
    auto sys = scalar_demo();
    auto family = linear_sum_family(sum_certificate(sys, m1(0.0), m1(1.0), 60));
    PairSignalSpecs zero;
    zero.u = zero.upsilon = zero.w = zero.omega = zero.v = zero.nu =
        SignalSpec::zero(1);
    auto nsys = wrap_linear(sys);

    auto homog = eval_sum_bound(
        simulate_pair(nsys, v1(1.0), v1(0.0), zero, 50), family);
    auto specs = zero;
    specs.w = SignalSpec::decaying_exp(v1(0.3), 0.0);  // impulse at t = 0
    auto impulse = eval_sum_bound(
        simulate_pair(nsys, v1(0.0), v1(0.0), specs, 50), family);
    for (double m : homog.margin)
      if (std::abs(m) > 1e-12) return false;
    for (double m : impulse.margin)
      if (std::abs(m) > 1e-12) return false;
    return true;
  });

  criterion(6, "contraction construction sandwich", [] {
    auto check = [](const ScalarFn& alpha3, double grid_step,
                    const std::function<double(double)>& analytic,
                    double tol) {
      auto kappa = construct_kappa(alpha3, grid_step);
      const auto& pts = std::get<ScalarFn::Table>(kappa.repr).points;
      if (pts.size() < 1000) return false;
      for (const auto& p : pts) {
        double r = p[0], kr = p[1];
        if (r == 0.0) continue;
        if (!(r > kr && kr > r - eval_k(alpha3, r))) return false;
        if (analytic && std::abs(kr - analytic(r)) > tol) return false;
      }
      return true;
    };
    if (!check(ScalarFn::linear(0.5, 10.0), 0.005,
               [](double r) { return 0.75 * r; }, 1e-10))
      return false;
    if (!check(ScalarFn::linear(1.0, 10.0), 0.005,
               [](double r) { return 0.5 * r; }, 1e-10))
      return false;
    // min(r, r^2) as a table on [0, 2].
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i <= 1024; ++i) {
      double r = 2.0 * static_cast<double>(i) / 1024.0;
      pts.push_back({r, std::min(r, r * r)});
    }
    return check(ScalarFn::table(std::move(pts)), 1e-3, nullptr, 0.0);
  });

  criterion(7, "summability envelope", [] {
    auto sigma = ScalarFn::sigma_envelope(0.5, 1.0);
    if (eval_k(sigma, 0.5) != 2.5) return false;
    if (eval_k(sigma, 2.0) != 10.5) return false;
    // kappa(r) = r - 0.5 min(r, 1) decreases at least at slope K below r_bar.
    auto kappa = [](double r) { return r - 0.5 * std::min(r, 1.0); };
    for (double r : {0.1, 0.5, 1.0, 2.0, 10.0}) {
      double v = r, sum = 0.0;
      for (int tau = 0; tau <= 10000; ++tau) {
        sum += v;
        v = kappa(v);
      }
      if (sum > eval_k(sigma, r)) return false;
    }
    return true;
  });

  criterion(8, "geometric sum-to-max conversion", [] {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (double eta : {0.1, 0.5, 0.9}) {
      double s = std::sqrt(eta);
      double coeff = s / (1.0 - s);
      for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> theta(101);
        for (auto& th : theta) th = (rep == 0) ? 0.7 : unif(rng());
        for (int t = 1; t <= 100; ++t) {
          double sum = 0.0, mx = 0.0;
          for (int tau = 1; tau <= t; ++tau) {
            auto k = static_cast<std::size_t>(tau);
            sum += std::pow(eta, tau) * theta[k];
            mx = std::max(mx, std::pow(eta, 0.5 * tau) * theta[k]);
          }
          if (sum > coeff * mx * (1.0 + 1e-12)) return false;
        }
      }
    }
    return true;
  });

  criterion(9, "observer identities and error decay", [] {
    // Injection identity + feedback reduction on random systems.
    for (int i = 0; i < 20; ++i) {
      auto sys = random_detectable_system(1 + static_cast<Eigen::Index>(i % 6));
      Matrix L = synthesize_observer_gain(sys);
      auto obs = luenberger_observer(sys, L);
      auto nsys = wrap_linear(sys);
      SampleSpec spec;
      auto bounds = [](Eigen::Index n) {
        return std::pair{Vector::Constant(n, -1.0).eval(),
                         Vector::Constant(n, 1.0).eval()};
      };
      std::tie(spec.x_lo, spec.x_hi) = bounds(sys.n_x());
      std::tie(spec.u_lo, spec.u_hi) = bounds(sys.n_u());
      std::tie(spec.w_lo, spec.w_hi) = bounds(sys.n_w());
      std::tie(spec.v_lo, spec.v_hi) = bounds(sys.n_v());
      spec.count = 1000;
      spec.seed = static_cast<std::uint64_t>(i);
      if (!check_output_injection(obs, nsys, spec, 1e-12).pass) return false;

      // Fed its own predicted output, the observer replays the model.
      Vector xt = Vector::Constant(sys.n_x(), 0.3);
      Vector model = xt;
      Vector u = Vector::Constant(sys.n_u(), 0.1);
      Vector w = Vector::Zero(sys.n_w());
      Vector v = Vector::Zero(sys.n_v());
      for (int t = 0; t < 100; ++t) {
        xt = obs.g(xt, u, w, v, nsys.h(xt, u, v));
        model = nsys.f(model, u, w);
        if ((xt - model).norm() > 1e-12) return false;
      }
    }

    // Decaying-disturbance scenario on the scalar demo.
    auto sys = scalar_demo();
    auto family = linear_sum_family(sum_certificate(sys, m1(0.0), m1(1.0), 200));
    ObserverScenario scen;
    scen.x0 = v1(1.0);
    scen.x_tilde0 = v1(0.0);
    scen.u = scen.v = SignalSpec::zero(1);
    scen.w = SignalSpec::decaying_exp(v1(1.0), 0.9);
    scen.T = 200;
    scen.terminal_threshold = 1e-6;
    auto res = check_rgas_estimate(wrap_linear(sys),
                                   luenberger_observer(sys, m1(0.0)), family,
                                   scen);
    return res.bound_report.violations == 0 && res.terminal_pass;
  });

  criterion(10, "additive-disturbance gain collapse", [] {
    for (int i = 0; i < 20; ++i) {
      auto sys = random_detectable_system(1 + static_cast<Eigen::Index>(i % 6));
      sys.E = sys.B;
      sys.D = Matrix::Zero(sys.n_y(), sys.n_u());
      sys.F = Matrix::Identity(sys.n_y(), sys.n_y());
      auto [mc, sc] = certify(sys, {.horizon = 50});
      if (mc.rho_w != mc.rho_u || mc.rho_v != mc.rho_y) return false;
      for (std::size_t t = 0; t < sc.gamma_t.size(); ++t)
        if (sc.gamma_t[t] != sc.epsilon_t[t] || sc.delta_t[t] != sc.phi_t[t])
          return false;
    }
    return true;
  });

  MonteCarloConfig nonlin_cfg;
  std::optional<SumBoundFamily> nonlin_sum;
  std::optional<MaxBoundFamily> nonlin_max;
  NonlinSystem nonlin_sys;
  criterion(11, "nonlinear construction on the wrapped system", [&] {
    auto sys = scalar_demo();
    auto mc = max_certificate(sys, m1(0.0), m1(1.0));
    auto cand = linear_lyapunov_candidate(mc, /*cap=*/200.0);
    nonlin_sys = wrap_linear(sys);

    SampleSpec spec;
    spec.x_lo = spec.u_lo = spec.w_lo = spec.v_lo = Vector::Constant(1, -1.0);
    spec.x_hi = spec.u_hi = spec.w_hi = spec.v_hi = Vector::Constant(1, 1.0);
    spec.count = 10000;
    auto [sandwich, decrease] =
        check_lyapunov_conditions(nonlin_sys, cand, spec);
    if (!sandwich.pass || !decrease.pass) return false;

    nonlin_max = max_bounds(cand, 0.05).family;
    nonlin_sum = sum_bounds(cand, mc.decrease_rate).family;
    nonlin_cfg = mixed_campaign(sys, 2, 100, 50, 8);
    nonlin_cfg.x0_spec = box(1, 0.5);
    nonlin_cfg.chi0_spec = box(1, 0.5);
    auto agg =
        monte_carlo_verify(nonlin_sys, *nonlin_sum, nonlin_max, nonlin_cfg);
    return agg.violations_sum == 0 && agg.violations_max == 0;
  });

  criterion(12, "thread-count determinism", [&] {
    if (sys0_report_8.empty() || !nonlin_sum) return false;
    const auto& sys = soundness_systems[0];
    auto sc = certify(sys, {.horizon = 200}).second;
    auto cfg = mixed_campaign(sys, 0, 1000, 200, 1);
    auto agg1 = monte_carlo_verify(wrap_linear(sys), linear_sum_family(sc),
                                   linear_max_family(sc), cfg);
    if (to_json(agg1).dump() != sys0_report_8) return false;

    auto c1 = nonlin_cfg;
    c1.threads = 1;
    auto n1 = monte_carlo_verify(nonlin_sys, *nonlin_sum, nonlin_max, c1);
    auto c8 = nonlin_cfg;
    c8.threads = 8;
    auto n8 = monte_carlo_verify(nonlin_sys, *nonlin_sum, nonlin_max, c8);
    return to_json(n1).dump() == to_json(n8).dump();
  });

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
