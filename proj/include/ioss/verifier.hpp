#pragma once

// Trajectory-pair simulation, numerical validation of the max-form and
// sum-form estimates, and the observer suite.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ioss/bounds.hpp"
#include "ioss/errors.hpp"
#include "ioss/linear.hpp"
#include "ioss/nonlinear.hpp"
#include "ioss/rng.hpp"
#include "ioss/signals.hpp"

namespace ioss {

inline constexpr double kViolationRelTol = 1e-9;
inline constexpr double kViolationAbsFloor = 1e-12;

// ----------------------------------------------------------------------------
// Trajectory data.

struct TrajectoryPair {
  std::int64_t T = 0;
  std::vector<Vector> x, chi;          // length T+1
  std::vector<Vector> u, upsilon;      // length T
  std::vector<Vector> w, omega;        // length T
  std::vector<Vector> v, nu;           // length T
  std::vector<Vector> y, zeta;         // length T
};

struct PairSignalSpecs {
  SignalSpec u, upsilon, w, omega, v, nu;
};

// simulate_pair: rolls both recursions forward; deterministic given seeds.
inline TrajectoryPair simulate_pair(const NonlinSystem& sys, const Vector& x0,
                                    const Vector& chi0,
                                    const PairSignalSpecs& specs,
                                    std::int64_t T, std::uint64_t seed = 0,
                                    std::uint64_t trial = 0) {
  if (T < 1) throw ParseError("horizon must be >= 1");
  if (x0.size() != sys.n_x || chi0.size() != sys.n_x)
    throw ParseError("initial state dimension mismatch");
  TrajectoryPair p;
  p.T = T;
  p.x.reserve(T + 1);
  p.chi.reserve(T + 1);
  p.x.push_back(x0);
  p.chi.push_back(chi0);
  for (std::int64_t t = 0; t < T; ++t) {
    Vector ut = specs.u.at(t, seed, trial, Channel::u);
    Vector upt = specs.upsilon.at(t, seed, trial, Channel::upsilon);
    Vector wt = specs.w.at(t, seed, trial, Channel::w);
    Vector omt = specs.omega.at(t, seed, trial, Channel::omega);
    Vector vt = specs.v.at(t, seed, trial, Channel::v);
    Vector nut = specs.nu.at(t, seed, trial, Channel::nu);
    Vector yt = sys.h(p.x.back(), ut, vt);
    Vector zt = sys.h(p.chi.back(), upt, nut);
    p.x.push_back(sys.f(p.x.back(), ut, wt));
    p.chi.push_back(sys.f(p.chi.back(), upt, omt));
    if (!p.x.back().allFinite() || !p.chi.back().allFinite())
      throw EvaluationFailure("dynamics produced non-finite state");
    p.u.push_back(std::move(ut));
    p.upsilon.push_back(std::move(upt));
    p.w.push_back(std::move(wt));
    p.omega.push_back(std::move(omt));
    p.v.push_back(std::move(vt));
    p.nu.push_back(std::move(nut));
    p.y.push_back(std::move(yt));
    p.zeta.push_back(std::move(zt));
  }
  return p;
}

// Independent re-evaluation of the solution property.
inline double solution_residual(const NonlinSystem& sys,
                                const TrajectoryPair& p) {
  double worst = 0.0;
  for (std::int64_t t = 0; t < p.T; ++t) {
    auto i = static_cast<std::size_t>(t);
    worst = std::max(worst,
                     (p.x[i + 1] - sys.f(p.x[i], p.u[i], p.w[i])).norm());
    worst = std::max(worst, (p.y[i] - sys.h(p.x[i], p.u[i], p.v[i])).norm());
    worst = std::max(
        worst, (p.chi[i + 1] - sys.f(p.chi[i], p.upsilon[i], p.omega[i])).norm());
    worst = std::max(worst,
                     (p.zeta[i] - sys.h(p.chi[i], p.upsilon[i], p.nu[i])).norm());
  }
  return worst;
}

// ----------------------------------------------------------------------------
// Verification report.

struct VerificationReport {
  std::vector<double> lhs, rhs, margin;  // indexed by t
  double min_margin = std::numeric_limits<double>::infinity();
  std::int64_t violations = 0;
  double tol_rel = kViolationRelTol;
  json config;

  void finalize() {
    min_margin = std::numeric_limits<double>::infinity();
    violations = 0;
    for (std::size_t t = 0; t < margin.size(); ++t) {
      min_margin = std::min(min_margin, margin[t]);
      double tol = std::max(tol_rel * std::abs(rhs[t]), kViolationAbsFloor);
      if (margin[t] < -tol) ++violations;
    }
  }
};

inline json to_json(const VerificationReport& r) {
  return json{{"lhs", r.lhs},
              {"rhs", r.rhs},
              {"margin", r.margin},
              {"min_margin", r.min_margin},
              {"violations", r.violations},
              {"tol_rel", r.tol_rel},
              {"config", r.config}};
}

inline std::string report_csv(const VerificationReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "t,lhs,rhs,margin\n";
  for (std::size_t t = 0; t < r.lhs.size(); ++t)
    os << t << "," << r.lhs[t] << "," << r.rhs[t] << "," << r.margin[t] << "\n";
  return os.str();
}

// eval_max_bound: the max-form estimate evaluated verbatim; inner terms at
// lag tau use the signal difference at time t - tau.
inline VerificationReport eval_max_bound(const TrajectoryPair& p,
                                         const MaxBoundFamily& b,
                                         double tol_rel = kViolationRelTol) {
  VerificationReport r;
  r.tol_rel = tol_rel;
  double r0 = (p.x[0] - p.chi[0]).norm();
  for (std::int64_t t = 0; t <= p.T; ++t) {
    double lhs = (p.x[static_cast<std::size_t>(t)] -
                  p.chi[static_cast<std::size_t>(t)]).norm();
    double rhs = b.beta(r0, t);
    for (std::int64_t tau = 1; tau <= t; ++tau) {
      auto k = static_cast<std::size_t>(t - tau);
      rhs = std::max(rhs, b.gamma((p.w[k] - p.omega[k]).norm(), tau));
      rhs = std::max(rhs, b.delta((p.v[k] - p.nu[k]).norm(), tau));
      rhs = std::max(rhs, b.epsilon((p.u[k] - p.upsilon[k]).norm(), tau));
      rhs = std::max(rhs, b.phi((p.y[k] - p.zeta[k]).norm(), tau));
    }
    r.lhs.push_back(lhs);
    r.rhs.push_back(rhs);
    r.margin.push_back(rhs - lhs);
  }
  r.finalize();
  return r;
}

// eval_sum_bound: alpha1(|x(t)-chi(t)|) against the displayed sum with
// time-reversed indexing.
inline VerificationReport eval_sum_bound(const TrajectoryPair& p,
                                         const SumBoundFamily& b,
                                         double tol_rel = kViolationRelTol) {
  VerificationReport r;
  r.tol_rel = tol_rel;
  double r0 = (p.x[0] - p.chi[0]).norm();
  for (std::int64_t t = 0; t <= p.T; ++t) {
    double lhs = eval_k(b.alpha1, (p.x[static_cast<std::size_t>(t)] -
                                   p.chi[static_cast<std::size_t>(t)]).norm());
    double rhs = b.beta(r0, t);
    for (std::int64_t tau = 1; tau <= t; ++tau) {
      auto k = static_cast<std::size_t>(t - tau);
      rhs += b.gamma((p.w[k] - p.omega[k]).norm(), tau);
      rhs += b.delta((p.v[k] - p.nu[k]).norm(), tau);
      rhs += b.epsilon((p.u[k] - p.upsilon[k]).norm(), tau);
      rhs += b.phi((p.y[k] - p.zeta[k]).norm(), tau);
    }
    r.lhs.push_back(lhs);
    r.rhs.push_back(rhs);
    r.margin.push_back(rhs - lhs);
  }
  r.finalize();
  return r;
}

// ----------------------------------------------------------------------------
// Bound families from linear certificates.

inline SumBoundFamily linear_sum_family(const SumCertificate& cert) {
  SumBoundFamily f;
  f.alpha1 = ScalarFn::linear(cert.alpha1_slope);
  f.beta = KLFn::slope_table(cert.beta_t);
  f.gamma = KLFn::slope_table(cert.gamma_t);
  f.delta = KLFn::slope_table(cert.delta_t);
  f.epsilon = KLFn::slope_table(cert.epsilon_t);
  f.phi = KLFn::slope_table(cert.phi_t);
  return f;
}

// Max-form family obtained from the sum form: the five sum groups are bounded
// by 5x their max, each disturbance group is exponentially dominated with
// rate ||A_L||_P and converted sum-to-max by halving the rate and applying
// the geometric-series constant, and the leading alpha1 is inverted into the
// estimate.
inline MaxBoundFamily linear_max_family(const SumCertificate& cert) {
  MaxBoundFamily f;
  const double s1 = cert.alpha1_slope;
  const double eta = cert.lyap.a_l_pnorm;
  const double sqrt_eta = std::sqrt(eta);
  const double conv = 1.0 / (1.0 - sqrt_eta);  // sum-to-max constant, shifted
  const std::size_t n = cert.beta_t.size();

  std::vector<double> beta(n), gamma(n, 0.0), delta(n, 0.0), eps(n, 0.0),
      phi(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    beta[t] = 5.0 / s1 * cert.beta_t[t];
  for (std::size_t t = 1; t < n; ++t) {
    // (sqrt_eta)^{t-1} with the 0^0 = 1 convention.
    double discount =
        (t == 1) ? 1.0 : std::pow(sqrt_eta, static_cast<double>(t - 1));
    gamma[t] = 5.0 / s1 * conv * discount * cert.gamma_t[1];
    delta[t] = 5.0 / s1 * conv * discount * cert.delta_t[1];
    eps[t] = 5.0 / s1 * conv * discount * cert.epsilon_t[1];
    phi[t] = 5.0 / s1 * conv * discount * cert.phi_t[1];
  }
  f.beta = KLFn::slope_table(std::move(beta));
  f.gamma = KLFn::slope_table(std::move(gamma));
  f.delta = KLFn::slope_table(std::move(delta));
  f.epsilon = KLFn::slope_table(std::move(eps));
  f.phi = KLFn::slope_table(std::move(phi));
  return f;
}

// ----------------------------------------------------------------------------
// Observers.

struct ObserverSpec {
  // g(x_tilde, u_tilde, w_tilde, v_tilde, y_tilde)
  std::function<Vector(const Vector&, const Vector&, const Vector&,
                       const Vector&, const Vector&)> g;
  Vector initial_state;
};

// luenberger_observer: g = A x + B u + E w + L (C x + D u + F v - y).
inline ObserverSpec luenberger_observer(const LinearSystem& sys,
                                        const Matrix& L) {
  sys.validate();
  if (L.rows() != sys.n_x() || L.cols() != sys.n_y())
    throw ParseError("observer gain must be n_x x n_y");
  ObserverSpec obs;
  obs.initial_state = Vector::Zero(sys.n_x());
  obs.g = [sys, L](const Vector& x, const Vector& u, const Vector& w,
                   const Vector& v, const Vector& y) -> Vector {
    return sys.A * x + sys.B * u + sys.E * w +
           L * (sys.C * x + sys.D * u + sys.F * v - y);
  };
  return obs;
}

// check_output_injection: residual of
// f(x, u, w) = g(x, u, w, v, h(x, u, v)) over sampled tuples.
struct InjectionReport {
  bool pass = false;
  double worst_residual = 0.0;
};

inline InjectionReport check_output_injection(const ObserverSpec& obs,
                                              const NonlinSystem& sys,
                                              const SampleSpec& spec,
                                              double tol = 1e-10) {
  InjectionReport rep;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const auto trial = static_cast<std::uint64_t>(i);
    Vector x = detail::box_sample(spec.x_lo, spec.x_hi, spec.seed, trial,
                                  Channel::x0);
    Vector u = detail::box_sample(spec.u_lo, spec.u_hi, spec.seed, trial,
                                  Channel::u);
    Vector w = detail::box_sample(spec.w_lo, spec.w_hi, spec.seed, trial,
                                  Channel::w);
    Vector v = detail::box_sample(spec.v_lo, spec.v_hi, spec.seed, trial,
                                  Channel::v);
    double res = (sys.f(x, u, w) - obs.g(x, u, w, v, sys.h(x, u, v))).norm();
    rep.worst_residual = std::max(rep.worst_residual, res);
  }
  rep.pass = rep.worst_residual <= tol;
  return rep;
}

// Observer scenario: the plant runs with (u, w, v); the observer receives
// (u_tilde, w_tilde, v_tilde, y_tilde). Defaults realize the classical case
// u_tilde = u, y_tilde = y, zero a priori guesses.
struct ObserverScenario {
  Vector x0, x_tilde0;
  SignalSpec u, w, v;
  std::optional<SignalSpec> u_tilde;       // default: equals u
  std::optional<SignalSpec> w_tilde;       // default: zero
  std::optional<SignalSpec> v_tilde;       // default: zero
  Vector y_offset;                          // y_tilde = y + offset (default 0)
  std::int64_t T = 200;
  std::uint64_t seed = 0;
  std::optional<double> terminal_threshold;  // assert |x - x_tilde|(T) below
};

struct ObserverRunResult {
  VerificationReport bound_report;  // sum-form estimate on the error channels
  double terminal_error = 0.0;
  bool terminal_pass = true;
};

inline ObserverRunResult check_rgas_estimate(const NonlinSystem& sys,
                                             const ObserverSpec& obs,
                                             const SumBoundFamily& family,
                                             const ObserverScenario& sc) {
  if (sc.T < 1) throw ParseError("horizon must be >= 1");
  ObserverRunResult out;
  Vector x = sc.x0;
  Vector xt = sc.x_tilde0;
  std::vector<Vector> xs{x}, xts{xt};
  std::vector<double> dw, dv, du, dy;
  const bool has_offset = sc.y_offset.size() > 0;
  for (std::int64_t t = 0; t < sc.T; ++t) {
    Vector u = sc.u.at(t, sc.seed, 0, Channel::u);
    Vector w = sc.w.at(t, sc.seed, 0, Channel::w);
    Vector v = sc.v.at(t, sc.seed, 0, Channel::v);
    Vector ut = sc.u_tilde ? sc.u_tilde->at(t, sc.seed, 0, Channel::u_tilde) : u;
    Vector wt = sc.w_tilde ? sc.w_tilde->at(t, sc.seed, 0, Channel::w_tilde)
                           : Vector::Zero(sys.n_w).eval();
    Vector vt = sc.v_tilde ? sc.v_tilde->at(t, sc.seed, 0, Channel::v_tilde)
                           : Vector::Zero(sys.n_v).eval();
    Vector y = sys.h(x, u, v);
    Vector yt = has_offset ? (y + sc.y_offset).eval() : y;
    dw.push_back((w - wt).norm());
    dv.push_back((v - vt).norm());
    du.push_back((u - ut).norm());
    dy.push_back((y - yt).norm());
    x = sys.f(x, u, w);
    xt = obs.g(xt, ut, wt, vt, yt);
    xs.push_back(x);
    xts.push_back(xt);
  }

  VerificationReport& r = out.bound_report;
  double r0 = (xs[0] - xts[0]).norm();
  for (std::int64_t t = 0; t <= sc.T; ++t) {
    double lhs = eval_k(family.alpha1,
                        (xs[static_cast<std::size_t>(t)] -
                         xts[static_cast<std::size_t>(t)]).norm());
    double rhs = family.beta(r0, t);
    for (std::int64_t tau = 1; tau <= t; ++tau) {
      auto k = static_cast<std::size_t>(t - tau);
      rhs += family.gamma(dw[k], tau);
      rhs += family.delta(dv[k], tau);
      rhs += family.epsilon(du[k], tau);
      rhs += family.phi(dy[k], tau);
    }
    r.lhs.push_back(lhs);
    r.rhs.push_back(rhs);
    r.margin.push_back(rhs - lhs);
  }
  r.finalize();
  out.terminal_error = (xs.back() - xts.back()).norm();
  if (sc.terminal_threshold)
    out.terminal_pass = out.terminal_error <= *sc.terminal_threshold;
  return out;
}

// ----------------------------------------------------------------------------
// Monte-Carlo campaign.

struct MonteCarloConfig {
  std::int64_t n_trials = 1000;
  std::int64_t T = 200;
  std::uint64_t seed = 0;
  int threads = 1;
  double tol_rel = kViolationRelTol;
  SignalSpec x0_spec, chi0_spec;
  PairSignalSpecs signals;
};

struct AggregateReport {
  std::int64_t n_trials = 0;
  double min_margin_sum = std::numeric_limits<double>::infinity();
  double min_margin_max = std::numeric_limits<double>::infinity();
  std::int64_t violations_sum = 0;
  std::int64_t violations_max = 0;
  // Per-trial minimum margins of the sum bound, for quantiles.
  std::vector<double> trial_min_margins;

  std::vector<double> margin_quantiles(std::initializer_list<double> qs) const {
    std::vector<double> sorted = trial_min_margins;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out;
    for (double q : qs) {
      if (sorted.empty()) {
        out.push_back(0.0);
        continue;
      }
      auto idx = static_cast<std::size_t>(
          q * static_cast<double>(sorted.size() - 1) + 0.5);
      out.push_back(sorted[std::min(idx, sorted.size() - 1)]);
    }
    return out;
  }
};

inline json to_json(const AggregateReport& r) {
  auto qs = r.margin_quantiles({0.0, 0.25, 0.5, 0.75, 1.0});
  return json{{"n_trials", r.n_trials},
              {"min_margin_sum", r.min_margin_sum},
              {"min_margin_max", r.min_margin_max},
              {"violations_sum", r.violations_sum},
              {"violations_max", r.violations_max},
              {"sum_margin_quantiles", qs}};
}

// monte_carlo_verify: independent seeded trials of simulate_pair + both bound
// evaluations; results merged deterministically regardless of thread count.
inline AggregateReport monte_carlo_verify(const NonlinSystem& sys,
                                          const SumBoundFamily& sum_family,
                                          const std::optional<MaxBoundFamily>& max_family,
                                          const MonteCarloConfig& cfg) {
  if (cfg.n_trials < 1) throw ParseError("n_trials must be >= 1");
  struct TrialOut {
    double min_sum = 0.0, min_max = 0.0;
    std::int64_t viol_sum = 0, viol_max = 0;
  };
  std::vector<TrialOut> results(static_cast<std::size_t>(cfg.n_trials));
  auto run_trial = [&](std::int64_t trial) {
    auto tr = static_cast<std::uint64_t>(trial);
    Vector x0 = cfg.x0_spec.at(0, cfg.seed, tr, Channel::x0);
    Vector chi0 = cfg.chi0_spec.at(0, cfg.seed, tr, Channel::chi0);
    TrajectoryPair p =
        simulate_pair(sys, x0, chi0, cfg.signals, cfg.T, cfg.seed, tr);
    TrialOut out;
    auto rs = eval_sum_bound(p, sum_family, cfg.tol_rel);
    out.min_sum = rs.min_margin;
    out.viol_sum = rs.violations;
    if (max_family) {
      auto rm = eval_max_bound(p, *max_family, cfg.tol_rel);
      out.min_max = rm.min_margin;
      out.viol_max = rm.violations;
    } else {
      out.min_max = std::numeric_limits<double>::infinity();
    }
    results[static_cast<std::size_t>(trial)] = out;
  };

  int n_threads = std::max(1, cfg.threads);
  if (n_threads == 1) {
    for (std::int64_t i = 0; i < cfg.n_trials; ++i) run_trial(i);
  } else {
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int k = 0; k < n_threads; ++k)
      pool.emplace_back([&] {
        for (std::int64_t i = next.fetch_add(1); i < cfg.n_trials;
             i = next.fetch_add(1))
          run_trial(i);
      });
    for (auto& th : pool) th.join();
  }

  AggregateReport agg;
  agg.n_trials = cfg.n_trials;
  for (const auto& r : results) {
    agg.min_margin_sum = std::min(agg.min_margin_sum, r.min_sum);
    agg.min_margin_max = std::min(agg.min_margin_max, r.min_max);
    agg.violations_sum += r.viol_sum;
    agg.violations_max += r.viol_max;
    agg.trial_min_margins.push_back(r.min_sum);
  }
  return agg;
}

}  // namespace ioss
