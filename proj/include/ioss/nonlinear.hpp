#pragma once

// KL bounds for nonlinear systems from user-supplied incremental Lyapunov
// data, plus sampling-based falsification of the Lyapunov conditions.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ioss/bounds.hpp"
#include "ioss/comparison.hpp"
#include "ioss/errors.hpp"
#include "ioss/linear.hpp"
#include "ioss/rng.hpp"

namespace ioss {

// ----------------------------------------------------------------------------
// Data model.

struct NonlinSystem {
  Eigen::Index n_x = 0, n_u = 0, n_w = 0, n_v = 0, n_y = 0;
  std::function<Vector(const Vector& x, const Vector& u, const Vector& w)> f;
  std::function<Vector(const Vector& x, const Vector& u, const Vector& v)> h;
};

inline NonlinSystem wrap_linear(const LinearSystem& sys) {
  sys.validate();
  NonlinSystem n;
  n.n_x = sys.n_x();
  n.n_u = sys.n_u();
  n.n_w = sys.n_w();
  n.n_v = sys.n_v();
  n.n_y = sys.n_y();
  n.f = [sys](const Vector& x, const Vector& u, const Vector& w) -> Vector {
    return sys.A * x + sys.B * u + sys.E * w;
  };
  n.h = [sys](const Vector& x, const Vector& u, const Vector& v) -> Vector {
    return sys.C * x + sys.D * u + sys.F * v;
  };
  return n;
}

struct LyapunovCandidate {
  std::function<double(const Vector&, const Vector&)> V;
  ScalarFn alpha1, alpha2, alpha3;
  ScalarFn rho_w, rho_v, rho_u, rho_y;
};

struct NonlinMaxBounds {
  MaxBoundFamily family;
  ScalarFn kappa;
};

struct NonlinSumBounds {
  SumBoundFamily family;
  // Envelope certifying summability of the kappa iteration; absent on the
  // globally-linear fast path (geometric series applies directly).
  std::optional<SummabilityEnvelope> envelope;
  bool linear_fast_path = false;
};

// Uniform sampling boxes for the condition check (same box for both sides of
// each pair).
struct SampleSpec {
  Vector x_lo, x_hi;
  Vector u_lo, u_hi;
  Vector w_lo, w_hi;
  Vector v_lo, v_hi;
  std::size_t count = 1000;
  std::uint64_t seed = 0;
};

struct ConditionReport {
  std::string condition;  // "eq_sandwich" or "eq_decrease"
  bool pass = true;
  double worst_margin = 0.0;
  json witness;  // sampled tuple achieving the worst margin
  bool falsification_only = true;  // sampling cannot prove the condition
  bool symmetry_warning = false;   // V(x, chi) != V(chi, x) observed
};

// ----------------------------------------------------------------------------
// Operations.

namespace detail {
inline Vector box_sample(const Vector& lo, const Vector& hi, std::uint64_t seed,
                         std::uint64_t trial, Channel ch) {
  Vector out(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    out(i) = uniform_in(lo(i), hi(i), seed, trial, 0, ch,
                        static_cast<std::uint64_t>(i));
  return out;
}

inline json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}
}  // namespace detail

// check_lyapunov_conditions: seeded uniform sampling of both the sandwich
// condition and the decrease condition. Failure is a report outcome, not an
// error; the check falsifies, it does not prove.
inline std::pair<ConditionReport, ConditionReport> check_lyapunov_conditions(
    const NonlinSystem& sys, const LyapunovCandidate& cand,
    const SampleSpec& spec) {
  ConditionReport sandwich{"eq_sandwich"};
  ConditionReport decrease{"eq_decrease"};
  sandwich.worst_margin = decrease.worst_margin =
      std::numeric_limits<double>::infinity();
  bool symmetry_warned = false;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const auto trial = static_cast<std::uint64_t>(i);
    Vector x = detail::box_sample(spec.x_lo, spec.x_hi, spec.seed, trial,
                                  Channel::x0);
    Vector chi = detail::box_sample(spec.x_lo, spec.x_hi, spec.seed, trial,
                                    Channel::chi0);
    Vector u = detail::box_sample(spec.u_lo, spec.u_hi, spec.seed, trial,
                                  Channel::u);
    Vector ups = detail::box_sample(spec.u_lo, spec.u_hi, spec.seed, trial,
                                    Channel::upsilon);
    Vector w = detail::box_sample(spec.w_lo, spec.w_hi, spec.seed, trial,
                                  Channel::w);
    Vector omg = detail::box_sample(spec.w_lo, spec.w_hi, spec.seed, trial,
                                    Channel::omega);
    Vector v = detail::box_sample(spec.v_lo, spec.v_hi, spec.seed, trial,
                                  Channel::v);
    Vector nu = detail::box_sample(spec.v_lo, spec.v_hi, spec.seed, trial,
                                   Channel::nu);

    double dist = (x - chi).norm();
    double V = cand.V(x, chi);
    if (!symmetry_warned &&
        std::abs(V - cand.V(chi, x)) > 1e-9 * std::max(1.0, std::abs(V))) {
      symmetry_warned = true;
    }
    double m_lower = V - eval_k(cand.alpha1, dist);
    double m_upper = eval_k(cand.alpha2, dist) - V;
    double m_sw = std::min(m_lower, m_upper);
    if (m_sw < sandwich.worst_margin) {
      sandwich.worst_margin = m_sw;
      sandwich.witness = json{{"x", detail::vec_json(x)},
                              {"chi", detail::vec_json(chi)}};
    }

    double V_next = cand.V(sys.f(x, u, w), sys.f(chi, ups, omg));
    double rhs = V - eval_k(cand.alpha3, V) +
                 eval_k(cand.rho_w, (w - omg).norm()) +
                 eval_k(cand.rho_v, (v - nu).norm()) +
                 eval_k(cand.rho_u, (u - ups).norm()) +
                 eval_k(cand.rho_y, (sys.h(x, u, v) - sys.h(chi, ups, nu)).norm());
    double m_dec = rhs - V_next;
    if (m_dec < decrease.worst_margin) {
      decrease.worst_margin = m_dec;
      decrease.witness = json{
          {"x", detail::vec_json(x)},     {"chi", detail::vec_json(chi)},
          {"u", detail::vec_json(u)},     {"upsilon", detail::vec_json(ups)},
          {"w", detail::vec_json(w)},     {"omega", detail::vec_json(omg)},
          {"v", detail::vec_json(v)},     {"nu", detail::vec_json(nu)}};
    }
  }
  // Tolerance absorbs round-off; genuine violations are large and negative.
  constexpr double tol = 1e-9;
  sandwich.pass = sandwich.worst_margin >= -tol;
  decrease.pass = decrease.worst_margin >= -tol;
  sandwich.symmetry_warning = decrease.symmetry_warning = symmetry_warned;
  return {sandwich, decrease};
}

inline json to_json(const ConditionReport& r) {
  json j{{"condition", r.condition},
         {"pass", r.pass},
         {"worst_margin", r.worst_margin},
         {"falsification_only", r.falsification_only}};
  if (!r.pass) j["witness"] = r.witness;
  if (r.symmetry_warning) j["symmetry_warning"] = true;
  return j;
}

// phi_gain: r -> 4 alpha2(alpha3^{-1}(8 rho(r))) + 4 rho(r).
inline ScalarFn phi_gain(const ScalarFn& rho_n, const ScalarFn& alpha2,
                         const ScalarFn& alpha3) {
  return ScalarFn::gain_composite(alpha2, alpha3, rho_n);
}

// max_bounds: the Lyapunov-to-KL construction. Assumes the Lyapunov
// conditions hold (pair with check_lyapunov_conditions).
inline NonlinMaxBounds max_bounds(const LyapunovCandidate& cand,
                                  double grid_step) {
  NonlinMaxBounds out;
  out.kappa = construct_kappa(cand.alpha3, grid_step);
  auto bound_for = [&](const ScalarFn& gain) {
    return KLFn::composed(cand.alpha1, out.kappa, gain);
  };
  out.family.beta = bound_for(cand.alpha2);
  out.family.gamma = bound_for(phi_gain(cand.rho_w, cand.alpha2, cand.alpha3));
  out.family.delta = bound_for(phi_gain(cand.rho_v, cand.alpha2, cand.alpha3));
  out.family.epsilon = bound_for(phi_gain(cand.rho_u, cand.alpha2, cand.alpha3));
  out.family.phi = bound_for(phi_gain(cand.rho_y, cand.alpha2, cand.alpha3));
  return out;
}

// sum_bounds: sum-form family. If alpha3(r) >= K r holds on the whole domain
// the fast path with the linear contraction (1-K) r and the raw gains rho_n
// applies; otherwise the kappa iteration with gains phi_n, paired with the
// summability envelope certified on [0, r_bar].
inline NonlinSumBounds sum_bounds(const LyapunovCandidate& cand, double K,
                                  std::optional<double> r_bar_opt = {},
                                  double grid_step = 1e-3) {
  if (!(K > 0.0 && K < 1.0)) throw PremiseViolated("K must lie in (0,1)");
  const double cap = cand.alpha3.domain_cap;
  double r_bar = r_bar_opt.value_or(cap);

  // Premise check on [0, r_bar], 1000-point grid.
  constexpr std::size_t kGrid = 1000;
  for (std::size_t i = 0; i <= kGrid; ++i) {
    double r = r_bar * static_cast<double>(i) / static_cast<double>(kGrid);
    if (eval_k(cand.alpha3, r) < K * r - 1e-12)
      throw PremiseViolated("alpha3(r) >= K r fails on [0, r_bar]");
  }

  // Global check decides the fast path.
  bool global = true;
  for (std::size_t i = 0; i <= kGrid && global; ++i) {
    double r = cap * static_cast<double>(i) / static_cast<double>(kGrid);
    if (eval_k(cand.alpha3, r) < K * r - 1e-12) global = false;
  }

  NonlinSumBounds out;
  out.family.alpha1 = cand.alpha1;
  if (global) {
    out.linear_fast_path = true;
    double rate = 1.0 - K;
    out.family.beta = KLFn::exponential(rate, cand.alpha2);
    // Disturbance at lag tau enters the direct induction with tau - 1
    // contraction steps, so the rate^tau evaluation needs a 1/rate gain.
    auto shifted = [rate](const ScalarFn& rho) {
      return KLFn::exponential(rate, ScalarFn::scaled(1.0 / rate, rho));
    };
    out.family.gamma = shifted(cand.rho_w);
    out.family.delta = shifted(cand.rho_v);
    out.family.epsilon = shifted(cand.rho_u);
    out.family.phi = shifted(cand.rho_y);
  } else {
    ScalarFn kappa = construct_kappa(cand.alpha3, grid_step);
    out.family.beta = KLFn::composed(std::nullopt, kappa, cand.alpha2);
    out.family.gamma = KLFn::composed(
        std::nullopt, kappa, phi_gain(cand.rho_w, cand.alpha2, cand.alpha3));
    out.family.delta = KLFn::composed(
        std::nullopt, kappa, phi_gain(cand.rho_v, cand.alpha2, cand.alpha3));
    out.family.epsilon = KLFn::composed(
        std::nullopt, kappa, phi_gain(cand.rho_u, cand.alpha2, cand.alpha3));
    out.family.phi = KLFn::composed(
        std::nullopt, kappa, phi_gain(cand.rho_y, cand.alpha2, cand.alpha3));
    out.envelope = summability_sigma(cand.alpha3, K, r_bar);
  }
  return out;
}

// Canonical Lyapunov candidate for a linear system from its certificate data:
// V(x, chi) = ||P^{1/2}(x - chi)|| with the explicit linear gains.
inline LyapunovCandidate linear_lyapunov_candidate(const MaxCertificate& cert,
                                                   double cap = kDefaultDomainCap) {
  const Matrix Psqrt = spd_sqrt(cert.lyap.P);
  LyapunovCandidate cand;
  cand.V = [Psqrt](const Vector& x, const Vector& chi) {
    return (Psqrt * (x - chi)).norm();
  };
  cand.alpha1 = ScalarFn::linear(std::sqrt(lambda_min(cert.lyap.P)), cap);
  cand.alpha2 = ScalarFn::linear(std::sqrt(lambda_max(cert.lyap.P)), cap);
  cand.alpha3 = ScalarFn::linear(cert.decrease_rate, cap);
  cand.rho_w = ScalarFn::linear(cert.rho_w, cap);
  cand.rho_v = ScalarFn::linear(cert.rho_v, cap);
  cand.rho_u = ScalarFn::linear(cert.rho_u, cap);
  cand.rho_y = ScalarFn::linear(cert.rho_y, cap);
  return cand;
}

}  // namespace ioss
