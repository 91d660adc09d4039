#pragma once

// Comparison-function algebra: class-K scalar functions, KL bounds, and the
// explicit constructions used by the certificate engines (the kappa
// contraction, summability envelopes, and sum-to-max conversion).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioss/errors.hpp"

namespace ioss {

using json = nlohmann::json;

inline constexpr double kDefaultDomainCap = 1e6;
inline constexpr double kDefaultBisectTol = 1e-10;

// ----------------------------------------------------------------------------
// ScalarFn: an evaluable map [0, domain_cap] -> [0, inf) with class metadata.

struct ScalarFn;
using ScalarFnPtr = std::shared_ptr<const ScalarFn>;

struct ScalarFn {
  struct Linear {
    double slope = 0.0;  // r -> slope * r
  };
  struct Power {
    double coeff = 1.0;
    double exponent = 1.0;  // r -> coeff * r^exponent
  };
  struct Table {
    // Strictly increasing breakpoints; linear interpolation between them.
    std::vector<std::array<double, 2>> points;
  };
  struct Scaled {
    double factor = 1.0;
    ScalarFnPtr inner;  // r -> factor * inner(r)
  };
  struct Compose {
    ScalarFnPtr outer;
    ScalarFnPtr inner;  // r -> outer(inner(r))
  };
  // The gain composite of the Lyapunov-to-KL construction:
  //   r -> 4 * alpha2(alpha3^{-1}(8 * rho(r))) + 4 * rho(r)
  struct GainComposite {
    ScalarFnPtr alpha2;
    ScalarFnPtr alpha3;
    ScalarFnPtr rho;
  };
  // Two-branch summability envelope with parameters K in (0,1), r_bar > 0:
  //   sigma(r) = (2/K + 1) r                                  for r <  r_bar
  //   sigma(r) = (r^2 + r_bar^2)/(K r_bar) + (3 r_bar - r)/2  for r >= r_bar
  struct SigmaEnvelope {
    double K = 0.5;
    double r_bar = 1.0;
  };

  using Repr = std::variant<Linear, Power, Table, Scaled, Compose,
                            GainComposite, SigmaEnvelope>;

  Repr repr = Linear{0.0};
  double domain_cap = kDefaultDomainCap;
  bool is_K = false;
  bool zero_at_zero = true;

  // -- factories --------------------------------------------------------------

  static ScalarFn zero(double cap = kDefaultDomainCap) {
    return ScalarFn{Linear{0.0}, cap, /*is_K=*/false, /*zero_at_zero=*/true};
  }

  static ScalarFn linear(double slope, double cap = kDefaultDomainCap) {
    if (slope < 0.0) throw NotKFunction("linear slope must be >= 0");
    return ScalarFn{Linear{slope}, cap, slope > 0.0, true};
  }

  static ScalarFn power(double coeff, double exponent,
                        double cap = kDefaultDomainCap) {
    if (coeff < 0.0 || exponent <= 0.0)
      throw NotKFunction("power form needs coeff >= 0, exponent > 0");
    return ScalarFn{Power{coeff, exponent}, cap, coeff > 0.0, true};
  }

  static ScalarFn table(std::vector<std::array<double, 2>> pts,
                        bool require_K = true) {
    if (pts.size() < 2) throw NotKFunction("table needs >= 2 breakpoints");
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (!(pts[i][0] > pts[i - 1][0]))
        throw NotKFunction("table breakpoints must be strictly increasing");
      if (require_K && !(pts[i][1] > pts[i - 1][1]))
        throw NotKFunction("K-function table values must be strictly increasing");
    }
    if (require_K && pts.front()[0] == 0.0 && pts.front()[1] != 0.0)
      throw NotKFunction("K-function table must have value 0 at 0");
    double cap = pts.back()[0];
    return ScalarFn{Table{std::move(pts)}, cap, require_K, true};
  }

  static ScalarFn scaled(double factor, const ScalarFn& inner) {
    if (factor < 0.0) throw NotKFunction("scale factor must be >= 0");
    if (factor == 0.0) return zero(inner.domain_cap);
    if (const auto* lin = std::get_if<Linear>(&inner.repr))
      return linear(factor * lin->slope, inner.domain_cap);
    return ScalarFn{Scaled{factor, std::make_shared<ScalarFn>(inner)},
                    inner.domain_cap, factor > 0.0 && inner.is_K,
                    inner.zero_at_zero};
  }

  static ScalarFn compose(const ScalarFn& outer, const ScalarFn& inner);

  static ScalarFn gain_composite(const ScalarFn& alpha2, const ScalarFn& alpha3,
                                 const ScalarFn& rho);

  static ScalarFn sigma_envelope(double K, double r_bar,
                                 double cap = kDefaultDomainCap) {
    if (!(K > 0.0 && K < 1.0)) throw PremiseViolated("K must lie in (0,1)");
    if (!(r_bar > 0.0)) throw PremiseViolated("r_bar must be positive");
    return ScalarFn{SigmaEnvelope{K, r_bar}, cap, true, true};
  }

  double operator()(double r) const;
};

double eval_k(const ScalarFn& f, double r);

// invert_k: bisection inverse of a K-function on [0, domain_cap].
inline double invert_k(const ScalarFn& f, double y,
                       double tol = kDefaultBisectTol) {
  if (!f.is_K) throw NotKFunction("invert_k requires a K-function");
  if (!(y >= 0.0)) throw RangeExceeded("target must be nonnegative");
  if (y == 0.0) return 0.0;
  double lo = 0.0, hi = f.domain_cap;
  double f_hi = eval_k(f, hi);
  if (y > f_hi * (1.0 + 1e-12))
    throw RangeExceeded("target exceeds f(domain_cap)");
  if (y >= f_hi) return hi;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // hit double resolution
    if (eval_k(f, mid) < y)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// eval_k: evaluate f at r; tables interpolate linearly between breakpoints.
inline double eval_k(const ScalarFn& f, double r) {
  if (!(r >= 0.0)) throw DomainExceeded("argument must be nonnegative");
  // Tiny relative slack absorbs round-off from upstream compositions.
  if (r > f.domain_cap * (1.0 + 1e-12))
    throw DomainExceeded("argument exceeds domain_cap");
  struct Visitor {
    double r;
    double operator()(const ScalarFn::Linear& v) const { return v.slope * r; }
    double operator()(const ScalarFn::Power& v) const {
      return v.coeff * std::pow(r, v.exponent);
    }
    double operator()(const ScalarFn::Table& v) const {
      const auto& p = v.points;
      if (r <= p.front()[0]) {
        if (p.front()[0] == 0.0) return p.front()[1];
        // Extend linearly through the origin below the first breakpoint.
        return p.front()[1] * (r / p.front()[0]);
      }
      auto it = std::lower_bound(
          p.begin(), p.end(), r,
          [](const std::array<double, 2>& a, double x) { return a[0] < x; });
      if (it == p.end()) return p.back()[1];
      if ((*it)[0] == r) return (*it)[1];
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      double s = (r - lo[0]) / (hi[0] - lo[0]);
      return lo[1] + s * (hi[1] - lo[1]);
    }
    double operator()(const ScalarFn::Scaled& v) const {
      return v.factor * eval_k(*v.inner, r);
    }
    double operator()(const ScalarFn::Compose& v) const {
      return eval_k(*v.outer, eval_k(*v.inner, r));
    }
    double operator()(const ScalarFn::GainComposite& v) const {
      double rho_r = eval_k(*v.rho, r);
      if (rho_r == 0.0) return 0.0;
      double inv = invert_k(*v.alpha3, 8.0 * rho_r);
      return 4.0 * eval_k(*v.alpha2, inv) + 4.0 * rho_r;
    }
    double operator()(const ScalarFn::SigmaEnvelope& v) const {
      if (r < v.r_bar) return (2.0 / v.K + 1.0) * r;
      return (r * r + v.r_bar * v.r_bar) / (v.K * v.r_bar) +
             0.5 * (3.0 * v.r_bar - r);
    }
  };
  return std::visit(Visitor{r}, f.repr);
}

inline double ScalarFn::operator()(double r) const { return eval_k(*this, r); }

inline ScalarFn ScalarFn::compose(const ScalarFn& outer, const ScalarFn& inner) {
  const auto* lo = std::get_if<Linear>(&outer.repr);
  const auto* li = std::get_if<Linear>(&inner.repr);
  double cap = inner.domain_cap;
  if (lo && li) {
    double slope = lo->slope * li->slope;
    if (slope > 0.0)
      cap = std::min(cap, outer.domain_cap / li->slope);
    return linear(slope, cap);
  }
  // Restrict the domain so the inner value stays inside the outer cap.
  if (inner.is_K && eval_k(inner, cap) > outer.domain_cap)
    cap = invert_k(inner, outer.domain_cap);
  ScalarFn f{Compose{std::make_shared<ScalarFn>(outer),
                     std::make_shared<ScalarFn>(inner)},
             cap, outer.is_K && inner.is_K,
             outer.zero_at_zero && inner.zero_at_zero};
  return f;
}

inline ScalarFn ScalarFn::gain_composite(const ScalarFn& alpha2,
                                         const ScalarFn& alpha3,
                                         const ScalarFn& rho) {
  if (!alpha2.is_K || !alpha3.is_K)
    throw NotKFunction("gain composite needs K-class alpha2, alpha3");
  if (!rho.is_K) {
    // rho identically zero collapses the whole composite to zero.
    return zero(rho.domain_cap);
  }
  const auto* l2 = std::get_if<Linear>(&alpha2.repr);
  const auto* l3 = std::get_if<Linear>(&alpha3.repr);
  const auto* lr = std::get_if<Linear>(&rho.repr);
  if (l2 && l3 && lr) {
    // 4*a2*(8*rr/a3) + 4*rr, all linear; fold to a single slope.
    double slope = 4.0 * l2->slope * (8.0 * lr->slope / l3->slope) +
                   4.0 * lr->slope;
    double cap = rho.domain_cap;
    // 8*rho(r) must stay inside alpha3's range.
    cap = std::min(cap, l3->slope * alpha3.domain_cap / (8.0 * lr->slope));
    cap = std::min(cap, alpha2.domain_cap * l3->slope / (8.0 * lr->slope));
    return linear(slope, cap);
  }
  double cap = rho.domain_cap;
  double a3_top = eval_k(alpha3, alpha3.domain_cap);
  if (8.0 * eval_k(rho, cap) > a3_top) cap = invert_k(rho, a3_top / 8.0);
  return ScalarFn{GainComposite{std::make_shared<ScalarFn>(alpha2),
                                std::make_shared<ScalarFn>(alpha3),
                                std::make_shared<ScalarFn>(rho)},
                  cap, true, true};
}

// ----------------------------------------------------------------------------
// construct_kappa: Lyapunov-to-contraction construction
//   kappa(r) = r/2 + max_{r' in [0,r]} { r' - alpha3(r') } / 2,
// evaluated as a running maximum over a uniform grid, refined until the
// sandwich r > kappa(r) > r - alpha3(r) certifies at every breakpoint.

inline ScalarFn construct_kappa(const ScalarFn& alpha3, double grid_step) {
  if (!alpha3.is_K) throw NotKFunction("construct_kappa requires K-class alpha3");
  if (!(grid_step > 0.0)) throw RefinementFailed("grid_step must be positive");
  const double cap = alpha3.domain_cap;
  constexpr int kRefineBudget = 12;
  constexpr std::size_t kMaxPoints = 1u << 22;
  double step = grid_step;
  for (int attempt = 0; attempt <= kRefineBudget; ++attempt, step *= 0.5) {
    auto n = static_cast<std::size_t>(std::ceil(cap / step));
    if (n + 1 > kMaxPoints)
      throw RefinementFailed("grid too fine for refinement budget");
    std::vector<std::array<double, 2>> pts;
    pts.reserve(n + 1);
    double running_max = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i <= n; ++i) {
      double r = (i == n) ? cap : static_cast<double>(i) * step;
      double a3 = eval_k(alpha3, r);
      running_max = std::max(running_max, r - a3);
      double kr = 0.5 * r + 0.5 * running_max;
      if (i > 0 && !(r > kr && kr > r - a3)) {
        ok = false;
        break;
      }
      pts.push_back({r, kr});
    }
    if (ok) return ScalarFn::table(std::move(pts));
  }
  throw RefinementFailed(
      "sandwich inequalities did not certify; alpha3 degenerate near 0?");
}

// iterate_kappa: t-fold composition of a contraction, kappa^0(r) = r.
inline double iterate_kappa(const ScalarFn& kappa, double r, std::int64_t t) {
  if (!kappa.is_K && !(std::holds_alternative<ScalarFn::Linear>(kappa.repr)))
    throw NotKFunction("iterate_kappa requires a K-function");
  double v = r;
  for (std::int64_t i = 0; i < t; ++i) {
    double next = eval_k(kappa, v);
    if (next > v) throw NotContraction("kappa(r) > r during iteration");
    v = next;
    if (v == 0.0) break;
  }
  return v;
}

// ----------------------------------------------------------------------------
// SummabilityEnvelope and its construction.

struct SummabilityEnvelope {
  double K = 0.5;
  double r_bar = 1.0;
  ScalarFn sigma;  // bounds sum_{tau>=0} kappa^tau(r)
};

// summability_sigma: explicit envelope valid whenever alpha(r) >= K r on
// [0, r_bar]; the premise is checked on a uniform grid.
inline SummabilityEnvelope summability_sigma(const ScalarFn& alpha, double K,
                                             double r_bar,
                                             std::size_t grid_points = 1000) {
  if (!(K > 0.0 && K < 1.0)) throw PremiseViolated("K must lie in (0,1)");
  if (!(r_bar > 0.0)) throw PremiseViolated("r_bar must be positive");
  for (std::size_t i = 0; i <= grid_points; ++i) {
    double r = r_bar * static_cast<double>(i) / static_cast<double>(grid_points);
    if (eval_k(alpha, r) < K * r - 1e-12)
      throw PremiseViolated("alpha(r) >= K r fails on [0, r_bar]");
  }
  return SummabilityEnvelope{K, r_bar, ScalarFn::sigma_envelope(K, r_bar)};
}

// ----------------------------------------------------------------------------
// KLFn: evaluable two-argument bound, K in r for fixed t (or identically
// zero), non-increasing and vanishing in t for fixed r.

struct KLFn {
  // value(r, t) = rate^t * gain(r), rate in [0, 1).
  struct Exponential {
    double rate = 0.0;
    ScalarFn gain;
  };
  // value(r, t) = outer_inv^{-1}(kappa^t(gain(r))) when outer_inv is present,
  // else kappa^t(gain(r)).
  struct Composed {
    std::optional<ScalarFn> outer_inv;
    ScalarFn kappa;
    ScalarFn gain;
  };
  // value(r, t) = slopes[t] * r; defined for t <= slopes.size() - 1.
  struct SlopeTable {
    std::vector<double> slopes;
  };

  std::variant<Exponential, Composed, SlopeTable> repr =
      Exponential{0.0, ScalarFn::zero()};

  static KLFn exponential(double rate, ScalarFn gain) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw DomainExceeded("exponential rate must lie in [0,1)");
    return KLFn{Exponential{rate, std::move(gain)}};
  }
  static KLFn composed(std::optional<ScalarFn> outer_inv, ScalarFn kappa,
                       ScalarFn gain) {
    return KLFn{Composed{std::move(outer_inv), std::move(kappa), std::move(gain)}};
  }
  static KLFn slope_table(std::vector<double> slopes) {
    for (double s : slopes)
      if (!(s >= 0.0)) throw DomainExceeded("slopes must be nonnegative");
    return KLFn{SlopeTable{std::move(slopes)}};
  }

  double operator()(double r, std::int64_t t) const {
    if (t < 0) throw DomainExceeded("KL time argument must be nonnegative");
    struct Visitor {
      double r;
      std::int64_t t;
      double operator()(const Exponential& v) const {
        return std::pow(v.rate, static_cast<double>(t)) * eval_k(v.gain, r);
      }
      double operator()(const Composed& v) const {
        double val = iterate_kappa(v.kappa, eval_k(v.gain, r), t);
        if (v.outer_inv) val = invert_k(*v.outer_inv, val);
        return val;
      }
      double operator()(const SlopeTable& v) const {
        if (static_cast<std::size_t>(t) >= v.slopes.size())
          throw DomainExceeded("KL slope table horizon exceeded");
        return v.slopes[static_cast<std::size_t>(t)] * r;
      }
    };
    return std::visit(Visitor{r, t}, repr);
  }
};

// exp_sum_to_max: converts an exponentially decaying sum-form term into the
// max-form term (r, tau) -> eta^{1/2}/(1 - eta^{1/2}) * eta^{tau/2} * gain(r)
// by halving the decrease rate and scaling by the geometric-series constant.
inline KLFn exp_sum_to_max(double eta, const ScalarFn& gain) {
  if (!(eta >= 0.0 && eta < 1.0))
    throw DomainExceeded("eta must lie in [0,1)");
  double s = std::sqrt(eta);
  double coeff = (s == 0.0) ? 0.0 : s / (1.0 - s);
  return KLFn::exponential(s, ScalarFn::scaled(coeff, gain));
}

// kl_to_classical: K-function upper bound on the infinite time-sum of a
// summable KL-function. Exponential factorization: gain/(1 - rate).
inline ScalarFn kl_to_classical(const KLFn& beta) {
  if (const auto* e = std::get_if<KLFn::Exponential>(&beta.repr)) {
    if (!(e->rate < 1.0)) throw NotSummable("rate >= 1");
    return ScalarFn::scaled(1.0 / (1.0 - e->rate), e->gain);
  }
  throw NotSummable(
      "no closed-form envelope; supply a SummabilityEnvelope explicitly");
}

// Overload for the general kappa-composed path: sum_t kappa^t(gain(r)) is
// bounded by sigma(gain(r)) for the envelope certified against kappa's
// decrease function.
inline ScalarFn kl_to_classical(const KLFn& beta,
                                const SummabilityEnvelope& env) {
  if (const auto* c = std::get_if<KLFn::Composed>(&beta.repr)) {
    if (c->outer_inv)
      throw NotSummable("cannot fold an outer inversion into the envelope");
    return ScalarFn::compose(env.sigma, c->gain);
  }
  return kl_to_classical(beta);
}

// ----------------------------------------------------------------------------
// JSON serialization. Round-trips preserve evaluations to 1e-12 relative.

json to_json(const ScalarFn& f);
ScalarFn scalar_fn_from_json(const json& j);

inline json to_json(const ScalarFn& f) {
  struct Visitor {
    const ScalarFn& f;
    json operator()(const ScalarFn::Linear& v) const {
      return json{{"kind", "linear"}, {"slope", v.slope}};
    }
    json operator()(const ScalarFn::Power& v) const {
      return json{{"kind", "power"}, {"coeff", v.coeff}, {"exponent", v.exponent}};
    }
    json operator()(const ScalarFn::Table& v) const {
      json pts = json::array();
      for (const auto& p : v.points) pts.push_back({p[0], p[1]});
      return json{{"kind", "table"}, {"points", pts}};
    }
    json operator()(const ScalarFn::Scaled& v) const {
      return json{{"kind", "scaled"}, {"factor", v.factor},
                  {"inner", to_json(*v.inner)}};
    }
    json operator()(const ScalarFn::Compose& v) const {
      return json{{"kind", "compose"}, {"outer", to_json(*v.outer)},
                  {"inner", to_json(*v.inner)}};
    }
    json operator()(const ScalarFn::GainComposite& v) const {
      return json{{"kind", "gain_composite"},
                  {"alpha2", to_json(*v.alpha2)},
                  {"alpha3", to_json(*v.alpha3)},
                  {"rho", to_json(*v.rho)}};
    }
    json operator()(const ScalarFn::SigmaEnvelope& v) const {
      return json{{"kind", "sigma"}, {"K", v.K}, {"r_bar", v.r_bar}};
    }
  };
  json j = std::visit(Visitor{f}, f.repr);
  j["domain_cap"] = f.domain_cap;
  j["is_K"] = f.is_K;
  return j;
}

inline ScalarFn scalar_fn_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  double cap = j.value("domain_cap", kDefaultDomainCap);
  ScalarFn f;
  if (kind == "linear") {
    f = ScalarFn::linear(j.at("slope").get<double>(), cap);
  } else if (kind == "power") {
    f = ScalarFn::power(j.at("coeff").get<double>(),
                        j.at("exponent").get<double>(), cap);
  } else if (kind == "table") {
    std::vector<std::array<double, 2>> pts;
    for (const auto& p : j.at("points"))
      pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    f = ScalarFn::table(std::move(pts), j.value("is_K", true));
  } else if (kind == "scaled") {
    f = ScalarFn::scaled(j.at("factor").get<double>(),
                         scalar_fn_from_json(j.at("inner")));
    f.domain_cap = cap;
  } else if (kind == "compose") {
    f = ScalarFn::compose(scalar_fn_from_json(j.at("outer")),
                          scalar_fn_from_json(j.at("inner")));
  } else if (kind == "gain_composite") {
    f = ScalarFn::gain_composite(scalar_fn_from_json(j.at("alpha2")),
                                 scalar_fn_from_json(j.at("alpha3")),
                                 scalar_fn_from_json(j.at("rho")));
  } else if (kind == "sigma") {
    f = ScalarFn::sigma_envelope(j.at("K").get<double>(),
                                 j.at("r_bar").get<double>(), cap);
  } else {
    throw ParseError("unknown ScalarFn kind: " + kind);
  }
  if (j.contains("is_K") && !j.at("is_K").get<bool>()) f.is_K = false;
  return f;
}

inline json to_json(const KLFn& b) {
  struct Visitor {
    json operator()(const KLFn::Exponential& v) const {
      return json{{"kind", "exp_kl"}, {"rate", v.rate}, {"gain", to_json(v.gain)}};
    }
    json operator()(const KLFn::Composed& v) const {
      json j{{"kind", "composed_kl"},
             {"kappa", to_json(v.kappa)},
             {"gain", to_json(v.gain)}};
      if (v.outer_inv) j["outer_inv"] = to_json(*v.outer_inv);
      return j;
    }
    json operator()(const KLFn::SlopeTable& v) const {
      return json{{"kind", "slope_table"}, {"slopes", v.slopes}};
    }
  };
  return std::visit(Visitor{}, b.repr);
}

inline KLFn kl_fn_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "exp_kl")
    return KLFn::exponential(j.at("rate").get<double>(),
                             scalar_fn_from_json(j.at("gain")));
  if (kind == "composed_kl") {
    std::optional<ScalarFn> outer;
    if (j.contains("outer_inv")) outer = scalar_fn_from_json(j.at("outer_inv"));
    return KLFn::composed(std::move(outer), scalar_fn_from_json(j.at("kappa")),
                          scalar_fn_from_json(j.at("gain")));
  }
  if (kind == "slope_table")
    return KLFn::slope_table(j.at("slopes").get<std::vector<double>>());
  throw ParseError("unknown KLFn kind: " + kind);
}

}  // namespace ioss
