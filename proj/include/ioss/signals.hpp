#pragma once

// Exogenous signal generators for trajectory simulation.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ioss/errors.hpp"
#include "ioss/rng.hpp"

namespace ioss {

struct SignalSpec {
  enum class Kind { zero, constant, step, decaying_exp, uniform_box };

  Kind kind = Kind::zero;
  Eigen::Index dim = 0;
  Eigen::VectorXd value;      // constant / step value / decaying base
  std::int64_t step_time = 0; // step: zero before, value from step_time on
  double rate = 0.0;          // decaying_exp: value * rate^t, rate in [0,1)
  Eigen::VectorXd lo, hi;     // uniform_box bounds, lo <= hi

  static SignalSpec zero(Eigen::Index dim) {
    SignalSpec s;
    s.kind = Kind::zero;
    s.dim = dim;
    return s;
  }
  static SignalSpec constant(Eigen::VectorXd v) {
    SignalSpec s;
    s.kind = Kind::constant;
    s.dim = v.size();
    s.value = std::move(v);
    return s;
  }
  static SignalSpec step(Eigen::VectorXd v, std::int64_t at) {
    SignalSpec s;
    s.kind = Kind::step;
    s.dim = v.size();
    s.value = std::move(v);
    s.step_time = at;
    return s;
  }
  static SignalSpec decaying_exp(Eigen::VectorXd base, double rate) {
    if (!(rate >= 0.0 && rate < 1.0))
      throw ParseError("decaying_exp rate must lie in [0,1)");
    SignalSpec s;
    s.kind = Kind::decaying_exp;
    s.dim = base.size();
    s.value = std::move(base);
    s.rate = rate;
    return s;
  }
  static SignalSpec uniform_box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    if (lo.size() != hi.size()) throw ParseError("box bounds size mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(lo(i) <= hi(i))) throw ParseError("box bounds must be ordered");
    SignalSpec s;
    s.kind = Kind::uniform_box;
    s.dim = lo.size();
    s.lo = std::move(lo);
    s.hi = std::move(hi);
    return s;
  }

  Eigen::VectorXd at(std::int64_t t, std::uint64_t seed, std::uint64_t trial,
                     Channel channel) const {
    switch (kind) {
      case Kind::zero:
        return Eigen::VectorXd::Zero(dim);
      case Kind::constant:
        return value;
      case Kind::step:
        return t >= step_time ? value
                              : Eigen::VectorXd::Zero(dim);
      case Kind::decaying_exp:
        return value * std::pow(rate, static_cast<double>(t));
      case Kind::uniform_box: {
        Eigen::VectorXd out(dim);
        for (Eigen::Index i = 0; i < dim; ++i)
          out(i) = uniform_in(lo(i), hi(i), seed, trial,
                              static_cast<std::uint64_t>(t), channel,
                              static_cast<std::uint64_t>(i));
        return out;
      }
    }
    throw EvaluationFailure("unknown signal kind");
  }
};

inline json to_json(const SignalSpec& s) {
  auto vec = [](const Eigen::VectorXd& v) {
    std::vector<double> out(v.data(), v.data() + v.size());
    return out;
  };
  switch (s.kind) {
    case SignalSpec::Kind::zero:
      return json{{"kind", "zero"}, {"dim", s.dim}};
    case SignalSpec::Kind::constant:
      return json{{"kind", "constant"}, {"value", vec(s.value)}};
    case SignalSpec::Kind::step:
      return json{{"kind", "step"}, {"value", vec(s.value)},
                  {"time", s.step_time}};
    case SignalSpec::Kind::decaying_exp:
      return json{{"kind", "decaying_exp"}, {"base", vec(s.value)},
                  {"rate", s.rate}};
    case SignalSpec::Kind::uniform_box:
      return json{{"kind", "uniform"}, {"lo", vec(s.lo)}, {"hi", vec(s.hi)}};
  }
  throw EvaluationFailure("unknown signal kind");
}

inline SignalSpec signal_spec_from_json(const json& j) {
  auto vec = [](const json& a) {
    auto v = a.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                             static_cast<Eigen::Index>(v.size()))
        .eval();
  };
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") return SignalSpec::zero(j.at("dim").get<Eigen::Index>());
  if (kind == "constant") return SignalSpec::constant(vec(j.at("value")));
  if (kind == "step")
    return SignalSpec::step(vec(j.at("value")), j.at("time").get<std::int64_t>());
  if (kind == "decaying_exp")
    return SignalSpec::decaying_exp(vec(j.at("base")), j.at("rate").get<double>());
  if (kind == "uniform")
    return SignalSpec::uniform_box(vec(j.at("lo")), vec(j.at("hi")));
  throw ParseError("unknown signal kind: " + kind);
}

}  // namespace ioss
