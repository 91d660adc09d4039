// Batch front-end: certify linear systems, run verification campaigns,
// evaluate the kappa construction, and exercise the observer suite.
//
// Exit codes: 0 pass, 1 input error, 2 not detectable, 3 bound/check
// violation, 4 construction failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ioss/comparison.hpp"
#include "ioss/linear.hpp"
#include "ioss/nonlinear.hpp"
#include "ioss/verifier.hpp"

namespace {

using ioss::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ioss::ParseError("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ioss::ParseError("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct CommonOpts {
  std::string in_path, out_path;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> trials;
  std::optional<std::int64_t> horizon;
  std::optional<double> tol;
  int threads = 1;
  std::string gain_L_path, weight_Q_path;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool need_out) {
  cmd->add_option("--in", o.in_path, "input JSON file")->required();
  auto* out = cmd->add_option("--out", o.out_path, "output file");
  if (need_out) out->required();
  cmd->add_option("--seed", o.seed, "RNG seed (default 0)");
  cmd->add_option("--trials", o.trials, "number of Monte-Carlo trials");
  cmd->add_option("--horizon", o.horizon, "simulation/certificate horizon");
  cmd->add_option("--tol", o.tol, "relative violation tolerance");
  cmd->add_option("--threads", o.threads, "verification parallelism");
  cmd->add_option("--gain-L", o.gain_L_path, "JSON file with observer gain L");
  cmd->add_option("--weight-Q", o.weight_Q_path, "JSON file with Lyapunov Q");
}

ioss::SignalSpec spec_or_zero(const json& signals, const std::string& key,
                              Eigen::Index dim) {
  if (signals.contains(key)) return ioss::signal_spec_from_json(signals.at(key));
  return ioss::SignalSpec::zero(dim);
}

int cmd_certify(const CommonOpts& o) {
  json j = load_json(o.in_path);
  ioss::LinearSystem sys = ioss::linear_system_from_json(j);
  ioss::CertifyOptions opt;
  if (!o.gain_L_path.empty())
    opt.L = ioss::matrix_from_json(load_json(o.gain_L_path));
  if (!o.weight_Q_path.empty())
    opt.Q = ioss::matrix_from_json(load_json(o.weight_Q_path));
  if (o.horizon) opt.horizon = *o.horizon;
  try {
    auto [mc, sc] = ioss::certify(sys, opt);
    json out = ioss::certificates_to_json(mc, sc);
    out["system"] = ioss::to_json(sys);
    write_json(o.out_path, out);
    std::cout << "certified: decrease_rate=" << mc.decrease_rate
              << " rho_w=" << mc.rho_w << " rho_v=" << mc.rho_v
              << " rho_u=" << mc.rho_u << " rho_y=" << mc.rho_y << "\n";
    return 0;
  } catch (const ioss::NotDetectable& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}

int cmd_verify(const CommonOpts& o) {
  json sc = load_json(o.in_path);
  ioss::LinearSystem sys =
      sc.contains("system_path")
          ? ioss::linear_system_from_json(load_json(sc.at("system_path")))
          : ioss::linear_system_from_json(sc.at("system"));
  std::int64_t T = o.horizon ? *o.horizon : sc.value("T", std::int64_t{200});
  if (T < 1) throw ioss::ParseError("scenario horizon T must be >= 1");
  std::int64_t trials =
      o.trials ? *o.trials : sc.value("n_trials", std::int64_t{100});
  std::uint64_t seed = sc.value("seed", std::uint64_t{0});
  if (o.seed != 0) seed = o.seed;
  double tol = o.tol ? *o.tol : sc.value("tol", ioss::kViolationRelTol);

  ioss::SumCertificate cert;
  if (sc.contains("certificate_path")) {
    cert = ioss::sum_certificate_from_json(load_json(sc.at("certificate_path")));
    if (cert.horizon < T)
      throw ioss::ParseError("certificate horizon shorter than scenario T");
  } else {
    ioss::CertifyOptions opt;
    opt.horizon = T;
    cert = ioss::certify(sys, opt).second;
  }

  ioss::MonteCarloConfig cfg;
  cfg.n_trials = trials;
  cfg.T = T;
  cfg.seed = seed;
  cfg.threads = o.threads;
  cfg.tol_rel = tol;
  const json& signals = sc.value("signals", json::object());
  cfg.signals.u = spec_or_zero(signals, "u", sys.n_u());
  cfg.signals.upsilon = spec_or_zero(signals, "upsilon", sys.n_u());
  cfg.signals.w = spec_or_zero(signals, "w", sys.n_w());
  cfg.signals.omega = spec_or_zero(signals, "omega", sys.n_w());
  cfg.signals.v = spec_or_zero(signals, "v", sys.n_v());
  cfg.signals.nu = spec_or_zero(signals, "nu", sys.n_v());
  cfg.x0_spec = sc.contains("x0") ? ioss::signal_spec_from_json(sc.at("x0"))
                                  : ioss::SignalSpec::zero(sys.n_x());
  cfg.chi0_spec = sc.contains("chi0")
                      ? ioss::signal_spec_from_json(sc.at("chi0"))
                      : ioss::SignalSpec::zero(sys.n_x());

  auto nsys = ioss::wrap_linear(sys);
  auto sum_family = ioss::linear_sum_family(cert);
  auto max_family = ioss::linear_max_family(cert);
  auto agg = ioss::monte_carlo_verify(nsys, sum_family, max_family, cfg);

  json out = ioss::to_json(agg);
  out["config"] = sc;
  out["config"]["T"] = T;
  out["config"]["n_trials"] = trials;
  out["config"]["seed"] = seed;
  out["config"]["tol"] = tol;
  if (!o.out_path.empty()) {
    write_json(o.out_path, out);
    // Also dump the per-step CSV of a representative single trial.
    ioss::Vector x0 = cfg.x0_spec.at(0, seed, 0, ioss::Channel::x0);
    ioss::Vector chi0 = cfg.chi0_spec.at(0, seed, 0, ioss::Channel::chi0);
    auto pair = ioss::simulate_pair(nsys, x0, chi0, cfg.signals, T, seed, 0);
    auto rep = ioss::eval_sum_bound(pair, sum_family, tol);
    std::string csv_path = o.out_path;
    auto dot = csv_path.rfind('.');
    if (dot != std::string::npos) csv_path.resize(dot);
    write_text(csv_path + ".csv", ioss::report_csv(rep));
  }
  std::cout << out.dump(2) << "\n";
  std::int64_t viol = agg.violations_sum + agg.violations_max;
  if (viol > 0) {
    std::cerr << "bound violations: sum=" << agg.violations_sum
              << " max=" << agg.violations_max << "\n";
    return 3;
  }
  return 0;
}

int cmd_kappa(const CommonOpts& o, double grid_step, double K, double r_bar) {
  json j = load_json(o.in_path);
  ioss::ScalarFn alpha3 = ioss::scalar_fn_from_json(j);
  ioss::ScalarFn kappa = ioss::construct_kappa(alpha3, grid_step);

  std::ostringstream os;
  os.precision(17);
  os << "r,kappa,r_minus_alpha3\n";
  const auto& pts = std::get<ioss::ScalarFn::Table>(kappa.repr).points;
  for (const auto& p : pts)
    os << p[0] << "," << p[1] << "," << p[0] - ioss::eval_k(alpha3, p[0])
       << "\n";
  write_text(o.out_path, os.str());

  try {
    auto env = ioss::summability_sigma(alpha3, K, r_bar);
    std::cout << "sigma: K=" << env.K << " r_bar=" << env.r_bar
              << " sigma(r_bar)=" << ioss::eval_k(env.sigma, env.r_bar) << "\n";
  } catch (const ioss::PremiseViolated& e) {
    std::cout << "warning: summability premise fails, sigma omitted ("
              << e.what() << ")\n";
  }
  return 0;
}

int cmd_observer(const CommonOpts& o) {
  json sc = load_json(o.in_path);
  ioss::LinearSystem sys =
      sc.contains("system_path")
          ? ioss::linear_system_from_json(load_json(sc.at("system_path")))
          : ioss::linear_system_from_json(sc.at("system"));
  std::int64_t T = o.horizon ? *o.horizon : sc.value("T", std::int64_t{200});
  std::uint64_t seed = sc.value("seed", std::uint64_t{0});
  if (o.seed != 0) seed = o.seed;

  ioss::Matrix L;
  if (!o.gain_L_path.empty())
    L = ioss::matrix_from_json(load_json(o.gain_L_path));
  else if (sc.contains("L"))
    L = ioss::matrix_from_json(sc.at("L"));
  else
    L = ioss::synthesize_observer_gain(sys);

  auto nsys = ioss::wrap_linear(sys);
  auto obs = ioss::luenberger_observer(sys, L);
  if (sc.contains("injection_offset")) {
    // Deliberately corrupted observer for negative testing.
    double c = sc.at("injection_offset").get<double>();
    auto base = obs.g;
    obs.g = [base, c](const ioss::Vector& x, const ioss::Vector& u,
                      const ioss::Vector& w, const ioss::Vector& v,
                      const ioss::Vector& y) -> ioss::Vector {
      return base(x, u, w, v, y).array() + c;
    };
  }

  bool all_pass = true;
  json out;

  // 1. Output-injection identity.
  ioss::SampleSpec samples;
  auto box = [&](Eigen::Index n) {
    return std::pair{ioss::Vector::Constant(n, -1.0).eval(),
                     ioss::Vector::Constant(n, 1.0).eval()};
  };
  std::tie(samples.x_lo, samples.x_hi) = box(sys.n_x());
  std::tie(samples.u_lo, samples.u_hi) = box(sys.n_u());
  std::tie(samples.w_lo, samples.w_hi) = box(sys.n_w());
  std::tie(samples.v_lo, samples.v_hi) = box(sys.n_v());
  samples.count = 1000;
  samples.seed = seed;
  auto inj = ioss::check_output_injection(obs, nsys, samples);
  out["output_injection"] = {{"pass", inj.pass},
                             {"worst_residual", inj.worst_residual}};
  all_pass = all_pass && inj.pass;

  // 2. Feedback reduction: with y_tilde = h(x_tilde, u_tilde, v_tilde) the
  // observer must track the open-loop model trajectory exactly.
  {
    ioss::Vector xt = ioss::Vector::Constant(sys.n_x(), 0.3);
    ioss::Vector model = xt;
    double worst = 0.0;
    for (std::int64_t t = 0; t < std::min<std::int64_t>(T, 100); ++t) {
      ioss::Vector u = ioss::Vector::Zero(sys.n_u());
      ioss::Vector w = ioss::Vector::Zero(sys.n_w());
      ioss::Vector v = ioss::Vector::Zero(sys.n_v());
      ioss::Vector y_fb = nsys.h(xt, u, v);
      xt = obs.g(xt, u, w, v, y_fb);
      model = nsys.f(model, u, w);
      worst = std::max(worst, (xt - model).norm());
    }
    bool pass = worst <= 1e-12;
    out["feedback_reduction"] = {{"pass", pass}, {"worst_residual", worst}};
    all_pass = all_pass && pass;
  }

  // 3. Estimate on the error channels + terminal decay.
  {
    ioss::CertifyOptions copt;
    copt.L = L;
    copt.horizon = T;
    auto cert = ioss::certify(sys, copt).second;
    ioss::ObserverScenario scenario;
    scenario.x0 = sc.contains("x0")
                      ? ioss::Vector(ioss::matrix_from_json(sc.at("x0")).col(0))
                      : ioss::Vector::Constant(sys.n_x(), 1.0).eval();
    scenario.x_tilde0 = ioss::Vector::Zero(sys.n_x());
    scenario.T = T;
    scenario.seed = seed;
    const json& signals = sc.value("signals", json::object());
    scenario.u = spec_or_zero(signals, "u", sys.n_u());
    scenario.w = spec_or_zero(signals, "w", sys.n_w());
    scenario.v = spec_or_zero(signals, "v", sys.n_v());
    if (sc.contains("y_offset")) {
      double c = sc.at("y_offset").get<double>();
      scenario.y_offset = ioss::Vector::Constant(sys.n_y(), c);
    }
    if (sc.contains("terminal_threshold"))
      scenario.terminal_threshold = sc.at("terminal_threshold").get<double>();
    auto res = ioss::check_rgas_estimate(nsys, obs,
                                         ioss::linear_sum_family(cert), scenario);
    bool pass = res.bound_report.violations == 0 && res.terminal_pass;
    out["estimate"] = {{"pass", pass},
                       {"violations", res.bound_report.violations},
                       {"min_margin", res.bound_report.min_margin},
                       {"terminal_error", res.terminal_error}};
    all_pass = all_pass && pass;
  }

  out["pass"] = all_pass;
  if (!o.out_path.empty()) write_json(o.out_path, out);
  std::cout << out.dump(2) << "\n";
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-discounted incremental-stability certificates"};
  app.require_subcommand(1);

  CommonOpts certify_o, verify_o, kappa_o, observer_o;
  double grid_step = 1e-3, K = 0.5, r_bar = 1.0;

  auto* c_certify = app.add_subcommand("certify", "compute certificates");
  add_common(c_certify, certify_o, /*need_out=*/true);
  auto* c_verify = app.add_subcommand("verify", "Monte-Carlo bound validation");
  add_common(c_verify, verify_o, /*need_out=*/false);
  auto* c_kappa = app.add_subcommand("kappa", "contraction construction dump");
  add_common(c_kappa, kappa_o, /*need_out=*/true);
  c_kappa->add_option("--grid-step", grid_step, "construction grid step");
  c_kappa->add_option("--K", K, "summability linear lower-bound slope");
  c_kappa->add_option("--r-bar", r_bar, "summability threshold radius");
  auto* c_observer = app.add_subcommand("observer", "observer property checks");
  add_common(c_observer, observer_o, /*need_out=*/false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_certify->parsed()) return cmd_certify(certify_o);
    if (c_verify->parsed()) return cmd_verify(verify_o);
    if (c_kappa->parsed()) return cmd_kappa(kappa_o, grid_step, K, r_bar);
    if (c_observer->parsed()) return cmd_observer(observer_o);
  } catch (const ioss::RefinementFailed& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const ioss::NotDetectable& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 1;
}
