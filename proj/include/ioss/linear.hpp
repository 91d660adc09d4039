#pragma once

// Explicit incremental-stability certificates for linear discrete-time
// systems: detectability test, observer-gain synthesis, discrete Lyapunov
// solve, and the max-form / sum-form gain families.

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ioss/comparison.hpp"
#include "ioss/errors.hpp"
#include "ioss/linalg.hpp"

namespace ioss {

// ----------------------------------------------------------------------------
// Data model.

struct LinearSystem {
  Matrix A, B, C, D, E, F;

  Eigen::Index n_x() const { return A.rows(); }
  Eigen::Index n_u() const { return B.cols(); }
  Eigen::Index n_y() const { return C.rows(); }
  Eigen::Index n_w() const { return E.cols(); }
  Eigen::Index n_v() const { return F.cols(); }

  void validate() const {
    if (A.rows() != A.cols()) throw ParseError("A must be square");
    if (B.rows() != A.rows()) throw ParseError("B row count != n_x");
    if (C.cols() != A.rows()) throw ParseError("C column count != n_x");
    if (D.rows() != C.rows() || D.cols() != B.cols())
      throw ParseError("D must be n_y x n_u");
    if (E.rows() != A.rows()) throw ParseError("E row count != n_x");
    if (F.rows() != C.rows()) throw ParseError("F row count != n_y");
  }
};

struct LyapunovData {
  Matrix L;        // output-injection gain, n_x x n_y
  Matrix P;        // SPD solution of A_L^T P A_L = P - Q
  Matrix Q;        // SPD
  Matrix A_L;      // A + L C
  Matrix B_L;      // B + L D
  double a_l_pnorm = 0.0;  // ||A_L||_P in [0,1)

  double residual() const {
    return (A_L.transpose() * P * A_L - P + Q).norm();
  }
};

struct MaxCertificate {
  double decrease_rate = 0.0;  // slope 1 - ||A_L||_P of the decrease function
  double rho_w = 0.0, rho_v = 0.0, rho_u = 0.0, rho_y = 0.0;
  LyapunovData lyap;
};

struct SumCertificate {
  double alpha1_slope = 0.0;  // sqrt(lambda_min(P))
  std::int64_t horizon = 0;
  // Index t holds the slope of the t-indexed linear gain. Index 0 of the four
  // disturbance arrays is unused (the estimate never evaluates them at t=0)
  // and stored as 0.
  std::vector<double> beta_t, gamma_t, delta_t, epsilon_t, phi_t;
  LyapunovData lyap;
};

// ----------------------------------------------------------------------------
// Operations.

// pbh_detectable: every eigenvalue of A with modulus >= 1 - tol must keep the
// stacked matrix [lambda I - A; C] at full column rank.
inline bool pbh_detectable(const Matrix& A, const Matrix& C,
                           double tol = 1e-9) {
  if (A.rows() != A.cols() || C.cols() != A.rows())
    throw ParseError("pbh_detectable: inconsistent dimensions");
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  const auto n = A.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<double> lam = es.eigenvalues()(k);
    if (std::abs(lam) < 1.0 - tol) continue;
    Eigen::MatrixXcd stacked(n + C.rows(), n);
    stacked.topRows(n) =
        lam * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    stacked.bottomRows(C.rows()) = C.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= tol * sv(0)) return false;
  }
  return true;
}

// Failing eigenvalue (largest modulus with rank-deficient PBH matrix), for
// diagnostics; empty if detectable.
inline std::optional<std::complex<double>> pbh_failing_mode(
    const Matrix& A, const Matrix& C, double tol = 1e-9) {
  Eigen::EigenSolver<Matrix> es(A, false);
  const auto n = A.rows();
  std::optional<std::complex<double>> worst;
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<double> lam = es.eigenvalues()(k);
    if (std::abs(lam) < 1.0 - tol) continue;
    Eigen::MatrixXcd stacked(n + C.rows(), n);
    stacked.topRows(n) =
        lam * Eigen::MatrixXcd::Identity(n, n) - A.cast<std::complex<double>>();
    stacked.bottomRows(C.rows()) = C.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= tol * sv(0)) {
      if (!worst || std::abs(lam) > std::abs(*worst)) worst = lam;
    }
  }
  return worst;
}

// synthesize_observer_gain: fixed-point iteration of the filter Riccati
// recursion with unit weights, then L from the converged covariance. The
// resulting A + L C is verified Schur stable.
inline Matrix synthesize_observer_gain(const LinearSystem& sys,
                                       int max_iter = 10000,
                                       double tol = 1e-12) {
  sys.validate();
  if (!pbh_detectable(sys.A, sys.C))
    throw NotDetectable("PBH test fails; no stabilizing gain exists");
  const auto n = sys.n_x();
  const Matrix& A = sys.A;
  const Matrix& C = sys.C;
  Matrix S = Matrix::Identity(n, n);
  Matrix I_y = Matrix::Identity(sys.n_y(), sys.n_y());
  for (int it = 0; it < max_iter; ++it) {
    Matrix CSCt_I = C * S * C.transpose() + I_y;
    Matrix gain = CSCt_I.ldlt().solve(C * S * A.transpose()).transpose();
    Matrix S_next = A * S * A.transpose() - gain * C * S * A.transpose() +
                    Matrix::Identity(n, n);
    S_next = 0.5 * (S_next + S_next.transpose());
    double delta = (S_next - S).norm();
    S = S_next;
    if (delta <= tol * std::max(1.0, S.norm())) {
      Matrix CSCt_I2 = C * S * C.transpose() + I_y;
      Matrix L = -(CSCt_I2.ldlt().solve(C * S * A.transpose())).transpose();
      if (spectral_radius(A + L * C) >= 1.0)
        throw StabilityCheckFailed("synthesized gain is not Schur stabilizing");
      return L;
    }
  }
  throw NoConvergence("Riccati fixed-point iteration budget exhausted");
}

// solve_dlyap: unique SPD solution of A_L^T P A_L = P - Q via the
// Kronecker-vectorized linear system (I - A_L^T (x) A_L^T) vec(P) = vec(Q).
inline Matrix solve_dlyap(const Matrix& A_L, const Matrix& Q) {
  const auto n = A_L.rows();
  if (A_L.cols() != n || Q.rows() != n || Q.cols() != n)
    throw ParseError("solve_dlyap: inconsistent dimensions");
  if ((Q - Q.transpose()).norm() > 1e-12 * std::max(1.0, Q.norm()))
    throw NotSymmetric("Q is not symmetric");
  if (spectral_radius(A_L) >= 1.0)
    throw NotSchurStable("spectral radius of A_L is not < 1");
  const Matrix At = A_L.transpose();
  Matrix K = Matrix::Identity(n * n, n * n);
  // K -= At (x) At  (column-major vec convention: vec(At P A_L) = (At (x) At) vec(P))
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      K.block(i * n, j * n, n, n) -= At(i, j) * At;
  Vector q(Eigen::Map<const Vector>(Q.data(), n * n));
  Eigen::PartialPivLU<Matrix> lu(K);
  Vector p = lu.solve(q);
  if (!p.allFinite() || (K * p - q).norm() > 1e-8 * std::max(1.0, q.norm()))
    throw SingularSystem("Kronecker system solve failed");
  Matrix P(n, n);
  P = Eigen::Map<Matrix>(p.data(), n, n);
  P = 0.5 * (P + P.transpose());
  return P;
}

// p_induced_norm: ||A_L||_P via the induced-norm eigenproblem and,
// independently, via 1 - lambda_min(P^{-1/2} Q P^{-1/2}); the two routes must
// agree.
inline double p_induced_norm(const Matrix& A_L, const Matrix& P,
                             const Matrix& Q, double tol = 1e-9) {
  Matrix P_inv_sqrt = spd_power(P, -0.5);
  double via_norm = std::sqrt(std::max(
      0.0, lambda_max(P_inv_sqrt * A_L.transpose() * P * A_L * P_inv_sqrt)));
  double via_q =
      std::sqrt(std::max(0.0, 1.0 - lambda_min(P_inv_sqrt * Q * P_inv_sqrt)));
  if (std::abs(via_norm - via_q) > tol)
    throw IdentityMismatch("the two ||A_L||_P computations disagree: " +
                           std::to_string(via_norm) + " vs " +
                           std::to_string(via_q));
  return via_norm;
}

// e2p_gain: Euclidean-to-P-norm induced gain sqrt(lambda_max(M^T P M)).
inline double e2p_gain(const Matrix& M, const Matrix& P) {
  if (M.size() == 0 || M.cols() == 0) return 0.0;
  return std::sqrt(std::max(0.0, lambda_max(M.transpose() * P * M)));
}

inline LyapunovData make_lyapunov_data(const LinearSystem& sys, const Matrix& L,
                                       const Matrix& Q) {
  LyapunovData d;
  d.L = L;
  d.Q = Q;
  d.A_L = sys.A + L * sys.C;
  d.B_L = sys.B + L * sys.D;
  d.P = solve_dlyap(d.A_L, Q);
  d.a_l_pnorm = p_induced_norm(d.A_L, d.P, d.Q);
  if (d.a_l_pnorm >= 1.0)
    throw NotSchurStable("||A_L||_P >= 1 for supplied (L, Q)");
  return d;
}

inline MaxCertificate max_certificate(const LinearSystem& sys, const Matrix& L,
                                      const Matrix& Q) {
  sys.validate();
  MaxCertificate cert;
  cert.lyap = make_lyapunov_data(sys, L, Q);
  const Matrix& P = cert.lyap.P;
  cert.decrease_rate = 1.0 - cert.lyap.a_l_pnorm;
  cert.rho_w = e2p_gain(sys.E, P);
  cert.rho_v = e2p_gain(L * sys.F, P);
  cert.rho_u = e2p_gain(cert.lyap.B_L, P);
  cert.rho_y = e2p_gain(L, P);
  return cert;
}

inline SumCertificate sum_certificate(const LinearSystem& sys, const Matrix& L,
                                      const Matrix& Q, std::int64_t T) {
  sys.validate();
  if (T < 1) throw ParseError("sum_certificate horizon must be >= 1");
  SumCertificate cert;
  cert.lyap = make_lyapunov_data(sys, L, Q);
  cert.horizon = T;
  const Matrix& P = cert.lyap.P;
  cert.alpha1_slope = std::sqrt(lambda_min(P));
  const Matrix LF = L * sys.F;
  const auto n = sys.n_x();
  cert.beta_t.resize(static_cast<std::size_t>(T) + 1);
  cert.gamma_t.assign(static_cast<std::size_t>(T) + 1, 0.0);
  cert.delta_t.assign(static_cast<std::size_t>(T) + 1, 0.0);
  cert.epsilon_t.assign(static_cast<std::size_t>(T) + 1, 0.0);
  cert.phi_t.assign(static_cast<std::size_t>(T) + 1, 0.0);
  Matrix power = Matrix::Identity(n, n);  // holds A_L^{t-1} inside the loop
  cert.beta_t[0] = e2p_gain(power, P);    // sigma_max(P^{1/2}) = sqrt(lambda_max(P))
  for (std::int64_t t = 1; t <= T; ++t) {
    auto i = static_cast<std::size_t>(t);
    cert.gamma_t[i] = e2p_gain(power * sys.E, P);
    cert.delta_t[i] = e2p_gain(power * LF, P);
    cert.epsilon_t[i] = e2p_gain(power * cert.lyap.B_L, P);
    cert.phi_t[i] = e2p_gain(power * L, P);
    power = cert.lyap.A_L * power;  // now A_L^t
    cert.beta_t[i] = e2p_gain(power, P);
  }
  return cert;
}

struct CertifyOptions {
  std::optional<Matrix> L;
  std::optional<Matrix> Q;
  std::int64_t horizon = 200;
};

// certify: PBH-gate, synthesize L / default Q = I unless supplied, then emit
// both gain families.
inline std::pair<MaxCertificate, SumCertificate> certify(
    const LinearSystem& sys, const CertifyOptions& opt = {}) {
  sys.validate();
  if (!pbh_detectable(sys.A, sys.C)) {
    std::ostringstream msg;
    msg << "system is not detectable";
    if (auto lam = pbh_failing_mode(sys.A, sys.C))
      msg << "; unobservable eigenvalue " << lam->real()
          << (lam->imag() >= 0 ? "+" : "") << lam->imag() << "i";
    throw NotDetectable(msg.str());
  }
  Matrix L = opt.L ? *opt.L : synthesize_observer_gain(sys);
  Matrix Q = opt.Q ? *opt.Q : Matrix::Identity(sys.n_x(), sys.n_x());
  return {max_certificate(sys, L, Q),
          sum_certificate(sys, L, Q, opt.horizon)};
}

// ----------------------------------------------------------------------------
// JSON.

inline json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw ParseError("matrix must be a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError("ragged matrix rows");
    for (Eigen::Index k = 0; k < cols; ++k)
      M(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
  }
  return M;
}

inline json to_json(const LinearSystem& sys) {
  return json{{"A", matrix_to_json(sys.A)}, {"B", matrix_to_json(sys.B)},
              {"C", matrix_to_json(sys.C)}, {"D", matrix_to_json(sys.D)},
              {"E", matrix_to_json(sys.E)}, {"F", matrix_to_json(sys.F)}};
}

inline LinearSystem linear_system_from_json(const json& j) {
  LinearSystem sys{matrix_from_json(j.at("A")), matrix_from_json(j.at("B")),
                   matrix_from_json(j.at("C")), matrix_from_json(j.at("D")),
                   matrix_from_json(j.at("E")), matrix_from_json(j.at("F"))};
  sys.validate();
  return sys;
}

inline json certificates_to_json(const MaxCertificate& mc,
                                 const SumCertificate& sc) {
  return json{
      {"max",
       {{"decrease_rate", mc.decrease_rate},
        {"rho_w", mc.rho_w},
        {"rho_v", mc.rho_v},
        {"rho_u", mc.rho_u},
        {"rho_y", mc.rho_y}}},
      {"sum",
       {{"alpha1_slope", sc.alpha1_slope},
        {"horizon", sc.horizon},
        {"beta_t", sc.beta_t},
        {"gamma_t", sc.gamma_t},
        {"delta_t", sc.delta_t},
        {"epsilon_t", sc.epsilon_t},
        {"phi_t", sc.phi_t}}},
      {"provenance",
       {{"L", matrix_to_json(sc.lyap.L)},
        {"P", matrix_to_json(sc.lyap.P)},
        {"Q", matrix_to_json(sc.lyap.Q)},
        {"a_l_pnorm", sc.lyap.a_l_pnorm},
        {"residual", sc.lyap.residual()}}}};
}

inline SumCertificate sum_certificate_from_json(const json& j) {
  SumCertificate sc;
  const auto& s = j.at("sum");
  sc.alpha1_slope = s.at("alpha1_slope").get<double>();
  sc.horizon = s.at("horizon").get<std::int64_t>();
  sc.beta_t = s.at("beta_t").get<std::vector<double>>();
  sc.gamma_t = s.at("gamma_t").get<std::vector<double>>();
  sc.delta_t = s.at("delta_t").get<std::vector<double>>();
  sc.epsilon_t = s.at("epsilon_t").get<std::vector<double>>();
  sc.phi_t = s.at("phi_t").get<std::vector<double>>();
  const auto& p = j.at("provenance");
  sc.lyap.L = matrix_from_json(p.at("L"));
  sc.lyap.P = matrix_from_json(p.at("P"));
  sc.lyap.Q = matrix_from_json(p.at("Q"));
  sc.lyap.a_l_pnorm = p.at("a_l_pnorm").get<double>();
  return sc;
}

}  // namespace ioss
