#pragma once

// Dense symmetric eigensolver (cyclic Jacobi) and the small helpers built on
// it: SPD square roots, P-weighted induced gains, spectral radius.

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ioss/errors.hpp"

namespace ioss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SymEig {
  Vector eigenvalues;  // ascending
  Matrix eigenvectors; // columns, orthogonal
};

// sym_eig: cyclic Jacobi rotations on a symmetric matrix. Eigenvalues
// ascending; M V = V diag(lambda) up to tol * ||M||.
inline SymEig sym_eig(const Matrix& M, double tol = 1e-12) {
  const auto n = M.rows();
  if (M.cols() != n) throw NotSymmetric("matrix is not square");
  double scale = std::max(1.0, M.norm());
  if ((M - M.transpose()).norm() > tol * scale * 100.0)
    throw NotSymmetric("matrix is not symmetric within tolerance");

  Matrix A = 0.5 * (M + M.transpose());
  Matrix V = Matrix::Identity(n, n);
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (std::sqrt(2.0 * off) <= tol * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        double apq = A(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        // A <- J^T A J and V <- V J with the (p, q)-plane rotation
        // J = [[c, s], [-s, c]].
        double app = A(p, p), aqq = A(q, q);
        A(p, p) = app - t * apq;
        A(q, q) = aqq + t * apq;
        A(p, q) = A(q, p) = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          double aip = A(i, p), aiq = A(i, q);
          A(i, p) = A(p, i) = c * aip - s * aiq;
          A(i, q) = A(q, i) = s * aip + c * aiq;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          double vip = V(i, p), viq = V(i, q);
          V(i, p) = c * vip - s * viq;
          V(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  // Sort ascending.
  SymEig out;
  out.eigenvalues = A.diagonal();
  out.eigenvectors = V;
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return out.eigenvalues(a) < out.eigenvalues(b);
  });
  Vector ev(n);
  Matrix evec(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ev(i) = out.eigenvalues(idx[static_cast<std::size_t>(i)]);
    evec.col(i) = out.eigenvectors.col(idx[static_cast<std::size_t>(i)]);
  }
  out.eigenvalues = std::move(ev);
  out.eigenvectors = std::move(evec);
  return out;
}

inline double lambda_min(const Matrix& M) { return sym_eig(M).eigenvalues(0); }
inline double lambda_max(const Matrix& M) {
  auto e = sym_eig(M);
  return e.eigenvalues(e.eigenvalues.size() - 1);
}

// Symmetric power M^p for SPD M via eigendecomposition (p = 1/2, -1/2, ...).
inline Matrix spd_power(const Matrix& M, double p) {
  auto e = sym_eig(M);
  Vector d = e.eigenvalues;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (d(i) <= 0.0) throw NotSymmetric("matrix is not positive definite");
    d(i) = std::pow(d(i), p);
  }
  return e.eigenvectors * d.asDiagonal() * e.eigenvectors.transpose();
}

inline Matrix spd_sqrt(const Matrix& M) { return spd_power(M, 0.5); }

// Largest singular value of M computed through the symmetric eigenproblem of
// M^T M.
inline double sigma_max(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  double lm = lambda_max(M.transpose() * M);
  return std::sqrt(std::max(0.0, lm));
}

// Spectral radius of a general square matrix.
inline double spectral_radius(const Matrix& M) {
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ioss
