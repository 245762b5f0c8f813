#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "../error.hpp"

namespace sgwinv {

/// Hyper-parameters shared by the iterative solvers.
struct SolverConfig {
  double lambda = 0.0;
  double mu = 0.0;
  int max_iters = 500;
  double tol_rel = 1e-6;
  double tol_abs = 1e-4;
  double prune_eps = 1e-8;

  void validate() const {
    if (!(lambda >= 0.0) || !(mu >= 0.0)) throw ConfigError("regularization weights must be >= 0");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (!(tol_rel > 0.0) || !(tol_abs > 0.0) || !(prune_eps > 0.0)) {
      throw ConfigError("solver tolerances must be positive");
    }
  }
};

/// Result of any source estimator. When `coefficients` is set, sources = W^T coefficients.
struct SourceEstimate {
  Eigen::MatrixXd sources;                     // S, N x L
  std::optional<Eigen::MatrixXd> coefficients;  // X, N_W x L
  std::string solver;
  int iterations = 0;
  double objective = 0.0;
  bool converged = true;
  std::vector<double> objective_trace;
};

/// lambda = ||G||_F^2 / ((rho^2 - 1) Tr Sigma_B), from
/// rho^2 = 1 + ||G||_F^2 / (lambda Tr Sigma_B).
inline double lambda_from_snr(double rho, double gain_fro2, double noise_trace) {
  if (!(rho > 1.0)) throw ConfigError("SNR rho must exceed 1");
  if (!(noise_trace > 0.0)) throw ConfigError("noise covariance trace must be positive");
  if (std::isinf(rho)) return 0.0;
  return gain_fro2 / ((rho * rho - 1.0) * noise_trace);
}

/// SNR estimated from whitened data: rho^2 = Tr(C_Z) / J (unit noise per channel).
/// Clamped slightly above 1 so the heuristic stays defined.
inline double snr_from_whitened_data(const Eigen::MatrixXd& data) {
  const double power = data.squaredNorm() / static_cast<double>(data.size());
  return std::sqrt(std::max(power, 1.0 + 1e-6));
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration, stopping
/// at relative change `tol`. Deterministic start vector.
template <class Apply>
double power_iteration(Apply&& apply, Eigen::Index dim, double tol = 1e-6, int max_iters = 10000) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = 1.0 + 0.01 * static_cast<double>(i % 7);
  v.normalize();
  double estimate = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = apply(v);
    const double next = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    if (it > 0 && std::abs(next - estimate) <= tol * std::abs(next)) return next;
    estimate = next;
  }
  return estimate;
}

/// ||G||_2^2 via power iteration on the smaller Gram matrix.
inline double spectral_norm_squared(const Eigen::MatrixXd& g, double tol = 1e-6) {
  if (g.size() == 0) return 0.0;
  if (g.rows() <= g.cols()) {
    const Eigen::MatrixXd gram = g * g.transpose();
    return power_iteration([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return gram * v; }, gram.rows(), tol);
  }
  const Eigen::MatrixXd gram = g.transpose() * g;
  return power_iteration([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return gram * v; }, gram.rows(), tol);
}

inline double data_misfit(const Eigen::MatrixXd& g, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
  return 0.5 * (z - g * x).squaredNorm();
}

}  // namespace sgwinv
