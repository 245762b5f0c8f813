#pragma once

// Sparse total variation: min_S 1/2 ||Z - G S||_F^2 + lambda ||grad S||_1 + mu ||S||_1,
// solved by Condat-Vu primal-dual splitting with K = [grad; I].

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "../forward.hpp"
#include "../graph.hpp"
#include "common.hpp"

namespace sgwinv {

inline double svbsccd_objective(const Eigen::MatrixXd& g, const SparseMatrix& gradient, const Eigen::MatrixXd& z,
                                const Eigen::MatrixXd& s, double lambda, double mu) {
  const Eigen::MatrixXd ds = gradient * s;
  return data_misfit(g, s, z) + lambda * ds.cwiseAbs().sum() + mu * s.cwiseAbs().sum();
}

struct PrimalDualResult {
  Eigen::MatrixXd s;
  int iterations = 0;
  double objective = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Condat-Vu iterations
///   S+  = S - tau (G^T (G S - Z) + grad^T Y1 + Y2)
///   Y1+ = clip(Y1 + sigma grad (2 S+ - S), lambda)
///   Y2+ = clip(Y2 + sigma (2 S+ - S), mu)
/// with tau = 1/beta, sigma = 0.99 beta / (2 ||K||^2), beta = ||G||_2^2, which
/// satisfies tau (beta/2 + sigma ||K||^2) < 1.
///
/// Stopping: for mu > 0 a certified duality gap, built from the dual point
/// U = theta (Z - G S) with theta scaled so that G^T U - grad^T (theta Y1) fits
/// the mu-box, must fall below tol_rel (1 + |P|). For mu = 0 the relative
/// fixed-point change of (S, Y) is used instead.
inline PrimalDualResult solve_sparse_tv(const Eigen::MatrixXd& g, const SparseMatrix& gradient,
                                        const Eigen::MatrixXd& z, double lambda, double mu,
                                        const SolverConfig& cfg) {
  cfg.validate();
  if (!(lambda >= 0.0 && mu >= 0.0) || (lambda == 0.0 && mu == 0.0)) {
    throw ConfigError("sVB-SCCD needs lambda, mu >= 0, not both zero");
  }
  if (gradient.cols() != g.cols()) throw ConfigError("gradient operator / leadfield dimension mismatch");

  const Eigen::Index n = g.cols(), l = z.cols(), e = gradient.rows();
  const double beta = 1.01 * spectral_norm_squared(g);
  const SparseMatrix gtg = SparseMatrix(gradient.transpose()) * gradient;
  const double grad_norm2 =
      e == 0 ? 0.0
             : power_iteration([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return gtg * v; }, n, 1e-6);
  const double k_norm2 = 1.01 * grad_norm2 + 1.0;
  const double tau = beta > 0.0 ? 1.0 / beta : 1.0;
  const double sigma = beta > 0.0 ? 0.99 * beta / (2.0 * k_norm2) : 0.99 / k_norm2;
  if (!(tau * (beta / 2.0 + sigma * k_norm2) < 1.0) || !(tau * sigma * k_norm2 < 1.0)) {
    throw NumericalError("primal-dual step sizes violate the convergence condition");
  }

  PrimalDualResult res;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, l);
  Eigen::MatrixXd y1 = Eigen::MatrixXd::Zero(e, l);
  Eigen::MatrixXd y2 = Eigen::MatrixXd::Zero(n, l);
  const double z_norm2 = z.squaredNorm();

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const Eigen::MatrixXd residual = z - g * s;  // R = Z - G S
    const Eigen::MatrixXd corr = g.transpose() * residual;  // -gradient of the data term
    const Eigen::MatrixXd dt_y1 = gradient.transpose() * y1;

    const double primal = 0.5 * residual.squaredNorm() + lambda * (gradient * s).cwiseAbs().sum() +
                          mu * s.cwiseAbs().sum();
    res.objective_trace.push_back(primal);

    if (mu > 0.0) {
      const double r2 = residual.squaredNorm();
      const double zr = (z.array() * residual.array()).sum();
      double theta = 0.0;
      if (r2 > 0.0) {
        const double excess = (corr - dt_y1).cwiseAbs().maxCoeff();
        const double theta_max = excess > 0.0 ? std::min(1.0, mu / excess) : 1.0;
        theta = std::clamp(zr / r2, 0.0, theta_max);
      }
      const double dual = theta * zr - 0.5 * theta * theta * r2;
      res.gap = primal - dual;
      if (res.gap <= cfg.tol_rel * (1.0 + std::abs(primal))) {
        res.converged = true;
        break;
      }
    }

    Eigen::MatrixXd s_new = s + tau * (corr - dt_y1 - y2);
    const Eigen::MatrixXd s_bar = 2.0 * s_new - s;
    Eigen::MatrixXd y1_new = (y1 + sigma * (gradient * s_bar)).cwiseMax(-lambda).cwiseMin(lambda);
    Eigen::MatrixXd y2_new = (y2 + sigma * s_bar).cwiseMax(-mu).cwiseMin(mu);

    if (mu == 0.0) {
      const double ds = (s_new - s).norm();
      const double dy = std::sqrt((y1_new - y1).squaredNorm() + (y2_new - y2).squaredNorm());
      const double scale = std::max({1.0, s.norm(), std::sqrt(y1.squaredNorm() + y2.squaredNorm()),
                                     std::sqrt(z_norm2)});
      if (it > 0 && ds <= cfg.tol_rel * scale && dy <= cfg.tol_rel * scale) {
        res.converged = true;
        s = std::move(s_new);
        ++it;
        break;
      }
    }
    s = std::move(s_new);
    y1 = std::move(y1_new);
    y2 = std::move(y2_new);
  }
  res.iterations = it;
  res.objective = svbsccd_objective(g, gradient, z, s, lambda, mu);
  res.s = std::move(s);
  return res;
}

inline SourceEstimate solve_svbsccd(const WhitenedProblem& problem, const CorticalGraph& graph,
                                    const SolverConfig& cfg) {
  PrimalDualResult r = solve_sparse_tv(problem.gain, graph.gradient, problem.data, cfg.lambda, cfg.mu, cfg);
  SourceEstimate est;
  est.solver = "svb-sccd";
  est.sources = std::move(r.s);
  est.iterations = r.iterations;
  est.objective = r.objective;
  est.converged = r.converged;
  est.objective_trace = std::move(r.objective_trace);
  return est;
}

}  // namespace sgwinv
