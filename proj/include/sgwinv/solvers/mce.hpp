#pragma once

// l1-penalized least squares (minimum current estimate) by FISTA with
// function-value restart.

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "../forward.hpp"
#include "../wavelets.hpp"
#include "common.hpp"

namespace sgwinv {

inline Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double threshold) {
  return v.unaryExpr([threshold](double a) {
    const double m = std::abs(a) - threshold;
    return m > 0.0 ? std::copysign(m, a) : 0.0;
  });
}

inline double lasso_objective(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
                              double lambda) {
  return data_misfit(g, x, z) + lambda * x.cwiseAbs().sum();
}

/// Largest distance of -grad_kl to lambda * subdifferential of |x_kl|.
inline double lasso_kkt_residual_from_gradient(const Eigen::MatrixXd& grad, const Eigen::MatrixXd& x,
                                               double lambda) {
  double r = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double gr = grad(i, j);
      const double xi = x(i, j);
      const double d = xi != 0.0 ? std::abs(gr + std::copysign(lambda, xi)) : std::max(std::abs(gr) - lambda, 0.0);
      r = std::max(r, d);
    }
  }
  return r;
}

inline double lasso_kkt_residual(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
                                 double lambda) {
  return lasso_kkt_residual_from_gradient(g.transpose() * (g * x - z), x, lambda);
}

/// lambda = ratio * max |G^T Z|; ratio in (0, 1).
inline double lambda_from_max_correlation(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("lambda ratio must lie in (0, 1)");
  return ratio * (g.transpose() * z).cwiseAbs().maxCoeff();
}

struct LassoResult {
  Eigen::MatrixXd x;
  int iterations = 0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// FISTA on 1/2 ||Z - G X||_F^2 + lambda ||X||_1. Step 1/||G||_2^2. A step that
/// increases the objective is discarded and momentum restarted, so the
/// recorded objective sequence is non-increasing. Stops once the KKT residual
/// (checked every `check_every` iterations) is at most cfg.tol_abs.
inline LassoResult solve_lasso(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, double lambda,
                               const SolverConfig& cfg, const std::optional<Eigen::MatrixXd>& init = std::nullopt,
                               int check_every = 10) {
  cfg.validate();
  if (!(lambda > 0.0)) throw ConfigError("MCE needs lambda > 0");
  // Power iteration under-estimates; a small margin keeps the step admissible.
  const double lipschitz = 1.01 * spectral_norm_squared(g);
  LassoResult res;
  if (lipschitz == 0.0) {
    res.x = Eigen::MatrixXd::Zero(g.cols(), z.cols());
    res.objective = lasso_objective(g, z, res.x, lambda);
    res.converged = true;
    return res;
  }
  const double step = 1.0 / lipschitz;

  Eigen::MatrixXd x = init ? *init : Eigen::MatrixXd::Zero(g.cols(), z.cols());
  Eigen::MatrixXd gx = g * x;
  double f = 0.5 * (z - gx).squaredNorm() + lambda * x.cwiseAbs().sum();
  Eigen::MatrixXd y = x, gy = gx;
  double t = 1.0;
  res.objective_trace.push_back(f);

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const Eigen::MatrixXd grad = g.transpose() * (gy - z);
    Eigen::MatrixXd x_new = soft_threshold(y - step * grad, step * lambda);
    Eigen::MatrixXd gx_new = g * x_new;
    const double f_new = 0.5 * (z - gx_new).squaredNorm() + lambda * x_new.cwiseAbs().sum();

    if (f_new > f) {
      if (t == 1.0) break;  // plain proximal step failed to descend: rounding floor
      t = 1.0;
      y = x;
      gy = gx;
      continue;
    }
    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_new;
    y = x_new + momentum * (x_new - x);
    gy = gx_new + momentum * (gx_new - gx);
    x = std::move(x_new);
    gx = std::move(gx_new);
    f = f_new;
    t = t_new;
    res.objective_trace.push_back(f);

    if ((it + 1) % check_every == 0) {
      res.kkt_residual = lasso_kkt_residual_from_gradient(g.transpose() * (gx - z), x, lambda);
      if (res.kkt_residual <= cfg.tol_abs) {
        res.converged = true;
        ++it;
        break;
      }
    }
  }
  res.iterations = it;
  res.kkt_residual = lasso_kkt_residual_from_gradient(g.transpose() * (gx - z), x, lambda);
  res.converged = res.kkt_residual <= cfg.tol_abs;
  res.objective = f;
  res.x = std::move(x);
  return res;
}

inline SourceEstimate solve_mce(const WhitenedProblem& problem, const SolverConfig& cfg) {
  LassoResult r = solve_lasso(problem.gain, problem.data, cfg.lambda, cfg);
  SourceEstimate est;
  est.solver = "mce";
  est.sources = std::move(r.x);
  est.iterations = r.iterations;
  est.objective = r.objective;
  est.converged = r.converged;
  est.objective_trace = std::move(r.objective_trace);
  return est;
}

inline SourceEstimate solve_sgw_mce(const WhitenedProblem& problem, const WaveletFrame& frame,
                                    const SolverConfig& cfg) {
  if (problem.wavelet_gain.size() == 0) throw ConfigError("sgw-mce needs the wavelet leadfield G_W");
  LassoResult r = solve_lasso(problem.wavelet_gain, problem.data, cfg.lambda, cfg);
  SourceEstimate est;
  est.solver = "sgw-mce";
  est.sources = synthesize(frame, r.x);
  est.coefficients = std::move(r.x);
  est.iterations = r.iterations;
  est.objective = r.objective;
  est.converged = r.converged;
  est.objective_trace = std::move(r.objective_trace);
  return est;
}

}  // namespace sgwinv
