#pragma once

#include <Eigen/Dense>

#include "../forward.hpp"
#include "../wavelets.hpp"
#include "common.hpp"

namespace sgwinv {

// Ridge problems carry 1/2 on the data term, so the normal equations use 2 lambda.

/// argmin_X 1/2 ||Z - G X||_F^2 + lambda ||X||_F^2 = G^T (G G^T + 2 lambda I)^{-1} Z.
inline Eigen::MatrixXd ridge_solution(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("ridge weight must be >= 0");
  Eigen::MatrixXd system = g * g.transpose();
  system.diagonal().array() += 2.0 * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw NumericalError("ridge system G G^T + 2 lambda I is singular");
  return g.transpose() * llt.solve(z);
}

inline double ridge_objective(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
                              double lambda) {
  return data_misfit(g, x, z) + lambda * x.squaredNorm();
}

/// Gradient G^T (G X - Z) + 2 lambda X of the ridge objective.
inline Eigen::MatrixXd ridge_gradient(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
                                      double lambda) {
  return g.transpose() * (g * x - z) + 2.0 * lambda * x;
}

inline SourceEstimate solve_mne(const WhitenedProblem& problem, double lambda) {
  SourceEstimate est;
  est.solver = "mne";
  est.sources = ridge_solution(problem.gain, problem.data, lambda);
  est.objective = ridge_objective(problem.gain, problem.data, est.sources, lambda);
  est.objective_trace = {est.objective};
  return est;
}

inline SourceEstimate solve_sgw_mne(const WhitenedProblem& problem, const WaveletFrame& frame, double lambda) {
  if (problem.wavelet_gain.size() == 0) throw ConfigError("sgw-mne needs the wavelet leadfield G_W");
  SourceEstimate est;
  est.solver = "sgw-mne";
  Eigen::MatrixXd x = ridge_solution(problem.wavelet_gain, problem.data, lambda);
  est.sources = synthesize(frame, x);
  est.objective = ridge_objective(problem.wavelet_gain, problem.data, x, lambda);
  est.objective_trace = {est.objective};
  est.coefficients = std::move(x);
  return est;
}

}  // namespace sgwinv
