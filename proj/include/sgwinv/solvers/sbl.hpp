#pragma once

// Sparse Bayesian learning on the type-II likelihood
//   F(gamma) = Tr(C_Z Sigma_Z^{-1}) + ln det Sigma_Z,  Sigma_Z = I + G diag(gamma) G^T,
// with EM and convex-bounding (Champagne) majorization-minimization updates.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "../forward.hpp"
#include "../wavelets.hpp"
#include "common.hpp"
#include "mne.hpp"

namespace sgwinv {

enum class SblAlgorithm { em, champagne };

inline std::string to_string(SblAlgorithm a) { return a == SblAlgorithm::em ? "em" : "champagne"; }

inline SblAlgorithm parse_sbl_algorithm(const std::string& s) {
  if (s == "em") return SblAlgorithm::em;
  if (s == "champagne") return SblAlgorithm::champagne;
  throw ConfigError("unknown SBL algorithm '" + s + "' (expected em or champagne)");
}

inline Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& z) {
  return z * z.transpose() / static_cast<double>(z.cols());
}

/// Sigma_Z(gamma) and its Cholesky factor, restricted to the active set gamma > 0.
class SblEvaluation {
public:
  SblEvaluation(const Eigen::MatrixXd& g, const Eigen::VectorXd& gamma, const Eigen::MatrixXd& sample_cov) {
    if (gamma.size() != g.cols()) throw ConfigError("SBL: gamma length does not match leadfield columns");
    if ((gamma.array() < 0.0).any()) throw ConfigError("SBL: gamma must be nonnegative");
    for (Eigen::Index n = 0; n < gamma.size(); ++n) {
      if (gamma(n) > 0.0) active_.push_back(n);
    }
    const Eigen::Index j = g.rows();
    active_gain_.resize(j, static_cast<Eigen::Index>(active_.size()));
    active_gamma_.resize(static_cast<Eigen::Index>(active_.size()));
    for (std::size_t a = 0; a < active_.size(); ++a) {
      active_gain_.col(static_cast<Eigen::Index>(a)) = g.col(active_[a]);
      active_gamma_(static_cast<Eigen::Index>(a)) = gamma(active_[a]);
    }
    covariance_ = Eigen::MatrixXd::Identity(j, j);
    if (!active_.empty()) {
      covariance_.noalias() += active_gain_ * active_gamma_.asDiagonal() * active_gain_.transpose();
    }
    covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
    llt_.compute(covariance_);
    if (llt_.info() != Eigen::Success) throw NumericalError("SBL: Sigma_Z is not positive definite");
    const Eigen::MatrixXd& lower = llt_.matrixLLT();
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < j; ++i) logdet += 2.0 * std::log(lower(i, i));
    objective_ = llt_.solve(sample_cov).trace() + logdet;
  }

  double objective() const { return objective_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  const Eigen::LLT<Eigen::MatrixXd>& factor() const { return llt_; }
  const std::vector<Eigen::Index>& active() const { return active_; }
  const Eigen::MatrixXd& active_gain() const { return active_gain_; }
  const Eigen::VectorXd& active_gamma() const { return active_gamma_; }

private:
  std::vector<Eigen::Index> active_;
  Eigen::MatrixXd active_gain_;
  Eigen::VectorXd active_gamma_;
  Eigen::MatrixXd covariance_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double objective_ = 0.0;
};

inline double sbl_objective(const Eigen::MatrixXd& g, const Eigen::VectorXd& gamma, const Eigen::MatrixXd& sample_cov) {
  return SblEvaluation(g, gamma, sample_cov).objective();
}

/// One MM step from the state described by `eval`.
/// With z_n = g_n^T Sigma^{-1} g_n and q_n = g_n^T Sigma^{-1} C_Z Sigma^{-1} g_n,
/// (1/L) ||Xbar_n||^2 = gamma_n^2 q_n and
///   EM:        gamma_n <- gamma_n^2 q_n + gamma_n - gamma_n^2 z_n
///   Champagne: gamma_n <- gamma_n sqrt(q_n / z_n)
inline Eigen::VectorXd sbl_update(const SblEvaluation& eval, Eigen::Index num_coefficients,
                                  const Eigen::MatrixXd& sample_cov, SblAlgorithm algorithm) {
  Eigen::VectorXd next = Eigen::VectorXd::Zero(num_coefficients);
  if (eval.active().empty()) return next;
  const Eigen::MatrixXd p = eval.factor().solve(eval.active_gain());  // Sigma^{-1} G_a
  const Eigen::VectorXd z = (eval.active_gain().array() * p.array()).colwise().sum().transpose();
  const Eigen::VectorXd q = (p.array() * (sample_cov * p).array()).colwise().sum().transpose();
  for (std::size_t a = 0; a < eval.active().size(); ++a) {
    const Eigen::Index i = static_cast<Eigen::Index>(a);
    const double gam = eval.active_gamma()(i);
    const double qn = std::max(q(i), 0.0);
    const double zn = z(i);
    double updated = 0.0;
    if (algorithm == SblAlgorithm::em) {
      updated = gam * gam * qn + gam - gam * gam * zn;
    } else {
      updated = zn > 0.0 ? gam * std::sqrt(qn / zn) : 0.0;
    }
    next(eval.active()[a]) = std::max(updated, 0.0);
  }
  return next;
}

inline Eigen::VectorXd sbl_update_em(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, const Eigen::VectorXd& gamma) {
  const Eigen::MatrixXd c = sample_covariance(z);
  return sbl_update(SblEvaluation(g, gamma, c), g.cols(), c, SblAlgorithm::em);
}

inline Eigen::VectorXd sbl_update_champagne(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z,
                                            const Eigen::VectorXd& gamma) {
  const Eigen::MatrixXd c = sample_covariance(z);
  return sbl_update(SblEvaluation(g, gamma, c), g.cols(), c, SblAlgorithm::champagne);
}

/// Weighted-MNE posterior mean Gamma G^T Sigma_Z^{-1} Z.
inline Eigen::MatrixXd sbl_posterior_mean(const SblEvaluation& eval, Eigen::Index num_coefficients,
                                          const Eigen::MatrixXd& z) {
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(num_coefficients, z.cols());
  if (eval.active().empty()) return mean;
  const Eigen::MatrixXd weighted =
      eval.active_gamma().asDiagonal() * (eval.active_gain().transpose() * eval.factor().solve(z));
  for (std::size_t a = 0; a < eval.active().size(); ++a) {
    mean.row(eval.active()[a]) = weighted.row(static_cast<Eigen::Index>(a));
  }
  return mean;
}

struct SblResult {
  Eigen::VectorXd gamma;
  Eigen::MatrixXd posterior_mean;
  Eigen::MatrixXd posterior_covariance;  // Sigma_Z at the final gamma
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;

  Eigen::Index support_size() const { return (gamma.array() > 0.0).count(); }
};

/// Iterates the chosen update from `gamma0`. After each update, entries below
/// prune_eps * max(gamma) are zeroed; the pruned state is kept only if it does
/// not raise the objective, so the trace is non-increasing. Stops when the
/// sup-norm change of gamma relative to max(gamma) drops below tol_rel.
inline SblResult run_sbl(const Eigen::MatrixXd& g, const Eigen::MatrixXd& z, Eigen::VectorXd gamma0,
                         const SolverConfig& cfg, SblAlgorithm algorithm) {
  cfg.validate();
  const Eigen::MatrixXd c = sample_covariance(z);
  SblResult res;
  Eigen::VectorXd gamma = std::move(gamma0);
  SblEvaluation eval(g, gamma, c);
  res.objective_trace.push_back(eval.objective());

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    Eigen::VectorXd next = sbl_update(eval, g.cols(), c, algorithm);
    SblEvaluation next_eval(g, next, c);

    const double peak = next.size() > 0 ? next.maxCoeff() : 0.0;
    if (peak > 0.0) {
      Eigen::VectorXd pruned = next;
      bool changed = false;
      for (Eigen::Index n = 0; n < pruned.size(); ++n) {
        if (pruned(n) > 0.0 && pruned(n) < cfg.prune_eps * peak) {
          pruned(n) = 0.0;
          changed = true;
        }
      }
      if (changed) {
        SblEvaluation pruned_eval(g, pruned, c);
        if (pruned_eval.objective() <= next_eval.objective()) {
          next = std::move(pruned);
          next_eval = std::move(pruned_eval);
        }
      }
    }

    const double scale = std::max(gamma.size() > 0 ? gamma.maxCoeff() : 0.0, peak);
    const double change = gamma.size() > 0 ? (next - gamma).cwiseAbs().maxCoeff() : 0.0;
    gamma = std::move(next);
    eval = std::move(next_eval);
    res.objective_trace.push_back(eval.objective());
    if (scale == 0.0 || change < cfg.tol_rel * scale) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.iterations = it;
  res.posterior_mean = sbl_posterior_mean(eval, g.cols(), z);
  res.posterior_covariance = eval.covariance();
  res.gamma = std::move(gamma);
  return res;
}

/// Row-wise mean square (1/L) sum_l X[n,l]^2: variance initialisation from a ridge estimate.
inline Eigen::VectorXd row_mean_square(const Eigen::MatrixXd& x) {
  return x.rowwise().squaredNorm() / static_cast<double>(x.cols());
}

/// SBL in the source domain, initialised from MNE with weight `cfg.lambda`.
inline SourceEstimate solve_sbl(const WhitenedProblem& problem, const SolverConfig& cfg, SblAlgorithm algorithm) {
  const Eigen::MatrixXd init = ridge_solution(problem.gain, problem.data, cfg.lambda);
  SblResult r = run_sbl(problem.gain, problem.data, row_mean_square(init), cfg, algorithm);
  SourceEstimate est;
  est.solver = "sbl-" + to_string(algorithm);
  est.sources = std::move(r.posterior_mean);
  est.iterations = r.iterations;
  est.converged = r.converged;
  est.objective = r.objective_trace.back();
  est.objective_trace = std::move(r.objective_trace);
  return est;
}

/// SBL on wavelet coefficients (G_W), initialised from sgw-MNE with weight
/// `cfg.lambda`; sources are W^T Xbar.
inline SourceEstimate solve_sgw_sbl(const WhitenedProblem& problem, const WaveletFrame& frame, const SolverConfig& cfg,
                                    SblAlgorithm algorithm) {
  if (problem.wavelet_gain.size() == 0) throw ConfigError("sgw-sbl needs the wavelet leadfield G_W");
  const Eigen::MatrixXd init = ridge_solution(problem.wavelet_gain, problem.data, cfg.lambda);
  SblResult r = run_sbl(problem.wavelet_gain, problem.data, row_mean_square(init), cfg, algorithm);
  SourceEstimate est;
  est.solver = "sgw-sbl-" + to_string(algorithm);
  est.sources = synthesize(frame, r.posterior_mean);
  est.coefficients = std::move(r.posterior_mean);
  est.iterations = r.iterations;
  est.converged = r.converged;
  est.objective = r.objective_trace.back();
  est.objective_trace = std::move(r.objective_trace);
  return est;
}

}  // namespace sgwinv
