#pragma once

// Synthetic MEG forward model: current-dipole leadfield, baseline noise
// covariance, whitening with rank reduction, wavelet-domain leadfield.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "mesh.hpp"
#include "wavelets.hpp"

namespace sgwinv {

/// Point magnetometers: position and unit measurement axis per sensor (rows).
struct SensorArray {
  Eigen::MatrixX3d positions;
  Eigen::MatrixX3d axes;

  int size() const { return static_cast<int>(positions.rows()); }
};

/// Near-uniform (Fibonacci) sensors on a sphere, each measuring the field
/// component along its outward radial axis.
inline SensorArray make_sensor_sphere(int count, const Point3& center, double radius) {
  if (count < 1) throw ConfigError("sensor count must be positive");
  if (!(radius > 0.0)) throw ConfigError("sensor sphere radius must be positive");
  SensorArray s;
  s.positions.resize(count, 3);
  s.axes.resize(count, 3);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    const Point3 axis(r * std::cos(phi), r * std::sin(phi), z);
    s.axes.row(i) = axis.transpose();
    s.positions.row(i) = (center + radius * axis).transpose();
  }
  return s;
}

inline constexpr double kMu0Over4Pi = 1e-7;

/// Free-space magnetic field of a current dipole (Biot-Savart):
/// B(r) = mu0/4pi * q x (r - r0) / |r - r0|^3.
inline Point3 dipole_field(const Point3& source, const Point3& moment, const Point3& point) {
  const Point3 d = point - source;
  const double dist = d.norm();
  return kMu0Over4Pi * moment.cross(d) / (dist * dist * dist);
}

struct Leadfield {
  Eigen::MatrixXd gain;  // J0 x N
  SensorArray sensors;
  std::vector<Point3> orientations;

  int num_sensors() const { return static_cast<int>(gain.rows()); }
  int num_sources() const { return static_cast<int>(gain.cols()); }
};

/// Column n is the axial field at every sensor of a unit dipole at vertex n
/// oriented along the outward surface normal.
inline Leadfield synth_leadfield(const TriangleMesh& mesh, const SensorArray& sensors) {
  const Point3 c = mesh.centroid();
  const double r = mesh.bounding_radius();
  for (int j = 0; j < sensors.size(); ++j) {
    const Point3 p = sensors.positions.row(j).transpose();
    if ((p - c).norm() <= r) {
      throw ConfigError("sensor " + std::to_string(j) + " lies inside the source bounding sphere");
    }
  }
  Leadfield lf;
  lf.sensors = sensors;
  lf.orientations = vertex_normals(mesh);
  lf.gain.resize(sensors.size(), mesh.num_vertices());
  for (int n = 0; n < mesh.num_vertices(); ++n) {
    for (int j = 0; j < sensors.size(); ++j) {
      const Point3 b = dipole_field(mesh.vertex(n), lf.orientations[static_cast<std::size_t>(n)],
                                    sensors.positions.row(j).transpose());
      lf.gain(j, n) = b.dot(sensors.axes.row(j).transpose());
    }
  }
  const double scale = lf.gain.cwiseAbs().maxCoeff();
  for (int n = 0; n < mesh.num_vertices(); ++n) {
    if (lf.gain.col(n).cwiseAbs().maxCoeff() <= 1e-14 * scale) {
      throw NumericalError("source " + std::to_string(n) + " is invisible to every sensor");
    }
  }
  return lf;
}

// ---------------------------------------------------------------------------
// Noise

struct NoiseModel {
  Eigen::MatrixXd covariance;  // Sigma_B, J0 x J0

  int size() const { return static_cast<int>(covariance.rows()); }
  double mean_variance() const { return covariance.diagonal().mean(); }
};

/// Random SPD covariance U diag(v) U^T with U Haar-orthogonal and eigenvalues
/// log-spaced from `variance` down to `variance / condition`.
inline NoiseModel synth_baseline_covariance(int num_sensors, double condition, std::uint64_t seed,
                                            double variance = 1.0) {
  if (num_sensors < 1) throw ConfigError("covariance dimension must be positive");
  if (!(condition >= 1.0)) throw ConfigError("condition number must be >= 1");
  if (!(variance > 0.0)) throw ConfigError("noise variance must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd gauss(num_sensors, num_sensors);
  for (Eigen::Index j = 0; j < gauss.cols(); ++j) {
    for (Eigen::Index i = 0; i < gauss.rows(); ++i) gauss(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix so that U is Haar distributed.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < num_sensors; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Eigen::VectorXd eig(num_sensors);
  for (int j = 0; j < num_sensors; ++j) {
    const double t = num_sensors == 1 ? 0.0 : static_cast<double>(j) / (num_sensors - 1);
    eig(j) = variance * std::pow(condition, -t);
  }
  NoiseModel model;
  model.covariance = q * eig.asDiagonal() * q.transpose();
  model.covariance = 0.5 * (model.covariance + model.covariance.transpose()).eval();
  return model;
}

// ---------------------------------------------------------------------------
// Whitening

struct Whitener {
  Eigen::MatrixXd matrix;  // Upsilon, J x J0
  int retained = 0;
  double threshold = 0.0;
};

inline constexpr double kDefaultWhiteningTau = 1e-8;

/// Upsilon = Lambda_r^{-1/2} U_r^T over eigenpairs with lambda >= tau * lambda_max.
/// Rows are ordered by decreasing noise eigenvalue.
inline Whitener build_whitener(const NoiseModel& noise, double tau = kDefaultWhiteningTau) {
  const Eigen::MatrixXd& cov = noise.covariance;
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, cov.cwiseAbs().maxCoeff())) {
    throw ConfigError("baseline covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lmax = lam.maxCoeff();
  if (!(lmax > 0.0)) throw NumericalError("baseline covariance has no positive eigenvalue");
  if (lam.minCoeff() < -1e-12 * lmax) throw ConfigError("baseline covariance is not positive semi-definite");

  Whitener w;
  w.threshold = tau * lmax;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = lam.size() - 1; j >= 0; --j) {
    if (lam(j) >= w.threshold) keep.push_back(j);
  }
  if (keep.empty()) throw NumericalError("all covariance eigenvalues fall below the whitening threshold");
  w.retained = static_cast<int>(keep.size());
  w.matrix.resize(w.retained, cov.rows());
  for (int r = 0; r < w.retained; ++r) {
    const Eigen::Index j = keep[static_cast<std::size_t>(r)];
    w.matrix.row(r) = es.eigenvectors().col(j).transpose() / std::sqrt(lam(j));
  }
  return w;
}

/// Whitened observation model Z = G S + B with unit-variance noise, plus the
/// wavelet-domain leadfield G_W = G W^T.
struct WhitenedProblem {
  Eigen::MatrixXd gain;          // G, J x N
  Eigen::MatrixXd data;          // Z, J x L
  Eigen::MatrixXd wavelet_gain;  // G_W, J x N_W (empty without a frame)

  int num_channels() const { return static_cast<int>(gain.rows()); }
  int num_sources() const { return static_cast<int>(gain.cols()); }
  int num_samples() const { return static_cast<int>(data.cols()); }
};

inline WhitenedProblem whiten(const Whitener& whitener, const Eigen::MatrixXd& data,
                              const Eigen::MatrixXd& gain, const WaveletFrame* frame = nullptr) {
  if (data.rows() != whitener.matrix.cols() || gain.rows() != whitener.matrix.cols()) {
    throw ConfigError("whiten: sensor dimension mismatch");
  }
  WhitenedProblem p;
  p.gain = whitener.matrix * gain;
  p.data = whitener.matrix * data;
  if (frame != nullptr) {
    if (frame->num_vertices != gain.cols()) throw ConfigError("whiten: frame/leadfield source mismatch");
    p.wavelet_gain = p.gain * frame->matrix.transpose();
  }
  return p;
}

inline WhitenedProblem whiten(const Whitener& whitener, const Eigen::MatrixXd& data,
                              const Leadfield& leadfield, const WaveletFrame& frame) {
  return whiten(whitener, data, leadfield.gain, &frame);
}

}  // namespace sgwinv
