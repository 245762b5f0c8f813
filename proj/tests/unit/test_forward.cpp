#include <catch_amalgamated.hpp>

#include <cmath>

#include <sgwinv/forward.hpp>
#include <sgwinv/graph.hpp>
#include <sgwinv/mesh.hpp>
#include <sgwinv/simulation.hpp>
#include <sgwinv/wavelets.hpp>

#include "helpers.hpp"

using namespace sgwinv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Point3 cross_field(const Point3& src, const Point3& q, const Point3& at) {
  const Point3 d = at - src;
  return 1e-7 * q.cross(d) / std::pow(d.norm(), 3);
}

}  // namespace

TEST_CASE("dipole field symmetry and scaling") {
  const Point3 origin = Point3::Zero(), z = Point3::UnitZ();
  // Sensor on the dipole axis measuring the radial component sees nothing.
  CHECK(dipole_field(origin, z, Point3(0, 0, 0.1)).dot(z) == 0.0);

  const Point3 q(0.3, -0.2, 0.9), src(0.01, 0.02, -0.01), dir(0.2, 0.7, -0.3);
  const Point3 near = src + 0.05 * dir, far = src + 0.10 * dir;
  const Point3 axis(0.6, 0.0, 0.8);
  const double b1 = dipole_field(src, q, near).dot(axis), b2 = dipole_field(src, q, far).dot(axis);
  CHECK_THAT(b2, WithinRel(b1 / 4.0, 1e-12));
  CHECK((dipole_field(src, q, near) - cross_field(src, q, near)).norm() <= 1e-15 * cross_field(src, q, near).norm());

  // Mirror in the x = 0 plane: magnitudes agree.
  const Point3 s(0.0, 0.01, 0.02), moment(0.0, 0.3, 1.0);
  const Point3 p1(0.05, 0.07, 0.1), p2(-0.05, 0.07, 0.1);
  CHECK_THAT(dipole_field(s, moment, p1).norm(), WithinRel(dipole_field(s, moment, p2).norm(), 1e-12));
}

TEST_CASE("synthetic leadfield") {
  const TriangleMesh mesh = generate_icosphere(2, 0.07);
  const SensorArray sensors = make_sensor_sphere(30, Point3(0.012, -0.018, -0.027), 0.12);
  REQUIRE(sensors.size() == 30);
  for (int j = 0; j < 30; ++j) CHECK_THAT(sensors.axes.row(j).norm(), WithinAbs(1.0, 1e-14));
  const Leadfield lf = synth_leadfield(mesh, sensors);
  REQUIRE(lf.gain.rows() == 30);
  REQUIRE(lf.gain.cols() == mesh.num_vertices());
  CHECK(lf.gain.allFinite());
  const double peak = lf.gain.cwiseAbs().maxCoeff();
  CHECK(lf.gain.colwise().norm().minCoeff() > 1e-14 * peak);

  // Column n recomputed directly from Biot-Savart.
  const auto normals = vertex_normals(mesh);
  for (int n : {0, 40, 161}) {
    for (int j : {0, 13, 29}) {
      const Point3 pos = sensors.positions.row(j).transpose(), ax = sensors.axes.row(j).transpose();
      const double expected = cross_field(mesh.vertex(n), normals[static_cast<std::size_t>(n)], pos).dot(ax);
      CHECK_THAT(lf.gain(j, n), WithinAbs(expected, 1e-12 * peak));
    }
  }

  // Permuting sensors permutes rows.
  SensorArray swapped = sensors;
  swapped.positions.row(0).swap(swapped.positions.row(5));
  swapped.axes.row(0).swap(swapped.axes.row(5));
  const Leadfield lf2 = synth_leadfield(mesh, swapped);
  CHECK(lf2.gain.row(0) == lf.gain.row(5));
  CHECK(lf2.gain.row(5) == lf.gain.row(0));
  CHECK(lf2.gain.row(7) == lf.gain.row(7));

  // Sensors inside the source hull are rejected.
  CHECK_THROWS_AS(synth_leadfield(mesh, make_sensor_sphere(10, Point3::Zero(), 0.05)), ConfigError);
}

TEST_CASE("baseline covariance synthesis") {
  const NoiseModel unit = synth_baseline_covariance(8, 1.0, 3, 2.5);
  CHECK((unit.covariance - 2.5 * Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-12);

  const NoiseModel m = synth_baseline_covariance(12, 10.0, 99);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.covariance);
  CHECK_THAT(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff(), WithinRel(10.0, 1e-8));
  CHECK((m.covariance - m.covariance.transpose()).cwiseAbs().maxCoeff() == 0.0);

  const NoiseModel again = synth_baseline_covariance(12, 10.0, 99);
  CHECK(again.covariance == m.covariance);
  CHECK(synth_baseline_covariance(12, 10.0, 100).covariance != m.covariance);
  CHECK_THROWS_AS(synth_baseline_covariance(12, 0.5, 1), ConfigError);
}

TEST_CASE("whitener") {
  const Whitener eye = build_whitener(NoiseModel{Eigen::MatrixXd::Identity(5, 5)});
  CHECK(eye.retained == 5);
  CHECK((eye.matrix.cwiseAbs().colwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((eye.matrix * eye.matrix.transpose() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
  d.diagonal() << 4.0, 1.0;
  const Whitener w2 = build_whitener(NoiseModel{d});
  CHECK((w2.matrix * d * w2.matrix.transpose() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THAT(std::abs(w2.matrix(0, 0)) + std::abs(w2.matrix(0, 1)), WithinAbs(0.5, 1e-14));

  std::mt19937_64 rng(2);
  const Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(testing_helpers::random_matrix(6, 6, rng)).householderQ();
  Eigen::VectorXd ev(6);
  ev << 3, 2, 1, 0.5, 0.25, 0.0;
  const Eigen::MatrixXd deficient = u * ev.asDiagonal() * u.transpose();
  NoiseModel nd{0.5 * (deficient + deficient.transpose())};
  const Whitener wd = build_whitener(nd, 1e-6);
  CHECK(wd.retained == 5);
  CHECK((wd.matrix * nd.covariance * wd.matrix.transpose() - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() <
        1e-8);

  const NoiseModel m = synth_baseline_covariance(20, 1e4, 5);
  const Whitener wm = build_whitener(m);
  CHECK((wm.matrix * m.covariance * wm.matrix.transpose() - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() <
        1e-8);

  CHECK_THROWS_AS(build_whitener(NoiseModel{Eigen::MatrixXd::Zero(3, 3)}), Error);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(build_whitener(NoiseModel{asym}), ConfigError);
}

TEST_CASE("whitening the data and wavelet leadfield") {
  const TriangleMesh mesh = generate_icosphere(2, 0.07);
  const LaplacianSpectrum spec = eigendecompose(build_graph(mesh));
  const WaveletFrame frame = build_frame(spec, design_scales(spec.lambda_max(), 16.0, 3));
  const Leadfield lf = synth_leadfield(mesh, make_sensor_sphere(20, Point3(0.012, -0.018, -0.027), 0.12));
  const NoiseModel noise = synth_baseline_covariance(20, 50.0, 8);
  const Whitener w = build_whitener(noise);

  const WhitenedProblem zero = whiten(w, Eigen::MatrixXd::Zero(20, 4), lf, frame);
  CHECK(zero.data.norm() == 0.0);
  CHECK((zero.gain - w.matrix * lf.gain).norm() == 0.0);
  CHECK((zero.wavelet_gain - zero.gain * frame.matrix.transpose()).cwiseAbs().maxCoeff() <=
        1e-12 * zero.wavelet_gain.cwiseAbs().maxCoeff());
  CHECK(zero.wavelet_gain.allFinite());
  CHECK(zero.wavelet_gain.norm() <= zero.gain.norm() * std::sqrt(frame.bounds.upper) * (1 + 1e-12));

  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = testing_helpers::random_matrix(frame.num_atoms(), 3, rng);
  CHECK(testing_helpers::relative_error(zero.wavelet_gain * x, zero.gain * (frame.matrix.transpose() * x)) < 1e-12);

  // Monte Carlo: whitened noise has identity covariance.
  const int samples = 10000;
  const Eigen::MatrixXd b = sample_gaussian(covariance_sqrt(noise.covariance), samples, rng);
  const WhitenedProblem wp = whiten(w, b, lf.gain);
  const Eigen::MatrixXd cov = wp.data * wp.data.transpose() / samples;
  CHECK((cov - Eigen::MatrixXd::Identity(w.retained, w.retained)).cwiseAbs().maxCoeff() < 0.1);
  CHECK(wp.wavelet_gain.size() == 0);

  CHECK_THROWS_AS(whiten(w, Eigen::MatrixXd::Zero(19, 4), lf.gain), ConfigError);
}
