#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include <sgwinv/graph.hpp>
#include <sgwinv/mesh.hpp>
#include <sgwinv/wavelets.hpp>

#include "helpers.hpp"

using namespace sgwinv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const LaplacianSpectrum& spectrum162() {
  static const LaplacianSpectrum s = eigendecompose(build_graph(generate_icosphere(2, 0.1)));
  return s;
}

FilterBank constant_bank(double h, double g, int scales) {
  FilterBank bank;
  bank.responses.emplace_back([h](double) { return h; });
  for (int j = 0; j < scales; ++j) bank.responses.emplace_back([g](double) { return g; });
  return bank;
}

}  // namespace

TEST_CASE("band-pass kernel values") {
  CHECK(kernel_g(0.0) == 0.0);
  CHECK_THAT(kernel_g(1.0), WithinAbs(1.0, 1e-15));
  CHECK_THAT(kernel_g(4.0), WithinAbs(0.25, 1e-15));
  CHECK_THAT(kernel_g(2.0), WithinAbs(1.0, 1e-15));
  for (double x : {0.5, 1.0, 2.0}) {
    CHECK_THAT(kernel_g(x - 1e-9), WithinAbs(kernel_g(x + 1e-9), 1e-7));
  }
  double best_x = 0, best = 0;
  for (int i = 0; i <= 100000; ++i) {
    const double x = 10.0 * i / 100000;
    if (kernel_g(x) > best) best = kernel_g(x), best_x = x;
  }
  CHECK(best_x >= 1.0);
  CHECK(best_x <= 2.0);
  CHECK_THAT(best_x, WithinAbs(kKernelGPeakLocation, 1e-3));
  CHECK_THAT(best, WithinAbs(kKernelGPeakValue, 1e-8));
  CHECK(kernel_g(1e6) < 1e-11);
}

TEST_CASE("low-pass kernel profile") {
  const double lmin = 0.5;
  CHECK_THAT(kernel_h(0.0, lmin), WithinAbs(kKernelGPeakValue, 1e-15));
  CHECK_THAT(kernel_h(0.6 * lmin, lmin) / kernel_h(0.0, lmin), WithinRel(std::exp(-1.0), 1e-14));
  CHECK(kernel_h(10 * lmin, lmin) / kernel_h(0.0, lmin) < 1e-12);
  for (double x = 3.0 * lmin + 1e-9; x < 5 * lmin; x += 0.01) CHECK(kernel_h(x, lmin) < 1e-6 * kernel_h(0, lmin));
  double prev = kernel_h(0.0, lmin);
  for (int i = 1; i < 1000; ++i) {
    const double v = kernel_h(i * 0.005, lmin);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("quality factor under the half-power definition") {
  const double q = quality_factor(kernel_g);
  CHECK_THAT(q, WithinAbs(1.38, 0.15));
  // Gaussian bump centred at 4 with sigma 1: half-power half-width sqrt(ln 2) (for the amplitude
  // crossing at 1/sqrt 2, exp(-d^2/2) = 2^{-1/2} gives d = sqrt(ln 2)).
  const double gauss_q = quality_factor([](double x) { return std::exp(-0.5 * (x - 4) * (x - 4)); });
  CHECK_THAT(gauss_q, WithinRel(4.0 / (2.0 * std::sqrt(std::log(2.0))), 1e-8));
}

TEST_CASE("scale design") {
  const KernelSpec spec = design_scales(8.0, 16.0, 3);
  CHECK(spec.lambda_min == 8.0 / 16.0);
  REQUIRE(spec.scales.size() == 3);
  const double r1 = spec.scales[1] / spec.scales[0], r2 = spec.scales[2] / spec.scales[1];
  CHECK_THAT(r1, WithinRel(r2, 1e-12));
  CHECK_THAT(spec.scales[0] * spec.lambda_max, WithinRel(kKernelGPeakLocation, 1e-12));
  CHECK_THAT(spec.scales[2] * spec.lambda_min, WithinRel(kKernelGPeakLocation, 1e-12));
  CHECK_THAT(spec.quality_factor, WithinAbs(1.38, 0.15));

  const KernelSpec one = design_scales(8.0, 16.0, 1);
  REQUIRE(one.scales.size() == 1);
  const double peak = kKernelGPeakLocation / one.scales[0];
  CHECK(peak > one.lambda_min);
  CHECK(peak < one.lambda_max);

  CHECK_THROWS_AS(design_scales(8.0, 1.0, 3), ConfigError);
  CHECK_THROWS_AS(design_scales(8.0, 16.0, 0), ConfigError);
  CHECK_THROWS_AS(design_scales(0.0, 16.0, 3), ConfigError);
}

TEST_CASE("two-vertex frame by hand") {
  const LaplacianSpectrum s = eigendecompose(build_graph_from_edges(2, {{0, 1}}));
  REQUIRE_THAT(s.eigenvalues(1), WithinAbs(2.0, 1e-14));
  const KernelSpec spec = design_scales(2.0, 16.0, 1);
  const WaveletFrame f = build_frame(s, spec);
  REQUIRE(f.matrix.rows() == 4);
  // Modes: (1,1)/sqrt2 at 0, (1,-1)/sqrt2 at 2.
  const double h0 = kernel_h(0.0, spec.lambda_min), h2 = kernel_h(2.0, spec.lambda_min);
  const double g0 = 0.0, g2 = kernel_g(spec.scales[0] * 2.0);
  CHECK_THAT(f.matrix(0, 0), WithinAbs(0.5 * (h0 + h2), 1e-14));
  CHECK_THAT(f.matrix(0, 1), WithinAbs(0.5 * (h0 - h2), 1e-14));
  CHECK_THAT(f.matrix(2, 0), WithinAbs(0.5 * (g0 + g2), 1e-14));
  CHECK_THAT(f.matrix(2, 1), WithinAbs(0.5 * (g0 - g2), 1e-14));
}

TEST_CASE("degenerate kernels give the identity scaling block") {
  const auto& s = spectrum162();
  const WaveletFrame f = build_frame(s, constant_bank(1.0, 0.0, 3));
  const int n = s.size();
  CHECK((f.matrix.topRows(n) - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(f.matrix.bottomRows(3 * n).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THAT(f.bounds.lower, WithinAbs(1.0, 1e-14));
  CHECK_THAT(f.bounds.upper, WithinAbs(1.0, 1e-14));
  const Eigen::MatrixXd dual = dual_frame(f);
  CHECK((dual - f.matrix).cwiseAbs().maxCoeff() < 1e-10);

  const FrameBounds doubled = frame_bounds(s, constant_bank(2.0, 0.0, 3));
  CHECK_THAT(doubled.lower, WithinRel(4.0, 1e-14));

  FilterBank hole;
  hole.responses.emplace_back([](double) { return 0.0; });
  CHECK_THROWS_AS(frame_bounds(s, hole), NumericalError);
}

TEST_CASE("frame structure on icosphere-162") {
  const auto& s = spectrum162();
  const KernelSpec spec = design_scales(s.lambda_max(), 16.0, 3);
  const WaveletFrame f = build_frame(s, spec);
  const int n = s.size();
  CHECK(f.matrix.rows() == 162 * 4);
  CHECK(f.matrix.allFinite());
  CHECK(f.bounds.lower > 0.0);

  // Scaling row k equals T_h applied to the impulse at k, computed mode by mode.
  for (int k : {0, 17, 161}) {
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(n);
    for (int l = 0; l < n; ++l) {
      expected += kernel_h(s.eigenvalues(l), spec.lambda_min) * s.eigenvectors(k, l) * s.eigenvectors.col(l);
    }
    CHECK((f.matrix.row(k).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);
  }

  // Bounds bracket the per-mode energy and the frame inequality holds.
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd v = testing_helpers::random_matrix(n, 1, rng);
    v.normalize();
    const double energy = (f.matrix * v).squaredNorm();
    CHECK(energy >= f.bounds.lower - 1e-10);
    CHECK(energy <= f.bounds.upper + 1e-10);
    const Eigen::VectorXd coeff = s.eigenvectors.transpose() * v;
    double parseval = 0.0;
    for (int l = 0; l < n; ++l) parseval += f.responses.row(l).squaredNorm() * coeff(l) * coeff(l);
    CHECK_THAT(energy, WithinRel(parseval, 1e-10));
  }

  // Constants live only in the scaling block.
  const Eigen::MatrixXd x = analyze(f, Eigen::VectorXd::Ones(n));
  CHECK(x.bottomRows(3 * n).cwiseAbs().maxCoeff() < 1e-12);

  // Adjointness.
  const Eigen::MatrixXd fr = testing_helpers::random_matrix(n, 3, rng);
  const Eigen::MatrixXd xr = testing_helpers::random_matrix(4 * n, 3, rng);
  const double lhs = (analyze(f, fr).array() * xr.array()).sum();
  const double rhs = (fr.array() * synthesize(f, xr).array()).sum();
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));

  CHECK(analyze(f, Eigen::VectorXd::Zero(n)).norm() == 0.0);
}

TEST_CASE("canonical dual reconstructs") {
  const auto& s = spectrum162();
  const WaveletFrame f = build_frame(s, design_scales(s.lambda_max(), 16.0, 3));
  const Eigen::MatrixXd dual = dual_frame(f);
  const int n = s.size();
  CHECK((f.matrix.transpose() * dual - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(f.matrix.transpose() * f.matrix);
  CHECK(ldlt.vectorD().minCoeff() > 0.0);
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd sig = testing_helpers::random_matrix(n, 4, rng);
  CHECK(testing_helpers::relative_error(synthesize(f, dual * sig), sig) < 1e-10);
}

TEST_CASE("kernel curves CSV") {
  const KernelSpec spec = design_scales(8.0, 16.0, 3);
  std::ostringstream os;
  write_kernel_curves(os, spec, 5);
  const std::string text = os.str();
  CHECK(text.rfind("lambda,h,g_s1,g_s2,g_s3\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}
