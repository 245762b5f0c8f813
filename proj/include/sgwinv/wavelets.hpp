#pragma once

// Spectral graph wavelet frame: kernels, scale design, frame matrix,
// analysis/synthesis and the canonical dual.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "graph.hpp"

namespace sgwinv {

// ---------------------------------------------------------------------------
// Kernels

/// Band-pass kernel: x^2 on [0,1], cubic spline on [1,2], (2/x)^2 beyond.
inline double kernel_g(double x) {
  if (x < 1.0) return x * x;
  if (x <= 2.0) return -5.0 + x * (11.0 + x * (-6.0 + x));
  const double r = 2.0 / x;
  return r * r;
}

/// Arg-max of kernel_g (stationary point of the cubic branch).
inline const double kKernelGPeakLocation = 2.0 - 1.0 / std::sqrt(3.0);
inline const double kKernelGPeakValue = kernel_g(kKernelGPeakLocation);

/// Low-pass kernel C * exp(-(x / (0.6 lambda_min))^4); C defaults to max g.
inline double kernel_h(double x, double lambda_min, double amplitude = kKernelGPeakValue) {
  const double u = x / (0.6 * lambda_min);
  const double u2 = u * u;
  return amplitude * std::exp(-u2 * u2);
}

/// Center frequency over half-power bandwidth of a unimodal band-pass kernel.
/// The kernel is sampled to locate the peak, then each half-power crossing
/// is refined by bisection.
inline double quality_factor(const std::function<double(double)>& kernel, double x_hi = 64.0) {
  const int samples = 1 << 16;
  double peak_x = 0.0, peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= samples; ++i) {
    const double x = x_hi * i / samples;
    if (const double v = kernel(x); v > peak) {
      peak = v;
      peak_x = x;
    }
  }
  const double step = x_hi / samples;
  for (double lo = std::max(0.0, peak_x - step), hi = std::min(x_hi, peak_x + step);
       hi - lo > 1e-14;) {
    // Golden-section refinement of the peak location.
    const double m1 = lo + (hi - lo) * 0.381966, m2 = lo + (hi - lo) * 0.618034;
    if (kernel(m1) < kernel(m2)) lo = m1; else hi = m2;
    peak_x = 0.5 * (lo + hi);
  }
  peak = kernel(peak_x);
  const double level = peak / std::sqrt(2.0);
  auto crossing = [&](double inside, double outside) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (inside + outside);
      (kernel(mid) >= level ? inside : outside) = mid;
    }
    return 0.5 * (inside + outside);
  };
  double outside_hi = peak_x;
  while (kernel(outside_hi) >= level) outside_hi *= 2.0;
  const double lower = crossing(peak_x, 0.0);
  const double upper = crossing(peak_x, outside_hi);
  return peak_x / (upper - lower);
}

// ---------------------------------------------------------------------------
// Scale design

struct KernelSpec {
  double cutoff_divisor = 16.0;  // K
  int num_scales = 3;            // N_s
  double lambda_max = 0.0;
  double lambda_min = 0.0;  // lambda_max / K
  std::vector<double> scales;  // increasing: s_1 peaks at lambda_max
  double quality_factor = 0.0;
  double lowpass_amplitude = kKernelGPeakValue;
};

/// Geometric scales placing the peak of g(s_j .) at lambda_max for s_1 and
/// at lambda_min for s_{N_s}. A single scale sits at the geometric midband.
inline KernelSpec design_scales(double lambda_max, double cutoff_divisor = 16.0, int num_scales = 3) {
  if (!(cutoff_divisor > 1.0)) throw ConfigError("cutoff divisor K must exceed 1");
  if (num_scales < 1) throw ConfigError("number of wavelet scales must be at least 1");
  if (!(lambda_max > 0.0)) throw ConfigError("lambda_max must be positive");

  KernelSpec spec;
  spec.cutoff_divisor = cutoff_divisor;
  spec.num_scales = num_scales;
  spec.lambda_max = lambda_max;
  spec.lambda_min = lambda_max / cutoff_divisor;
  const double s_first = kKernelGPeakLocation / lambda_max;
  const double s_last = kKernelGPeakLocation / spec.lambda_min;
  if (num_scales == 1) {
    spec.scales = {std::sqrt(s_first * s_last)};
  } else {
    const double ratio = std::pow(s_last / s_first, 1.0 / (num_scales - 1));
    spec.scales.resize(static_cast<std::size_t>(num_scales));
    for (int j = 0; j < num_scales; ++j) spec.scales[static_cast<std::size_t>(j)] = s_first * std::pow(ratio, j);
    spec.scales.back() = s_last;
  }
  spec.quality_factor = quality_factor(kernel_g);
  return spec;
}

// ---------------------------------------------------------------------------
// Filter bank

/// Spectral responses of the frame's row blocks: responses[0] is the
/// scaling (low-pass) block, responses[1..] the wavelet scales.
struct FilterBank {
  std::vector<std::function<double(double)>> responses;

  int num_blocks() const { return static_cast<int>(responses.size()); }

  /// N x (N_s + 1) matrix of responses evaluated on the spectrum.
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& eigenvalues) const {
    Eigen::MatrixXd r(eigenvalues.size(), num_blocks());
    for (int b = 0; b < num_blocks(); ++b) {
      for (Eigen::Index l = 0; l < eigenvalues.size(); ++l) r(l, b) = responses[static_cast<std::size_t>(b)](eigenvalues(l));
    }
    return r;
  }
};

inline FilterBank make_filter_bank(const KernelSpec& spec) {
  FilterBank bank;
  const double lambda_min = spec.lambda_min;
  const double amplitude = spec.lowpass_amplitude;
  bank.responses.emplace_back([=](double x) { return kernel_h(x, lambda_min, amplitude); });
  for (double s : spec.scales) bank.responses.emplace_back([s](double x) { return kernel_g(s * x); });
  return bank;
}

// ---------------------------------------------------------------------------
// Frame

struct FrameBounds {
  double lower = 0.0;  // A
  double upper = 0.0;  // B
};

/// Min and max over the spectrum of sum_b r_b(lambda)^2.
inline FrameBounds frame_bounds(const LaplacianSpectrum& spectrum, const FilterBank& bank) {
  const Eigen::VectorXd energy = bank.evaluate(spectrum.eigenvalues).rowwise().squaredNorm();
  FrameBounds b{energy.minCoeff(), energy.maxCoeff()};
  if (!(b.lower > 1e-14 * b.upper)) {
    throw NumericalError("frame lower bound vanishes: the kernels leave part of the spectrum uncovered");
  }
  return b;
}

inline FrameBounds frame_bounds(const LaplacianSpectrum& spectrum, const KernelSpec& spec) {
  return frame_bounds(spectrum, make_filter_bank(spec));
}

/// Dense frame matrix W (N(N_s+1) x N); block b is chi diag(r_b(lambda)) chi^T,
/// so row k of block b is the filtered impulse at vertex k.
struct WaveletFrame {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd responses;  // N x blocks
  FrameBounds bounds;
  KernelSpec spec;
  int num_vertices = 0;

  int num_blocks() const { return static_cast<int>(responses.cols()); }
  Eigen::Index num_atoms() const { return matrix.rows(); }
};

inline WaveletFrame build_frame(const LaplacianSpectrum& spectrum, const FilterBank& bank,
                                KernelSpec spec = {}) {
  const int n = spectrum.size();
  if (spectrum.eigenvectors.rows() != n || spectrum.eigenvectors.cols() != n) {
    throw ConfigError("spectrum dimension mismatch");
  }
  WaveletFrame frame;
  frame.num_vertices = n;
  frame.spec = std::move(spec);
  frame.responses = bank.evaluate(spectrum.eigenvalues);
  frame.bounds = frame_bounds(spectrum, bank);
  frame.matrix.resize(static_cast<Eigen::Index>(n) * bank.num_blocks(), n);
  const Eigen::MatrixXd& chi = spectrum.eigenvectors;
  for (int b = 0; b < bank.num_blocks(); ++b) {
    frame.matrix.middleRows(static_cast<Eigen::Index>(b) * n, n).noalias() =
        chi * frame.responses.col(b).asDiagonal() * chi.transpose();
  }
  if (!frame.matrix.allFinite()) throw NumericalError("frame matrix has non-finite entries");
  return frame;
}

inline WaveletFrame build_frame(const LaplacianSpectrum& spectrum, const KernelSpec& spec) {
  return build_frame(spectrum, make_filter_bank(spec), spec);
}

/// Wavelet analysis X = W f.
inline Eigen::MatrixXd analyze(const WaveletFrame& frame, const Eigen::MatrixXd& f) {
  if (f.rows() != frame.num_vertices) throw ConfigError("analyze: signal has wrong number of rows");
  return frame.matrix * f;
}

/// Wavelet synthesis f = W^T X.
inline Eigen::MatrixXd synthesize(const WaveletFrame& frame, const Eigen::MatrixXd& x) {
  if (x.rows() != frame.num_atoms()) throw ConfigError("synthesize: coefficients have wrong number of rows");
  return frame.matrix.transpose() * x;
}

/// Canonical dual W (W^T W)^{-1}.
inline Eigen::MatrixXd dual_frame(const WaveletFrame& frame) {
  const Eigen::MatrixXd gram = frame.matrix.transpose() * frame.matrix;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("frame operator W^T W is singular");
  return llt.solve(frame.matrix.transpose()).transpose();
}

/// CSV of the kernel curves on a uniform grid over [0, lambda_max]:
/// lambda, h(lambda), g(s_1 lambda), ...
inline void write_kernel_curves(std::ostream& os, const KernelSpec& spec, int points = 512) {
  const FilterBank bank = make_filter_bank(spec);
  os << "lambda,h";
  for (int j = 1; j <= spec.num_scales; ++j) os << ",g_s" << j;
  os << '\n';
  os.precision(12);
  for (int i = 0; i < points; ++i) {
    const double x = spec.lambda_max * i / (points - 1);
    os << x;
    for (const auto& r : bank.responses) os << ',' << r(x);
    os << '\n';
  }
}

}  // namespace sgwinv
