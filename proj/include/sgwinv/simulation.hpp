#pragma once

// Monte Carlo patch scenarios: connected random patches with constant
// activity, PSNR-calibrated amplitude and correlated Gaussian sensor noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "forward.hpp"
#include "graph.hpp"

namespace sgwinv {

/// SplitMix64 finalizer; used to derive independent per-scenario seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t scenario_seed(std::uint64_t master_seed, int patch_size, int index) {
  return mix64(mix64(mix64(master_seed) ^ static_cast<std::uint64_t>(patch_size)) ^ static_cast<std::uint64_t>(index));
}

/// Randomized breadth-first accretion from `seed_vertex`: repeatedly absorbs a
/// uniformly drawn frontier vertex until `size` vertices are collected.
/// Returned vertices are sorted.
inline std::vector<int> grow_patch(const std::vector<std::vector<int>>& neighbours, int seed_vertex, int size,
                                   std::mt19937_64& rng) {
  const int n = static_cast<int>(neighbours.size());
  if (size < 1 || size > n) throw ConfigError("patch size must lie in [1, N]");
  if (seed_vertex < 0 || seed_vertex >= n) throw ConfigError("patch seed vertex out of range");
  std::vector<char> in_patch(static_cast<std::size_t>(n), 0), queued(static_cast<std::size_t>(n), 0);
  std::vector<int> patch{seed_vertex};
  in_patch[static_cast<std::size_t>(seed_vertex)] = queued[static_cast<std::size_t>(seed_vertex)] = 1;
  std::vector<int> frontier;
  auto push_neighbours = [&](int v) {
    for (int w : neighbours[static_cast<std::size_t>(v)]) {
      if (!queued[static_cast<std::size_t>(w)]) {
        queued[static_cast<std::size_t>(w)] = 1;
        frontier.push_back(w);
      }
    }
  };
  push_neighbours(seed_vertex);
  while (static_cast<int>(patch.size()) < size) {
    if (frontier.empty()) throw ConfigError("connected component is smaller than the requested patch size");
    std::uniform_int_distribution<std::size_t> pick(0, frontier.size() - 1);
    const std::size_t k = pick(rng);
    const int v = frontier[k];
    frontier[k] = frontier.back();
    frontier.pop_back();
    in_patch[static_cast<std::size_t>(v)] = 1;
    patch.push_back(v);
    push_neighbours(v);
  }
  std::sort(patch.begin(), patch.end());
  return patch;
}

inline std::vector<int> grow_patch(const CorticalGraph& graph, int seed_vertex, int size, std::mt19937_64& rng) {
  return grow_patch(graph.neighbours(), seed_vertex, size, rng);
}

/// Unit-amplitude activity: 1 on patch x [first, last], 0 elsewhere.
inline Eigen::MatrixXd patch_activity(int num_sources, const std::vector<int>& patch, int samples, int first,
                                      int last) {
  if (first < 0 || last < first || last >= samples) throw ConfigError("active window out of range");
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(num_sources, samples);
  for (int v : patch) s.row(v).segment(first, last - first + 1).setOnes();
  return s;
}

/// beta = psnr * sigma / p, p the peak |G0 S_unit| over sensors and time,
/// sigma = sqrt(mean diagonal of Sigma_B).
inline double calibrate_beta(const Eigen::MatrixXd& gain, const Eigen::MatrixXd& unit_sources,
                             const NoiseModel& noise, double psnr) {
  if (!(psnr > 0.0)) throw ConfigError("PSNR must be positive");
  const double peak = (gain * unit_sources).cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw NumericalError("patch is invisible to the sensors");
  return psnr * std::sqrt(noise.mean_variance()) / peak;
}

/// Symmetric square root of a PSD covariance (negative rounding clipped).
inline Eigen::MatrixXd covariance_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("covariance square root failed");
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Draws `samples` iid columns from N(0, cov) given its square root.
inline Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& cov_sqrt, int samples, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd white(cov_sqrt.cols(), samples);
  for (Eigen::Index l = 0; l < white.cols(); ++l) {
    for (Eigen::Index j = 0; j < white.rows(); ++j) white(j, l) = normal(rng);
  }
  return cov_sqrt * white;
}

struct ScenarioConfig {
  int patch_size = 10;
  double psnr = 5.0;
  int samples = 100;
  int window_first = 50;
  int window_last = 99;
  bool noiseless = false;
};

struct PatchScenario {
  std::vector<int> patch;
  int patch_size = 0;
  double beta = 0.0;
  double psnr = 0.0;
  std::uint64_t seed = 0;
  int window_first = 0;
  int window_last = 0;
  Eigen::MatrixXd sources;  // S_sim, N x L
  Eigen::MatrixXd noise;    // B, J0 x L
  Eigen::MatrixXd data;     // Z_sim = G0 S_sim + B
};

/// Deterministic given `seed`: seed vertex, patch growth and noise all draw
/// from one mt19937_64 stream in that order.
inline PatchScenario simulate_scenario(const std::vector<std::vector<int>>& neighbours, const Eigen::MatrixXd& gain,
                                       const NoiseModel& noise, const ScenarioConfig& cfg, std::uint64_t seed) {
  const int n = static_cast<int>(gain.cols());
  if (static_cast<int>(neighbours.size()) != n) throw ConfigError("graph and leadfield disagree on N");
  if (noise.size() != gain.rows()) throw ConfigError("noise model and leadfield disagree on sensor count");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_vertex(0, n - 1);

  PatchScenario sc;
  sc.seed = seed;
  sc.patch_size = cfg.patch_size;
  sc.psnr = cfg.psnr;
  sc.window_first = cfg.window_first;
  sc.window_last = cfg.window_last;
  sc.patch = grow_patch(neighbours, pick_vertex(rng), cfg.patch_size, rng);
  const Eigen::MatrixXd unit = patch_activity(n, sc.patch, cfg.samples, cfg.window_first, cfg.window_last);
  sc.beta = calibrate_beta(gain, unit, noise, cfg.psnr);
  sc.sources = sc.beta * unit;
  sc.noise = cfg.noiseless ? Eigen::MatrixXd::Zero(gain.rows(), cfg.samples)
                           : sample_gaussian(covariance_sqrt(noise.covariance), cfg.samples, rng);
  sc.data = gain * sc.sources + sc.noise;
  return sc;
}

inline PatchScenario simulate_scenario(const CorticalGraph& graph, const Eigen::MatrixXd& gain,
                                       const NoiseModel& noise, const ScenarioConfig& cfg, std::uint64_t seed) {
  return simulate_scenario(graph.neighbours(), gain, noise, cfg, seed);
}

/// PSNR recomputed from the noiseless part of the data.
inline double achieved_psnr(const PatchScenario& sc, const NoiseModel& noise) {
  return (sc.data - sc.noise).cwiseAbs().maxCoeff() / std::sqrt(noise.mean_variance());
}

}  // namespace sgwinv
