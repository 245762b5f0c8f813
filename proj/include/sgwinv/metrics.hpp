#pragma once

// Localization metrics: peak-time spatial dispersion, Wasserstein-1 between
// normalized energy maps, l2 amplitude ratio, and summary statistics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "transport.hpp"

namespace sgwinv {

/// argmax over l of max_j |Z_{j,l}|; ties go to the smallest index.
inline int peak_time(const Eigen::MatrixXd& z) {
  if (z.cols() == 0) throw ConfigError("peak_time: empty data");
  int best = 0;
  double best_val = -1.0;
  for (Eigen::Index l = 0; l < z.cols(); ++l) {
    const double v = z.col(l).cwiseAbs().maxCoeff();
    if (v > best_val) {
      best_val = v;
      best = static_cast<int>(l);
    }
  }
  return best;
}

/// Vertex with the largest |S_{k,t}|, smallest index on ties.
inline int peak_vertex(const Eigen::MatrixXd& s, int t) {
  Eigen::Index k = 0;
  s.col(t).cwiseAbs().maxCoeff(&k);
  return static_cast<int>(k);
}

/// SD = sqrt(sum_k d^2(i_max,k) |S_{k,t}|^2 / sum_k |S_{k,t}|^2), i_max the
/// peak vertex of S at t.
inline double spatial_dispersion(const Eigen::MatrixXd& s, int t, const Eigen::MatrixXd& distances) {
  if (t < 0 || t >= s.cols()) throw ConfigError("spatial_dispersion: time index out of range");
  if (distances.rows() != s.rows() || distances.cols() != s.rows()) {
    throw ConfigError("spatial_dispersion: distance matrix does not match source count");
  }
  const Eigen::VectorXd power = s.col(t).array().square();
  const double total = power.sum();
  if (!(total > 0.0)) throw NumericalError("no activity at peak time");
  const int i_max = peak_vertex(s, t);
  const double weighted = (distances.row(i_max).transpose().array().square() * power.array()).sum();
  return std::sqrt(weighted / total);
}

struct EnergyMap {
  Eigen::VectorXd values;
  int first = 0;
  int last = 0;
  bool normalized = false;
};

/// values_k = sqrt(mean_{l in [first,last]} S_{k,l}^2); optionally scaled to unit mass.
inline EnergyMap energy_map(const Eigen::MatrixXd& s, int first, int last, bool normalize) {
  if (first < 0 || last < first || last >= s.cols()) throw ConfigError("energy_map: invalid time window");
  EnergyMap map;
  map.first = first;
  map.last = last;
  const double count = static_cast<double>(last - first + 1);
  map.values = (s.middleCols(first, last - first + 1).rowwise().squaredNorm() / count).cwiseSqrt();
  if (normalize) {
    const double mass = map.values.sum();
    if (!(mass > 0.0)) throw NumericalError("energy_map: cannot normalize an all-zero map");
    map.values /= mass;
    map.normalized = true;
  }
  return map;
}

struct WassersteinResult {
  double distance = 0.0;
  double duality_gap = 0.0;
  double max_marginal_error = 0.0;
  double max_dual_violation = 0.0;
  long pivots = 0;
};

inline constexpr double kSupportTruncation = 1e-12;
inline constexpr double kTransportCertificateTol = 1e-8;

namespace detail {

inline std::vector<int> support_of(const Eigen::VectorXd& v) {
  std::vector<int> idx;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (v(k) >= kSupportTruncation) idx.push_back(static_cast<int>(k));
  }
  return idx;
}

inline void check_normalized(const EnergyMap& m, const char* which) {
  if (!m.normalized || std::abs(m.values.sum() - 1.0) > 1e-9 || (m.values.array() < 0.0).any()) {
    throw ConfigError(std::string("wasserstein1: ") + which + " map is not a normalized energy map");
  }
}

}  // namespace detail

/// Exact W1 between two normalized maps with ground metric `distances`.
/// Entries below 1e-12 are dropped and each map renormalized; the transport LP
/// is solved on the remaining supports and its optimality certified by
/// primal/dual feasibility and a vanishing duality gap (1e-8).
inline WassersteinResult wasserstein1_detailed(const EnergyMap& mu, const EnergyMap& nu,
                                               const Eigen::MatrixXd& distances) {
  if (mu.values.size() != nu.values.size()) throw ConfigError("wasserstein1: maps have different sizes");
  if (distances.rows() != mu.values.size() || distances.cols() != mu.values.size()) {
    throw ConfigError("wasserstein1: distance matrix does not match map size");
  }
  detail::check_normalized(mu, "first");
  detail::check_normalized(nu, "second");

  const std::vector<int> src = detail::support_of(mu.values);
  const std::vector<int> dst = detail::support_of(nu.values);
  if (src.empty() || dst.empty()) throw NumericalError("wasserstein1: empty support after truncation");
  Eigen::VectorXd a(static_cast<Eigen::Index>(src.size())), b(static_cast<Eigen::Index>(dst.size()));
  for (std::size_t i = 0; i < src.size(); ++i) a(static_cast<Eigen::Index>(i)) = mu.values(src[i]);
  for (std::size_t j = 0; j < dst.size(); ++j) b(static_cast<Eigen::Index>(j)) = nu.values(dst[j]);
  a /= a.sum();
  b /= b.sum();
  Eigen::MatrixXd cost(a.size(), b.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < dst.size(); ++j) {
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = distances(src[i], dst[j]);
    }
  }
  const TransportResult t = solve_transport(a, b, cost);
  WassersteinResult w;
  w.distance = t.cost;
  w.duality_gap = t.cost - t.dual_objective;
  w.max_marginal_error = t.max_marginal_error;
  w.max_dual_violation = t.max_dual_violation;
  w.pivots = t.pivots;
  const double scale = std::max(1.0, cost.maxCoeff());
  if (w.max_marginal_error > kTransportCertificateTol ||
      w.max_dual_violation > kTransportCertificateTol * scale ||
      std::abs(w.duality_gap) > kTransportCertificateTol * scale) {
    throw NumericalError("wasserstein1: transport solution failed its optimality certificate");
  }
  return w;
}

inline double wasserstein1(const EnergyMap& mu, const EnergyMap& nu, const Eigen::MatrixXd& distances) {
  return wasserstein1_detailed(mu, nu, distances).distance;
}

/// ||est||_2 / ||ref||_2 of unnormalized energy maps.
inline double l2_ratio(const EnergyMap& est, const EnergyMap& ref) {
  if (est.values.size() != ref.values.size()) throw ConfigError("l2_ratio: maps have different sizes");
  const double denom = ref.values.norm();
  if (!(denom > 0.0)) throw NumericalError("l2_ratio: reference map is zero");
  return est.values.norm() / denom;
}

// ---------------------------------------------------------------------------
// Summary statistics

struct SummaryStats {
  std::size_t count = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();  // population
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
  double iqd = std::numeric_limits<double>::quiet_NaN();
};

/// Quantile with linear interpolation between order statistics (position p (n-1)).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Mean, median, population std and inter-quartile distance of the finite values.
inline SummaryStats summarize(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
               values.end());
  SummaryStats s;
  s.count = values.size();
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  s.median = quantile_sorted(values, 0.5);
  s.q1 = quantile_sorted(values, 0.25);
  s.q3 = quantile_sorted(values, 0.75);
  s.iqd = s.q3 - s.q1;
  return s;
}

/// Metrics of one estimate against its simulated reference.
struct MetricRecord {
  std::string solver;
  int patch_size = 0;
  int scenario = 0;
  double sd_ratio = std::numeric_limits<double>::quiet_NaN();
  double wasserstein1 = std::numeric_limits<double>::quiet_NaN();
  double l2_ratio = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty when all metrics were computed
};

struct GroupSummary {
  std::string solver;
  int patch_size = 0;
  std::size_t records = 0;
  SummaryStats sd_ratio, wasserstein1, l2_ratio;
};

/// Aggregates per (solver, patch size), in first-appearance order of solvers
/// and ascending patch size.
inline std::vector<GroupSummary> summarize_records(const std::vector<MetricRecord>& records) {
  std::vector<std::string> solver_order;
  std::map<std::pair<std::string, int>, std::vector<const MetricRecord*>> groups;
  for (const auto& r : records) {
    if (std::find(solver_order.begin(), solver_order.end(), r.solver) == solver_order.end()) {
      solver_order.push_back(r.solver);
    }
    groups[{r.solver, r.patch_size}].push_back(&r);
  }
  std::vector<GroupSummary> out;
  for (const auto& solver : solver_order) {
    for (const auto& [key, members] : groups) {
      if (key.first != solver) continue;
      GroupSummary g;
      g.solver = solver;
      g.patch_size = key.second;
      g.records = members.size();
      std::vector<double> sd, w1, l2;
      for (const auto* r : members) {
        sd.push_back(r->sd_ratio);
        w1.push_back(r->wasserstein1);
        l2.push_back(r->l2_ratio);
      }
      g.sd_ratio = summarize(sd);
      g.wasserstein1 = summarize(w1);
      g.l2_ratio = summarize(l2);
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace sgwinv
