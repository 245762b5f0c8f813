#pragma once

// Run orchestration: workspace construction, scenario simulation, solver
// dispatch, metric evaluation, run-directory layout and report tables.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"
#include "error.hpp"
#include "forward.hpp"
#include "graph.hpp"
#include "matrix_io.hpp"
#include "mesh.hpp"
#include "metrics.hpp"
#include "simulation.hpp"
#include "solvers/mce.hpp"
#include "solvers/mne.hpp"
#include "solvers/sbl.hpp"
#include "solvers/svbsccd.hpp"
#include "wavelets.hpp"

namespace sgwinv {

namespace fs = std::filesystem;

inline TriangleMesh make_mesh(const MeshSpec& spec) {
  if (!spec.file.empty()) return load_off(spec.file);
  return generate_icosphere(spec.subdivisions, spec.radius);
}

inline std::uint64_t noise_seed(std::uint64_t master_seed) { return mix64(master_seed ^ 0x6e6f697365ull); }

/// Everything shared by the scenarios of one run: geometry, frame, forward
/// model and whitening. Immutable once built.
class Workspace {
public:
  Workspace(RunConfig config, TriangleMesh mesh, Eigen::MatrixXd gain, NoiseModel noise)
      : config_(std::move(config)), mesh_(std::move(mesh)), noise_(std::move(noise)) {
    if (gain.cols() != mesh_.num_vertices()) throw ConfigError("leadfield columns do not match mesh vertices");
    if (noise_.size() != gain.rows()) throw ConfigError("noise covariance does not match leadfield rows");
    gain_ = std::move(gain);
    graph_ = build_graph(mesh_);
    neighbours_ = graph_.neighbours();
    distances_ = vertex_distances(mesh_);
    whitener_ = build_whitener(noise_, config_.forward.whitening_tau);
    base_.gain = whitener_.matrix * gain_;
    if (config_.needs_frame()) {
      const LaplacianSpectrum spectrum = eigendecompose(graph_, config_.frame.max_vertices);
      const KernelSpec spec =
          design_scales(spectrum.lambda_max(), config_.frame.cutoff_divisor, config_.frame.num_scales);
      frame_ = build_frame(spectrum, spec);
      base_.wavelet_gain = base_.gain * frame_->matrix.transpose();
    }
  }

  /// Synthesizes the leadfield and baseline covariance from the config.
  static Workspace synthesize(const RunConfig& config) {
    TriangleMesh mesh = make_mesh(config.mesh);
    const auto& f = config.forward;
    const Point3 center = mesh.centroid() + Point3(f.sensor_center[0], f.sensor_center[1], f.sensor_center[2]);
    const SensorArray sensors = make_sensor_sphere(f.sensors, center, f.sensor_radius);
    Leadfield lf = synth_leadfield(mesh, sensors);
    NoiseModel noise = synth_baseline_covariance(f.sensors, f.noise_condition, noise_seed(config.seed), f.noise_variance);
    return Workspace(config, std::move(mesh), std::move(lf.gain), std::move(noise));
  }

  const RunConfig& config() const { return config_; }
  const TriangleMesh& mesh() const { return mesh_; }
  const CorticalGraph& graph() const { return graph_; }
  const std::vector<std::vector<int>>& neighbours() const { return neighbours_; }
  const Eigen::MatrixXd& distances() const { return distances_; }
  const Eigen::MatrixXd& gain() const { return gain_; }
  const NoiseModel& noise() const { return noise_; }
  const Whitener& whitener() const { return whitener_; }
  const std::optional<WaveletFrame>& frame() const { return frame_; }

  /// Whitened problem for raw sensor data Z0.
  WhitenedProblem problem(const Eigen::MatrixXd& raw_data) const {
    WhitenedProblem p = base_;
    p.data = whitener_.matrix * raw_data;
    return p;
  }

private:
  RunConfig config_;
  TriangleMesh mesh_;
  Eigen::MatrixXd gain_;
  NoiseModel noise_;
  CorticalGraph graph_;
  std::vector<std::vector<int>> neighbours_;
  Eigen::MatrixXd distances_;
  Whitener whitener_;
  std::optional<WaveletFrame> frame_;
  WhitenedProblem base_;
};

// ---------------------------------------------------------------------------
// Solver dispatch

struct ResolvedWeights {
  double lambda = 0.0;
  double mu = 0.0;
};

inline ResolvedWeights resolve_weights(const SolverSpec& spec, const WhitenedProblem& p) {
  const bool wavelet = spec.uses_frame();
  const Eigen::MatrixXd& g = wavelet ? p.wavelet_gain : p.gain;
  ResolvedWeights w;
  switch (spec.lambda_rule) {
    case LambdaRule::fixed: w.lambda = spec.lambda; break;
    case LambdaRule::snr: {
      const double rho = spec.rho ? *spec.rho : snr_from_whitened_data(p.data);
      w.lambda = lambda_from_snr(rho, g.squaredNorm(), static_cast<double>(p.num_channels()));
      break;
    }
    case LambdaRule::max_correlation: w.lambda = lambda_from_max_correlation(g, p.data, spec.ratio); break;
  }
  if (spec.name == "svb-sccd") {
    w.mu = spec.mu ? *spec.mu : spec.mu_ratio * (p.gain.transpose() * p.data).cwiseAbs().maxCoeff();
  }
  return w;
}

inline SourceEstimate run_solver(const SolverSpec& spec, const Workspace& ws, const WhitenedProblem& p,
                                 ResolvedWeights& weights) {
  weights = resolve_weights(spec, p);
  SolverConfig cfg = spec.settings;
  cfg.lambda = weights.lambda;
  cfg.mu = weights.mu;
  auto need_frame = [&]() -> const WaveletFrame& {
    if (!ws.frame()) throw ConfigError(spec.name + " needs a wavelet frame");
    return *ws.frame();
  };
  if (spec.name == "mne") return solve_mne(p, cfg.lambda);
  if (spec.name == "sgw-mne") return solve_sgw_mne(p, need_frame(), cfg.lambda);
  if (spec.name == "mce") return solve_mce(p, cfg);
  if (spec.name == "sgw-mce") return solve_sgw_mce(p, need_frame(), cfg);
  if (spec.name == "svb-sccd") return solve_svbsccd(p, ws.graph(), cfg);
  if (spec.name == "sbl") return solve_sbl(p, cfg, spec.algorithm);
  if (spec.name == "sgw-sbl") return solve_sgw_sbl(p, need_frame(), cfg, spec.algorithm);
  throw ConfigError("unknown solver '" + spec.name + "'");
}

// ---------------------------------------------------------------------------
// Metrics of one estimate

struct ScenarioReference {
  int peak_time = 0;         // on the noisy whitened data
  int reference_time = 0;    // on the noiseless whitened signal
  double sd_ref = 0.0;
  EnergyMap energy;          // unnormalized
  EnergyMap energy_normalized;
};

inline ScenarioReference make_reference(const Workspace& ws, const PatchScenario& sc, const WhitenedProblem& p) {
  ScenarioReference ref;
  ref.peak_time = peak_time(p.data);
  ref.reference_time = peak_time(p.gain * sc.sources);
  ref.sd_ref = spatial_dispersion(sc.sources, ref.reference_time, ws.distances());
  ref.energy = energy_map(sc.sources, sc.window_first, sc.window_last, false);
  ref.energy_normalized = energy_map(sc.sources, sc.window_first, sc.window_last, true);
  return ref;
}

struct EstimateMetrics {
  double sd_est = std::numeric_limits<double>::quiet_NaN();
  double sd_ratio = std::numeric_limits<double>::quiet_NaN();
  double wasserstein1 = std::numeric_limits<double>::quiet_NaN();
  double l2_ratio = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

inline EstimateMetrics score_estimate(const Workspace& ws, const ScenarioReference& ref, const PatchScenario& sc,
                                      const Eigen::MatrixXd& sources) {
  EstimateMetrics m;
  std::vector<std::string> errors;
  try {
    m.sd_est = spatial_dispersion(sources, ref.peak_time, ws.distances());
    m.sd_ratio = m.sd_est / ref.sd_ref;
  } catch (const Error& e) {
    errors.push_back(std::string("sd: ") + e.what());
  }
  try {
    const EnergyMap est = energy_map(sources, sc.window_first, sc.window_last, false);
    m.l2_ratio = l2_ratio(est, ref.energy);
    const EnergyMap est_n = energy_map(sources, sc.window_first, sc.window_last, true);
    m.wasserstein1 = wasserstein1(est_n, ref.energy_normalized, ws.distances());
  } catch (const Error& e) {
    errors.push_back(std::string("energy: ") + e.what());
  }
  for (std::size_t i = 0; i < errors.size(); ++i) m.error += (i ? "; " : "") + errors[i];
  return m;
}

// ---------------------------------------------------------------------------
// Run directory

inline std::string scenario_id(int patch_size, int index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "size%03d_idx%03d", patch_size, index);
  return buf;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// Shortest decimal that round-trips; NaN as empty.
inline std::string format_double(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double number_or_nan(const Json& j, const char* key) {
  return j.contains(key) && j.at(key).is_number() ? j.at(key).get<double>() : std::numeric_limits<double>::quiet_NaN();
}

struct ScenarioKey {
  int patch_size = 0;
  int index = 0;
  std::string id() const { return scenario_id(patch_size, index); }
};

inline std::vector<ScenarioKey> scenario_keys(const SweepSpec& sweep) {
  std::vector<ScenarioKey> keys;
  for (int size : sweep.sizes) {
    for (int i = 0; i < sweep.patches_per_size; ++i) keys.push_back({size, i});
  }
  return keys;
}

inline ScenarioConfig scenario_config(const SweepSpec& sweep, int patch_size) {
  ScenarioConfig c;
  c.patch_size = patch_size;
  c.psnr = sweep.psnr;
  c.samples = sweep.samples;
  c.window_first = sweep.window_first;
  c.window_last = sweep.window_last;
  return c;
}

inline PatchScenario simulate_key(const Workspace& ws, const ScenarioKey& key) {
  const auto& cfg = ws.config();
  return simulate_scenario(ws.neighbours(), ws.gain(), ws.noise(), scenario_config(cfg.sweep, key.patch_size),
                           scenario_seed(cfg.seed, key.patch_size, key.index));
}

inline Json scenario_json(const ScenarioKey& key, const PatchScenario& sc) {
  return Json{{"id", key.id()},   {"patch_size", sc.patch_size}, {"index", key.index},
              {"seed", sc.seed},  {"beta", sc.beta},             {"psnr", sc.psnr},
              {"samples", sc.sources.cols()}, {"window", {sc.window_first, sc.window_last}}, {"patch", sc.patch}};
}

/// Rebuilds S_sim from the stored patch and amplitude; Z_sim is read back from disk.
inline PatchScenario load_scenario(const fs::path& dir, int num_sources) {
  const Json j = read_json_file(dir / "scenario.json");
  PatchScenario sc;
  try {
    sc.patch = j.at("patch").get<std::vector<int>>();
    sc.patch_size = j.at("patch_size").get<int>();
    sc.beta = j.at("beta").get<double>();
    sc.psnr = j.at("psnr").get<double>();
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.window_first = j.at("window").at(0).get<int>();
    sc.window_last = j.at("window").at(1).get<int>();
    const int samples = j.at("samples").get<int>();
    for (int v : sc.patch) {
      if (v < 0 || v >= num_sources) throw ConfigError("patch vertex out of range");
    }
    sc.sources = sc.beta * patch_activity(num_sources, sc.patch, samples, sc.window_first, sc.window_last);
  } catch (const Json::exception& e) {
    throw ConfigError((dir / "scenario.json").string() + ": " + e.what());
  }
  sc.data = load_matrix(dir / "z_sim.mtx");
  if (sc.data.cols() != sc.sources.cols()) throw ConfigError("z_sim.mtx does not match the scenario sample count");
  return sc;
}

struct RunPaths {
  fs::path root;
  fs::path config() const { return root / "config.json"; }
  fs::path manifest() const { return root / "manifest.json"; }
  fs::path mesh() const { return root / "mesh.off"; }
  fs::path leadfield() const { return root / "leadfield.mtx"; }
  fs::path noise() const { return root / "sigma_b.mtx"; }
  fs::path scenarios() const { return root / "scenarios"; }
  fs::path estimates() const { return root / "estimates"; }
};

inline Json manifest_json(const RunConfig& c, const std::string& command) {
  return Json{{"config_hash", config_hash(c)}, {"seed", c.seed}, {"version", kLibraryVersion}, {"command", command}};
}

/// Default output root: $SGWINV_OUTPUT_ROOT, else ./runs.
inline fs::path default_output_root() {
  const char* env = std::getenv("SGWINV_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

inline fs::path resolve_run_dir(const RunConfig& c, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!c.output.empty()) return c.output;
  return default_output_root() / ("run-" + config_hash(c));
}

inline void create_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

/// Writes config, manifest and forward model of a fresh run.
inline void write_run_header(const RunPaths& paths, const Workspace& ws, const std::string& command) {
  create_dirs(paths.root);
  write_json(paths.config(), to_json(ws.config()));
  write_json(paths.manifest(), manifest_json(ws.config(), command));
  save_off(paths.mesh(), ws.mesh());
  save_matrix(paths.leadfield(), ws.gain());
  save_matrix(paths.noise(), ws.noise().covariance);
}

/// Reopens a run: the stored mesh, leadfield and covariance are used as-is,
/// so externally computed forward models can be dropped in.
inline Workspace open_run(const RunPaths& paths) {
  if (!fs::exists(paths.config())) throw IoError("not a run directory (missing config.json): " + paths.root.string());
  RunConfig config = load_config(paths.config());
  NoiseModel noise{load_matrix(paths.noise())};
  return Workspace(std::move(config), load_off(paths.mesh()), load_matrix(paths.leadfield()), std::move(noise));
}

// ---------------------------------------------------------------------------
// Parallel loop

/// Runs body(i) for i in [0, count) on `threads` workers. Exceptions are
/// collected per item and the first one is rethrown after all workers join.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(count, static_cast<std::size_t>(threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency()))));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Logger {
  std::ostream* out = &std::cerr;
  bool quiet = false;
  std::mutex mutex;

  void line(const std::string& text) {
    if (quiet || out == nullptr) return;
    std::lock_guard<std::mutex> lock(mutex);
    *out << text << '\n';
  }
};

// ---------------------------------------------------------------------------
// Commands

struct SolveOptions {
  int threads = 0;
  std::vector<std::string> only;  // solver labels; empty means all configured
  bool save_sources = false;
};

inline void simulate_scenarios(const RunPaths& paths, const Workspace& ws, int threads, Logger& log) {
  const auto keys = scenario_keys(ws.config().sweep);
  parallel_for(keys.size(), threads, [&](std::size_t i) {
    const PatchScenario sc = simulate_key(ws, keys[i]);
    const fs::path dir = paths.scenarios() / keys[i].id();
    create_dirs(dir);
    write_json(dir / "scenario.json", scenario_json(keys[i], sc));
    save_matrix(dir / "z_sim.mtx", sc.data);
    log.line("simulated " + keys[i].id());
  });
}

/// Solves one stored scenario with every selected solver and writes one JSON
/// record (plus optionally the source matrix) per solver.
inline void solve_scenario(const RunPaths& paths, const Workspace& ws, const std::string& id,
                           const SolveOptions& opts, Logger& log) {
  const PatchScenario sc = load_scenario(paths.scenarios() / id, ws.mesh().num_vertices());
  const WhitenedProblem p = ws.problem(sc.data);
  const ScenarioReference ref = make_reference(ws, sc, p);
  const fs::path out_dir = paths.estimates() / id;
  create_dirs(out_dir);
  for (const auto& spec : ws.config().solvers) {
    if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), spec.label) == opts.only.end()) continue;
    Json rec{{"scenario", id}, {"patch_size", sc.patch_size}, {"solver", spec.name}, {"label", spec.label}};
    const auto start = std::chrono::steady_clock::now();
    try {
      ResolvedWeights w;
      SourceEstimate est = run_solver(spec, ws, p, w);
      rec["solver_id"] = est.solver;
      rec["lambda"] = w.lambda;
      rec["mu"] = w.mu;
      rec["iterations"] = est.iterations;
      rec["converged"] = est.converged;
      rec["objective"] = json_number(est.objective);
      Json trace = Json::array();
      for (double v : est.objective_trace) trace.push_back(json_number(v));
      rec["objective_trace"] = std::move(trace);
      if (!est.sources.allFinite()) throw NumericalError("estimate has non-finite entries");
      const EstimateMetrics m = score_estimate(ws, ref, sc, est.sources);
      rec["metrics"] = {{"peak_time", ref.peak_time}, {"sd_est", json_number(m.sd_est)},
                        {"sd_ref", ref.sd_ref},       {"sd_ratio", json_number(m.sd_ratio)},
                        {"wasserstein1", json_number(m.wasserstein1)}, {"l2_ratio", json_number(m.l2_ratio)}};
      rec["error"] = m.error;
      if (opts.save_sources) save_matrix(out_dir / (spec.label + ".mtx"), est.sources);
    } catch (const Error& e) {
      rec["error"] = e.what();
    }
    rec["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(out_dir / (spec.label + ".json"), rec);
    log.line("solved " + id + " " + spec.label +
             (rec["error"].get<std::string>().empty() ? "" : " [" + rec["error"].get<std::string>() + "]"));
  }
}

inline std::vector<std::string> list_scenarios(const RunPaths& paths) {
  std::vector<std::string> ids;
  if (!fs::exists(paths.scenarios())) return ids;
  for (const auto& entry : fs::directory_iterator(paths.scenarios())) {
    if (entry.is_directory() && fs::exists(entry.path() / "scenario.json")) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline void solve_run(const RunPaths& paths, const Workspace& ws, const SolveOptions& opts, Logger& log) {
  for (const auto& label : opts.only) {
    bool found = false;
    for (const auto& s : ws.config().solvers) found = found || s.label == label;
    if (!found) throw ConfigError("solver '" + label + "' is not configured in this run");
  }
  const auto ids = list_scenarios(paths);
  if (ids.empty()) throw ConfigError("no scenarios found in " + paths.scenarios().string());
  parallel_for(ids.size(), opts.threads, [&](std::size_t i) { solve_scenario(paths, ws, ids[i], opts, log); });
}

// ---------------------------------------------------------------------------
// Report

/// Reads all estimate records, ordered by scenario then configured solver order.
inline std::vector<MetricRecord> collect_records(const RunPaths& paths) {
  std::vector<std::string> order;
  if (fs::exists(paths.config())) {
    for (const auto& s : load_config(paths.config()).solvers) order.push_back(s.label);
  }
  std::vector<MetricRecord> records;
  if (!fs::exists(paths.estimates())) return records;
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(paths.estimates())) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    std::vector<std::pair<std::size_t, MetricRecord>> rows;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".json") continue;
      const Json j = read_json_file(entry.path());
      MetricRecord r;
      try {
        r.solver = j.at("label").get<std::string>();
        r.patch_size = j.at("patch_size").get<int>();
        const std::string id = j.at("scenario").get<std::string>();
        r.scenario = std::stoi(id.substr(id.rfind("idx") + 3));
        r.error = j.value("error", std::string());
        if (j.contains("metrics")) {
          const Json& m = j.at("metrics");
          r.sd_ratio = number_or_nan(m, "sd_ratio");
          r.wasserstein1 = number_or_nan(m, "wasserstein1");
          r.l2_ratio = number_or_nan(m, "l2_ratio");
        }
      } catch (const std::exception& e) {
        throw ConfigError(entry.path().string() + ": malformed estimate record: " + e.what());
      }
      const auto it = std::find(order.begin(), order.end(), r.solver);
      rows.emplace_back(static_cast<std::size_t>(it - order.begin()), std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : a.second.solver < b.second.solver;
    });
    for (auto& row : rows) records.push_back(std::move(row.second));
  }
  return records;
}

inline std::string metrics_csv(const std::vector<MetricRecord>& records) {
  std::ostringstream os;
  os << "solver,patch_size,scenario,sd_ratio,wasserstein1,l2_ratio,error\n";
  for (const auto& r : records) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    os << r.solver << ',' << r.patch_size << ',' << r.scenario << ',' << format_double(r.sd_ratio) << ','
       << format_double(r.wasserstein1) << ',' << format_double(r.l2_ratio) << ",\"" << err << "\"\n";
  }
  return os.str();
}

inline Json stats_json(const SummaryStats& s) {
  return Json{{"count", s.count},        {"mean", json_number(s.mean)}, {"median", json_number(s.median)},
              {"std", json_number(s.stddev)}, {"q1", json_number(s.q1)},     {"q3", json_number(s.q3)},
              {"iqd", json_number(s.iqd)}};
}

inline Json summary_json(const std::vector<GroupSummary>& groups) {
  Json out = Json::array();
  for (const auto& g : groups) {
    out.push_back({{"solver", g.solver},
                   {"patch_size", g.patch_size},
                   {"records", g.records},
                   {"sd_ratio", stats_json(g.sd_ratio)},
                   {"wasserstein1", stats_json(g.wasserstein1)},
                   {"l2_ratio", stats_json(g.l2_ratio)}});
  }
  return out;
}

/// Aligned text tables: one per metric, solvers as columns, each cell
/// "small / large" (sizes ascending), rows mean, median, std, IQD.
inline std::string format_tables(const std::vector<GroupSummary>& groups) {
  std::vector<std::string> solvers;
  std::vector<int> sizes;
  for (const auto& g : groups) {
    if (std::find(solvers.begin(), solvers.end(), g.solver) == solvers.end()) solvers.push_back(g.solver);
    if (std::find(sizes.begin(), sizes.end(), g.patch_size) == sizes.end()) sizes.push_back(g.patch_size);
  }
  std::sort(sizes.begin(), sizes.end());
  auto find = [&](const std::string& s, int size) -> const GroupSummary* {
    for (const auto& g : groups) {
      if (g.solver == s && g.patch_size == size) return &g;
    }
    return nullptr;
  };
  struct Metric {
    const char* title;
    const SummaryStats GroupSummary::*member;
  };
  const Metric metrics[] = {{"Normalized spatial dispersion SD_est / SD_ref", &GroupSummary::sd_ratio},
                            {"Wasserstein-1 distance between normalized energy maps (m)", &GroupSummary::wasserstein1},
                            {"Ratio of l2 norms of energy maps", &GroupSummary::l2_ratio}};
  struct Row {
    const char* name;
    double SummaryStats::*member;
  };
  const Row rows[] = {{"mean", &SummaryStats::mean},
                      {"median", &SummaryStats::median},
                      {"std", &SummaryStats::stddev},
                      {"IQD", &SummaryStats::iqd}};
  std::ostringstream os;
  std::string size_label;
  for (std::size_t i = 0; i < sizes.size(); ++i) size_label += (i ? " / " : "") + std::to_string(sizes[i]);
  for (const auto& metric : metrics) {
    os << metric.title << "  (patch sizes " << size_label << ")\n";
    std::vector<std::vector<std::string>> cells;
    cells.push_back({""});
    for (const auto& s : solvers) cells[0].push_back(s);
    for (const auto& row : rows) {
      std::vector<std::string> line{row.name};
      for (const auto& s : solvers) {
        std::string cell;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
          const GroupSummary* g = find(s, sizes[i]);
          char buf[32] = "-";
          if (g != nullptr && std::isfinite((g->*metric.member).*row.member)) {
            std::snprintf(buf, sizeof buf, "%.3g", (g->*metric.member).*row.member);
          }
          cell += (i ? " / " : "") + std::string(buf);
        }
        line.push_back(cell);
      }
      cells.push_back(line);
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& line : cells) {
      for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
    }
    for (const auto& line : cells) {
      for (std::size_t c = 0; c < line.size(); ++c) {
        os << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << (c ? std::right : std::left) << line[c];
      }
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

struct ReportResult {
  std::vector<MetricRecord> records;
  std::vector<GroupSummary> groups;
  std::string tables;
};

/// Aggregates the stored records into metrics.csv, summary.json and tables.txt.
inline ReportResult report_run(const RunPaths& paths) {
  ReportResult r;
  r.records = collect_records(paths);
  if (r.records.empty()) throw ConfigError("no records found in " + paths.root.string());
  r.groups = summarize_records(r.records);
  r.tables = format_tables(r.groups);
  write_text(paths.root / "metrics.csv", metrics_csv(r.records));
  write_json(paths.root / "summary.json", summary_json(r.groups));
  write_text(paths.root / "tables.txt", r.tables);
  return r;
}

/// simulate + solve + report in one run directory.
inline ReportResult sweep_run(const RunPaths& paths, const RunConfig& config, const SolveOptions& opts,
                              Logger& log) {
  log.line("building workspace");
  const Workspace ws = Workspace::synthesize(config);
  write_run_header(paths, ws, "sweep");
  simulate_scenarios(paths, ws, opts.threads, log);
  solve_run(paths, ws, opts, log);
  return report_run(paths);
}

// ---------------------------------------------------------------------------
// Frame diagnostics

struct FrameDiagnostics {
  int num_vertices = 0;
  KernelSpec spec;
  FrameBounds bounds;
};

inline FrameDiagnostics diagnose_frame(const RunConfig& config) {
  const TriangleMesh mesh = make_mesh(config.mesh);
  const CorticalGraph graph = build_graph(mesh);
  const LaplacianSpectrum spectrum = eigendecompose(graph, config.frame.max_vertices);
  FrameDiagnostics d;
  d.num_vertices = mesh.num_vertices();
  d.spec = design_scales(spectrum.lambda_max(), config.frame.cutoff_divisor, config.frame.num_scales);
  d.bounds = frame_bounds(spectrum, d.spec);
  return d;
}

inline Json to_json(const FrameDiagnostics& d) {
  return Json{{"num_vertices", d.num_vertices},
              {"K", d.spec.cutoff_divisor},
              {"num_scales", d.spec.num_scales},
              {"lambda_max", d.spec.lambda_max},
              {"lambda_min", d.spec.lambda_min},
              {"scales", d.spec.scales},
              {"quality_factor", d.spec.quality_factor},
              {"frame_bound_A", d.bounds.lower},
              {"frame_bound_B", d.bounds.upper},
              {"sqrt_A", std::sqrt(d.bounds.lower)},
              {"sqrt_B", std::sqrt(d.bounds.upper)}};
}

}  // namespace sgwinv
