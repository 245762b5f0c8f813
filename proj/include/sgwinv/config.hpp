#pragma once

// Run configuration: mesh, frame, forward model, sweep and solver settings,
// parsed from JSON with defaults and validated.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "solvers/common.hpp"
#include "solvers/sbl.hpp"

namespace sgwinv {

using Json = nlohmann::json;

inline constexpr const char* kLibraryVersion = "0.3.0";

struct MeshSpec {
  std::string file;  // OFF path; empty selects the icosphere
  int subdivisions = 4;
  double radius = 0.07;
};

struct FrameSpec {
  double cutoff_divisor = 16.0;
  int num_scales = 3;
  int max_vertices = 5000;
};

struct ForwardSpec {
  int sensors = 60;
  double sensor_radius = 0.12;
  std::array<double, 3> sensor_center{0.012, -0.018, -0.027};
  double noise_condition = 100.0;
  double noise_variance = 1.0;
  double whitening_tau = 1e-8;
};

struct SweepSpec {
  int patches_per_size = 30;
  std::vector<int> sizes{10, 100};
  double psnr = 5.0;
  int samples = 100;
  int window_first = 50;
  int window_last = 99;
};

enum class LambdaRule { fixed, snr, max_correlation };

inline std::string to_string(LambdaRule r) {
  switch (r) {
    case LambdaRule::fixed: return "fixed";
    case LambdaRule::snr: return "snr";
    case LambdaRule::max_correlation: return "max-correlation";
  }
  return "fixed";
}

inline LambdaRule parse_lambda_rule(const std::string& s) {
  if (s == "fixed") return LambdaRule::fixed;
  if (s == "snr") return LambdaRule::snr;
  if (s == "max-correlation") return LambdaRule::max_correlation;
  throw ConfigError("unknown lambda rule '" + s + "' (expected fixed, snr or max-correlation)");
}

inline const std::vector<std::string>& solver_names() {
  static const std::vector<std::string> names{"mne", "sgw-mne", "mce", "sgw-mce", "svb-sccd", "sbl", "sgw-sbl"};
  return names;
}

/// One configured estimator. `label` names it in records and tables.
struct SolverSpec {
  std::string name;
  std::string label;
  LambdaRule lambda_rule = LambdaRule::snr;
  double lambda = 0.0;               // fixed rule
  std::optional<double> rho;         // snr rule; estimated from the data when absent
  double ratio = 0.1;                // max-correlation rule
  std::optional<double> mu;          // svb-sccd: fixed l1 weight
  double mu_ratio = 0.1;             // svb-sccd: mu = mu_ratio * max|G^T Z| when mu is absent
  SblAlgorithm algorithm = SblAlgorithm::champagne;
  SolverConfig settings;

  bool uses_frame() const { return name.rfind("sgw-", 0) == 0; }
};

struct RunConfig {
  MeshSpec mesh;
  FrameSpec frame;
  ForwardSpec forward;
  SweepSpec sweep;
  std::vector<SolverSpec> solvers;
  std::uint64_t seed = 20240501;
  int threads = 0;  // 0: hardware concurrency
  std::string output;

  bool needs_frame() const {
    for (const auto& s : solvers) {
      if (s.uses_frame()) return true;
    }
    return false;
  }
};

namespace detail {

template <class T>
void read_opt(const Json& j, const char* key, T& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(ctx + "." + key + ": " + e.what());
  }
}

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ConfigError(ctx + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace detail

inline std::vector<SolverSpec> default_solvers() {
  std::vector<SolverSpec> out(4);
  out[0].name = "mne";
  out[1].name = "sgw-sbl";
  out[2].name = "mce";
  out[2].lambda_rule = LambdaRule::max_correlation;
  out[2].ratio = 0.1;
  out[3].name = "svb-sccd";
  out[3].lambda_rule = LambdaRule::max_correlation;
  out[3].ratio = 0.02;
  out[3].mu_ratio = 0.05;
  for (auto& s : out) s.label = s.name;
  return out;
}

inline SolverSpec parse_solver(const Json& j, const std::string& ctx) {
  SolverSpec s;
  if (j.is_string()) {
    s.name = j.get<std::string>();
  } else {
    detail::check_keys(j,
                       {"name", "label", "lambda_rule", "lambda", "rho", "ratio", "mu", "mu_ratio", "algorithm",
                        "max_iters", "tol_rel", "tol_abs", "prune_eps"},
                       ctx);
    detail::read_opt(j, "name", s.name, ctx);
  }
  bool known = false;
  for (const auto& n : solver_names()) known = known || n == s.name;
  if (!known) throw ConfigError(ctx + ": unknown solver '" + s.name + "'");
  if (s.name == "mce" || s.name == "sgw-mce" || s.name == "svb-sccd") s.lambda_rule = LambdaRule::max_correlation;
  if (s.name == "svb-sccd") s.ratio = 0.02, s.mu_ratio = 0.05;
  s.label = s.name;
  if (j.is_object()) {
    detail::read_opt(j, "label", s.label, ctx);
    std::string rule = to_string(s.lambda_rule);
    detail::read_opt(j, "lambda_rule", rule, ctx);
    s.lambda_rule = parse_lambda_rule(rule);
    detail::read_opt(j, "lambda", s.lambda, ctx);
    if (j.contains("rho")) {
      double rho = 0.0;
      detail::read_opt(j, "rho", rho, ctx);
      s.rho = rho;
    }
    detail::read_opt(j, "ratio", s.ratio, ctx);
    if (j.contains("mu")) {
      double mu = 0.0;
      detail::read_opt(j, "mu", mu, ctx);
      s.mu = mu;
    }
    detail::read_opt(j, "mu_ratio", s.mu_ratio, ctx);
    std::string algo = to_string(s.algorithm);
    detail::read_opt(j, "algorithm", algo, ctx);
    s.algorithm = parse_sbl_algorithm(algo);
    detail::read_opt(j, "max_iters", s.settings.max_iters, ctx);
    detail::read_opt(j, "tol_rel", s.settings.tol_rel, ctx);
    detail::read_opt(j, "tol_abs", s.settings.tol_abs, ctx);
    detail::read_opt(j, "prune_eps", s.settings.prune_eps, ctx);
  }
  if (s.label.empty()) throw ConfigError(ctx + ": label must not be empty");
  if (s.lambda_rule == LambdaRule::fixed && !(s.lambda > 0.0)) throw ConfigError(ctx + ": fixed lambda must be > 0");
  if (s.lambda_rule == LambdaRule::snr && s.rho && !(*s.rho > 1.0)) throw ConfigError(ctx + ": rho must exceed 1");
  if (s.lambda_rule == LambdaRule::max_correlation && !(s.ratio > 0.0 && s.ratio < 1.0)) {
    throw ConfigError(ctx + ": ratio must lie in (0, 1)");
  }
  if (s.mu && !(*s.mu >= 0.0)) throw ConfigError(ctx + ": mu must be >= 0");
  if (!(s.mu_ratio >= 0.0)) throw ConfigError(ctx + ": mu_ratio must be >= 0");
  s.settings.validate();
  return s;
}

inline void validate(const RunConfig& c) {
  if (c.mesh.file.empty()) {
    if (c.mesh.subdivisions < 0 || c.mesh.subdivisions > 6) throw ConfigError("mesh.icosphere.subdivisions must lie in [0, 6]");
    if (!(c.mesh.radius > 0.0)) throw ConfigError("mesh.icosphere.radius must be positive");
  } else if (!std::filesystem::exists(c.mesh.file)) {
    throw ConfigError("mesh file not found: " + c.mesh.file);
  }
  if (!(c.frame.cutoff_divisor > 1.0)) throw ConfigError("frame.K must exceed 1");
  if (c.frame.num_scales < 1) throw ConfigError("frame.num_scales must be >= 1");
  if (c.frame.max_vertices < 1) throw ConfigError("frame.max_vertices must be >= 1");
  if (c.forward.sensors < 1) throw ConfigError("forward.sensors must be >= 1");
  if (!(c.forward.sensor_radius > 0.0)) throw ConfigError("forward.sensor_radius must be positive");
  if (!(c.forward.noise_condition >= 1.0)) throw ConfigError("forward.noise_condition must be >= 1");
  if (!(c.forward.noise_variance > 0.0)) throw ConfigError("forward.noise_variance must be positive");
  if (!(c.forward.whitening_tau > 0.0 && c.forward.whitening_tau < 1.0)) {
    throw ConfigError("forward.whitening_tau must lie in (0, 1)");
  }
  const auto& s = c.sweep;
  if (s.patches_per_size < 1) throw ConfigError("sweep.patches_per_size must be >= 1");
  if (s.sizes.empty()) throw ConfigError("sweep.sizes must not be empty");
  for (int size : s.sizes) {
    if (size < 1) throw ConfigError("sweep.sizes entries must be >= 1");
  }
  if (!(s.psnr > 0.0)) throw ConfigError("sweep.psnr must be positive");
  if (s.samples < 1) throw ConfigError("sweep.samples must be >= 1");
  if (s.window_first < 0 || s.window_last < s.window_first || s.window_last >= s.samples) {
    throw ConfigError("sweep.window must satisfy 0 <= first <= last < samples");
  }
  if (c.solvers.empty()) throw ConfigError("at least one solver is required");
  for (std::size_t i = 0; i < c.solvers.size(); ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      if (c.solvers[i].label == c.solvers[k].label) throw ConfigError("duplicate solver label '" + c.solvers[i].label + "'");
    }
  }
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
}

inline RunConfig parse_config(const Json& j) {
  RunConfig c;
  c.solvers = default_solvers();
  detail::check_keys(j, {"mesh", "frame", "forward", "sweep", "solvers", "seed", "threads", "output"}, "config");
  if (j.contains("mesh")) {
    const Json& m = j.at("mesh");
    detail::check_keys(m, {"icosphere", "file"}, "mesh");
    if (m.contains("icosphere") && m.contains("file")) throw ConfigError("mesh: give either icosphere or file");
    if (m.contains("icosphere")) {
      detail::check_keys(m.at("icosphere"), {"subdivisions", "radius"}, "mesh.icosphere");
      detail::read_opt(m.at("icosphere"), "subdivisions", c.mesh.subdivisions, "mesh.icosphere");
      detail::read_opt(m.at("icosphere"), "radius", c.mesh.radius, "mesh.icosphere");
    }
    detail::read_opt(m, "file", c.mesh.file, "mesh");
  }
  if (j.contains("frame")) {
    const Json& f = j.at("frame");
    detail::check_keys(f, {"K", "num_scales", "max_vertices"}, "frame");
    detail::read_opt(f, "K", c.frame.cutoff_divisor, "frame");
    detail::read_opt(f, "num_scales", c.frame.num_scales, "frame");
    detail::read_opt(f, "max_vertices", c.frame.max_vertices, "frame");
  }
  if (j.contains("forward")) {
    const Json& f = j.at("forward");
    detail::check_keys(f, {"sensors", "sensor_radius", "sensor_center", "noise_condition", "noise_variance",
                           "whitening_tau"},
                       "forward");
    detail::read_opt(f, "sensors", c.forward.sensors, "forward");
    detail::read_opt(f, "sensor_radius", c.forward.sensor_radius, "forward");
    detail::read_opt(f, "sensor_center", c.forward.sensor_center, "forward");
    detail::read_opt(f, "noise_condition", c.forward.noise_condition, "forward");
    detail::read_opt(f, "noise_variance", c.forward.noise_variance, "forward");
    detail::read_opt(f, "whitening_tau", c.forward.whitening_tau, "forward");
  }
  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    detail::check_keys(s, {"patches_per_size", "sizes", "psnr", "samples", "window"}, "sweep");
    detail::read_opt(s, "patches_per_size", c.sweep.patches_per_size, "sweep");
    detail::read_opt(s, "sizes", c.sweep.sizes, "sweep");
    detail::read_opt(s, "psnr", c.sweep.psnr, "sweep");
    detail::read_opt(s, "samples", c.sweep.samples, "sweep");
    if (s.contains("window")) {
      std::array<int, 2> w{};
      detail::read_opt(s, "window", w, "sweep");
      c.sweep.window_first = w[0];
      c.sweep.window_last = w[1];
    } else {
      c.sweep.window_first = c.sweep.samples / 2;
      c.sweep.window_last = c.sweep.samples - 1;
    }
  }
  if (j.contains("solvers")) {
    const Json& list = j.at("solvers");
    if (!list.is_array()) throw ConfigError("solvers must be an array");
    c.solvers.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      c.solvers.push_back(parse_solver(list[i], "solvers[" + std::to_string(i) + "]"));
    }
  }
  detail::read_opt(j, "seed", c.seed, "config");
  detail::read_opt(j, "threads", c.threads, "config");
  detail::read_opt(j, "output", c.output, "config");
  validate(c);
  return c;
}

inline Json to_json(const SolverSpec& s) {
  Json j{{"name", s.name},
         {"label", s.label},
         {"lambda_rule", to_string(s.lambda_rule)},
         {"lambda", s.lambda},
         {"ratio", s.ratio},
         {"mu_ratio", s.mu_ratio},
         {"algorithm", to_string(s.algorithm)},
         {"max_iters", s.settings.max_iters},
         {"tol_rel", s.settings.tol_rel},
         {"tol_abs", s.settings.tol_abs},
         {"prune_eps", s.settings.prune_eps}};
  if (s.rho) j["rho"] = *s.rho;
  if (s.mu) j["mu"] = *s.mu;
  return j;
}

/// Fully resolved configuration (defaults filled in); parse_config(to_json(c)) == c.
inline Json to_json(const RunConfig& c) {
  Json mesh;
  if (c.mesh.file.empty()) {
    mesh["icosphere"] = {{"subdivisions", c.mesh.subdivisions}, {"radius", c.mesh.radius}};
  } else {
    mesh["file"] = c.mesh.file;
  }
  Json solvers = Json::array();
  for (const auto& s : c.solvers) solvers.push_back(to_json(s));
  return Json{{"mesh", mesh},
              {"frame", {{"K", c.frame.cutoff_divisor}, {"num_scales", c.frame.num_scales}, {"max_vertices", c.frame.max_vertices}}},
              {"forward",
               {{"sensors", c.forward.sensors},
                {"sensor_radius", c.forward.sensor_radius},
                {"sensor_center", c.forward.sensor_center},
                {"noise_condition", c.forward.noise_condition},
                {"noise_variance", c.forward.noise_variance},
                {"whitening_tau", c.forward.whitening_tau}}},
              {"sweep",
               {{"patches_per_size", c.sweep.patches_per_size},
                {"sizes", c.sweep.sizes},
                {"psnr", c.sweep.psnr},
                {"samples", c.sweep.samples},
                {"window", {c.sweep.window_first, c.sweep.window_last}}}},
              {"solvers", solvers},
              {"seed", c.seed},
              {"threads", c.threads},
              {"output", c.output}};
}

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_json_file(path)); }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

/// Hash of the resolved configuration, ignoring thread count and output path
/// (neither changes results).
inline std::string config_hash(const RunConfig& c) {
  Json j = to_json(c);
  j.erase("threads");
  j.erase("output");
  return hex64(fnv1a(j.dump()));
}

}  // namespace sgwinv
