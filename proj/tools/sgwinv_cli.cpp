// sgwinv: command-line driver for mesh/frame diagnostics, scenario sweeps,
// solver runs and metric reports.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <sgwinv/pipeline.hpp>

namespace {

using namespace sgwinv;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
  bool quiet = false;
};

RunConfig load_or_default(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? parse_config(Json::object()) : load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) {
    if (*f.threads < 0) throw ConfigError("--threads must be >= 0");
    c.threads = *f.threads;
  }
  return c;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config = true) {
  if (with_config) cmd->add_option("--config", f.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed (overrides the config)");
  cmd->add_option("--threads", f.threads, "worker threads, 0 = all cores");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--quiet", f.quiet, "suppress progress lines");
}

void print_tables(const ReportResult& r) { std::cout << r.tables; }

int cmd_mesh_info(const CommonFlags& f) {
  const RunConfig c = load_or_default(f);
  const TriangleMesh mesh = make_mesh(c.mesh);
  const CorticalGraph g = build_graph(mesh);
  double total = 0.0;
  for (const auto& [u, v] : g.edges) total += (mesh.vertex(u) - mesh.vertex(v)).norm();
  Json j{{"vertices", mesh.num_vertices()},
         {"triangles", mesh.num_triangles()},
         {"edges", g.num_edges()},
         {"euler_characteristic", mesh.num_vertices() - g.num_edges() + mesh.num_triangles()},
         {"min_degree", g.degrees.minCoeff()},
         {"max_degree", g.degrees.maxCoeff()},
         {"mean_edge_length", g.num_edges() ? total / g.num_edges() : 0.0},
         {"bounding_radius", mesh.bounding_radius()}};
  std::cout << j.dump(2) << '\n';
  if (!f.out.empty()) {
    create_dirs(f.out);
    write_json(fs::path(f.out) / "mesh_info.json", j);
  }
  return 0;
}

int cmd_diagnose_frame(const CommonFlags& f, int curve_points) {
  const RunConfig c = load_or_default(f);
  const FrameDiagnostics d = diagnose_frame(c);
  const Json j = to_json(d);
  std::cout << j.dump(2) << '\n';
  if (!f.out.empty()) {
    create_dirs(f.out);
    write_json(fs::path(f.out) / "frame.json", j);
    std::ofstream curves(fs::path(f.out) / "kernel_curves.csv");
    if (!curves) throw IoError("cannot write kernel_curves.csv");
    write_kernel_curves(curves, d.spec, curve_points);
  }
  return 0;
}

int cmd_simulate(const CommonFlags& f) {
  const RunConfig c = load_or_default(f);
  Logger log;
  log.quiet = f.quiet;
  const RunPaths paths{resolve_run_dir(c, f.out)};
  log.line("building workspace");
  const Workspace ws = Workspace::synthesize(c);
  write_run_header(paths, ws, "simulate");
  simulate_scenarios(paths, ws, c.threads, log);
  std::cout << paths.root.string() << '\n';
  return 0;
}

int cmd_solve(const CommonFlags& f, const std::string& run_dir, const std::vector<std::string>& only,
              bool save_sources) {
  Logger log;
  log.quiet = f.quiet;
  const RunPaths paths{run_dir};
  const Workspace ws = open_run(paths);
  SolveOptions opts;
  opts.threads = f.threads ? *f.threads : ws.config().threads;
  opts.only = only;
  opts.save_sources = save_sources;
  solve_run(paths, ws, opts, log);
  return 0;
}

int cmd_report(const std::string& run_dir) {
  print_tables(report_run(RunPaths{run_dir}));
  return 0;
}

int cmd_sweep(const CommonFlags& f, bool save_sources) {
  const RunConfig c = load_or_default(f);
  Logger log;
  log.quiet = f.quiet;
  const RunPaths paths{resolve_run_dir(c, f.out)};
  SolveOptions opts;
  opts.threads = c.threads;
  opts.save_sources = save_sources;
  print_tables(sweep_run(paths, c, opts, log));
  std::cout << "run directory: " << paths.root.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-wavelet regularized source imaging: simulation, inversion and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  CommonFlags common;
  int curve_points = 512;
  std::string run_dir;
  std::vector<std::string> only;
  bool save_sources = false;

  auto* simulate = app.add_subcommand("simulate", "synthesize forward model and scenarios into a run directory");
  add_common(simulate, common);

  auto* solve = app.add_subcommand("solve", "run the configured solvers on every scenario of a run directory");
  solve->add_option("run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);
  solve->add_option("--solver", only, "restrict to these solver labels")->delimiter(',');
  solve->add_option("--threads", common.threads, "worker threads, 0 = all cores");
  solve->add_flag("--save-sources", save_sources, "also write each source estimate as a matrix");
  solve->add_flag("--quiet", common.quiet, "suppress progress lines");

  auto* sweep = app.add_subcommand("sweep", "simulate, solve and report in one run directory");
  add_common(sweep, common);
  sweep->add_flag("--save-sources", save_sources, "also write each source estimate as a matrix");

  auto* report = app.add_subcommand("report", "aggregate estimate records into CSV, JSON and text tables");
  report->add_option("run", run_dir, "run directory")->required()->check(CLI::ExistingDirectory);

  auto* frame = app.add_subcommand("diagnose-frame", "kernel curves, frame bounds and quality factor");
  add_common(frame, common);
  frame->add_option("--points", curve_points, "samples per kernel curve")->check(CLI::PositiveNumber);

  auto* info = app.add_subcommand("mesh-info", "mesh and graph statistics");
  add_common(info, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::config);
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*solve) return cmd_solve(common, run_dir, only, save_sources);
    if (*sweep) return cmd_sweep(common, save_sources);
    if (*report) return cmd_report(run_dir);
    if (*frame) return cmd_diagnose_frame(common, curve_points);
    if (*info) return cmd_mesh_info(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(ErrorKind::io);
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory (lower the mesh resolution)\n";
    return exit_code(ErrorKind::numerical);
  }
  return 0;
}
