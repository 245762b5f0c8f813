// Simulates one patch on a small icosphere and compares MNE, MCE and sgw-SBL.

#include <cstdio>

#include <sgwinv/pipeline.hpp>

int main() {
  using namespace sgwinv;
  Json j = {{"mesh", {{"icosphere", {{"subdivisions", 3}, {"radius", 0.07}}}}},
            {"sweep", {{"patches_per_size", 1}, {"sizes", {50}}, {"psnr", 5.0}}},
            {"solvers", {"mne", "mce", "sgw-sbl"}}};
  const RunConfig config = parse_config(j);
  const Workspace ws = Workspace::synthesize(config);
  const PatchScenario sc = simulate_key(ws, {50, 0});
  const WhitenedProblem p = ws.problem(sc.data);
  const ScenarioReference ref = make_reference(ws, sc, p);
  std::printf("N=%d J=%d beta=%.3g\n", ws.mesh().num_vertices(), p.num_channels(), sc.beta);
  std::printf("%-8s %10s %10s %10s\n", "solver", "SD ratio", "W1 (mm)", "l2 ratio");
  for (const auto& spec : config.solvers) {
    ResolvedWeights w;
    const SourceEstimate est = run_solver(spec, ws, p, w);
    const EstimateMetrics m = score_estimate(ws, ref, sc, est.sources);
    std::printf("%-8s %10.3f %10.3f %10.3f\n", spec.label.c_str(), m.sd_ratio, 1e3 * m.wasserstein1, m.l2_ratio);
  }
  return 0;
}
