#include <catch_amalgamated.hpp>

#include <cmath>

#include <sgwinv/graph.hpp>
#include <sgwinv/mesh.hpp>
#include <sgwinv/solvers/mce.hpp>
#include <sgwinv/solvers/mne.hpp>
#include <sgwinv/solvers/svbsccd.hpp>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace sgwinv;
using testing_helpers::random_matrix;
using Catch::Matchers::WithinAbs;

TEST_CASE("two-vertex instance matches a grid-search oracle") {
  const CorticalGraph graph = build_graph_from_edges(2, {{0, 1}});
  const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2);
  Eigen::MatrixXd z(2, 1);
  z << 3.0, 1.0;
  for (auto [lambda, mu] : {std::pair{0.5, 0.3}, std::pair{2.0, 0.1}, std::pair{0.2, 1.5}}) {
    auto objective = [&](double a, double b) {
      return 0.5 * ((3 - a) * (3 - a) + (1 - b) * (1 - b)) + lambda * std::abs(a - b) + mu * (std::abs(a) + std::abs(b));
    };
    const oracles::GridMin oracle = oracles::grid_minimize(objective, -2.0, 5.0);
    SolverConfig cfg;
    cfg.max_iters = 200000;
    cfg.tol_rel = 1e-12;
    const PrimalDualResult r = solve_sparse_tv(g, graph.gradient, z, lambda, mu, cfg);
    CHECK(r.converged);
    CHECK_THAT(r.s(0, 0), WithinAbs(oracle.s1, 1e-4));
    CHECK_THAT(r.s(1, 0), WithinAbs(oracle.s2, 1e-4));
    CHECK_THAT(r.objective, WithinAbs(oracle.value, 1e-4));
  }
}

TEST_CASE("lambda = 0 reduces to MCE") {
  const CorticalGraph graph = build_graph(generate_icosphere(1, 0.07));
  std::mt19937_64 rng(13);
  const Eigen::MatrixXd g = random_matrix(8, graph.num_vertices, rng), z = random_matrix(8, 3, rng);
  const double mu = lambda_from_max_correlation(g, z, 0.3);

  SolverConfig lasso_cfg;
  lasso_cfg.lambda = mu;
  lasso_cfg.max_iters = 200000;
  lasso_cfg.tol_abs = 1e-7;
  const LassoResult ref = solve_lasso(g, z, mu, lasso_cfg);
  REQUIRE(ref.converged);

  SolverConfig cfg;
  cfg.max_iters = 400000;
  cfg.tol_rel = 1e-13;
  const PrimalDualResult r = solve_sparse_tv(g, graph.gradient, z, 0.0, mu, cfg);
  CHECK((r.s - ref.x).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(r.objective - ref.objective) <= 1e-6 * std::max(1.0, ref.objective));
}

TEST_CASE("mu = 0 recovers constants on a connected graph") {
  const CorticalGraph graph = build_graph(generate_icosphere(1, 0.07));
  const int n = graph.num_vertices;
  const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Constant(n, 1, 2.5);
  SolverConfig cfg;
  cfg.max_iters = 20000;
  cfg.tol_rel = 1e-10;
  const PrimalDualResult r = solve_sparse_tv(g, graph.gradient, z, 0.7, 0.0, cfg);
  CHECK(r.converged);
  CHECK((r.s.array() - r.s(0, 0)).abs().maxCoeff() < 1e-6);
  CHECK((graph.gradient * r.s).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sVB-SCCD beats the zero and MNE solutions") {
  const CorticalGraph graph = build_graph(generate_icosphere(2, 0.07));
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd g = random_matrix(12, graph.num_vertices, rng), z = random_matrix(12, 4, rng);
  const double scale = (g.transpose() * z).cwiseAbs().maxCoeff();
  const double lambda = 0.02 * scale, mu = 0.05 * scale;
  SolverConfig cfg;
  cfg.max_iters = 3000;
  const PrimalDualResult r = solve_sparse_tv(g, graph.gradient, z, lambda, mu, cfg);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(graph.num_vertices, 4);
  CHECK(r.objective <= svbsccd_objective(g, graph.gradient, z, zero, lambda, mu));
  CHECK(r.objective <= svbsccd_objective(g, graph.gradient, z, ridge_solution(g, z, lambda), lambda, mu));
  CHECK(r.s.allFinite());
  CHECK(static_cast<int>(r.objective_trace.size()) >= 1);
}

TEST_CASE("sVB-SCCD rejects invalid weights") {
  const CorticalGraph graph = build_graph_from_edges(2, {{0, 1}});
  const Eigen::MatrixXd g = Eigen::MatrixXd::Identity(2, 2), z = Eigen::MatrixXd::Ones(2, 1);
  SolverConfig cfg;
  CHECK_THROWS_AS(solve_sparse_tv(g, graph.gradient, z, 0.0, 0.0, cfg), ConfigError);
  CHECK_THROWS_AS(solve_sparse_tv(g, graph.gradient, z, -1.0, 1.0, cfg), ConfigError);
}
