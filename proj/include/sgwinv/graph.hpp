#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "error.hpp"
#include "mesh.hpp"

namespace sgwinv {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Edge weighting scheme. Only binary weights are provided.
enum class EdgeWeights { binary };

/// Weighted mesh graph: adjacency A, degrees d, Laplacian L = D - A and the
/// signed edge gradient (one row per edge, +A at the lower index, -A at the upper).
struct CorticalGraph {
  int num_vertices = 0;
  std::vector<Edge> edges;
  SparseMatrix adjacency;
  Eigen::VectorXd degrees;
  SparseMatrix laplacian;
  SparseMatrix gradient;

  int num_edges() const { return static_cast<int>(edges.size()); }

  /// Neighbour lists in ascending vertex order.
  std::vector<std::vector<int>> neighbours() const {
    std::vector<std::vector<int>> nb(static_cast<std::size_t>(num_vertices));
    for (const auto& [u, v] : edges) {
      nb[static_cast<std::size_t>(u)].push_back(v);
      nb[static_cast<std::size_t>(v)].push_back(u);
    }
    for (auto& list : nb) std::sort(list.begin(), list.end());
    return nb;
  }
};

inline CorticalGraph build_graph_from_edges(int num_vertices, std::vector<Edge> edges,
                                            EdgeWeights weights = EdgeWeights::binary) {
  if (num_vertices <= 0) throw ConfigError("graph needs at least one vertex");
  for (auto& [u, v] : edges) {
    if (u == v) throw ConfigError("self-loop at vertex " + std::to_string(u));
    if (u < 0 || v < 0 || u >= num_vertices || v >= num_vertices) {
      throw ConfigError("edge endpoint out of range");
    }
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  auto weight_of = [weights](const Edge&) {
    switch (weights) {
      case EdgeWeights::binary: return 1.0;
    }
    return 1.0;
  };

  const int n = num_vertices;
  const int m = static_cast<int>(edges.size());
  std::vector<Eigen::Triplet<double>> adj, lap, grad;
  adj.reserve(2 * edges.size());
  lap.reserve(2 * edges.size() + static_cast<std::size_t>(n));
  grad.reserve(2 * edges.size());
  Eigen::VectorXd degrees = Eigen::VectorXd::Zero(n);
  for (int e = 0; e < m; ++e) {
    const auto [u, v] = edges[static_cast<std::size_t>(e)];
    const double w = weight_of(edges[static_cast<std::size_t>(e)]);
    adj.emplace_back(u, v, w);
    adj.emplace_back(v, u, w);
    lap.emplace_back(u, v, -w);
    lap.emplace_back(v, u, -w);
    degrees(u) += w;
    degrees(v) += w;
    grad.emplace_back(e, u, w);
    grad.emplace_back(e, v, -w);
  }
  for (int i = 0; i < n; ++i) lap.emplace_back(i, i, degrees(i));

  CorticalGraph g;
  g.num_vertices = n;
  g.edges = std::move(edges);
  g.degrees = std::move(degrees);
  g.adjacency.resize(n, n);
  g.adjacency.setFromTriplets(adj.begin(), adj.end());
  g.laplacian.resize(n, n);
  g.laplacian.setFromTriplets(lap.begin(), lap.end());
  g.gradient.resize(m, n);
  g.gradient.setFromTriplets(grad.begin(), grad.end());
  return g;
}

inline CorticalGraph build_graph(const TriangleMesh& mesh, EdgeWeights weights = EdgeWeights::binary) {
  return build_graph_from_edges(mesh.num_vertices(), mesh.edges(), weights);
}

/// Full Laplacian spectrum, eigenvalues ascending, eigenvectors as columns.
struct LaplacianSpectrum {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  int size() const { return static_cast<int>(eigenvalues.size()); }
  double lambda_max() const { return eigenvalues(eigenvalues.size() - 1); }
};

inline constexpr int kDefaultEigenCap = 5000;

inline LaplacianSpectrum eigendecompose(const CorticalGraph& graph, int max_vertices = kDefaultEigenCap) {
  if (graph.num_vertices > max_vertices) {
    throw ConfigError("graph has " + std::to_string(graph.num_vertices) +
                      " vertices, above the dense eigendecomposition cap of " +
                      std::to_string(max_vertices) + "; lower the mesh resolution");
  }
  const Eigen::MatrixXd dense = Eigen::MatrixXd(graph.laplacian);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success) throw NumericalError("Laplacian eigendecomposition failed");

  LaplacianSpectrum spectrum{solver.eigenvalues(), solver.eigenvectors()};
  // The Laplacian is PSD; clip rounding-level negatives.
  const double floor = 1e-12 * std::max(1.0, std::abs(spectrum.lambda_max()));
  for (Eigen::Index l = 0; l < spectrum.eigenvalues.size(); ++l) {
    if (spectrum.eigenvalues(l) < 0.0 && spectrum.eigenvalues(l) > -floor) spectrum.eigenvalues(l) = 0.0;
  }
  return spectrum;
}

}  // namespace sgwinv
