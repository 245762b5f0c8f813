#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace sgwinv {

using Point3 = Eigen::Vector3d;
using Triangle = std::array<int, 3>;
using Edge = std::pair<int, int>;

namespace detail {

inline int find_root(std::vector<int>& parent, int v) {
  while (parent[v] != v) {
    parent[v] = parent[parent[v]];
    v = parent[v];
  }
  return v;
}

}  // namespace detail

/// Triangulated surface. Construction validates index ranges, rejects
/// degenerate and duplicate triangles, and requires a single edge-connected
/// component.
class TriangleMesh {
public:
  TriangleMesh(std::vector<Point3> vertices, std::vector<Triangle> triangles)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    validate();
  }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  const std::vector<Point3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Point3& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }

  /// Unique undirected edges (k < k'), sorted lexicographically.
  std::vector<Edge> edges() const {
    std::set<Edge> unique;
    for (const auto& t : triangles_) {
      for (int a = 0; a < 3; ++a) {
        int u = t[a], v = t[(a + 1) % 3];
        unique.emplace(std::min(u, v), std::max(u, v));
      }
    }
    return {unique.begin(), unique.end()};
  }

  Point3 centroid() const {
    Point3 c = Point3::Zero();
    for (const auto& v : vertices_) c += v;
    return c / static_cast<double>(vertices_.size());
  }

  /// Radius of the smallest centroid-centred ball containing every vertex.
  double bounding_radius() const {
    const Point3 c = centroid();
    double r = 0.0;
    for (const auto& v : vertices_) r = std::max(r, (v - c).norm());
    return r;
  }

private:
  void validate() const {
    const int n = num_vertices();
    if (n == 0) throw ConfigError("mesh has no vertices");
    if (triangles_.empty()) throw ConfigError("mesh has no triangles");
    std::set<Triangle> seen;
    for (std::size_t f = 0; f < triangles_.size(); ++f) {
      const auto& t = triangles_[f];
      for (int idx : t) {
        if (idx < 0 || idx >= n) {
          throw ConfigError("triangle " + std::to_string(f) + ": vertex index " +
                            std::to_string(idx) + " out of range (N=" + std::to_string(n) + ")");
        }
      }
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
        throw ConfigError("triangle " + std::to_string(f) + ": repeated vertex index");
      }
      Triangle key = t;
      std::sort(key.begin(), key.end());
      if (!seen.insert(key).second) {
        throw ConfigError("triangle " + std::to_string(f) + ": duplicate triangle");
      }
    }
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    for (const auto& t : triangles_) {
      for (int a = 0; a < 3; ++a) {
        int ra = detail::find_root(parent, t[a]);
        int rb = detail::find_root(parent, t[(a + 1) % 3]);
        if (ra != rb) parent[ra] = rb;
      }
    }
    const int root = detail::find_root(parent, 0);
    for (int v = 1; v < n; ++v) {
      if (detail::find_root(parent, v) != root) {
        throw ConfigError("mesh is disconnected: vertex " + std::to_string(v) +
                          " is not edge-connected to vertex 0");
      }
    }
  }

  std::vector<Point3> vertices_;
  std::vector<Triangle> triangles_;
};

// ---------------------------------------------------------------------------
// OFF I/O

namespace detail {

/// Yields non-empty, comment-stripped lines together with their 1-based line number.
class OffLineReader {
public:
  explicit OffLineReader(std::istream& is) : is_(is) {}

  bool next(std::string& line) {
    std::string raw;
    while (std::getline(is_, raw)) {
      ++lineno_;
      if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
      if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
      line = raw;
      return true;
    }
    return false;
  }

  int lineno() const { return lineno_; }

private:
  std::istream& is_;
  int lineno_ = 0;
};

}  // namespace detail

inline TriangleMesh read_off(std::istream& is, const std::string& origin = "<stream>") {
  detail::OffLineReader reader(is);
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError(origin + ":" + std::to_string(reader.lineno()) + ": " + msg);
  };

  std::string line;
  if (!reader.next(line)) throw fail("empty file");
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "OFF") throw fail("expected 'OFF' header, got '" + tag + "'");

  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!reader.next(line)) throw fail("missing counts line");
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) throw fail("malformed counts line");
    counts >> ne;
  } else if (!(header >> nf)) {
    throw fail("malformed counts on header line");
  }
  if (nv <= 0 || nf <= 0) throw fail("vertex and face counts must be positive");

  std::vector<Point3> vertices;
  vertices.reserve(static_cast<std::size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    if (!reader.next(line)) throw fail("unexpected end of file in vertex list");
    std::istringstream vs(line);
    double x, y, z;
    if (!(vs >> x >> y >> z)) throw fail("malformed vertex line");
    vertices.emplace_back(x, y, z);
  }

  std::vector<Triangle> triangles;
  triangles.reserve(static_cast<std::size_t>(nf));
  for (long f = 0; f < nf; ++f) {
    if (!reader.next(line)) throw fail("unexpected end of file in face list");
    std::istringstream fs(line);
    int k;
    Triangle t;
    if (!(fs >> k)) throw fail("malformed face line");
    if (k != 3) throw fail("only triangular faces are supported (got " + std::to_string(k) + ")");
    if (!(fs >> t[0] >> t[1] >> t[2])) throw fail("malformed face line");
    for (int idx : t) {
      if (idx < 0 || idx >= nv) {
        throw fail("face vertex index " + std::to_string(idx) + " out of range (N=" +
                   std::to_string(nv) + ")");
      }
    }
    triangles.push_back(t);
  }

  try {
    return TriangleMesh(std::move(vertices), std::move(triangles));
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline TriangleMesh load_off(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open mesh file " + path.string());
  return read_off(is, path.string());
}

inline void write_off(std::ostream& os, const TriangleMesh& mesh) {
  os << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << " 0\n";
  os.precision(17);
  for (const auto& v : mesh.vertices()) os << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void save_off(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write_off(os, mesh);
  if (!os) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Generators and geometry

/// Subdivided icosahedron projected on a sphere; N = 10*4^s + 2.
/// Triangles are wound counter-clockwise seen from outside.
inline TriangleMesh generate_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 6) {
    throw ConfigError("icosphere subdivisions must lie in [0, 6]");
  }
  if (!(radius > 0.0)) throw ConfigError("icosphere radius must be positive");

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Point3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                           {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                           {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int level = 0; level < subdivisions; ++level) {
    std::map<Edge, int> midpoint;
    auto mid = [&](int a, int b) {
      Edge key{std::min(a, b), std::max(a, b)};
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int ab = mid(tri[0], tri[1]), bc = mid(tri[1], tri[2]), ca = mid(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  for (auto& p : v) p *= radius;
  return TriangleMesh(std::move(v), std::move(f));
}

/// Dense N x N matrix of straight-line vertex distances.
inline Eigen::MatrixXd vertex_distances(const TriangleMesh& mesh) {
  const int n = mesh.num_vertices();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double dist = (mesh.vertex(i) - mesh.vertex(k)).norm();
      d(i, k) = dist;
      d(k, i) = dist;
    }
  }
  return d;
}

/// Area-weighted vertex normals, flipped globally if the winding points inward.
inline std::vector<Point3> vertex_normals(const TriangleMesh& mesh) {
  std::vector<Point3> normals(static_cast<std::size_t>(mesh.num_vertices()), Point3::Zero());
  for (const auto& t : mesh.triangles()) {
    const Point3 n = (mesh.vertex(t[1]) - mesh.vertex(t[0])).cross(mesh.vertex(t[2]) - mesh.vertex(t[0]));
    for (int idx : t) normals[static_cast<std::size_t>(idx)] += n;
  }
  const Point3 c = mesh.centroid();
  double outward = 0.0;
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    outward += normals[static_cast<std::size_t>(i)].dot(mesh.vertex(i) - c);
  }
  const double sign = outward < 0.0 ? -1.0 : 1.0;
  for (auto& n : normals) {
    const double len = n.norm();
    n = len > 0.0 ? Point3(sign * n / len) : Point3::UnitZ();
  }
  return normals;
}

}  // namespace sgwinv
