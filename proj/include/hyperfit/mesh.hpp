#pragma once

// Simplicial meshes: triangles (plane strain) in 2D, tetrahedra in 3D.
// Containers, geometric queries, a quality report, and a line-oriented text
// format whose save/load round-trip preserves coordinates bit-exactly.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hyperfit/common.hpp"

namespace hyperfit {

struct BoundaryFacet {
  std::array<int, 3> nodes{-1, -1, -1};  // third index unused (-1) in 2D
  std::string tag;
};

/// Immutable after construction. Node coordinates keep z = 0 in 2D so that
/// downstream kinematics can embed plane strain in 3x3 tensors directly.
struct Mesh {
  int dim = 2;
  std::vector<Vec3> nodes;
  std::vector<std::array<int, 4>> cells;  // fourth index unused (-1) in 2D
  std::vector<BoundaryFacet> facets;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_facets() const { return static_cast<int>(facets.size()); }
  int nodes_per_cell() const { return dim + 1; }
  int nodes_per_facet() const { return dim; }
};

// ---------------------------------------------------------------------------
// Geometric queries
// ---------------------------------------------------------------------------

/// Signed volume (area in 2D) of cell c; positive for correctly oriented cells.
inline double cell_volume(const Mesh& mesh, int c) {
  const auto& cell = mesh.cells[static_cast<std::size_t>(c)];
  const Vec3& a = mesh.nodes[static_cast<std::size_t>(cell[0])];
  const Vec3& b = mesh.nodes[static_cast<std::size_t>(cell[1])];
  const Vec3& d = mesh.nodes[static_cast<std::size_t>(cell[2])];
  if (mesh.dim == 2) {
    const Vec3 e1 = b - a, e2 = d - a;
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }
  const Vec3& e = mesh.nodes[static_cast<std::size_t>(cell[3])];
  return (b - a).cross(d - a).dot(e - a) / 6.0;
}

inline Vec3 cell_centroid(const Mesh& mesh, int c) {
  const auto& cell = mesh.cells[static_cast<std::size_t>(c)];
  Vec3 s = Vec3::Zero();
  for (int k = 0; k < mesh.nodes_per_cell(); ++k)
    s += mesh.nodes[static_cast<std::size_t>(cell[static_cast<std::size_t>(k)])];
  return s / mesh.nodes_per_cell();
}

inline Vec3 facet_centroid(const Mesh& mesh, const BoundaryFacet& f) {
  Vec3 s = Vec3::Zero();
  for (int k = 0; k < mesh.nodes_per_facet(); ++k)
    s += mesh.nodes[static_cast<std::size_t>(f.nodes[static_cast<std::size_t>(k)])];
  return s / mesh.nodes_per_facet();
}

/// Length (2D) or area (3D) of a boundary facet.
inline double facet_measure(const Mesh& mesh, const BoundaryFacet& f) {
  const Vec3& a = mesh.nodes[static_cast<std::size_t>(f.nodes[0])];
  const Vec3& b = mesh.nodes[static_cast<std::size_t>(f.nodes[1])];
  if (mesh.dim == 2) return (b - a).norm();
  const Vec3& c = mesh.nodes[static_cast<std::size_t>(f.nodes[2])];
  return 0.5 * (b - a).cross(c - a).norm();
}

/// Unit normal from the stored node order: in 2D the edge tangent rotated
/// clockwise, in 3D the right-handed cross product. Generators orient facet
/// nodes so this points out of the body (in the reference configuration).
inline Vec3 facet_unit_normal(const Mesh& mesh, const BoundaryFacet& f) {
  const Vec3& a = mesh.nodes[static_cast<std::size_t>(f.nodes[0])];
  const Vec3& b = mesh.nodes[static_cast<std::size_t>(f.nodes[1])];
  if (mesh.dim == 2) {
    const Vec3 t = b - a;
    Vec3 n(t.y(), -t.x(), 0.0);
    return n / n.norm();
  }
  const Vec3& c = mesh.nodes[static_cast<std::size_t>(f.nodes[2])];
  Vec3 n = (b - a).cross(c - a);
  return n / n.norm();
}

namespace meshdetail {

/// Sorted node tuple identifying a facet independent of orientation.
inline std::array<int, 3> facet_key(const int* nodes, int n) {
  std::array<int, 3> k{-1, -1, -1};
  for (int i = 0; i < n; ++i) k[static_cast<std::size_t>(i)] = nodes[i];
  if (k[0] > k[1]) std::swap(k[0], k[1]);
  if (n == 3) {
    if (k[1] > k[2]) std::swap(k[1], k[2]);
    if (k[0] > k[1]) std::swap(k[0], k[1]);
  }
  return k;
}

/// Nodes of the face of `cell` opposite local node k.
inline std::array<int, 3> cell_face(const std::array<int, 4>& cell, int npc, int k) {
  std::array<int, 3> f{-1, -1, -1};
  int m = 0;
  for (int i = 0; i < npc; ++i)
    if (i != k) f[static_cast<std::size_t>(m++)] = cell[static_cast<std::size_t>(i)];
  return f;
}

/// Map from facet key to (occurrence count, last owning cell).
inline std::map<std::array<int, 3>, std::pair<int, int>> face_incidence(const Mesh& mesh) {
  std::map<std::array<int, 3>, std::pair<int, int>> inc;
  const int npc = mesh.nodes_per_cell();
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int k = 0; k < npc; ++k) {
      const auto face = cell_face(mesh.cells[static_cast<std::size_t>(c)], npc, k);
      auto key = facet_key(face.data(), mesh.nodes_per_facet());
      auto it = inc.find(key);
      if (it == inc.end())
        inc.emplace(key, std::make_pair(1, c));
      else {
        it->second.first += 1;
        it->second.second = c;
      }
    }
  }
  return inc;
}

}  // namespace meshdetail

/// For each stored boundary facet, the index of the unique cell it bounds,
/// or -1 if it is not a face of exactly one cell.
inline std::vector<int> boundary_adjacency(const Mesh& mesh) {
  const auto inc = meshdetail::face_incidence(mesh);
  std::vector<int> owner(static_cast<std::size_t>(mesh.n_facets()), -1);
  for (int f = 0; f < mesh.n_facets(); ++f) {
    const auto key = meshdetail::facet_key(mesh.facets[static_cast<std::size_t>(f)].nodes.data(),
                                           mesh.nodes_per_facet());
    auto it = inc.find(key);
    if (it != inc.end() && it->second.first == 1) owner[static_cast<std::size_t>(f)] = it->second.second;
  }
  return owner;
}

// ---------------------------------------------------------------------------
// Quality report
// ---------------------------------------------------------------------------

struct MeshQuality {
  double min_volume = 0.0;
  double max_volume = 0.0;
  double total_volume = 0.0;
  double min_angle_deg = 0.0;  // triangle interior angle (2D) / tet dihedral (3D)
  int n_inverted = 0;          // cells with non-positive signed volume
  int n_orphan_nodes = 0;      // nodes referenced by no cell
  bool boundary_closed = false;
};

inline MeshQuality mesh_quality(const Mesh& mesh) {
  MeshQuality q;
  if (mesh.n_cells() == 0) return q;

  q.min_volume = std::numeric_limits<double>::infinity();
  q.max_volume = -std::numeric_limits<double>::infinity();
  q.min_angle_deg = std::numeric_limits<double>::infinity();
  const double rad2deg = 180.0 / 3.14159265358979323846;

  std::vector<char> used(static_cast<std::size_t>(mesh.n_nodes()), 0);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const double v = cell_volume(mesh, c);
    q.min_volume = std::min(q.min_volume, v);
    q.max_volume = std::max(q.max_volume, v);
    q.total_volume += v;
    if (v <= 0.0) ++q.n_inverted;
    const auto& cell = mesh.cells[static_cast<std::size_t>(c)];
    for (int k = 0; k < mesh.nodes_per_cell(); ++k)
      used[static_cast<std::size_t>(cell[static_cast<std::size_t>(k)])] = 1;

    if (mesh.dim == 2) {
      for (int k = 0; k < 3; ++k) {
        const Vec3& p = mesh.nodes[static_cast<std::size_t>(cell[static_cast<std::size_t>(k)])];
        const Vec3& pn = mesh.nodes[static_cast<std::size_t>(cell[static_cast<std::size_t>((k + 1) % 3)])];
        const Vec3& pp = mesh.nodes[static_cast<std::size_t>(cell[static_cast<std::size_t>((k + 2) % 3)])];
        const Vec3 u = pn - p, w = pp - p;
        const double den = u.norm() * w.norm();
        if (den > 0.0) {
          const double cosang = std::clamp(u.dot(w) / den, -1.0, 1.0);
          q.min_angle_deg = std::min(q.min_angle_deg, std::acos(cosang) * rad2deg);
        } else {
          q.min_angle_deg = 0.0;
        }
      }
    } else {
      // Outward normals of the four faces, then dihedral angles across the
      // six edges: cos(theta) = -n_i . n_j for unit outward normals.
      std::array<Vec3, 4> n;
      for (int k = 0; k < 4; ++k) {
        const auto face = meshdetail::cell_face(cell, 4, k);
        const Vec3& a = mesh.nodes[static_cast<std::size_t>(face[0])];
        const Vec3& b = mesh.nodes[static_cast<std::size_t>(face[1])];
        const Vec3& d = mesh.nodes[static_cast<std::size_t>(face[2])];
        Vec3 nk = (b - a).cross(d - a);
        const Vec3& opp = mesh.nodes[static_cast<std::size_t>(cell[static_cast<std::size_t>(k)])];
        if (nk.dot(a - opp) < 0.0) nk = -nk;
        const double len = nk.norm();
        n[static_cast<std::size_t>(k)] = len > 0.0 ? Vec3(nk / len) : Vec3::Zero();
      }
      for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
          const double cosang =
              std::clamp(-n[static_cast<std::size_t>(i)].dot(n[static_cast<std::size_t>(j)]), -1.0, 1.0);
          q.min_angle_deg = std::min(q.min_angle_deg, std::acos(cosang) * rad2deg);
        }
    }
  }
  for (char u : used)
    if (!u) ++q.n_orphan_nodes;

  // Closure: the stored facet set must equal the set of faces incident to
  // exactly one cell, with no duplicate entries.
  const auto inc = meshdetail::face_incidence(mesh);
  std::set<std::array<int, 3>> boundary_keys;
  for (const auto& [key, cnt_cell] : inc)
    if (cnt_cell.first == 1) boundary_keys.insert(key);
  std::set<std::array<int, 3>> stored;
  bool dup = false;
  for (const auto& f : mesh.facets) {
    const auto key = meshdetail::facet_key(f.nodes.data(), mesh.nodes_per_facet());
    if (!stored.insert(key).second) dup = true;
  }
  q.boundary_closed = !dup && stored == boundary_keys;
  return q;
}

// ---------------------------------------------------------------------------
// Text format
//   line 1:   mesh <dim> <n_nodes> <n_cells> <n_bfacets>
//   then      v <x> <y> [<z>]          (full double precision)
//   then      c <i0> <i1> <i2> [<i3>]  (0-based)
//   then      b <tag> <i0> <i1> [<i2>]
// Comments start with '#'. Encoding UTF-8, LF line endings.
// ---------------------------------------------------------------------------

namespace meshdetail {

inline void append_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace meshdetail

inline std::string mesh_to_string(const Mesh& mesh) {
  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.n_nodes()) * 60 + static_cast<std::size_t>(mesh.n_cells()) * 24);
  out += "mesh " + std::to_string(mesh.dim) + ' ' + std::to_string(mesh.n_nodes()) + ' ' +
         std::to_string(mesh.n_cells()) + ' ' + std::to_string(mesh.n_facets()) + '\n';
  for (const Vec3& p : mesh.nodes) {
    out += "v ";
    meshdetail::append_double(out, p.x());
    out += ' ';
    meshdetail::append_double(out, p.y());
    if (mesh.dim == 3) {
      out += ' ';
      meshdetail::append_double(out, p.z());
    }
    out += '\n';
  }
  for (const auto& cell : mesh.cells) {
    out += 'c';
    for (int k = 0; k < mesh.nodes_per_cell(); ++k)
      out += ' ' + std::to_string(cell[static_cast<std::size_t>(k)]);
    out += '\n';
  }
  for (const auto& f : mesh.facets) {
    out += "b " + f.tag;
    for (int k = 0; k < mesh.nodes_per_facet(); ++k)
      out += ' ' + std::to_string(f.nodes[static_cast<std::size_t>(k)]);
    out += '\n';
  }
  return out;
}

/// FNV-1a fingerprint of the canonical text image; stable across save/load.
inline std::string mesh_checksum(const Mesh& mesh) { return fnv1a_hex(mesh_to_string(mesh)); }

namespace meshdetail {

struct LineReader {
  std::istringstream all;
  std::string origin;
  int line_no = 0;

  explicit LineReader(const std::string& text, std::string org) : all(text), origin(std::move(org)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw MalformedMeshFile(origin + ":" + std::to_string(line_no) + ": " + msg);
  }

  /// Next non-blank, non-comment line; false at end of input.
  bool next(std::istringstream& fields) {
    std::string line;
    while (std::getline(all, line)) {
      ++line_no;
      const auto pos = line.find_first_not_of(" \t\r");
      if (pos == std::string::npos || line[pos] == '#') continue;
      fields = std::istringstream(line);
      return true;
    }
    return false;
  }

  int read_index(std::istringstream& fields, int limit, const char* what) {
    long long v = 0;
    if (!(fields >> v)) fail(std::string("missing or invalid ") + what);
    if (v < 0 || v >= limit)
      fail(std::string(what) + " " + std::to_string(v) + " out of range [0, " + std::to_string(limit) + ")");
    return static_cast<int>(v);
  }

  double read_double(std::istringstream& fields, const char* what) {
    double v = 0;
    if (!(fields >> v)) fail(std::string("missing or invalid ") + what);
    return v;
  }

  void expect_end(std::istringstream& fields) {
    std::string rest;
    if (fields >> rest) fail("unexpected trailing field '" + rest + "'");
  }
};

}  // namespace meshdetail

inline Mesh mesh_from_string(const std::string& text, const std::string& origin = "<string>") {
  meshdetail::LineReader r(text, origin);
  std::istringstream fields;
  if (!r.next(fields)) r.fail("empty input, expected header");

  std::string word;
  if (!(fields >> word) || word != "mesh") r.fail("expected 'mesh <dim> <n_nodes> <n_cells> <n_bfacets>'");
  long long dim = 0, nn = 0, nc = 0, nb = 0;
  if (!(fields >> dim >> nn >> nc >> nb)) r.fail("malformed header counts");
  if (dim != 2 && dim != 3) r.fail("dim must be 2 or 3, got " + std::to_string(dim));
  if (nn < 0 || nc < 0 || nb < 0) r.fail("negative count in header");
  r.expect_end(fields);

  Mesh mesh;
  mesh.dim = static_cast<int>(dim);
  mesh.nodes.reserve(static_cast<std::size_t>(nn));
  mesh.cells.reserve(static_cast<std::size_t>(nc));
  mesh.facets.reserve(static_cast<std::size_t>(nb));

  for (long long i = 0; i < nn; ++i) {
    if (!r.next(fields)) r.fail("unexpected end of input, expected node " + std::to_string(i));
    if (!(fields >> word) || word != "v") r.fail("expected 'v' record");
    Vec3 p = Vec3::Zero();
    p.x() = r.read_double(fields, "x coordinate");
    p.y() = r.read_double(fields, "y coordinate");
    if (mesh.dim == 3) p.z() = r.read_double(fields, "z coordinate");
    r.expect_end(fields);
    mesh.nodes.push_back(p);
  }
  for (long long i = 0; i < nc; ++i) {
    if (!r.next(fields)) r.fail("unexpected end of input, expected cell " + std::to_string(i));
    if (!(fields >> word) || word != "c") r.fail("expected 'c' record");
    std::array<int, 4> cell{-1, -1, -1, -1};
    for (int k = 0; k < mesh.nodes_per_cell(); ++k)
      cell[static_cast<std::size_t>(k)] = r.read_index(fields, mesh.n_nodes(), "node index");
    r.expect_end(fields);
    mesh.cells.push_back(cell);
  }
  for (long long i = 0; i < nb; ++i) {
    if (!r.next(fields)) r.fail("unexpected end of input, expected boundary facet " + std::to_string(i));
    if (!(fields >> word) || word != "b") r.fail("expected 'b' record");
    BoundaryFacet f;
    if (!(fields >> f.tag)) r.fail("missing facet tag");
    for (int k = 0; k < mesh.nodes_per_facet(); ++k)
      f.nodes[static_cast<std::size_t>(k)] = r.read_index(fields, mesh.n_nodes(), "node index");
    r.expect_end(fields);
    mesh.facets.push_back(f);
  }
  if (r.next(fields)) r.fail("unexpected extra record after declared counts");
  return mesh;
}

inline void save_mesh(const Mesh& mesh, const std::string& path) {
  for (const auto& f : mesh.facets)
    if (f.tag.empty() || f.tag.find_first_of(" \t\n#") != std::string::npos)
      throw MalformedMeshFile("facet tag '" + f.tag + "' is not a single token");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MalformedMeshFile("cannot open '" + path + "' for writing");
  const std::string text = mesh_to_string(mesh);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw MalformedMeshFile("write to '" + path + "' failed");
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedMeshFile("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return mesh_from_string(ss.str(), path);
}

}  // namespace hyperfit
