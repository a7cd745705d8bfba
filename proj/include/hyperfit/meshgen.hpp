#pragma once

// Programmatic specimen meshes on structured background grids.
//
// Pipeline: build a structured simplex grid over the bounding box, snap nodes
// that lie within a fraction of the grid spacing of an analytic hole surface
// onto that surface (Newton on the level function, with components locked on
// the box planes so face nodes stay on their faces), remove cells whose
// centroid is inside a hole (or outside the part for non-box specimens), drop
// the occasional degenerate sliver, compact node numbering, and extract tagged
// boundary facets oriented outward.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hyperfit/common.hpp"
#include "hyperfit/mesh.hpp"

namespace hyperfit {

// ---------------------------------------------------------------------------
// Analytic hole surfaces
// ---------------------------------------------------------------------------

/// Circle (2D), sphere (3D), axis-aligned-free cylinder (3D), or ellipse (2D),
/// described by a level function that is negative inside the hole.
struct HoleSpec {
  enum class Kind { Ball, Ellipse, Cylinder };
  Kind kind = Kind::Ball;
  Vec3 center = Vec3::Zero();  // Ball/Ellipse center; point on the Cylinder axis
  double r = 0.0;              // Ball/Cylinder radius
  double a = 0.0, b = 0.0;     // Ellipse semi-axes (x, y)
  Vec3 axis = Vec3::UnitZ();   // Cylinder axis direction (unit)

  static HoleSpec ball(const Vec3& c, double radius) {
    HoleSpec h;
    h.kind = Kind::Ball;
    h.center = c;
    h.r = radius;
    return h;
  }
  static HoleSpec ellipse(double cx, double cy, double sa, double sb) {
    HoleSpec h;
    h.kind = Kind::Ellipse;
    h.center = Vec3(cx, cy, 0.0);
    h.a = sa;
    h.b = sb;
    return h;
  }
  static HoleSpec cylinder(const Vec3& point, const Vec3& direction, double radius) {
    HoleSpec h;
    h.kind = Kind::Cylinder;
    h.center = point;
    h.axis = direction / direction.norm();
    h.r = radius;
    return h;
  }

  /// Approximate signed distance to the surface, negative inside the hole.
  double distance(const Vec3& x) const {
    switch (kind) {
      case Kind::Ball:
        return (x - center).norm() - r;
      case Kind::Cylinder: {
        const Vec3 w = x - center;
        return (w - w.dot(axis) * axis).norm() - r;
      }
      case Kind::Ellipse: {
        const double dx = (x.x() - center.x()) / a, dy = (x.y() - center.y()) / b;
        const double rho = std::sqrt(dx * dx + dy * dy);
        if (rho < 1e-9) return -0.5 * (a + b);
        const double gx = dx / (a * rho), gy = dy / (b * rho);
        return (rho - 1.0) / std::max(std::sqrt(gx * gx + gy * gy), 1e-12);
      }
    }
    return 0.0;
  }

  /// Level function (same sign as distance) and its gradient, for projection.
  double level(const Vec3& x, Vec3& grad) const {
    switch (kind) {
      case Kind::Ball: {
        const Vec3 w = x - center;
        const double n = w.norm();
        grad = n > 1e-14 ? Vec3(w / n) : Vec3::UnitX();
        return n - r;
      }
      case Kind::Cylinder: {
        const Vec3 w = x - center;
        const Vec3 wp = w - w.dot(axis) * axis;
        const double n = wp.norm();
        if (n > 1e-14)
          grad = wp / n;
        else
          grad = (std::abs(axis.x()) < 0.9 ? Vec3::UnitX() - axis.x() * axis : Vec3::UnitY() - axis.y() * axis)
                     .normalized();
        return n - r;
      }
      case Kind::Ellipse: {
        const double dx = (x.x() - center.x()) / a, dy = (x.y() - center.y()) / b;
        const double rho = std::max(std::sqrt(dx * dx + dy * dy), 1e-12);
        grad = Vec3(dx / (a * rho), dy / (b * rho), 0.0);
        return rho - 1.0;
      }
    }
    return 0.0;
  }

  /// Nearest-point projection onto the surface by damped Newton on the level
  /// function; components flagged in `lock` are held fixed so nodes on domain
  /// planes travel within their plane onto the intersection curve.
  Vec3 project(Vec3 x, const std::array<bool, 3>& lock) const {
    for (int it = 0; it < 24; ++it) {
      Vec3 g;
      const double f = level(x, g);
      for (int c = 0; c < 3; ++c)
        if (lock[static_cast<std::size_t>(c)]) g[c] = 0.0;
      const double g2 = g.squaredNorm();
      if (g2 < 1e-20) break;
      const Vec3 step = (f / g2) * g;
      x -= step;
      if (step.norm() < 1e-15) break;
    }
    return x;
  }
};

// ---------------------------------------------------------------------------
// Structured grids
// ---------------------------------------------------------------------------

/// Uniform triangulated rectangle; diagonals alternate per quad so the pattern
/// respects the square symmetries. All cells counter-clockwise.
inline Mesh structured_triangles(const Vec3& lo, const Vec3& hi, int nx, int ny) {
  Mesh mesh;
  mesh.dim = 2;
  const double hx = (hi.x() - lo.x()) / nx, hy = (hi.y() - lo.y()) / ny;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.nodes.emplace_back(lo.x() + i * hx, lo.y() + j * hy, 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int n00 = id(i, j), n10 = id(i + 1, j), n01 = id(i, j + 1), n11 = id(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.cells.push_back({n00, n10, n11, -1});
        mesh.cells.push_back({n00, n11, n01, -1});
      } else {
        mesh.cells.push_back({n00, n10, n01, -1});
        mesh.cells.push_back({n10, n11, n01, -1});
      }
    }
  return mesh;
}

/// Uniform tetrahedral box: each grid cube splits into six tets along vertex
/// permutation paths; face diagonals agree between neighbors, so the mesh is
/// conforming. Orientation fixed to positive volume.
inline Mesh structured_tets(const Vec3& lo, const Vec3& hi, int nx, int ny, int nz) {
  Mesh mesh;
  mesh.dim = 3;
  const double hx = (hi.x() - lo.x()) / nx, hy = (hi.y() - lo.y()) / ny, hz = (hi.z() - lo.z()) / nz;
  auto id = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        mesh.nodes.emplace_back(lo.x() + i * hx, lo.y() + j * hy, lo.z() + k * hz);

  static const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        for (const auto& p : perms) {
          std::array<int, 3> at{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = id(at[0], at[1], at[2]);
          for (int s = 0; s < 3; ++s) {
            at[static_cast<std::size_t>(p[s])] += 1;
            tet[static_cast<std::size_t>(s + 1)] = id(at[0], at[1], at[2]);
          }
          mesh.cells.push_back(tet);
        }
  // Half of the permutation paths are odd; swap two nodes to orient those.
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (cell_volume(mesh, c) < 0.0) std::swap(mesh.cells[static_cast<std::size_t>(c)][2],
                                              mesh.cells[static_cast<std::size_t>(c)][3]);
  return mesh;
}

// ---------------------------------------------------------------------------
// Snap / carve / tag machinery
// ---------------------------------------------------------------------------

namespace meshdetail {

/// Smallest signed distance over all holes; negative inside some hole.
inline double inside_depth(const std::vector<HoleSpec>& holes, const Vec3& p) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& h : holes) m = std::min(m, h.distance(p));
  return m;
}

/// Cut the holes (and, when `in_part` is given, everything outside the part
/// region) out of a structured grid:
///   1. nodes within half a cell of a hole surface snap onto it;
///   2. cells with a strictly-inside node or centroid, or with centroid
///      outside the part, are removed;
///   3. rim nodes exposed by the removal that are still off-surface are pulled
///      onto the nearest hole — so every node of every carved-boundary facet
///      lies on the analytic surface;
///   4. degenerate slivers are dropped and node numbering is compacted.
/// Nodes on the bounding-box planes move only within their plane. Leaves
/// `mesh.facets` empty; boundary extraction follows separately.
inline void carve_holes(Mesh& mesh, const std::vector<HoleSpec>& holes, const Vec3& lo, const Vec3& hi,
                        double h, const std::function<bool(const Vec3&)>& in_part = nullptr) {
  const double band = 0.5 * h;
  const double vol_floor = 1e-10 * std::pow(h, mesh.dim);

  auto locks = [&](const Vec3& p) {
    std::array<bool, 3> lock{false, false, false};
    for (int c = 0; c < 3; ++c)
      lock[static_cast<std::size_t>(c)] =
          std::abs(p[c] - lo[c]) < 1e-12 || std::abs(p[c] - hi[c]) < 1e-12;
    if (mesh.dim == 2) lock[2] = true;
    return lock;
  };
  auto snap_if_near = [&](Vec3& p, double reach) {
    const HoleSpec* best = nullptr;
    double best_abs = reach;
    for (const auto& hs : holes) {
      const double d = std::abs(hs.distance(p));
      if (d < best_abs) {
        best_abs = d;
        best = &hs;
      }
    }
    if (!best || best_abs <= 1e-9) return;  // nothing near, or already on
    const Vec3 moved = best->project(p, locks(p));
    if (std::abs(best->distance(moved)) < 1e-9) p = moved;
  };

  if (!holes.empty())
    for (auto& p : mesh.nodes) snap_if_near(p, band);

  enum : char { kKept = 0, kHoleCut = 1, kPartCut = 2 };
  std::vector<char> state(static_cast<std::size_t>(mesh.n_cells()), kKept);
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto& cell = mesh.cells[static_cast<std::size_t>(c)];
    bool hole_cut = false;
    if (!holes.empty()) {
      hole_cut = inside_depth(holes, cell_centroid(mesh, c)) < -1e-8;
      for (int k = 0; !hole_cut && k < mesh.nodes_per_cell(); ++k)
        hole_cut =
            inside_depth(holes, mesh.nodes[static_cast<std::size_t>(cell[static_cast<std::size_t>(k)])]) <
            -1e-8;
    }
    if (hole_cut)
      state[static_cast<std::size_t>(c)] = kHoleCut;
    else if (in_part && !in_part(cell_centroid(mesh, c)))
      state[static_cast<std::size_t>(c)] = kPartCut;
  }

  // Rim rounds: pull the nodes exposed by hole removal onto the surface; a
  // projection near a tightly curved surface may degenerate a neighbor, which
  // is then removed, exposing a fresh rim for the next round. Each round eats
  // at most one cell layer, so a few rounds settle it.
  if (!holes.empty()) {
    bool settled = false;
    for (int round = 0; round < 4 && !settled; ++round) {
      std::vector<char> in_kept(mesh.nodes.size(), 0), at_hole(mesh.nodes.size(), 0);
      for (int c = 0; c < mesh.n_cells(); ++c) {
        const auto& cell = mesh.cells[static_cast<std::size_t>(c)];
        for (int k = 0; k < mesh.nodes_per_cell(); ++k) {
          const auto n = static_cast<std::size_t>(cell[static_cast<std::size_t>(k)]);
          if (state[static_cast<std::size_t>(c)] == kKept) in_kept[n] = 1;
          if (state[static_cast<std::size_t>(c)] == kHoleCut) at_hole[n] = 1;
        }
      }
      for (std::size_t n = 0; n < mesh.nodes.size(); ++n)
        if (in_kept[n] && at_hole[n]) snap_if_near(mesh.nodes[n], 2.0 * h);

      settled = true;
      for (int c = 0; c < mesh.n_cells(); ++c)
        if (state[static_cast<std::size_t>(c)] == kKept && cell_volume(mesh, c) <= vol_floor) {
          state[static_cast<std::size_t>(c)] = kHoleCut;
          settled = false;
        }
    }
    if (!settled)
      throw GeometryInfeasible("hole carving failed to settle; the surface curvature is too tight for h " +
                               std::to_string(h));
  }

  std::vector<std::array<int, 4>> kept;
  kept.reserve(mesh.cells.size());
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (state[static_cast<std::size_t>(c)] == kKept) kept.push_back(mesh.cells[static_cast<std::size_t>(c)]);
  mesh.cells = std::move(kept);

  std::vector<int> remap(mesh.nodes.size(), -1);
  std::vector<Vec3> nodes;
  for (auto& cell : mesh.cells)
    for (int k = 0; k < mesh.nodes_per_cell(); ++k) {
      int& idx = cell[static_cast<std::size_t>(k)];
      int& m = remap[static_cast<std::size_t>(idx)];
      if (m < 0) {
        m = static_cast<int>(nodes.size());
        nodes.push_back(mesh.nodes[static_cast<std::size_t>(idx)]);
      }
      idx = m;
    }
  mesh.nodes = std::move(nodes);
  mesh.facets.clear();
}

/// Ordered tag rules: first predicate matching all facet nodes wins; facets
/// matching none get `fallback`.
struct TagRule {
  std::string tag;
  std::function<bool(const Vec3&)> node_predicate;
};

inline void extract_boundary(Mesh& mesh, const std::vector<TagRule>& rules, const std::string& fallback) {
  const auto inc = face_incidence(mesh);
  mesh.facets.clear();
  const int npc = mesh.nodes_per_cell();
  for (int c = 0; c < mesh.n_cells(); ++c)
    for (int k = 0; k < npc; ++k) {
      const auto face = cell_face(mesh.cells[static_cast<std::size_t>(c)], npc, k);
      const auto key = facet_key(face.data(), mesh.nodes_per_facet());
      if (inc.at(key).first != 1) continue;

      BoundaryFacet f;
      f.nodes = face;
      // Orient outward: normal from stored order must point away from the cell.
      const Vec3 cc = cell_centroid(mesh, c);
      Vec3 fc = Vec3::Zero();
      for (int m = 0; m < mesh.nodes_per_facet(); ++m)
        fc += mesh.nodes[static_cast<std::size_t>(face[static_cast<std::size_t>(m)])];
      fc /= mesh.nodes_per_facet();
      const Vec3 n = facet_unit_normal(mesh, f);
      if (n.dot(fc - cc) < 0.0) {
        if (mesh.dim == 2)
          std::swap(f.nodes[0], f.nodes[1]);
        else
          std::swap(f.nodes[1], f.nodes[2]);
      }

      f.tag = fallback;
      for (const auto& rule : rules) {
        bool all = true;
        for (int m = 0; m < mesh.nodes_per_facet() && all; ++m)
          all = rule.node_predicate(mesh.nodes[static_cast<std::size_t>(face[static_cast<std::size_t>(m)])]);
        if (all) {
          f.tag = rule.tag;
          break;
        }
      }
      mesh.facets.push_back(std::move(f));
    }
}

inline TagRule plane_rule(std::string tag, int axis, double value, double tol = 1e-9) {
  return {std::move(tag), [axis, value, tol](const Vec3& p) { return std::abs(p[axis] - value) < tol; }};
}

inline int grid_count(double extent, double h, int multiple = 1) {
  int n = std::max(1, static_cast<int>(std::lround(extent / h)));
  if (multiple > 1) n = ((n + multiple - 1) / multiple) * multiple;
  return n;
}

}  // namespace meshdetail

// ---------------------------------------------------------------------------
// Specimen generators (setups 1-6)
// ---------------------------------------------------------------------------

/// Setup 1: quarter of a square plate of edge 2 with a central hole of radius
/// 0.1, modeled as the unit square with a quarter-hole at the origin corner.
/// Tags: left (x=0), right (x=1), down (y=0), up (y=1), hole.
inline Mesh make_plate_quarter_hole(double h) {
  using namespace meshdetail;
  const Vec3 lo(0, 0, 0), hi(1, 1, 0);
  const int n = grid_count(1.0, h);
  Mesh mesh = structured_triangles(lo, hi, n, n);
  const std::vector<HoleSpec> holes{HoleSpec::ball(Vec3::Zero(), 0.1)};
  carve_holes(mesh, holes, lo, hi, 1.0 / n);
  extract_boundary(mesh,
                   {plane_rule("left", 0, 0.0), plane_rule("right", 0, 1.0), plane_rule("down", 1, 0.0),
                    plane_rule("up", 1, 1.0)},
                   "hole");
  return mesh;
}

/// Setup 2: unit square plate with two ellipsoidal holes.
/// Tags: left, right, down, up, hole.
inline Mesh make_plate_two_ellipses(double h) {
  using namespace meshdetail;
  const Vec3 lo(0, 0, 0), hi(1, 1, 0);
  const int n = grid_count(1.0, h);
  Mesh mesh = structured_triangles(lo, hi, n, n);
  const std::vector<HoleSpec> holes{HoleSpec::ellipse(0.32, 0.62, 0.16, 0.09),
                                    HoleSpec::ellipse(0.68, 0.30, 0.10, 0.18)};
  carve_holes(mesh, holes, lo, hi, 1.0 / n);
  extract_boundary(mesh,
                   {plane_rule("left", 0, 0.0), plane_rule("right", 0, 1.0), plane_rule("down", 1, 0.0),
                    plane_rule("up", 1, 1.0)},
                   "hole");
  return mesh;
}

/// Placement parameters for Setup 3's randomized perforations.
struct RandomHoleParams {
  int min_holes = 1;
  int max_holes = 3;
  double r_min = 0.08;
  double r_max = 0.18;
  double edge_margin = 0.08;  // clearance between hole rim and square edge
  double sep_margin = 0.06;   // clearance between hole rims
  int max_attempts = 200;     // placement draws per hole before giving up
};

/// Seeded random circular holes inside the unit square, honoring the margins.
inline std::vector<HoleSpec> random_holes(std::uint64_t seed, const RandomHoleParams& params = {}) {
  Rng rng(seed);
  const int span = params.max_holes - params.min_holes + 1;
  const int count = params.min_holes + std::min(span - 1, static_cast<int>(rng.uniform() * span));
  std::vector<HoleSpec> holes;
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_attempts && !placed; ++attempt) {
      const double r = rng.uniform(params.r_min, params.r_max);
      const double lo = r + params.edge_margin, hi = 1.0 - r - params.edge_margin;
      if (hi <= lo) continue;
      const Vec3 c(rng.uniform(lo, hi), rng.uniform(lo, hi), 0.0);
      bool clear = true;
      for (const auto& other : holes)
        if ((c - other.center).norm() < r + other.r + params.sep_margin) clear = false;
      if (!clear) continue;
      holes.push_back(HoleSpec::ball(c, r));
      placed = true;
    }
    if (!placed)
      throw GeometryInfeasible("could not place hole " + std::to_string(i + 1) + " of " +
                               std::to_string(count) + " after " + std::to_string(params.max_attempts) +
                               " attempts");
  }
  return holes;
}

/// Setup 3: unit square with 1-3 seeded random circular holes.
/// Tags: left, right, down, up, hole.
inline Mesh make_plate_random_holes(double h, std::uint64_t seed, std::vector<HoleSpec>* holes_out = nullptr,
                                    const RandomHoleParams& params = {}) {
  using namespace meshdetail;
  const Vec3 lo(0, 0, 0), hi(1, 1, 0);
  const int n = grid_count(1.0, h);
  Mesh mesh = structured_triangles(lo, hi, n, n);
  const std::vector<HoleSpec> holes = random_holes(seed, params);
  if (holes_out) *holes_out = holes;
  carve_holes(mesh, holes, lo, hi, 1.0 / n);
  extract_boundary(mesh,
                   {plane_rule("left", 0, 0.0), plane_rule("right", 0, 1.0), plane_rule("down", 1, 0.0),
                    plane_rule("up", 1, 1.0)},
                   "hole");
  return mesh;
}

/// Setup 4: eighth of a cube with a central spherical hole, modeled as the
/// unit cube with an eighth-sphere of radius 0.5 at the origin corner.
/// Tags: left/right (x), front/back (y), down/up (z), hole.
inline Mesh make_cube_sphere_hole(double h) {
  using namespace meshdetail;
  const Vec3 lo(0, 0, 0), hi(1, 1, 1);
  const int n = grid_count(1.0, h);
  Mesh mesh = structured_tets(lo, hi, n, n, n);
  const std::vector<HoleSpec> holes{HoleSpec::ball(Vec3::Zero(), 0.5)};
  carve_holes(mesh, holes, lo, hi, 1.0 / n);
  extract_boundary(mesh,
                   {plane_rule("left", 0, 0.0), plane_rule("right", 0, 1.0), plane_rule("front", 1, 0.0),
                    plane_rule("back", 1, 1.0), plane_rule("down", 2, 0.0), plane_rule("up", 2, 1.0)},
                   "hole");
  return mesh;
}

/// Setup 5: cube [-1/2,1/2]^2 x [0,1] pierced by an oblique cylindrical hole
/// (axis through the cube center, leaning in the x-z plane).
/// Tags: left/right (x), front/back (y), down/up (z), hole.
inline Mesh make_cube_cylinder_hole(double h) {
  using namespace meshdetail;
  const Vec3 lo(-0.5, -0.5, 0), hi(0.5, 0.5, 1);
  const int n = grid_count(1.0, h);
  Mesh mesh = structured_tets(lo, hi, n, n, n);
  const std::vector<HoleSpec> holes{
      HoleSpec::cylinder(Vec3(0, 0, 0.5), Vec3(0.25, 0, 1.0), 0.13)};
  carve_holes(mesh, holes, lo, hi, 1.0 / n);
  extract_boundary(mesh,
                   {plane_rule("left", 0, -0.5), plane_rule("right", 0, 0.5), plane_rule("front", 1, -0.5),
                    plane_rule("back", 1, 0.5), plane_rule("down", 2, 0.0), plane_rule("up", 2, 1.0)},
                   "hole");
  return mesh;
}

/// Setup 6: synthetic mounting bracket — a base block with two protruding
/// arms and a through-hole across the base. Tags: down (z=0, support), front
/// (y=0), back (y=0.4, loaded face), hole (bore), free (everything else).
inline Mesh make_bracket(double h) {
  using namespace meshdetail;
  const Vec3 lo(0, 0, 0), hi(1, 0.4, 1);
  // Grid counts chosen so the internal part planes (x = 0.2/0.8, z = 0.6) are
  // grid planes and carve cleanly.
  const int nx = grid_count(1.0, h, 5);
  const int ny = grid_count(0.4, h, 1);
  const int nz = grid_count(1.0, h, 5);
  const double hmax = std::max({1.0 / nx, 0.4 / ny, 1.0 / nz});
  // The bore clears the internal part planes by 0.15; rim projection reaches
  // 1.25 h, so coarser grids would drag plane nodes onto the bore.
  if (hmax > 0.1 + 1e-12)
    throw GeometryInfeasible("bracket requires h_target <= 0.1, got " + std::to_string(h));
  Mesh mesh = structured_tets(lo, hi, nx, ny, nz);
  const std::vector<HoleSpec> bore{HoleSpec::cylinder(Vec3(0.5, 0.0, 0.3), Vec3::UnitY(), 0.15)};
  const double hmin = std::min({1.0 / nx, 0.4 / ny, 1.0 / nz});
  auto in_part = [](const Vec3& c) {
    const bool in_base = c.z() <= 0.6;
    const bool in_arm = c.z() >= 0.6 && (c.x() <= 0.2 || c.x() >= 0.8);
    return in_base || in_arm;
  };
  carve_holes(mesh, bore, lo, hi, hmin, in_part);
  // Every non-bore boundary facet lies exactly on one of the part planes (the
  // grid is aligned with them), so the bore can safely be the fallback tag.
  extract_boundary(mesh,
                   {plane_rule("down", 2, 0.0), plane_rule("front", 1, 0.0), plane_rule("back", 1, 0.4),
                    plane_rule("free", 0, 0.0), plane_rule("free", 0, 1.0), plane_rule("free", 2, 1.0),
                    plane_rule("free", 2, 0.6), plane_rule("free", 0, 0.2), plane_rule("free", 0, 0.8)},
                   "hole");
  return mesh;
}

// ---------------------------------------------------------------------------
// Unified entry point
// ---------------------------------------------------------------------------

struct GeometrySpec {
  int setup_id = 1;       // 1..6
  std::uint64_t seed = 0; // randomized geometry (setup 3)
};

inline Mesh generate_mesh(const GeometrySpec& spec, double h_target) {
  if (h_target <= 0.0) throw GeometryInfeasible("h_target must be positive");
  Mesh mesh;
  switch (spec.setup_id) {
    case 1: mesh = make_plate_quarter_hole(h_target); break;
    case 2: mesh = make_plate_two_ellipses(h_target); break;
    case 3: mesh = make_plate_random_holes(h_target, spec.seed); break;
    case 4: mesh = make_cube_sphere_hole(h_target); break;
    case 5: mesh = make_cube_cylinder_hole(h_target); break;
    case 6: mesh = make_bracket(h_target); break;
    default:
      throw GeometryInfeasible("unknown setup id " + std::to_string(spec.setup_id));
  }
  bool has_hole_facet = false;
  for (const auto& f : mesh.facets) has_hole_facet = has_hole_facet || f.tag == "hole";
  if (!has_hole_facet)
    throw GeometryInfeasible("h_target " + std::to_string(h_target) +
                             " too coarse to resolve the hole of setup " + std::to_string(spec.setup_id));
  return mesh;
}

}  // namespace hyperfit
