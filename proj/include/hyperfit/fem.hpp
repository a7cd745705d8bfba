#pragma once

// Finite element equilibrium layer: P1 simplex discretization of finite-strain
// elastostatics. Provides the function space with boundary-condition
// bookkeeping, residual/tangent assembly for a palette of boundary conditions
// (prescribed displacement, dead tractions, normal springs, follower
// pressure), a damped Newton solver over a sparse direct factorization, load
// continuation with warm starts, boundary reactions, and point-wise
// displacement interpolation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "hyperfit/common.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/mesh.hpp"
#include "hyperfit/model.hpp"

namespace hyperfit {

using SpMat = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Boundary conditions. One condition per tag; tags absent from the program are
// free. All load-dependent data scales linearly with the load parameter so a
// single program describes the whole continuation path.
// ---------------------------------------------------------------------------

struct BoundaryCondition {
  enum class Kind {
    Free,
    DirichletVector,   // d(X) = load*(offset + linear*X) + twist about the z axis
    DirichletNormal,   // d.n = load*normal_value on axis-aligned facets
    Traction,          // dead surface traction load*traction
    NormalSpring,      // reference-normal spring k*(d.n), optional dead traction
    FollowerPressure,  // pressure load*pressure on the deformed surface,
                       // optional dead traction load*traction
  };

  Kind kind = Kind::Free;
  Vec3 offset = Vec3::Zero();
  Mat3 linear = Mat3::Zero();
  double twist_rate = 0.0;  // rotation angle about the z axis per unit load
  double normal_value = 0.0;
  Vec3 traction = Vec3::Zero();
  double spring_k = 0.0;  // stiffness; not load-scaled
  double pressure = 0.0;  // per unit load

  static BoundaryCondition free_face() { return {}; }

  static BoundaryCondition dirichlet(const Vec3& offset, const Mat3& linear = Mat3::Zero(),
                                     double twist_rate = 0.0) {
    BoundaryCondition c;
    c.kind = Kind::DirichletVector;
    c.offset = offset;
    c.linear = linear;
    c.twist_rate = twist_rate;
    return c;
  }

  static BoundaryCondition dirichlet_normal(double value) {
    BoundaryCondition c;
    c.kind = Kind::DirichletNormal;
    c.normal_value = value;
    return c;
  }

  static BoundaryCondition surface_traction(const Vec3& t) {
    BoundaryCondition c;
    c.kind = Kind::Traction;
    c.traction = t;
    return c;
  }

  static BoundaryCondition normal_spring(double k, const Vec3& t = Vec3::Zero()) {
    if (!(k >= 0.0)) throw Error("normal spring stiffness must be nonnegative");
    BoundaryCondition c;
    c.kind = Kind::NormalSpring;
    c.spring_k = k;
    c.traction = t;
    return c;
  }

  static BoundaryCondition follower_pressure(double p, const Vec3& dead = Vec3::Zero()) {
    BoundaryCondition c;
    c.kind = Kind::FollowerPressure;
    c.pressure = p;
    c.traction = dead;
    return c;
  }

  bool is_dirichlet() const {
    return kind == Kind::DirichletVector || kind == Kind::DirichletNormal;
  }
};

/// Ordered by tag name, which fixes the deterministic order in which
/// constraints claim dof components at shared corner nodes.
using BcProgram = std::map<std::string, BoundaryCondition>;

/// Prescribed displacement of a vector Dirichlet condition at point X.
inline Vec3 dirichlet_displacement(const BoundaryCondition& c, const Vec3& X, double load) {
  Vec3 d = load * (c.offset + c.linear * X);
  if (c.twist_rate != 0.0) {
    const double th = c.twist_rate * load;
    const double cm1 = std::cos(th) - 1.0, s = std::sin(th);
    d += Vec3(cm1 * X.x() - s * X.y(), s * X.x() + cm1 * X.y(), 0.0);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Function space: node-major displacement dofs (dof = node*dim + component),
// constrained/free split with deterministic numbering, and cached cell/facet
// geometry for assembly.
// ---------------------------------------------------------------------------

struct FeSpace {
  struct Pin {
    int cond = -1;      // index into conditions, or -1 when the dof is free
    double sign = 1.0;  // orientation factor for normal-component constraints
  };
  struct CellData {
    std::array<int, 4> nodes{-1, -1, -1, -1};
    double volume = 0.0;
    Eigen::Matrix<double, 3, 4> grad = Eigen::Matrix<double, 3, 4>::Zero();  // columns: grad phi_k
    std::array<int, 4> neighbor{-1, -1, -1, -1};  // across the face opposite node k
  };
  struct FacetData {
    std::array<int, 3> nodes{-1, -1, -1};
    int cond = -1;  // index into conditions, or -1 for untagged/free facets
    int owner = -1;
    double area = 0.0;
    Vec3 normal = Vec3::Zero();  // unit outward reference normal
  };

  Mesh mesh;
  int dim = 2;
  int n_dofs = 0;
  int n_free = 0;
  std::vector<std::pair<std::string, BoundaryCondition>> conditions;  // sorted by tag
  std::vector<Pin> pins;        // size n_dofs
  std::vector<int> free_index;  // dof -> free slot, or -1 when constrained
  std::vector<int> free_dofs;   // free slot -> dof
  std::vector<CellData> cells;
  std::vector<FacetData> facets;
  double mean_cell_volume = 0.0;

  int dof(int node, int comp) const { return node * dim + comp; }
  bool constrained(int d) const { return pins[static_cast<std::size_t>(d)].cond >= 0; }
};

namespace femdetail {

/// Degree-2 quadrature on the reference facet: 2-point Gauss on segments,
/// midedge rule on triangles. Weights are fractions of the facet measure;
/// s[q][k] are the vertex shape values at point q.
struct FacetQuad {
  int n = 0;
  double w[3] = {0, 0, 0};
  double s[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
};

inline FacetQuad facet_quad(int dim) {
  FacetQuad q;
  if (dim == 2) {
    const double a = 0.5 + 0.5 / std::sqrt(3.0);
    q.n = 2;
    q.w[0] = q.w[1] = 0.5;
    q.s[0][0] = a;
    q.s[0][1] = 1.0 - a;
    q.s[1][0] = 1.0 - a;
    q.s[1][1] = a;
  } else {
    q.n = 3;
    q.w[0] = q.w[1] = q.w[2] = 1.0 / 3.0;
    q.s[0][0] = 0.5, q.s[0][1] = 0.5, q.s[0][2] = 0.0;
    q.s[1][0] = 0.0, q.s[1][1] = 0.5, q.s[1][2] = 0.5;
    q.s[2][0] = 0.5, q.s[2][1] = 0.0, q.s[2][2] = 0.5;
  }
  return q;
}

}  // namespace femdetail

inline FeSpace make_space(const Mesh& mesh, const BcProgram& bc) {
  FeSpace sp;
  sp.mesh = mesh;
  sp.dim = mesh.dim;
  sp.n_dofs = sp.dim * mesh.n_nodes();

  // Validate the program against the mesh tags and rigid-mode removal.
  std::set<std::string> mesh_tags;
  for (const auto& f : mesh.facets) mesh_tags.insert(f.tag);
  bool pinned = false;
  for (const auto& [tag, cond] : bc) {
    if (!mesh_tags.count(tag)) throw Error("boundary program references unknown tag '" + tag + "'");
    if (cond.is_dirichlet() || (cond.kind == BoundaryCondition::Kind::NormalSpring && cond.spring_k > 0.0))
      pinned = true;
    sp.conditions.emplace_back(tag, cond);
  }
  if (!pinned) throw Error("boundary program leaves rigid-body modes unconstrained");

  std::map<std::string, int> cond_index;
  for (int i = 0; i < static_cast<int>(sp.conditions.size()); ++i)
    cond_index[sp.conditions[static_cast<std::size_t>(i)].first] = i;

  // Facet cache.
  const auto owners = boundary_adjacency(mesh);
  sp.facets.resize(mesh.facets.size());
  for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
    auto& fd = sp.facets[i];
    fd.nodes = mesh.facets[i].nodes;
    auto it = cond_index.find(mesh.facets[i].tag);
    fd.cond = it == cond_index.end() ? -1 : it->second;
    fd.owner = owners[i];
    fd.area = facet_measure(mesh, mesh.facets[i]);
    fd.normal = facet_unit_normal(mesh, mesh.facets[i]);
  }

  // Constraint table. Conditions claim components in sorted tag order; the
  // first writer of a component wins, so shared corner nodes are resolved
  // deterministically.
  sp.pins.assign(static_cast<std::size_t>(sp.n_dofs), FeSpace::Pin{});
  for (int ci = 0; ci < static_cast<int>(sp.conditions.size()); ++ci) {
    const auto& cond = sp.conditions[static_cast<std::size_t>(ci)].second;
    if (!cond.is_dirichlet()) continue;
    for (const auto& fd : sp.facets) {
      if (fd.cond != ci) continue;
      int axis = -1;
      double sign = 1.0;
      if (cond.kind == BoundaryCondition::Kind::DirichletNormal) {
        for (int a = 0; a < 3; ++a)
          if (std::abs(fd.normal[a]) > 1.0 - 1e-9) {
            axis = a;
            sign = fd.normal[a] > 0.0 ? 1.0 : -1.0;
          }
        if (axis < 0)
          throw Error("normal-component constraint on non-axis-aligned facet (tag '" +
                      sp.conditions[static_cast<std::size_t>(ci)].first + "')");
      }
      for (int k = 0; k < mesh.nodes_per_facet(); ++k) {
        const int node = fd.nodes[static_cast<std::size_t>(k)];
        for (int c = 0; c < sp.dim; ++c) {
          if (axis >= 0 && c != axis) continue;
          auto& pin = sp.pins[static_cast<std::size_t>(sp.dof(node, c))];
          if (pin.cond < 0) {
            pin.cond = ci;
            pin.sign = sign;
          }
        }
      }
    }
  }

  sp.free_index.assign(static_cast<std::size_t>(sp.n_dofs), -1);
  for (int d = 0; d < sp.n_dofs; ++d)
    if (!sp.constrained(d)) {
      sp.free_index[static_cast<std::size_t>(d)] = static_cast<int>(sp.free_dofs.size());
      sp.free_dofs.push_back(d);
    }
  sp.n_free = static_cast<int>(sp.free_dofs.size());

  // Cell cache: P1 shape gradients, volumes, and face adjacency.
  const int npc = mesh.nodes_per_cell();
  sp.cells.resize(mesh.cells.size());
  double total = 0.0;
  std::map<std::array<int, 3>, std::pair<int, int>> face_cells;  // key -> (cell, local face)
  for (int c = 0; c < mesh.n_cells(); ++c) {
    auto& cd = sp.cells[static_cast<std::size_t>(c)];
    cd.nodes = mesh.cells[static_cast<std::size_t>(c)];
    cd.volume = cell_volume(mesh, c);
    if (!(cd.volume > 0.0)) throw ElementInversion(c);
    total += cd.volume;

    const Vec3 x0 = mesh.nodes[static_cast<std::size_t>(cd.nodes[0])];
    Mat3 E = Mat3::Identity();
    for (int k = 1; k < npc; ++k)
      E.col(k - 1) = mesh.nodes[static_cast<std::size_t>(cd.nodes[static_cast<std::size_t>(k)])] - x0;
    const Mat3 Einv = E.inverse();
    Vec3 g0 = Vec3::Zero();
    for (int k = 1; k < npc; ++k) {
      const Vec3 g = Einv.row(k - 1).transpose();
      cd.grad.col(k) = g;
      g0 -= g;
    }
    cd.grad.col(0) = g0;
    if (sp.dim == 2) cd.grad.row(2).setZero();

    for (int k = 0; k < npc; ++k) {
      const auto face = meshdetail::cell_face(cd.nodes, npc, k);
      const auto key = meshdetail::facet_key(face.data(), mesh.nodes_per_facet());
      auto [it, inserted] = face_cells.try_emplace(key, std::make_pair(c, k));
      if (!inserted) {
        auto [oc, ok] = it->second;
        sp.cells[static_cast<std::size_t>(c)].neighbor[static_cast<std::size_t>(k)] = oc;
        sp.cells[static_cast<std::size_t>(oc)].neighbor[static_cast<std::size_t>(ok)] = c;
      }
    }
  }
  sp.mean_cell_volume = mesh.n_cells() > 0 ? total / mesh.n_cells() : 1.0;
  return sp;
}

// ---------------------------------------------------------------------------
// Dirichlet lifting and state reconstruction.
// ---------------------------------------------------------------------------

/// Full-length vector holding the prescribed values on constrained dofs and
/// zero on free dofs.
inline VecX dirichlet_lift(const FeSpace& sp, double load) {
  VecX g = VecX::Zero(sp.n_dofs);
  for (int d = 0; d < sp.n_dofs; ++d) {
    const auto& pin = sp.pins[static_cast<std::size_t>(d)];
    if (pin.cond < 0) continue;
    const auto& cond = sp.conditions[static_cast<std::size_t>(pin.cond)].second;
    const int node = d / sp.dim, comp = d % sp.dim;
    if (cond.kind == BoundaryCondition::Kind::DirichletVector)
      g[d] = dirichlet_displacement(cond, sp.mesh.nodes[static_cast<std::size_t>(node)], load)[comp];
    else
      g[d] = pin.sign * cond.normal_value * load;
  }
  return g;
}

/// Scatters the free dofs into the lifted full displacement vector.
inline VecX full_displacement(const FeSpace& sp, const VecX& free_u, double load) {
  VecX u = dirichlet_lift(sp, load);
  for (int k = 0; k < sp.n_free; ++k) u[sp.free_dofs[static_cast<std::size_t>(k)]] = free_u[k];
  return u;
}

namespace femdetail {

/// Deformation gradient of one cell from the full displacement vector.
inline Mat3 cell_deformation(const FeSpace& sp, const VecX& u_full, int cell) {
  const auto& cd = sp.cells[static_cast<std::size_t>(cell)];
  Mat3 F = Mat3::Identity();
  const int npc = sp.mesh.nodes_per_cell();
  for (int k = 0; k < npc; ++k) {
    const int node = cd.nodes[static_cast<std::size_t>(k)];
    for (int a = 0; a < sp.dim; ++a)
      F.row(a) += u_full[sp.dof(node, a)] * cd.grad.col(k).transpose();
  }
  return F;
}

}  // namespace femdetail

// ---------------------------------------------------------------------------
// Assembly. The residual is the gradient of the discrete potential for the
// conservative load terms (volume energy, dead tractions, normal springs);
// follower pressure contributes a configuration-dependent surface force with
// an unsymmetric tangent block.
// ---------------------------------------------------------------------------

/// Equilibrium residual restricted to the free dofs. Throws ElementInversion
/// when a trial state degenerates a cell.
inline VecX assemble_residual(const FeSpace& sp, const ConstitutiveModel& model,
                              const VecX& free_u, double load) {
  const VecX u = full_displacement(sp, free_u, load);
  VecX r = VecX::Zero(sp.n_dofs);
  const int npc = sp.mesh.nodes_per_cell();

  for (int c = 0; c < sp.mesh.n_cells(); ++c) {
    const auto& cd = sp.cells[static_cast<std::size_t>(c)];
    const Mat3 F = femdetail::cell_deformation(sp, u, c);
    DeformationState st;
    try {
      st = invariants(F);
    } catch (const NonPositiveJacobian&) {
      throw ElementInversion(c);
    }
    const Mat3 P = model.stress(st);
    for (int k = 0; k < npc; ++k) {
      const int node = cd.nodes[static_cast<std::size_t>(k)];
      const Vec3 Pg = P * cd.grad.col(k);
      for (int a = 0; a < sp.dim; ++a) r[sp.dof(node, a)] += cd.volume * Pg[a];
    }
  }

  const auto quad = femdetail::facet_quad(sp.dim);
  const int npf = sp.mesh.nodes_per_facet();
  for (const auto& fd : sp.facets) {
    if (fd.cond < 0) continue;
    const auto& cond = sp.conditions[static_cast<std::size_t>(fd.cond)].second;
    using Kind = BoundaryCondition::Kind;
    if (cond.kind == Kind::Traction || cond.kind == Kind::NormalSpring ||
        cond.kind == Kind::FollowerPressure) {
      // Dead traction shared by all three kinds.
      const Vec3 t = load * cond.traction;
      if (!t.isZero(0.0)) {
        for (int q = 0; q < quad.n; ++q) {
          const double wA = quad.w[q] * fd.area;
          for (int m = 0; m < npf; ++m) {
            const int node = fd.nodes[static_cast<std::size_t>(m)];
            for (int a = 0; a < sp.dim; ++a)
              r[sp.dof(node, a)] -= wA * quad.s[q][m] * t[a];
          }
        }
      }
    }
    if (cond.kind == Kind::NormalSpring && cond.spring_k > 0.0) {
      for (int q = 0; q < quad.n; ++q) {
        const double wA = quad.w[q] * fd.area;
        Vec3 d = Vec3::Zero();
        for (int m = 0; m < npf; ++m) {
          const int node = fd.nodes[static_cast<std::size_t>(m)];
          for (int a = 0; a < sp.dim; ++a) d[a] += quad.s[q][m] * u[sp.dof(node, a)];
        }
        const double s = cond.spring_k * d.dot(fd.normal);
        for (int m = 0; m < npf; ++m) {
          const int node = fd.nodes[static_cast<std::size_t>(m)];
          for (int a = 0; a < sp.dim; ++a)
            r[sp.dof(node, a)] += wA * s * quad.s[q][m] * fd.normal[a];
        }
      }
    }
    if (cond.kind == Kind::FollowerPressure && cond.pressure != 0.0) {
      // The deformed area vector of the facet is cof(F)*n per unit reference
      // area, with the element-constant F of the adjacent cell.
      const Mat3 F = femdetail::cell_deformation(sp, u, fd.owner);
      const Vec3 a_def = cofactor(F) * fd.normal;
      const double p = load * cond.pressure;
      for (int q = 0; q < quad.n; ++q) {
        const double wA = quad.w[q] * fd.area;
        for (int m = 0; m < npf; ++m) {
          const int node = fd.nodes[static_cast<std::size_t>(m)];
          for (int a = 0; a < sp.dim; ++a)
            r[sp.dof(node, a)] += wA * quad.s[q][m] * p * a_def[a];
        }
      }
    }
  }

  VecX rf(sp.n_free);
  for (int k = 0; k < sp.n_free; ++k) rf[k] = r[sp.free_dofs[static_cast<std::size_t>(k)]];
  return rf;
}

/// Exact tangent of the residual with respect to the free dofs.
inline SpMat assemble_tangent(const FeSpace& sp, const ConstitutiveModel& model,
                              const VecX& free_u, double load) {
  const VecX u = full_displacement(sp, free_u, load);
  std::vector<Eigen::Triplet<double>> trips;
  const int npc = sp.mesh.nodes_per_cell();
  trips.reserve(static_cast<std::size_t>(sp.mesh.n_cells()) *
                static_cast<std::size_t>(npc * npc * sp.dim * sp.dim));

  auto emit = [&](int row_dof, int col_dof, double v) {
    const int i = sp.free_index[static_cast<std::size_t>(row_dof)];
    const int j = sp.free_index[static_cast<std::size_t>(col_dof)];
    if (i >= 0 && j >= 0 && v != 0.0) trips.emplace_back(i, j, v);
  };

  for (int c = 0; c < sp.mesh.n_cells(); ++c) {
    const auto& cd = sp.cells[static_cast<std::size_t>(c)];
    const Mat3 F = femdetail::cell_deformation(sp, u, c);
    DeformationState st;
    try {
      st = invariants(F);
    } catch (const NonPositiveJacobian&) {
      throw ElementInversion(c);
    }
    const EnergyEval e = model.energy(st.I1, st.I2, st.J);
    const Tangent A = material_tangent(e, st);
    for (int m = 0; m < npc; ++m) {
      const Vec3 gm = cd.grad.col(m);
      for (int n = 0; n < npc; ++n) {
        const Vec3 gn = cd.grad.col(n);
        for (int a = 0; a < sp.dim; ++a)
          for (int b = 0; b < sp.dim; ++b) {
            double v = 0.0;
            for (int j = 0; j < 3; ++j) {
              if (gm[j] == 0.0) continue;
              for (int l = 0; l < 3; ++l) v += A(a, j, b, l) * gm[j] * gn[l];
            }
            emit(sp.dof(cd.nodes[static_cast<std::size_t>(m)], a),
                 sp.dof(cd.nodes[static_cast<std::size_t>(n)], b), cd.volume * v);
          }
      }
    }
  }

  const auto quad = femdetail::facet_quad(sp.dim);
  const int npf = sp.mesh.nodes_per_facet();
  for (const auto& fd : sp.facets) {
    if (fd.cond < 0) continue;
    const auto& cond = sp.conditions[static_cast<std::size_t>(fd.cond)].second;
    using Kind = BoundaryCondition::Kind;
    if (cond.kind == Kind::NormalSpring && cond.spring_k > 0.0) {
      for (int q = 0; q < quad.n; ++q) {
        const double wA = quad.w[q] * fd.area;
        for (int m = 0; m < npf; ++m)
          for (int n = 0; n < npf; ++n) {
            const double smn = cond.spring_k * wA * quad.s[q][m] * quad.s[q][n];
            for (int a = 0; a < sp.dim; ++a)
              for (int b = 0; b < sp.dim; ++b)
                emit(sp.dof(fd.nodes[static_cast<std::size_t>(m)], a),
                     sp.dof(fd.nodes[static_cast<std::size_t>(n)], b),
                     smn * fd.normal[a] * fd.normal[b]);
          }
      }
    }
    if (cond.kind == Kind::FollowerPressure && cond.pressure != 0.0) {
      // d(cof F)_{aj}/dF_{bl} = eps_{abm} eps_{jln} F_{mn}; the facet nodes
      // couple to every node of the adjacent cell, which makes the block
      // unsymmetric.
      const Mat3 F = femdetail::cell_deformation(sp, u, fd.owner);
      const auto& oc = sp.cells[static_cast<std::size_t>(fd.owner)];
      const double p = load * cond.pressure;
      Eigen::Matrix<double, 3, 9> D = Eigen::Matrix<double, 3, 9>::Zero();  // (a; b*3+l)
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          if (a == b) continue;
          const auto ab = detail::eps_pair(a, b);
          for (int j = 0; j < 3; ++j) {
            for (int l = 0; l < 3; ++l) {
              if (j == l) continue;
              const auto jl = detail::eps_pair(j, l);
              D(a, b * 3 + l) += fd.normal[j] * ab.sign * jl.sign * F(ab.m, jl.m);
            }
          }
        }
      for (int q = 0; q < quad.n; ++q) {
        const double wA = quad.w[q] * fd.area;
        for (int m = 0; m < npf; ++m) {
          const int row_node = fd.nodes[static_cast<std::size_t>(m)];
          for (int n = 0; n < npc; ++n) {
            const Vec3 gn = oc.grad.col(n);
            for (int a = 0; a < sp.dim; ++a)
              for (int b = 0; b < sp.dim; ++b) {
                double v = 0.0;
                for (int l = 0; l < 3; ++l) v += D(a, b * 3 + l) * gn[l];
                emit(sp.dof(row_node, a), sp.dof(oc.nodes[static_cast<std::size_t>(n)], b),
                     wA * quad.s[q][m] * p * v);
              }
          }
        }
      }
    }
  }

  SpMat K(sp.n_free, sp.n_free);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

/// Discrete total potential for the conservative terms: stored energy plus
/// spring energy minus the work of dead tractions. Follower pressure has no
/// potential and only its dead-load part is included.
inline double total_potential(const FeSpace& sp, const ConstitutiveModel& model,
                              const VecX& free_u, double load) {
  const VecX u = full_displacement(sp, free_u, load);
  double E = 0.0;
  for (int c = 0; c < sp.mesh.n_cells(); ++c) {
    const auto& cd = sp.cells[static_cast<std::size_t>(c)];
    const Mat3 F = femdetail::cell_deformation(sp, u, c);
    DeformationState st;
    try {
      st = invariants(F);
    } catch (const NonPositiveJacobian&) {
      throw ElementInversion(c);
    }
    E += cd.volume * model.energy(st.I1, st.I2, st.J).W;
  }
  const auto quad = femdetail::facet_quad(sp.dim);
  const int npf = sp.mesh.nodes_per_facet();
  for (const auto& fd : sp.facets) {
    if (fd.cond < 0) continue;
    const auto& cond = sp.conditions[static_cast<std::size_t>(fd.cond)].second;
    using Kind = BoundaryCondition::Kind;
    if (cond.kind != Kind::Traction && cond.kind != Kind::NormalSpring &&
        cond.kind != Kind::FollowerPressure)
      continue;
    const Vec3 t = load * cond.traction;
    for (int q = 0; q < quad.n; ++q) {
      const double wA = quad.w[q] * fd.area;
      Vec3 d = Vec3::Zero();
      for (int m = 0; m < npf; ++m) {
        const int node = fd.nodes[static_cast<std::size_t>(m)];
        for (int a = 0; a < sp.dim; ++a) d[a] += quad.s[q][m] * u[sp.dof(node, a)];
      }
      E -= wA * t.dot(d);
      if (cond.kind == Kind::NormalSpring && cond.spring_k > 0.0) {
        const double dn = d.dot(fd.normal);
        E += 0.5 * cond.spring_k * wA * dn * dn;
      }
    }
  }
  return E;
}

// ---------------------------------------------------------------------------
// Newton solver and load continuation.
// ---------------------------------------------------------------------------

struct NewtonOptions {
  double abs_tol = 1e-11;  // scaled by the model energy scale times the mean cell volume
  double rel_tol = 1e-9;
  int max_iters = 25;
  int max_halvings = 8;
};

struct EquilibriumSolution {
  VecX dof_vector;  // free dofs
  bool converged = false;
  int newton_iters = 0;
  double residual_norm = 0.0;
  double load_scale = 0.0;
  std::vector<double> residual_history;  // norms including the initial residual
  std::string diagnostic;
};

inline EquilibriumSolution newton_solve(const FeSpace& sp, const ConstitutiveModel& model,
                                        double load, const VecX* initial = nullptr,
                                        const NewtonOptions& opts = {}) {
  EquilibriumSolution out;
  out.load_scale = load;
  VecX u = initial ? *initial : VecX::Zero(sp.n_free);
  if (initial && initial->size() != sp.n_free) throw Error("warm start has wrong dof count");

  const double abs_tol = opts.abs_tol * model.energy_scale() * sp.mean_cell_volume;

  VecX r;
  try {
    r = assemble_residual(sp, model, u, load);
  } catch (const Error& e) {
    out.dof_vector = u;
    out.diagnostic = e.what();
    return out;
  }
  double rn = r.norm();
  const double tol = std::max(abs_tol, opts.rel_tol * rn);
  out.residual_history.push_back(rn);

  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  bool analyzed = false;
  for (;;) {
    if (rn <= tol) {
      out.converged = true;
      break;
    }
    if (out.newton_iters >= opts.max_iters) {
      out.diagnostic = "newton iteration limit reached";
      break;
    }
    SpMat K;
    try {
      K = assemble_tangent(sp, model, u, load);
    } catch (const Error& e) {
      out.diagnostic = e.what();
      break;
    }
    K.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(K);
      analyzed = true;
    }
    lu.factorize(K);
    if (lu.info() != Eigen::Success) {
      out.diagnostic = "linear solve failed: sparse factorization";
      break;
    }
    const VecX step = lu.solve(-r);
    if (lu.info() != Eigen::Success) {
      out.diagnostic = "linear solve failed: backsubstitution";
      break;
    }

    // Backtracking on the residual norm; trial states that invert an element
    // are treated as uphill.
    bool accepted = false;
    double alpha = 1.0;
    for (int h = 0; h <= opts.max_halvings; ++h, alpha *= 0.5) {
      VecX r_new;
      try {
        r_new = assemble_residual(sp, model, u + alpha * step, load);
      } catch (const Error&) {
        continue;
      }
      const double rn_new = r_new.norm();
      if (rn_new < rn || rn_new <= tol) {
        u += alpha * step;
        r = std::move(r_new);
        rn = rn_new;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.diagnostic = "line search stalled";
      break;
    }
    ++out.newton_iters;
    out.residual_history.push_back(rn);
  }

  out.dof_vector = std::move(u);
  out.residual_norm = rn;
  return out;
}

/// Ramps the load in equal increments with warm starts. A failed increment is
/// bisected, up to 10 bisections across the whole ramp; further failure
/// throws ContinuationFailure carrying the last converged load.
inline EquilibriumSolution continuation_solve(const FeSpace& sp, const ConstitutiveModel& model,
                                              double final_load, int n_steps,
                                              const NewtonOptions& opts = {},
                                              std::vector<double>* loads_out = nullptr) {
  if (n_steps < 1) throw Error("continuation requires at least one step");
  if (final_load == 0.0) return newton_solve(sp, model, 0.0, nullptr, opts);

  double l = 0.0;
  double dl = final_load / n_steps;
  int bisections = 0;
  VecX u = VecX::Zero(sp.n_free);
  EquilibriumSolution sol;
  const double done_tol = 1e-14 * std::max(1.0, std::abs(final_load));
  while (std::abs(final_load - l) > done_tol) {
    double target = l + dl;
    if ((dl > 0.0 && target > final_load) || (dl < 0.0 && target < final_load)) target = final_load;
    EquilibriumSolution trial = newton_solve(sp, model, target, &u, opts);
    if (trial.converged) {
      u = trial.dof_vector;
      l = target;
      sol = std::move(trial);
      if (loads_out) loads_out->push_back(l);
    } else {
      if (++bisections > 10) throw ContinuationFailure(l);
      dl *= 0.5;
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Reactions and interpolation.
// ---------------------------------------------------------------------------

namespace femdetail {

inline int dirichlet_cond_index(const FeSpace& sp, const std::string& tag) {
  for (int i = 0; i < static_cast<int>(sp.conditions.size()); ++i)
    if (sp.conditions[static_cast<std::size_t>(i)].first == tag) {
      if (!sp.conditions[static_cast<std::size_t>(i)].second.is_dirichlet())
        throw TagNotDirichlet(tag);
      return i;
    }
  throw TagNotDirichlet(tag);
}

}  // namespace femdetail

/// Net first Piola traction over a tagged Dirichlet boundary,
/// facet-midpoint quadrature with the element-constant stress of the
/// adjacent cell.
inline Vec3 reaction_vector(const FeSpace& sp, const ConstitutiveModel& model,
                            const VecX& free_u, double load, const std::string& tag) {
  const int ci = femdetail::dirichlet_cond_index(sp, tag);
  const VecX u = full_displacement(sp, free_u, load);
  Vec3 R = Vec3::Zero();
  for (const auto& fd : sp.facets) {
    if (fd.cond != ci) continue;
    const Mat3 F = femdetail::cell_deformation(sp, u, fd.owner);
    const Mat3 P = model.stress(invariants(F));
    R += fd.area * (P * fd.normal);
  }
  return R;
}

/// Normal component of the reaction: integral of (P n) . n over the tagged
/// boundary. Positive in tension on a stretched face.
inline double reaction_force(const FeSpace& sp, const ConstitutiveModel& model,
                             const VecX& free_u, double load, const std::string& tag) {
  const int ci = femdetail::dirichlet_cond_index(sp, tag);
  const VecX u = full_displacement(sp, free_u, load);
  double R = 0.0;
  for (const auto& fd : sp.facets) {
    if (fd.cond != ci) continue;
    const Mat3 F = femdetail::cell_deformation(sp, u, fd.owner);
    const Mat3 P = model.stress(invariants(F));
    R += fd.area * fd.normal.dot(P * fd.normal);
  }
  return R;
}

/// Containing cell and barycentric coordinates of a point, found by walking
/// across cell faces from a hint cell with a brute-force fallback for
/// nonconvex domains. cell stays -1 when the point lies outside the mesh.
struct PointLocation {
  int cell = -1;
  std::array<double, 4> bary{0, 0, 0, 0};
};

inline PointLocation locate_point(const FeSpace& sp, const Vec3& X, int hint = 0) {
  const int npc = sp.mesh.nodes_per_cell();
  const double slack = -1e-10;
  auto barycentric = [&](int cell, std::array<double, 4>& bary) {
    const auto& cd = sp.cells[static_cast<std::size_t>(cell)];
    Vec3 centroid = Vec3::Zero();
    for (int k = 0; k < npc; ++k)
      centroid += sp.mesh.nodes[static_cast<std::size_t>(cd.nodes[static_cast<std::size_t>(k)])];
    centroid /= npc;
    int worst = 0;
    for (int k = 0; k < npc; ++k) {
      bary[static_cast<std::size_t>(k)] = 1.0 / npc + cd.grad.col(k).dot(X - centroid);
      if (bary[static_cast<std::size_t>(k)] < bary[static_cast<std::size_t>(worst)]) worst = k;
    }
    return worst;
  };

  PointLocation loc;
  if (sp.mesh.n_cells() == 0) return loc;
  int cur = std::clamp(hint, 0, sp.mesh.n_cells() - 1);
  const int max_steps = 2 * sp.mesh.n_cells();
  for (int step = 0; step < max_steps; ++step) {
    std::array<double, 4> bary{0, 0, 0, 0};
    const int worst = barycentric(cur, bary);
    if (bary[static_cast<std::size_t>(worst)] >= slack) {
      loc.cell = cur;
      loc.bary = bary;
      return loc;
    }
    const int next = sp.cells[static_cast<std::size_t>(cur)].neighbor[static_cast<std::size_t>(worst)];
    if (next < 0) break;
    cur = next;
  }
  // Walks can stall on nonconvex domains; scan everything before giving up.
  for (int c = 0; c < sp.mesh.n_cells(); ++c) {
    std::array<double, 4> bary{0, 0, 0, 0};
    const int worst = barycentric(c, bary);
    if (bary[static_cast<std::size_t>(worst)] >= slack) {
      loc.cell = c;
      loc.bary = bary;
      return loc;
    }
  }
  return loc;
}

/// P1 interpolation of the full displacement at one located point.
inline Vec3 interpolate_at(const FeSpace& sp, const VecX& u_full, const PointLocation& loc) {
  const auto& cd = sp.cells[static_cast<std::size_t>(loc.cell)];
  Vec3 d = Vec3::Zero();
  for (int k = 0; k < sp.mesh.nodes_per_cell(); ++k) {
    const int node = cd.nodes[static_cast<std::size_t>(k)];
    for (int a = 0; a < sp.dim; ++a)
      d[a] += loc.bary[static_cast<std::size_t>(k)] * u_full[sp.dof(node, a)];
  }
  return d;
}

/// P1 interpolation of the full displacement vector at the given points.
/// Throws PointOutsideMesh with the offending point index.
inline std::vector<Vec3> interpolate_displacement(const FeSpace& sp, const VecX& u_full,
                                                  const std::vector<Vec3>& points) {
  std::vector<Vec3> out(points.size(), Vec3::Zero());
  int hint = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const PointLocation loc = locate_point(sp, points[i], hint);
    if (loc.cell < 0) throw PointOutsideMesh(static_cast<int>(i));
    hint = loc.cell;
    out[i] = interpolate_at(sp, u_full, loc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solution files: text format mirroring the mesh format, carrying the free
// dof vector at full precision plus the checksum of the originating mesh.
// ---------------------------------------------------------------------------

struct SolutionFile {
  VecX dofs;
  std::string mesh_checksum;
  double load_scale = 0.0;
  bool converged = false;
};

inline std::string solution_to_string(const EquilibriumSolution& sol,
                                      const std::string& mesh_checksum) {
  std::string out;
  char buf[64];
  out += "solution " + std::to_string(sol.dof_vector.size()) + "\n";
  out += "checksum " + mesh_checksum + "\n";
  std::snprintf(buf, sizeof buf, "load %.17g\n", sol.load_scale);
  out += buf;
  out += std::string("converged ") + (sol.converged ? "1" : "0") + "\n";
  for (int i = 0; i < sol.dof_vector.size(); ++i) {
    std::snprintf(buf, sizeof buf, "d %.17g\n", sol.dof_vector[i]);
    out += buf;
  }
  return out;
}

inline void save_solution(const std::string& path, const EquilibriumSolution& sol,
                          const std::string& mesh_checksum) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << solution_to_string(sol, mesh_checksum);
  if (!f) throw Error("failed writing '" + path + "'");
}

inline SolutionFile load_solution(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw MalformedDataset("cannot open solution file '" + path + "'");
  SolutionFile out;
  std::string line;
  long n = -1;
  int have = 0;
  int line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw MalformedDataset("solution file " + path + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "solution") {
      if (n >= 0) fail("duplicate header");
      if (!(ss >> n) || n < 0) fail("bad dof count");
      out.dofs = VecX::Zero(n);
    } else if (key == "checksum") {
      if (!(ss >> out.mesh_checksum)) fail("bad checksum");
    } else if (key == "load") {
      if (!(ss >> out.load_scale)) fail("bad load");
    } else if (key == "converged") {
      int c = 0;
      if (!(ss >> c)) fail("bad converged flag");
      out.converged = c != 0;
    } else if (key == "d") {
      if (n < 0) fail("dof record before header");
      if (have >= n) fail("more dof records than declared");
      if (!(ss >> out.dofs[have])) fail("bad dof value");
      ++have;
    } else {
      fail("unknown record '" + key + "'");
    }
    std::string rest;
    if (ss >> rest) fail("trailing fields");
  }
  if (n < 0) throw MalformedDataset("solution file " + path + ": missing header");
  if (have != n)
    throw MalformedDataset("solution file " + path + ": expected " + std::to_string(n) +
                           " dof records, found " + std::to_string(have));
  if (out.mesh_checksum.empty())
    throw MalformedDataset("solution file " + path + ": missing mesh checksum");
  return out;
}

}  // namespace hyperfit
