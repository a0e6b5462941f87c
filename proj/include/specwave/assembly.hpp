#pragma once

// Global numbering and matrix-free evaluation of the coupled acoustic/elastic
// system
//
//   M_a phi_tt + K_a phi = C u + F_a - B_a phi_t
//   M_e u_tt   + K_e u   = -C^T phi_tt + F_e - B_e u_t
//
// with fluid pressure p = -phi_tt and fluid displacement rho^-1 grad(phi).
// M_a carries 1/(rho vp^2), K_a carries 1/rho. C integrates u.n over
// fluid/solid faces with n pointing out of the fluid. B_a, B_e are the
// first-order paraxial (Stacey) boundary terms. All integrals use GLL
// collocation, so both mass matrices are diagonal.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "specwave/error.hpp"
#include "specwave/gll.hpp"
#include "specwave/hexmesh.hpp"
#include "specwave/material.hpp"

namespace specwave {

inline constexpr double kMergeTolerance = 1e-9;  // metres

struct DofMap {
  int points_per_dir = 0;
  int points_per_elem = 0;
  std::vector<Vec3> coords;        // per global node
  std::vector<int> fluid_index;    // per global node, -1 if no acoustic element touches it
  std::vector<int> solid_index;    // per global node, -1 if no elastic element touches it
  std::vector<int> elem_nodes;     // num_elements * points_per_elem global ids
  std::vector<DomainKind> elem_kind;
  std::size_t num_fluid = 0;
  std::size_t num_solid = 0;
  std::size_t num_interface = 0;

  std::size_t num_global() const { return coords.size(); }
  int global(int e, int p) const { return elem_nodes[std::size_t(e) * points_per_elem + p]; }
};

namespace detail {

// Corner node ids of the smallest element entity (vertex, edge, face, cell)
// containing local GLL point (i, j, k).
inline std::vector<int> entity_corners(const HexMesh& mesh, int e, int n, int i, int j, int k) {
  const std::array<int, 3> idx{i, j, k};
  std::vector<int> ids;
  for (int a = 0; a < 8; ++a) {
    bool ok = true;
    for (int d = 0; d < 3; ++d) {
      if (idx[d] == 0 && kCornerSigns[a][d] > 0) ok = false;
      if (idx[d] == n - 1 && kCornerSigns[a][d] < 0) ok = false;
    }
    if (ok) ids.push_back(mesh.elements[e].nodes[a]);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct QuantKey {
  std::int64_t x, y, z;
  bool operator==(const QuantKey&) const = default;
};

struct QuantKeyHash {
  std::size_t operator()(const QuantKey& k) const noexcept {
    std::uint64_t h = std::uint64_t(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= std::uint64_t(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= std::uint64_t(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return std::size_t(h);
  }
};

}  // namespace detail

/// Deterministic numbering: GLL points merged within 1e-9 m, then ordered
/// lexicographically by rounded (z, y, x), i.e. x runs fastest.
inline DofMap build_dofmap(const HexMesh& mesh, const MaterialTable& table, const GllRule& rule) {
  const int n = rule.points();
  const int npe = n * n * n;
  const std::size_t ne = mesh.num_elements();
  if (ne == 0) throw Error(ErrorKind::MeshUnusable, "empty mesh");

  DofMap dm;
  dm.points_per_dir = n;
  dm.points_per_elem = npe;
  dm.elem_kind.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const int mat = mesh.elements[e].material;
    if (!table.contains(mat))
      throw Error(ErrorKind::InvalidMaterial,
                  "element " + std::to_string(e) + " uses undefined material " + std::to_string(mat));
    dm.elem_kind[e] = domain_kind(table.at(mat));
  }

  // Provisional merge with coarse buckets; exact test is distance <= tolerance.
  const double bucket = 1e-6;
  std::unordered_map<detail::QuantKey, std::vector<int>, detail::QuantKeyHash> buckets;
  std::vector<Vec3> pts;
  dm.elem_nodes.resize(ne * npe);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto c = mesh.corners(int(e));
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const Vec3 ref{rule.nodes[i], rule.nodes[j], rule.nodes[k]};
          if (!(map_jacobian(c, ref).det() > 0))
            throw Error(ErrorKind::InvertedElement,
                        "element " + std::to_string(e) + " is inverted at a GLL point");
          const Vec3 x = map_point(c, ref);
          const detail::QuantKey key{std::llround(x.x / bucket), std::llround(x.y / bucket),
                                     std::llround(x.z / bucket)};
          int found = -1;
          for (int dz = -1; dz <= 1 && found < 0; ++dz)
            for (int dy = -1; dy <= 1 && found < 0; ++dy)
              for (int dx = -1; dx <= 1 && found < 0; ++dx) {
                auto it = buckets.find({key.x + dx, key.y + dy, key.z + dz});
                if (it == buckets.end()) continue;
                for (int cand : it->second)
                  if (norm(pts[cand] - x) <= kMergeTolerance) {
                    found = cand;
                    break;
                  }
              }
          if (found < 0) {
            found = int(pts.size());
            pts.push_back(x);
            buckets[key].push_back(found);
          }
          dm.elem_nodes[e * npe + i + n * (j + n * k)] = found;
        }
  }

  // Conformity: every element sharing a GLL point must share the same entity.
  std::vector<std::pair<int, int>> first_use(pts.size(), {-1, -1});
  for (std::size_t e = 0; e < ne; ++e)
    for (int p = 0; p < npe; ++p) {
      const int g = dm.elem_nodes[e * npe + p];
      auto& fu = first_use[g];
      if (fu.first < 0) {
        fu = {int(e), p};
        continue;
      }
      if (fu.first == int(e))
        throw Error(ErrorKind::NonConformalMesh,
                    "element " + std::to_string(e) + " has coincident GLL points");
      const auto a = detail::entity_corners(mesh, fu.first, n, fu.second % n, (fu.second / n) % n,
                                            fu.second / (n * n));
      const auto b = detail::entity_corners(mesh, int(e), n, p % n, (p / n) % n, p / (n * n));
      if (a != b)
        throw Error(ErrorKind::NonConformalMesh, "elements " + std::to_string(fu.first) + " and " +
                                                     std::to_string(e) +
                                                     " share a GLL point without sharing topology");
    }

  // Deterministic order.
  std::vector<int> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  auto rounded = [&](int i, int d) { return std::llround(pts[i][d] / kMergeTolerance); };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int d = 2; d >= 0; --d) {
      const auto ra = rounded(a, d), rb = rounded(b, d);
      if (ra != rb) return ra < rb;
    }
    return a < b;
  });
  std::vector<int> renum(pts.size());
  dm.coords.resize(pts.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    renum[order[r]] = int(r);
    dm.coords[r] = pts[order[r]];
  }
  for (auto& g : dm.elem_nodes) g = renum[g];

  std::vector<char> fluid(pts.size(), 0), solid(pts.size(), 0);
  for (std::size_t e = 0; e < ne; ++e)
    for (int p = 0; p < npe; ++p) {
      const int g = dm.elem_nodes[e * npe + p];
      (dm.elem_kind[e] == DomainKind::Acoustic ? fluid : solid)[g] = 1;
    }
  dm.fluid_index.assign(pts.size(), -1);
  dm.solid_index.assign(pts.size(), -1);
  for (std::size_t g = 0; g < pts.size(); ++g) {
    if (fluid[g]) dm.fluid_index[g] = int(dm.num_fluid++);
    if (solid[g]) dm.solid_index[g] = int(dm.num_solid++);
    if (fluid[g] && solid[g]) ++dm.num_interface;
  }
  return dm;
}

struct DiagonalMass {
  std::vector<double> fluid;  // per fluid DOF
  std::vector<double> solid;  // per solid node; identical for its 3 components
};

/// phi_* sized num_fluid; u_* sized 3 * num_solid, components interleaved.
struct FieldVectors {
  std::vector<double> phi, phi_dot, phi_ddot;
  std::vector<double> u, u_dot, u_ddot;

  static FieldVectors zeros(const DofMap& dm) {
    FieldVectors f;
    f.phi.assign(dm.num_fluid, 0.0);
    f.phi_dot = f.phi_ddot = f.phi;
    f.u.assign(3 * dm.num_solid, 0.0);
    f.u_dot = f.u_ddot = f.u;
    return f;
  }
};

struct CouplingPoint {
  int fluid_dof;
  int solid_node;
  Vec3 weighted_normal;  // w * |J_s| * n, n out of the fluid
};

struct FluidAbsorbingPoint {
  int fluid_dof;
  double coef;  // w * |J_s| / (rho vp)
};

struct SolidAbsorbingPoint {
  int solid_node;
  double weight;  // w * |J_s|
  Vec3 normal;
  double rho_vp, rho_vs;
};

struct SymmetryConstraint {
  int solid_node;
  std::vector<Vec3> normals;  // orthonormal
};

namespace detail {

template <typename F>
decltype(auto) dispatch_points(int np, F&& f) {
  switch (np) {
    case 2: return f(std::integral_constant<int, 2>{});
    case 3: return f(std::integral_constant<int, 3>{});
    case 4: return f(std::integral_constant<int, 4>{});
    case 5: return f(std::integral_constant<int, 5>{});
    case 6: return f(std::integral_constant<int, 6>{});
    case 7: return f(std::integral_constant<int, 7>{});
    case 8: return f(std::integral_constant<int, 8>{});
    case 9: return f(std::integral_constant<int, 9>{});
    case 10: return f(std::integral_constant<int, 10>{});
    case 11: return f(std::integral_constant<int, 11>{});
    default: throw Error(ErrorKind::InvalidDegree, "unsupported number of GLL points");
  }
}

// out = K_e phi for one element. geom holds 6 entries per point:
// the symmetric tensor (w det J / rho) * invJ invJ^T.
template <int NP>
void acoustic_kernel(const double* D, const double* geom, const double* phi, double* out) {
  constexpr int NPE = NP * NP * NP;
  double f1[NPE], f2[NPE], f3[NPE];
  for (int k = 0; k < NP; ++k)
    for (int j = 0; j < NP; ++j)
      for (int i = 0; i < NP; ++i) {
        double d1 = 0, d2 = 0, d3 = 0;
        for (int l = 0; l < NP; ++l) {
          d1 += D[i * NP + l] * phi[l + NP * (j + NP * k)];
          d2 += D[j * NP + l] * phi[i + NP * (l + NP * k)];
          d3 += D[k * NP + l] * phi[i + NP * (j + NP * l)];
        }
        const int p = i + NP * (j + NP * k);
        const double* g = geom + 6 * p;
        f1[p] = g[0] * d1 + g[1] * d2 + g[2] * d3;
        f2[p] = g[1] * d1 + g[3] * d2 + g[4] * d3;
        f3[p] = g[2] * d1 + g[4] * d2 + g[5] * d3;
      }
  for (int c = 0; c < NP; ++c)
    for (int b = 0; b < NP; ++b)
      for (int a = 0; a < NP; ++a) {
        double s = 0;
        for (int l = 0; l < NP; ++l) {
          s += D[l * NP + a] * f1[l + NP * (b + NP * c)];
          s += D[l * NP + b] * f2[a + NP * (l + NP * c)];
          s += D[l * NP + c] * f3[a + NP * (b + NP * l)];
        }
        out[a + NP * (b + NP * c)] = s;
      }
}

// out = K_e u for one element, fields stored component-major: u[c * NPE + p].
// geom holds 10 entries per point: invJ (row-major, d xi_s / d x_a) then w det J.
template <int NP>
void elastic_kernel(const double* D, const double* geom, double lambda, double mu, const double* u,
                    double* out) {
  constexpr int NPE = NP * NP * NP;
  double f[3][3][NPE];  // f[s][c][p]
  for (int k = 0; k < NP; ++k)
    for (int j = 0; j < NP; ++j)
      for (int i = 0; i < NP; ++i) {
        const int p = i + NP * (j + NP * k);
        double dref[3][3];  // dref[c][s] = d u_c / d xi_s
        for (int c = 0; c < 3; ++c) {
          const double* uc = u + c * NPE;
          double d1 = 0, d2 = 0, d3 = 0;
          for (int l = 0; l < NP; ++l) {
            d1 += D[i * NP + l] * uc[l + NP * (j + NP * k)];
            d2 += D[j * NP + l] * uc[i + NP * (l + NP * k)];
            d3 += D[k * NP + l] * uc[i + NP * (j + NP * l)];
          }
          dref[c][0] = d1;
          dref[c][1] = d2;
          dref[c][2] = d3;
        }
        const double* g = geom + 10 * p;
        double grad[3][3];  // grad[c][a] = d u_c / d x_a
        for (int c = 0; c < 3; ++c)
          for (int a = 0; a < 3; ++a)
            grad[c][a] = dref[c][0] * g[0 * 3 + a] + dref[c][1] * g[1 * 3 + a] + dref[c][2] * g[2 * 3 + a];
        const double tr = grad[0][0] + grad[1][1] + grad[2][2];
        double sigma[3][3];
        for (int a = 0; a < 3; ++a)
          for (int c = 0; c < 3; ++c) sigma[a][c] = mu * (grad[c][a] + grad[a][c]) + (a == c ? lambda * tr : 0.0);
        const double wj = g[9];
        for (int s = 0; s < 3; ++s)
          for (int c = 0; c < 3; ++c)
            f[s][c][p] = wj * (g[s * 3 + 0] * sigma[0][c] + g[s * 3 + 1] * sigma[1][c] + g[s * 3 + 2] * sigma[2][c]);
      }
  for (int c = 0; c < 3; ++c)
    for (int z = 0; z < NP; ++z)
      for (int y = 0; y < NP; ++y)
        for (int x = 0; x < NP; ++x) {
          double s = 0;
          for (int l = 0; l < NP; ++l) {
            s += D[l * NP + x] * f[0][c][l + NP * (y + NP * z)];
            s += D[l * NP + y] * f[1][c][x + NP * (l + NP * z)];
            s += D[l * NP + z] * f[2][c][x + NP * (y + NP * l)];
          }
          out[c * NPE + x + NP * (y + NP * z)] = s;
        }
}

}  // namespace detail

/// Owns every precomputed quantity needed to evaluate the right-hand side.
/// Read-only after construction; operator applications are pure.
class WaveOperators {
 public:
  WaveOperators(const HexMesh& mesh, const MaterialTable& table, const GllRule& rule, int threads = 1)
      : rule_(rule), basis_(rule), threads_(std::max(1, threads)) {
    validate_mesh(mesh);
    dofs_ = build_dofmap(mesh, table, rule);
    const int n = rule.points();
    const int npe = n * n * n;
    const std::size_t ne = mesh.num_elements();

    mass_.fluid.assign(dofs_.num_fluid, 0.0);
    mass_.solid.assign(dofs_.num_solid, 0.0);
    for (std::size_t e = 0; e < ne; ++e) {
      const ElementGeometry g = element_geometry(mesh, int(e), rule);
      const auto& props = table.at(mesh.elements[e].material);
      if (dofs_.elem_kind[e] == DomainKind::Acoustic) {
        acoustic_elems_.push_back(int(e));
        const double inv_rho = 1.0 / props.rho;
        const double inv_kappa = 1.0 / props.bulk_modulus();
        for (int p = 0; p < npe; ++p) {
          const double wdet = point_weight(p) * g.det[p];
          const Mat3& iv = g.inverse[p];
          double sym[6];
          int idx = 0;
          for (int r = 0; r < 3; ++r)
            for (int s = r; s < 3; ++s) {
              double v = 0;
              for (int a = 0; a < 3; ++a) v += iv(r, a) * iv(s, a);
              sym[idx++] = wdet * inv_rho * v;
            }
          acoustic_geom_.insert(acoustic_geom_.end(), sym, sym + 6);
          mass_.fluid[dofs_.fluid_index[dofs_.global(int(e), p)]] += wdet * inv_kappa;
        }
      } else {
        elastic_elems_.push_back(int(e));
        elastic_lambda_.push_back(props.lame_lambda());
        elastic_mu_.push_back(props.lame_mu());
        for (int p = 0; p < npe; ++p) {
          const double wdet = point_weight(p) * g.det[p];
          const Mat3& iv = g.inverse[p];
          for (int r = 0; r < 3; ++r)
            for (int a = 0; a < 3; ++a) elastic_geom_.push_back(iv(r, a));
          elastic_geom_.push_back(wdet);
          mass_.solid[dofs_.solid_index[dofs_.global(int(e), p)]] += wdet * props.rho;
        }
      }
    }
    for (double m : mass_.fluid)
      if (!(m > 0)) throw Error(ErrorKind::AssemblyIntegrity, "non-positive fluid mass entry");
    for (double m : mass_.solid)
      if (!(m > 0)) throw Error(ErrorKind::AssemblyIntegrity, "non-positive solid mass entry");

    setup_faces(mesh, table);
  }

  const GllRule& rule() const { return rule_; }
  const LagrangeTable& basis() const { return basis_; }
  const DofMap& dofs() const { return dofs_; }
  const DiagonalMass& mass() const { return mass_; }
  int threads() const { return threads_; }
  void set_threads(int t) { threads_ = std::max(1, t); }

  const std::vector<CouplingPoint>& coupling_points() const { return coupling_; }
  const std::vector<FluidAbsorbingPoint>& fluid_absorbing_points() const { return fluid_abs_; }
  const std::vector<SolidAbsorbingPoint>& solid_absorbing_points() const { return solid_abs_; }
  const std::vector<SymmetryConstraint>& symmetry_constraints() const { return symmetry_; }
  std::size_t num_coupling_faces() const { return num_coupling_faces_; }

  /// out = K_a phi.
  void apply_acoustic_stiffness(std::span<const double> phi, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int npe = dofs_.points_per_elem;
    detail::dispatch_points(dofs_.points_per_dir, [&](auto np) {
      constexpr int NP = decltype(np)::value;
      constexpr int NPE = NP * NP * NP;
      const double* D = basis_.deriv_matrix().data();
      auto element = [&](std::size_t ia, double* local_out) {
        const int e = acoustic_elems_[ia];
        double local[NPE];
        for (int p = 0; p < NPE; ++p) local[p] = phi[dofs_.fluid_index[dofs_.global(e, p)]];
        detail::acoustic_kernel<NP>(D, acoustic_geom_.data() + ia * 6 * NPE, local, local_out);
      };
      auto scatter = [&](std::size_t ia, const double* local_out) {
        const int e = acoustic_elems_[ia];
        for (int p = 0; p < NPE; ++p) out[dofs_.fluid_index[dofs_.global(e, p)]] += local_out[p];
      };
      run_elements(acoustic_elems_.size(), npe, element, scatter);
    });
  }

  /// out = K_e u, 3 interleaved components per solid node.
  void apply_elastic_stiffness(std::span<const double> u, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const int npe = dofs_.points_per_elem;
    detail::dispatch_points(dofs_.points_per_dir, [&](auto np) {
      constexpr int NP = decltype(np)::value;
      constexpr int NPE = NP * NP * NP;
      const double* D = basis_.deriv_matrix().data();
      auto element = [&](std::size_t ie, double* local_out) {
        const int e = elastic_elems_[ie];
        double local[3 * NPE];
        for (int p = 0; p < NPE; ++p) {
          const int s = dofs_.solid_index[dofs_.global(e, p)];
          for (int c = 0; c < 3; ++c) local[c * NPE + p] = u[3 * s + c];
        }
        detail::elastic_kernel<NP>(D, elastic_geom_.data() + ie * 10 * NPE, elastic_lambda_[ie],
                                   elastic_mu_[ie], local, local_out);
      };
      auto scatter = [&](std::size_t ie, const double* local_out) {
        const int e = elastic_elems_[ie];
        for (int p = 0; p < NPE; ++p) {
          const int s = dofs_.solid_index[dofs_.global(e, p)];
          for (int c = 0; c < 3; ++c) out[3 * s + c] += local_out[c * NPE + p];
        }
      };
      run_elements(elastic_elems_.size(), 3 * npe, element, scatter);
    });
  }

  /// fluid_out += C u (normal solid displacement flux into the fluid).
  void add_coupling_to_fluid(std::span<const double> u, std::span<double> fluid_out) const {
    for (const auto& c : coupling_) {
      const double* us = &u[3 * c.solid_node];
      fluid_out[c.fluid_dof] += c.weighted_normal.x * us[0] + c.weighted_normal.y * us[1] +
                                c.weighted_normal.z * us[2];
    }
  }

  /// solid_out += -C^T phi_tt, i.e. the traction -p n_solid with p = -phi_tt.
  void add_coupling_to_solid(std::span<const double> phi_ddot, std::span<double> solid_out) const {
    for (const auto& c : coupling_) {
      const double a = phi_ddot[c.fluid_dof];
      double* fs = &solid_out[3 * c.solid_node];
      fs[0] -= c.weighted_normal.x * a;
      fs[1] -= c.weighted_normal.y * a;
      fs[2] -= c.weighted_normal.z * a;
    }
  }

  void add_stacey_fluid(std::span<const double> phi_dot, std::span<double> fluid_out) const {
    for (const auto& a : fluid_abs_) fluid_out[a.fluid_dof] -= a.coef * phi_dot[a.fluid_dof];
  }

  void add_stacey_solid(std::span<const double> u_dot, std::span<double> solid_out) const {
    for (const auto& a : solid_abs_) {
      const double* v = &u_dot[3 * a.solid_node];
      const Vec3 vel{v[0], v[1], v[2]};
      const double vn = dot(vel, a.normal);
      const Vec3 t = (a.rho_vp * vn) * a.normal + a.rho_vs * (vel - vn * a.normal);
      double* fs = &solid_out[3 * a.solid_node];
      fs[0] -= a.weight * t.x;
      fs[1] -= a.weight * t.y;
      fs[2] -= a.weight * t.z;
    }
  }

  /// Solves (M_a + dt/2 B_a) a = rhs; B_a is diagonal.
  void solve_fluid_acceleration(std::span<const double> rhs, double dt, std::span<double> out) const {
    for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = rhs[i] / (mass_.fluid[i] + 0.5 * dt * fluid_damping_[i]);
  }

  /// Solves (M_e + dt/2 B_e) a = rhs node by node (B_e is 3x3 per node), with
  /// the solution restricted to the admissible directions on symmetry faces.
  void solve_solid_acceleration(std::span<const double> rhs, double dt, std::span<double> out) const {
    for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = rhs[i] / mass_.solid[i / 3];
    for (const auto& sn : special_nodes_) {
      const double m = mass_.solid[sn.node];
      Mat3 a;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) a(r, c) = (r == c ? m : 0.0) + 0.5 * dt * sn.damping(r, c);
      const double* b = &rhs[3 * sn.node];
      Vec3 r{b[0], b[1], b[2]};
      if (!sn.normals.empty()) {
        Mat3 p;
        for (int d = 0; d < 3; ++d) p(d, d) = 1.0;
        for (const auto& n : sn.normals)
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) p(i, j) -= n[i] * n[j];
        Mat3 pap;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            double v = 0;
            for (int k = 0; k < 3; ++k)
              for (int l = 0; l < 3; ++l) v += p(i, k) * a(k, l) * p(l, j);
            pap(i, j) = v + m * ((i == j ? 1.0 : 0.0) - p(i, j));
          }
        a = pap;
        r = p * r;
      }
      const Vec3 x = a.inverse() * r;
      double* o = &out[3 * sn.node];
      o[0] = x.x;
      o[1] = x.y;
      o[2] = x.z;
    }
  }

  /// Removes constrained normal components on symmetry faces.
  void project_constraints(std::span<double> u) const {
    for (const auto& c : symmetry_) {
      double* v = &u[3 * c.solid_node];
      for (const auto& n : c.normals) {
        const double d = v[0] * n.x + v[1] * n.y + v[2] * n.z;
        v[0] -= d * n.x;
        v[1] -= d * n.y;
        v[2] -= d * n.z;
      }
    }
  }

  // Convenience forms on whole states.

  std::vector<double> acoustic_stiffness(const FieldVectors& s) const {
    std::vector<double> out(dofs_.num_fluid);
    apply_acoustic_stiffness(s.phi, out);
    return out;
  }

  std::vector<double> elastic_stiffness(const FieldVectors& s) const {
    std::vector<double> out(3 * dofs_.num_solid);
    apply_elastic_stiffness(s.u, out);
    return out;
  }

  /// (fluid-side load C u, solid-side load -C^T phi_tt)
  std::pair<std::vector<double>, std::vector<double>> coupling_terms(const FieldVectors& s) const {
    std::vector<double> fa(dofs_.num_fluid, 0.0), fe(3 * dofs_.num_solid, 0.0);
    add_coupling_to_fluid(s.u, fa);
    add_coupling_to_solid(s.phi_ddot, fe);
    return {fa, fe};
  }

  /// (fluid damping load, solid damping load) from phi_t and u_t.
  std::pair<std::vector<double>, std::vector<double>> stacey_terms(const FieldVectors& s) const {
    std::vector<double> fa(dofs_.num_fluid, 0.0), fe(3 * dofs_.num_solid, 0.0);
    add_stacey_fluid(s.phi_dot, fa);
    add_stacey_solid(s.u_dot, fe);
    return {fa, fe};
  }

  /// E = 1/2 (phi_tt M_a phi_tt + phi_t K_a phi_t + u_t M_e u_t + u K_e u).
  /// This is the acoustic potential energy p^2/(2 kappa) plus kinetic energy
  /// rho |v|^2 / 2 in the fluid, and the usual elastic energy in the solid.
  double energy(const FieldVectors& s) const {
    double e = 0;
    if (dofs_.num_fluid) {
      std::vector<double> k(dofs_.num_fluid);
      apply_acoustic_stiffness(s.phi_dot, k);
      for (std::size_t i = 0; i < dofs_.num_fluid; ++i)
        e += 0.5 * (mass_.fluid[i] * s.phi_ddot[i] * s.phi_ddot[i] + s.phi_dot[i] * k[i]);
    }
    if (dofs_.num_solid) {
      std::vector<double> k(3 * dofs_.num_solid);
      apply_elastic_stiffness(s.u, k);
      for (std::size_t i = 0; i < 3 * dofs_.num_solid; ++i)
        e += 0.5 * (mass_.solid[i / 3] * s.u_dot[i] * s.u_dot[i] + s.u[i] * k[i]);
    }
    return e;
  }

 private:
  double point_weight(int p) const {
    const int n = rule_.points();
    return rule_.weights[p % n] * rule_.weights[(p / n) % n] * rule_.weights[p / (n * n)];
  }

  // Element results are always summed into the global vector in ascending
  // element order, so the output does not depend on the thread count.
  template <typename Element, typename Scatter>
  void run_elements(std::size_t count, int local_size, Element&& element, Scatter&& scatter) const {
    if (threads_ == 1 || count < 2) {
      std::vector<double> local(local_size);
      for (std::size_t i = 0; i < count; ++i) {
        element(i, local.data());
        scatter(i, local.data());
      }
      return;
    }
    scratch_.resize(count * std::size_t(local_size));
#pragma omp parallel for schedule(static) num_threads(threads_)
    for (std::ptrdiff_t i = 0; i < std::ptrdiff_t(count); ++i)
      element(std::size_t(i), scratch_.data() + std::size_t(i) * local_size);
    for (std::size_t i = 0; i < count; ++i) scatter(i, scratch_.data() + i * local_size);
  }

  void setup_faces(const HexMesh& mesh, const MaterialTable& table) {
    const auto adj = face_adjacency(mesh);
    std::map<int, ElementGeometry> cache;
    auto face_geometry = [&](FaceRef f) -> const FaceGeometry& {
      auto it = cache.find(f.elem);
      if (it == cache.end()) it = cache.emplace(f.elem, element_geometry(mesh, f.elem, rule_)).first;
      return it->second.faces[f.face];
    };

    // Fluid/solid interfaces are detected from the material partition.
    for (const auto& [key, faces] : adj) {
      if (faces.size() != 2) continue;
      if (cache.size() > 256) cache.clear();
      const auto k0 = dofs_.elem_kind[faces[0].elem], k1 = dofs_.elem_kind[faces[1].elem];
      if (k0 == k1) continue;
      const FaceRef ff = k0 == DomainKind::Acoustic ? faces[0] : faces[1];
      const FaceRef sf = k0 == DomainKind::Acoustic ? faces[1] : faces[0];
      const FaceGeometry& fg = face_geometry(ff);
      const FaceGeometry& sg = face_geometry(sf);
      std::map<int, Vec3> solid_normals;
      for (std::size_t q = 0; q < sg.points.size(); ++q)
        solid_normals[dofs_.global(sf.elem, sg.points[q])] = sg.normals[q];
      for (std::size_t q = 0; q < fg.points.size(); ++q) {
        const int g = dofs_.global(ff.elem, fg.points[q]);
        auto it = solid_normals.find(g);
        if (it == solid_normals.end() || dot(it->second, fg.normals[q]) > -1.0 + 1e-8)
          throw Error(ErrorKind::CouplingSetup,
                      "inconsistent normals on fluid/solid face between elements " +
                          std::to_string(ff.elem) + " and " + std::to_string(sf.elem));
        coupling_.push_back({dofs_.fluid_index[g], dofs_.solid_index[g],
                             fg.normals[q] * (fg.weights[q] * fg.surface_jacobian[q])});
      }
      ++num_coupling_faces_;
    }

    for (const auto& f : mesh.face_set(to_string(BoundaryKind::Absorbing))) {
      if (cache.size() > 256) cache.clear();
      if (adj.at(face_key(mesh, f)).size() != 1)
        throw Error(ErrorKind::BoundarySetup, "absorbing face on interior face of element " +
                                                  std::to_string(f.elem));
      const auto& props = table.at(mesh.elements[f.elem].material);
      const FaceGeometry& fg = face_geometry(f);
      for (std::size_t q = 0; q < fg.points.size(); ++q) {
        const int g = dofs_.global(f.elem, fg.points[q]);
        const double w = fg.weights[q] * fg.surface_jacobian[q];
        if (dofs_.elem_kind[f.elem] == DomainKind::Acoustic)
          fluid_abs_.push_back({dofs_.fluid_index[g], w / (props.rho * props.vp)});
        else
          solid_abs_.push_back({dofs_.solid_index[g], w, fg.normals[q], props.rho * props.vp,
                                props.rho * props.vs});
      }
    }

    std::map<int, std::vector<Vec3>> constraints;
    for (const auto& f : mesh.face_set(to_string(BoundaryKind::Symmetry))) {
      if (cache.size() > 256) cache.clear();
      if (adj.at(face_key(mesh, f)).size() != 1)
        throw Error(ErrorKind::BoundarySetup, "symmetry face on interior face of element " +
                                                  std::to_string(f.elem));
      if (dofs_.elem_kind[f.elem] == DomainKind::Acoustic) continue;  // rigid wall is natural
      const FaceGeometry& fg = face_geometry(f);
      for (std::size_t q = 0; q < fg.points.size(); ++q) {
        auto& list = constraints[dofs_.solid_index[dofs_.global(f.elem, fg.points[q])]];
        Vec3 n = fg.normals[q];
        for (const auto& m : list) n -= dot(n, m) * m;
        const double len = norm(n);
        if (len > 1e-8) list.push_back(n * (1.0 / len));
      }
    }
    for (auto& [node, normals] : constraints) symmetry_.push_back({node, normals});

    fluid_damping_.assign(dofs_.num_fluid, 0.0);
    for (const auto& a : fluid_abs_) fluid_damping_[a.fluid_dof] += a.coef;
    std::map<int, SpecialNode> special;
    for (const auto& a : solid_abs_) {
      auto& sn = special[a.solid_node];
      sn.node = a.solid_node;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          sn.damping(i, j) += a.weight * ((a.rho_vp - a.rho_vs) * a.normal[i] * a.normal[j] +
                                          (i == j ? a.rho_vs : 0.0));
    }
    for (const auto& c : symmetry_) {
      auto& sn = special[c.solid_node];
      sn.node = c.solid_node;
      sn.normals = c.normals;
    }
    for (auto& [node, sn] : special) special_nodes_.push_back(std::move(sn));
  }

  struct SpecialNode {
    int node = -1;
    Mat3 damping;
    std::vector<Vec3> normals;
  };

  GllRule rule_;
  LagrangeTable basis_;
  int threads_;
  DofMap dofs_;
  DiagonalMass mass_;

  std::vector<int> acoustic_elems_;
  std::vector<double> acoustic_geom_;
  std::vector<int> elastic_elems_;
  std::vector<double> elastic_geom_;
  std::vector<double> elastic_lambda_, elastic_mu_;

  std::vector<CouplingPoint> coupling_;
  std::size_t num_coupling_faces_ = 0;
  std::vector<FluidAbsorbingPoint> fluid_abs_;
  std::vector<SolidAbsorbingPoint> solid_abs_;
  std::vector<SymmetryConstraint> symmetry_;
  std::vector<double> fluid_damping_;
  std::vector<SpecialNode> special_nodes_;

  mutable std::vector<double> scratch_;
};

inline DiagonalMass assemble_mass(const WaveOperators& ops) { return ops.mass(); }

}  // namespace specwave
