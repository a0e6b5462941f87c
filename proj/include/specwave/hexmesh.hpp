#pragma once

// Hexahedral meshes with trilinear (8-node) geometry.
//
// Corner ordering: bottom face (reference zeta = -1) counter-clockwise seen
// from +z starting at (-,-,-), then the top face in the same order.
// Local faces: 0:-x 1:+x 2:-y 3:+y 4:-z 5:+z in reference coordinates.
// GLL points inside an element are numbered p = i + n*(j + n*k) with i along xi.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "specwave/error.hpp"
#include "specwave/gll.hpp"
#include "specwave/vec3.hpp"

namespace specwave {

inline constexpr std::array<std::array<int, 3>, 8> kCornerSigns = {{
    {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
    {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1},
}};

inline constexpr std::array<std::array<int, 4>, 6> kFaceCorners = {{
    {0, 3, 7, 4}, {1, 2, 6, 5}, {0, 1, 5, 4}, {3, 2, 6, 7}, {0, 1, 2, 3}, {4, 5, 6, 7},
}};

struct HexElement {
  std::array<int, 8> nodes{};
  int material = 0;
};

struct FaceRef {
  int elem = 0;
  int face = 0;
  friend auto operator<=>(const FaceRef&, const FaceRef&) = default;
};

enum class BoundaryKind { Free, Absorbing, Symmetry };

inline const char* to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::Free: return "free";
    case BoundaryKind::Absorbing: return "absorbing";
    case BoundaryKind::Symmetry: return "symmetry";
  }
  return "free";
}

inline std::optional<BoundaryKind> boundary_kind_from_string(const std::string& s) {
  if (s == "free") return BoundaryKind::Free;
  if (s == "absorbing") return BoundaryKind::Absorbing;
  if (s == "symmetry") return BoundaryKind::Symmetry;
  return std::nullopt;
}

/// Face sets named "absorbing" and "symmetry" carry boundary conditions; any
/// other name (including "free") is informational and treated as free surface.
struct HexMesh {
  std::vector<Vec3> nodes;
  std::vector<HexElement> elements;
  std::map<std::string, std::vector<FaceRef>> face_sets;

  std::size_t num_elements() const { return elements.size(); }

  std::array<Vec3, 8> corners(int e) const {
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i) c[i] = nodes[elements[e].nodes[i]];
    return c;
  }

  const std::vector<FaceRef>& face_set(const std::string& name) const {
    static const std::vector<FaceRef> empty;
    auto it = face_sets.find(name);
    return it == face_sets.end() ? empty : it->second;
  }
};

// ---- trilinear map -----------------------------------------------------------

inline Vec3 map_point(const std::array<Vec3, 8>& c, const Vec3& ref) {
  Vec3 x;
  for (int a = 0; a < 8; ++a) {
    const double w = (1 + kCornerSigns[a][0] * ref.x) * (1 + kCornerSigns[a][1] * ref.y) *
                     (1 + kCornerSigns[a][2] * ref.z) / 8.0;
    x += w * c[a];
  }
  return x;
}

inline Mat3 map_jacobian(const std::array<Vec3, 8>& c, const Vec3& ref) {
  Mat3 J;
  for (int a = 0; a < 8; ++a) {
    const double sx = kCornerSigns[a][0], sy = kCornerSigns[a][1], sz = kCornerSigns[a][2];
    const double dxi = sx * (1 + sy * ref.y) * (1 + sz * ref.z) / 8.0;
    const double deta = sy * (1 + sx * ref.x) * (1 + sz * ref.z) / 8.0;
    const double dzeta = sz * (1 + sx * ref.x) * (1 + sy * ref.y) / 8.0;
    for (int r = 0; r < 3; ++r) {
      J(r, 0) += dxi * c[a][r];
      J(r, 1) += deta * c[a][r];
      J(r, 2) += dzeta * c[a][r];
    }
  }
  return J;
}

// ---- per-element geometry at GLL points ------------------------------------------

struct FaceGeometry {
  std::vector<int> points;       // element-local GLL point indices on the face
  std::vector<double> weights;   // w_a * w_b (reference face quadrature)
  std::vector<Vec3> normals;     // unit, outward
  std::vector<double> surface_jacobian;
};

struct ElementGeometry {
  int n = 0;  // GLL points per direction
  std::vector<Mat3> jacobian;
  std::vector<Mat3> inverse;
  std::vector<double> det;
  std::array<FaceGeometry, 6> faces;
};

/// Element-local GLL point indices of face f, enumerated with the lower
/// remaining reference direction running fastest.
inline std::vector<int> face_points(int n, int f) {
  std::vector<int> out;
  out.reserve(n * n);
  const int fixed = (f % 2 == 0) ? 0 : n - 1;
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      int i, j, k;
      switch (f / 2) {
        case 0: i = fixed; j = a; k = b; break;
        case 1: i = a; j = fixed; k = b; break;
        default: i = a; j = b; k = fixed; break;
      }
      out.push_back(i + n * (j + n * k));
    }
  return out;
}

inline ElementGeometry element_geometry(const HexMesh& mesh, int e, const GllRule& rule) {
  const int n = rule.points();
  const auto c = mesh.corners(e);
  ElementGeometry g;
  g.n = n;
  g.jacobian.resize(n * n * n);
  g.inverse.resize(n * n * n);
  g.det.resize(n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int p = i + n * (j + n * k);
        const Mat3 J = map_jacobian(c, {rule.nodes[i], rule.nodes[j], rule.nodes[k]});
        const double d = J.det();
        if (!(d > 0)) {
          throw Error(ErrorKind::InvertedElement,
                      "element " + std::to_string(e) + " has non-positive Jacobian determinant " +
                          std::to_string(d) + " at GLL point " + std::to_string(p));
        }
        g.jacobian[p] = J;
        g.det[p] = d;
        g.inverse[p] = J.inverse();
      }

  for (int f = 0; f < 6; ++f) {
    FaceGeometry& fg = g.faces[f];
    fg.points = face_points(n, f);
    const int dir = f / 2;
    const double sign = (f % 2 == 0) ? -1.0 : 1.0;
    for (int p : fg.points) {
      const int i = p % n, j = (p / n) % n, k = p / (n * n);
      const Mat3& J = g.jacobian[p];
      Vec3 t;
      double w;
      switch (dir) {
        case 0: t = cross(J.col(1), J.col(2)); w = rule.weights[j] * rule.weights[k]; break;
        case 1: t = cross(J.col(2), J.col(0)); w = rule.weights[i] * rule.weights[k]; break;
        default: t = cross(J.col(0), J.col(1)); w = rule.weights[i] * rule.weights[j]; break;
      }
      const double s = norm(t);
      fg.normals.push_back(t * (sign / s));
      fg.surface_jacobian.push_back(s);
      fg.weights.push_back(w);
    }
  }
  return g;
}

// ---- quality ----------------------------------------------------------------------

struct ElementQuality {
  double scaled_jacobian = 0;
  bool degenerate = false;  // zero-length edge
};

/// Minimum over the 8 corners of det[e_xi, e_eta, e_zeta] with unit edge vectors
/// pointing towards increasing reference coordinate.
inline ElementQuality scaled_jacobian(const HexMesh& mesh, int e) {
  const auto c = mesh.corners(e);
  auto corner_of = [](int sx, int sy, int sz) {
    for (int a = 0; a < 8; ++a)
      if (kCornerSigns[a][0] == sx && kCornerSigns[a][1] == sy && kCornerSigns[a][2] == sz) return a;
    return -1;
  };
  ElementQuality q;
  q.scaled_jacobian = 1.0;
  for (int a = 0; a < 8; ++a) {
    const auto& s = kCornerSigns[a];
    Mat3 E;
    for (int d = 0; d < 3; ++d) {
      std::array<int, 3> t = s;
      t[d] = -t[d];
      Vec3 edge = (c[corner_of(t[0], t[1], t[2])] - c[a]) * double(-s[d]);
      const double len = norm(edge);
      if (len == 0.0) {
        q.degenerate = true;
        q.scaled_jacobian = 0.0;
        return q;
      }
      edge *= 1.0 / len;
      for (int r = 0; r < 3; ++r) E(r, d) = edge[r];
    }
    q.scaled_jacobian = std::min(q.scaled_jacobian, E.det());
  }
  q.scaled_jacobian = std::clamp(q.scaled_jacobian, -1.0, 1.0);
  return q;
}

inline constexpr double kQualityWarnThreshold = 0.2;

struct QualityReport {
  double average = 0, std_dev = 0, min = 0, max = 0;
  std::vector<int> warnings;  // elements with scaled Jacobian < 0.2
  std::vector<int> unusable;  // elements with scaled Jacobian <= 0 (or degenerate)
};

/// Statistics without throwing; fixed element order keeps the reduction deterministic.
inline QualityReport quality_statistics(const HexMesh& mesh) {
  QualityReport r;
  const std::size_t ne = mesh.num_elements();
  if (ne == 0) throw Error(ErrorKind::MeshUnusable, "empty mesh");
  r.min = std::numeric_limits<double>::infinity();
  r.max = -std::numeric_limits<double>::infinity();
  double sum = 0, sum2 = 0;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto q = scaled_jacobian(mesh, int(e));
    const double v = q.scaled_jacobian;
    sum += v;
    sum2 += v * v;
    r.min = std::min(r.min, v);
    r.max = std::max(r.max, v);
    if (q.degenerate || v <= 0.0)
      r.unusable.push_back(int(e));
    else if (v < kQualityWarnThreshold)
      r.warnings.push_back(int(e));
  }
  r.average = sum / double(ne);
  r.std_dev = std::sqrt(std::max(0.0, sum2 / double(ne) - r.average * r.average));
  r.average = std::clamp(r.average, r.min, r.max);
  return r;
}

inline std::string join_ids(const std::vector<int>& ids, std::size_t limit = 20) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) s += (i ? ", " : "") + std::to_string(ids[i]);
  if (ids.size() > limit) s += ", ... (" + std::to_string(ids.size()) + " total)";
  return s;
}

inline QualityReport quality_report(const HexMesh& mesh) {
  QualityReport r = quality_statistics(mesh);
  if (!r.unusable.empty())
    throw Error(ErrorKind::MeshUnusable,
                "scaled Jacobian <= 0 in elements: " + join_ids(r.unusable));
  return r;
}

// ---- spacing ----------------------------------------------------------------------

/// Minimum distance between neighbouring GLL points of one element.
inline double element_min_gll_spacing(const HexMesh& mesh, int e, const GllRule& rule) {
  const int n = rule.points();
  const auto c = mesh.corners(e);
  std::vector<Vec3> x(n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 ref{rule.nodes[i], rule.nodes[j], rule.nodes[k]};
        if (!(map_jacobian(c, ref).det() > 0))
          throw Error(ErrorKind::InvertedElement,
                      "element " + std::to_string(e) + " is inverted at a GLL point");
        x[i + n * (j + n * k)] = map_point(c, ref);
      }
  double h = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int p = i + n * (j + n * k);
        if (i + 1 < n) h = std::min(h, norm(x[p + 1] - x[p]));
        if (j + 1 < n) h = std::min(h, norm(x[p + n] - x[p]));
        if (k + 1 < n) h = std::min(h, norm(x[p + n * n] - x[p]));
      }
  return h;
}

inline double min_gll_spacing(const HexMesh& mesh, const GllRule& rule) {
  double h = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    h = std::min(h, element_min_gll_spacing(mesh, int(e), rule));
  return h;
}

// ---- point location ---------------------------------------------------------------

struct PointLocation {
  int elem = -1;
  Vec3 ref;  // reference coordinates, clamped to [-1, 1]
};

inline constexpr double kLocateTolerance = 1e-9;  // metres

/// Newton inversion of the trilinear map; nullopt if it does not converge.
inline std::optional<Vec3> invert_map(const std::array<Vec3, 8>& c, const Vec3& x) {
  Vec3 ref{0, 0, 0};
  for (int it = 0; it < 60; ++it) {
    const Mat3 J = map_jacobian(c, ref);
    if (!(J.det() > 0)) return std::nullopt;
    const Vec3 d = J.inverse() * (x - map_point(c, ref));
    ref += d;
    if (std::abs(d.x) + std::abs(d.y) + std::abs(d.z) < 1e-12) return ref;
    if (norm(ref) > 1e3) return std::nullopt;
  }
  return ref;
}

/// Lowest-id element containing x within 1e-9 m.
inline std::optional<PointLocation> locate_point(const HexMesh& mesh, const Vec3& x) {
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto c = mesh.corners(int(e));
    Vec3 lo = c[0], hi = c[0];
    for (const auto& v : c)
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], v[d]);
        hi[d] = std::max(hi[d], v[d]);
      }
    bool inside_box = true;
    for (int d = 0; d < 3; ++d)
      if (x[d] < lo[d] - kLocateTolerance || x[d] > hi[d] + kLocateTolerance) inside_box = false;
    if (!inside_box) continue;
    auto ref = invert_map(c, x);
    if (!ref) continue;
    Vec3 r = *ref;
    for (int d = 0; d < 3; ++d) r[d] = std::clamp(r[d], -1.0, 1.0);
    if (norm(map_point(c, r) - x) <= kLocateTolerance) return PointLocation{int(e), r};
  }
  return std::nullopt;
}

// ---- voxel generator ------------------------------------------------------------------

struct VoxelVolume {
  int nx = 0, ny = 0, nz = 0;
  Vec3 spacing{1, 1, 1};
  Vec3 origin{0, 0, 0};
  std::vector<int> material;  // x fastest

  int& at(int i, int j, int k) { return material[i + nx * (j + ny * k)]; }
  int at(int i, int j, int k) const { return material[i + nx * (j + ny * k)]; }
};

inline VoxelVolume uniform_volume(int nx, int ny, int nz, Vec3 spacing, int material) {
  VoxelVolume v;
  v.nx = nx;
  v.ny = ny;
  v.nz = nz;
  v.spacing = spacing;
  v.material.assign(std::size_t(std::max(0, nx)) * std::max(0, ny) * std::max(0, nz), material);
  return v;
}

/// Boundary kind per box side, indexed like local faces (-x, +x, -y, +y, -z, +z).
using BoundaryPolicy = std::array<BoundaryKind, 6>;

inline constexpr BoundaryPolicy kAllAbsorbing = {BoundaryKind::Absorbing, BoundaryKind::Absorbing,
                                                  BoundaryKind::Absorbing, BoundaryKind::Absorbing,
                                                  BoundaryKind::Absorbing, BoundaryKind::Absorbing};
inline constexpr BoundaryPolicy kAllFree = {BoundaryKind::Free, BoundaryKind::Free,
                                             BoundaryKind::Free, BoundaryKind::Free,
                                             BoundaryKind::Free, BoundaryKind::Free};

/// One hexahedron per voxel; no smoothing or adaptivity.
inline HexMesh voxels_to_hexmesh(const VoxelVolume& vol, const BoundaryPolicy& policy = kAllAbsorbing) {
  if (vol.nx < 1 || vol.ny < 1 || vol.nz < 1)
    throw Error(ErrorKind::EmptyVolume, "voxel volume has a zero-size axis");
  if (!(vol.spacing.x > 0 && vol.spacing.y > 0 && vol.spacing.z > 0))
    throw Error(ErrorKind::EmptyVolume, "voxel spacing must be positive");
  if (vol.material.size() != std::size_t(vol.nx) * vol.ny * vol.nz)
    throw Error(ErrorKind::EmptyVolume, "voxel material count does not match dimensions");

  HexMesh mesh;
  const int px = vol.nx + 1, py = vol.ny + 1, pz = vol.nz + 1;
  mesh.nodes.reserve(std::size_t(px) * py * pz);
  for (int k = 0; k < pz; ++k)
    for (int j = 0; j < py; ++j)
      for (int i = 0; i < px; ++i)
        mesh.nodes.push_back(vol.origin + Vec3{i * vol.spacing.x, j * vol.spacing.y, k * vol.spacing.z});

  auto nid = [&](int i, int j, int k) { return i + px * (j + py * k); };
  mesh.elements.reserve(vol.material.size());
  for (int k = 0; k < vol.nz; ++k)
    for (int j = 0; j < vol.ny; ++j)
      for (int i = 0; i < vol.nx; ++i) {
        HexElement h;
        for (int a = 0; a < 8; ++a)
          h.nodes[a] = nid(i + (kCornerSigns[a][0] > 0), j + (kCornerSigns[a][1] > 0),
                           k + (kCornerSigns[a][2] > 0));
        h.material = vol.at(i, j, k);
        mesh.elements.push_back(h);
      }

  auto eid = [&](int i, int j, int k) { return i + vol.nx * (j + vol.ny * k); };
  for (int side = 0; side < 6; ++side) {
    if (policy[side] == BoundaryKind::Free) continue;
    auto& set = mesh.face_sets[to_string(policy[side])];
    const int dir = side / 2;
    const bool upper = side % 2 == 1;
    const std::array<int, 3> dims{vol.nx, vol.ny, vol.nz};
    for (int k = 0; k < vol.nz; ++k)
      for (int j = 0; j < vol.ny; ++j)
        for (int i = 0; i < vol.nx; ++i) {
          const std::array<int, 3> idx{i, j, k};
          if (idx[dir] != (upper ? dims[dir] - 1 : 0)) continue;
          set.push_back({eid(i, j, k), side});
        }
  }
  for (auto& [name, faces] : mesh.face_sets) std::sort(faces.begin(), faces.end());
  return mesh;
}

// ---- topology ---------------------------------------------------------------------

using FaceKey = std::array<int, 4>;

inline FaceKey face_key(const HexMesh& mesh, FaceRef f) {
  FaceKey k;
  for (int a = 0; a < 4; ++a) k[a] = mesh.elements[f.elem].nodes[kFaceCorners[f.face][a]];
  std::sort(k.begin(), k.end());
  return k;
}

/// Map from sorted face corner ids to the element faces using them.
inline std::map<FaceKey, std::vector<FaceRef>> face_adjacency(const HexMesh& mesh) {
  std::map<FaceKey, std::vector<FaceRef>> adj;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    for (int f = 0; f < 6; ++f) adj[face_key(mesh, {int(e), f})].push_back({int(e), f});
  return adj;
}

/// Structural checks: 8 distinct existing nodes per element, faces shared by at
/// most two elements, face-set faces on the exterior.
inline void validate_mesh(const HexMesh& mesh) {
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    std::set<int> s(mesh.elements[e].nodes.begin(), mesh.elements[e].nodes.end());
    for (int id : s)
      if (id < 0 || std::size_t(id) >= mesh.nodes.size())
        throw Error(ErrorKind::MeshUnusable,
                    "element " + std::to_string(e) + " references missing node " + std::to_string(id));
    if (s.size() != 8)
      throw Error(ErrorKind::MeshUnusable, "element " + std::to_string(e) + " repeats a corner node");
  }
  const auto adj = face_adjacency(mesh);
  for (const auto& [key, faces] : adj)
    if (faces.size() > 2)
      throw Error(ErrorKind::NonConformalMesh, "face shared by more than two elements (element " +
                                                   std::to_string(faces[0].elem) + ")");
  for (const auto& [name, faces] : mesh.face_sets)
    for (const auto& f : faces) {
      if (f.elem < 0 || std::size_t(f.elem) >= mesh.num_elements() || f.face < 0 || f.face > 5)
        throw Error(ErrorKind::BoundarySetup, "face set '" + name + "' has an invalid face reference");
      if (adj.at(face_key(mesh, f)).size() != 1)
        throw Error(ErrorKind::BoundarySetup, "face set '" + name + "' contains interior face (element " +
                                                  std::to_string(f.elem) + ", face " +
                                                  std::to_string(f.face) + ")");
    }
}

}  // namespace specwave
