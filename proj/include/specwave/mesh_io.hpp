#pragma once

// Text formats:
//   SHEX1 <n_nodes> <n_elems> <n_facesets>
//   <id> <x> <y> <z>                      (n_nodes lines, metres, %.17g)
//   <id> <n1> ... <n8> <material_id>      (n_elems lines, corner order as in hexmesh.hpp)
//   FACESET <name> <count>
//   <elem> <localface>                    (count lines; 0:-x 1:+x 2:-y 3:+y 4:-z 5:+z)
//
//   SVOX1 nx ny nz sx sy sz
//   nx*ny*nz values, x fastest (material ids, or HU values when read as HU)

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "specwave/error.hpp"
#include "specwave/hexmesh.hpp"
#include "specwave/material.hpp"

namespace specwave {

inline void write_shex1(std::ostream& os, const HexMesh& mesh) {
  os << "SHEX1 " << mesh.nodes.size() << ' ' << mesh.elements.size() << ' ' << mesh.face_sets.size()
     << '\n';
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    const auto& p = mesh.nodes[i];
    os << i << ' ' << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z)
       << '\n';
  }
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    os << e;
    for (int n : mesh.elements[e].nodes) os << ' ' << n;
    os << ' ' << mesh.elements[e].material << '\n';
  }
  for (const auto& [name, faces] : mesh.face_sets) {
    os << "FACESET " << name << ' ' << faces.size() << '\n';
    for (const auto& f : faces) os << f.elem << ' ' << f.face << '\n';
  }
}

namespace detail {

class TokenReader {
 public:
  TokenReader(std::istream& is, const char* format) : is_(is), format_(format) {}

  template <typename T>
  T next(const char* what) {
    T v{};
    if (!(is_ >> v)) throw Error(ErrorKind::Config, std::string(format_) + ": expected " + what);
    return v;
  }

 private:
  std::istream& is_;
  const char* format_;
};

}  // namespace detail

inline HexMesh read_shex1(std::istream& is) {
  detail::TokenReader in(is, "SHEX1");
  if (in.next<std::string>("magic") != "SHEX1") throw Error(ErrorKind::Config, "not an SHEX1 file");
  const auto nn = in.next<long>("node count");
  const auto ne = in.next<long>("element count");
  const auto nf = in.next<long>("face set count");
  if (nn < 0 || ne < 0 || nf < 0) throw Error(ErrorKind::Config, "SHEX1: negative count");
  HexMesh mesh;
  mesh.nodes.resize(nn);
  for (long i = 0; i < nn; ++i) {
    const auto id = in.next<long>("node id");
    if (id != i) throw Error(ErrorKind::Config, "SHEX1: node ids must be consecutive from 0");
    for (int d = 0; d < 3; ++d) mesh.nodes[i][d] = in.next<double>("coordinate");
  }
  mesh.elements.resize(ne);
  for (long e = 0; e < ne; ++e) {
    const auto id = in.next<long>("element id");
    if (id != e) throw Error(ErrorKind::Config, "SHEX1: element ids must be consecutive from 0");
    for (int a = 0; a < 8; ++a) mesh.elements[e].nodes[a] = in.next<int>("corner node");
    mesh.elements[e].material = in.next<int>("material id");
  }
  for (long s = 0; s < nf; ++s) {
    if (in.next<std::string>("FACESET") != "FACESET")
      throw Error(ErrorKind::Config, "SHEX1: expected FACESET block");
    const auto name = in.next<std::string>("face set name");
    const auto count = in.next<long>("face count");
    auto& set = mesh.face_sets[name];
    for (long f = 0; f < count; ++f) {
      FaceRef r;
      r.elem = in.next<int>("face element");
      r.face = in.next<int>("local face");
      set.push_back(r);
    }
  }
  validate_mesh(mesh);
  return mesh;
}

inline HexMesh read_shex1_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open mesh file " + path);
  return read_shex1(f);
}

inline void write_shex1_file(const std::string& path, const HexMesh& mesh) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write mesh file " + path);
  write_shex1(f, mesh);
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path);
}

struct RawVoxels {
  int nx = 0, ny = 0, nz = 0;
  Vec3 spacing;
  std::vector<double> values;
};

inline RawVoxels read_svox1(std::istream& is) {
  detail::TokenReader in(is, "SVOX1");
  if (in.next<std::string>("magic") != "SVOX1") throw Error(ErrorKind::Config, "not an SVOX1 file");
  RawVoxels v;
  v.nx = in.next<int>("nx");
  v.ny = in.next<int>("ny");
  v.nz = in.next<int>("nz");
  v.spacing.x = in.next<double>("sx");
  v.spacing.y = in.next<double>("sy");
  v.spacing.z = in.next<double>("sz");
  if (v.nx < 1 || v.ny < 1 || v.nz < 1) throw Error(ErrorKind::EmptyVolume, "SVOX1 has a zero-size axis");
  const std::size_t n = std::size_t(v.nx) * v.ny * v.nz;
  v.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) v.values[i] = in.next<double>("voxel value");
  return v;
}

inline RawVoxels read_svox1_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open voxel file " + path);
  return read_svox1(f);
}

inline void write_svox1(std::ostream& os, const VoxelVolume& v) {
  os << "SVOX1 " << v.nx << ' ' << v.ny << ' ' << v.nz << ' ' << format_double(v.spacing.x) << ' '
     << format_double(v.spacing.y) << ' ' << format_double(v.spacing.z) << '\n';
  for (std::size_t i = 0; i < v.material.size(); ++i)
    os << v.material[i] << ((i + 1) % std::max(1, v.nx) == 0 ? '\n' : ' ');
}

/// Values are material ids.
inline VoxelVolume voxels_from_ids(const RawVoxels& raw) {
  VoxelVolume v;
  v.nx = raw.nx;
  v.ny = raw.ny;
  v.nz = raw.nz;
  v.spacing = raw.spacing;
  v.material.reserve(raw.values.size());
  for (double x : raw.values) {
    if (x != std::floor(x)) throw Error(ErrorKind::Config, "SVOX1: non-integer material id");
    v.material.push_back(int(x));
  }
  return v;
}

/// Values are Hounsfield units; each must classify to exactly one tissue.
inline VoxelVolume voxels_from_hu(const RawVoxels& raw, const MaterialTable& table, bool snap) {
  VoxelVolume v;
  v.nx = raw.nx;
  v.ny = raw.ny;
  v.nz = raw.nz;
  v.spacing = raw.spacing;
  v.material.reserve(raw.values.size());
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    const double hu = raw.values[i];
    const auto ids = snap ? classify_hu_snapped(table, hu) : classify_hu(table, hu);
    if (ids.empty())
      throw Error(ErrorKind::Config, "voxel " + std::to_string(i) + ": HU " + format_double(hu) +
                                         " matches no tissue (use --hu-snap for nearest range)");
    if (ids.size() > 1) {
      std::string names;
      for (int id : ids) names += (names.empty() ? "" : ", ") + table.at(id).name;
      throw Error(ErrorKind::Config, "voxel " + std::to_string(i) + ": HU " + format_double(hu) +
                                         " is ambiguous between " + names);
    }
    v.material.push_back(ids[0]);
  }
  return v;
}

}  // namespace specwave
