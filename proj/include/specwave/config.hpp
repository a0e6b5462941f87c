#pragma once

// Simulation configuration: a line-based `key = value` file with [section]
// headers. The grammar is documented in docs/config.md.

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "specwave/error.hpp"
#include "specwave/hexmesh.hpp"
#include "specwave/material.hpp"
#include "specwave/mesh_io.hpp"
#include "specwave/solver.hpp"
#include "specwave/source.hpp"
#include "specwave/validation.hpp"

namespace specwave {

struct StfSpec {
  double f0 = 40e3;
  double cycles = 4;
  double alpha = 0.5;
  double amplitude = 1.0;
  double delay = 0.0;

  friend bool operator==(const StfSpec&, const StfSpec&) = default;

  SourceTimeFunction build() const { return tone_burst(f0, cycles, alpha, amplitude, delay); }
};

struct BlockSpec {
  std::string material;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0, z0 = 0, z1 = 0;
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct MeshSpec {
  std::string file;        // SHEX1
  std::string voxels;      // SVOX1 with material ids
  std::string hu_voxels;   // SVOX1 with Hounsfield units
  std::array<int, 3> box{0, 0, 0};
  Vec3 spacing;
  Vec3 origin;
  std::string material;    // background material of a box
  std::vector<BlockSpec> blocks;
  BoundaryPolicy boundary = kAllAbsorbing;
  friend bool operator==(const MeshSpec&, const MeshSpec&) = default;
};

struct MaterialSpec {
  int id = 0;
  TissueProperties props;
  friend bool operator==(const MaterialSpec& a, const MaterialSpec& b) {
    return a.id == b.id && a.props.name == b.props.name && a.props.hu_min == b.props.hu_min &&
           a.props.hu_max == b.props.hu_max && a.props.rho == b.props.rho && a.props.vp == b.props.vp &&
           a.props.vs == b.props.vs;
  }
};

struct SourceSpec {
  SourceKind kind = SourceKind::Pressure;
  Vec3 position;
  Vec3 direction{0, 0, 1};
  StfSpec stf;
  friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

struct PlaneWaveSpec {
  int axis = 2;
  double plane = 0;
  double spacing = 0;
  double direction = -1;
  std::optional<double> r_flat, sigma;
  StfSpec stf;
  friend bool operator==(const PlaneWaveSpec&, const PlaneWaveSpec&) = default;
};

struct ReceiverSpec {
  std::string name;
  Vec3 position;
  std::vector<Channel> quantities;
  friend bool operator==(const ReceiverSpec&, const ReceiverSpec&) = default;
};

struct ReciprocitySpec {
  Vec3 r1, r2;
  SourceKind kind = SourceKind::Pressure;
  Vec3 direction{0, 0, 1};
  StfSpec stf;
  double threshold_db = -40;
  friend bool operator==(const ReciprocitySpec&, const ReciprocitySpec&) = default;
};

struct OracleSpec {
  Vec3 source, receiver;
  StfSpec stf;
  double tolerance = 0.02;
  double min_points_per_wavelength = 10;
  friend bool operator==(const OracleSpec&, const OracleSpec&) = default;
};

struct ConvergeSpec {
  std::string material = "water";
  double length = 0.01;
  int elements = 2;
  std::vector<int> degrees{2, 4, 6};
  double periods = 2;
  double min_ratio = 10;
  friend bool operator==(const ConvergeSpec&, const ConvergeSpec&) = default;
};

struct SimulationConfig {
  MeshSpec mesh;
  bool builtin_materials = true;
  std::string material_file;
  std::vector<MaterialSpec> materials;
  int degree = 2;
  double courant = kDefaultCourant;
  std::optional<double> t_end;
  int blowup_every = 50;
  int energy_every = 0;
  std::string output_dir = "out";
  long snapshot_every = 0;
  std::vector<SourceSpec> sources;
  std::vector<PlaneWaveSpec> plane_waves;
  std::vector<ReceiverSpec> receivers;
  std::optional<ReciprocitySpec> reciprocity;
  std::optional<OracleSpec> oracle;
  std::optional<ConvergeSpec> converge;

  std::filesystem::path base_dir;  // relative paths resolve here; not serialized
  std::set<std::string> explicit_keys;  // "section.key" given in the file; not serialized

  bool operator==(const SimulationConfig& o) const {
    return mesh == o.mesh && builtin_materials == o.builtin_materials && material_file == o.material_file &&
           materials == o.materials && degree == o.degree && courant == o.courant && t_end == o.t_end &&
           blowup_every == o.blowup_every && energy_every == o.energy_every && output_dir == o.output_dir &&
           snapshot_every == o.snapshot_every && sources == o.sources && plane_waves == o.plane_waves &&
           receivers == o.receivers && reciprocity == o.reciprocity && oracle == o.oracle &&
           converge == o.converge;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

class ConfigLine {
 public:
  ConfigLine(std::string section, std::string key, std::string value, int line)
      : section_(std::move(section)), key_(std::move(key)), value_(std::move(value)), line_(line) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Config, "line " + std::to_string(line_) + ": [" + section_ + "] " + key_ + ": " + msg);
  }

  std::vector<std::string> words() const {
    std::istringstream is(value_);
    std::vector<std::string> w;
    std::string t;
    while (is >> t) w.push_back(t);
    return w;
  }

  double number(const std::string& w) const {
    try {
      std::size_t used = 0;
      const double v = std::stod(w, &used);
      if (used != w.size() || !std::isfinite(v)) fail("not a finite number: " + w);
      return v;
    } catch (const std::logic_error&) {
      fail("not a number: " + w);
    }
  }

  long integer(const std::string& w) const {
    try {
      std::size_t used = 0;
      const long v = std::stol(w, &used);
      if (used != w.size()) fail("not an integer: " + w);
      return v;
    } catch (const std::logic_error&) {
      fail("not an integer: " + w);
    }
  }

  double real() const {
    const auto w = words();
    if (w.size() != 1) fail("expected one number");
    return number(w[0]);
  }

  double positive() const {
    const double v = real();
    if (!(v > 0)) fail("must be positive");
    return v;
  }

  double non_negative() const {
    const double v = real();
    if (v < 0) fail("must not be negative");
    return v;
  }

  long whole() const {
    const auto w = words();
    if (w.size() != 1) fail("expected one integer");
    return integer(w[0]);
  }

  Vec3 vec3() const {
    const auto w = words();
    if (w.size() != 3) fail("expected three numbers");
    return {number(w[0]), number(w[1]), number(w[2])};
  }

  bool boolean() const {
    if (value_ == "true") return true;
    if (value_ == "false") return false;
    fail("expected true or false");
  }

  const std::string& text() const {
    if (value_.empty()) fail("empty value");
    return value_;
  }

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string section_, key_, value_;
  int line_;
};

inline const char* kFaceKeys[6] = {"boundary_xmin", "boundary_xmax", "boundary_ymin",
                                   "boundary_ymax", "boundary_zmin", "boundary_zmax"};

inline bool stf_key(StfSpec& s, const ConfigLine& l) {
  const auto& k = l.key();
  if (k == "f0") s.f0 = l.positive();
  else if (k == "cycles") {
    s.cycles = l.real();
    if (s.cycles < 1) l.fail("needs at least one cycle");
  } else if (k == "alpha") {
    s.alpha = l.real();
    if (s.alpha < 0 || s.alpha > 1) l.fail("must lie in [0, 1]");
  } else if (k == "amplitude") s.amplitude = l.real();
  else if (k == "delay") s.delay = l.non_negative();
  else return false;
  return true;
}

inline int axis_from(const ConfigLine& l) {
  const auto& v = l.text();
  if (v == "x") return 0;
  if (v == "y") return 1;
  if (v == "z") return 2;
  l.fail("expected x, y or z");
}

inline void put(std::ostream& os, const std::string& k, const std::string& v) { os << k << " = " << v << '\n'; }
inline void put(std::ostream& os, const std::string& k, double v) { put(os, k, format_double(v)); }
inline void put(std::ostream& os, const std::string& k, const Vec3& v) {
  put(os, k, format_double(v.x) + " " + format_double(v.y) + " " + format_double(v.z));
}

inline void put_stf(std::ostream& os, const StfSpec& s) {
  put(os, "f0", s.f0);
  put(os, "cycles", s.cycles);
  put(os, "alpha", s.alpha);
  put(os, "amplitude", s.amplitude);
  put(os, "delay", s.delay);
}

}  // namespace detail

inline SimulationConfig parse_config(std::istream& is, const std::filesystem::path& base_dir = {}) {
  using detail::ConfigLine;
  SimulationConfig cfg;
  cfg.base_dir = base_dir;
  std::string section;
  std::set<std::string> seen;  // keys of the current block
  int block = 0;               // counts repeated blocks so keys stay unique per block
  std::string raw;
  int lineno = 0;

  while (std::getline(is, raw)) {
    ++lineno;
    std::string s = raw;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s.erase(hash);
    s = detail::trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(s.substr(1, s.size() - 2));
      ++block;
      seen.clear();
      static const std::set<std::string> known{"mesh",       "materials",   "material", "solver",
                                               "output",     "source",      "plane_wave", "receiver",
                                               "reciprocity", "oracle",     "converge"};
      if (!known.count(section))
        throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      if (section == "source") cfg.sources.emplace_back();
      if (section == "plane_wave") cfg.plane_waves.emplace_back();
      if (section == "receiver") cfg.receivers.emplace_back();
      if (section == "material") cfg.materials.push_back({-1, {}});
      if (section == "reciprocity") {
        if (cfg.reciprocity) throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": duplicate [reciprocity]");
        cfg.reciprocity.emplace();
      }
      if (section == "oracle") {
        if (cfg.oracle) throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": duplicate [oracle]");
        cfg.oracle.emplace();
      }
      if (section == "converge") {
        if (cfg.converge) throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": duplicate [converge]");
        cfg.converge.emplace();
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw Error(ErrorKind::Config, "line " + std::to_string(lineno) + ": key outside of any section");
    const ConfigLine l(section, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)), lineno);
    const std::string& k = l.key();
    const bool repeatable = section == "mesh" && k == "block";
    if (!repeatable && !seen.insert(k).second) l.fail("duplicate key");
    cfg.explicit_keys.insert(section + "." + k);
    auto unknown = [&]() { l.fail("unknown key"); };

    if (section == "mesh") {
      auto& m = cfg.mesh;
      if (k == "file") m.file = l.text();
      else if (k == "voxels") m.voxels = l.text();
      else if (k == "hu_voxels") m.hu_voxels = l.text();
      else if (k == "box") {
        const auto w = l.words();
        if (w.size() != 3) l.fail("expected three element counts");
        for (int d = 0; d < 3; ++d) {
          const long n = l.integer(w[d]);
          if (n < 1) l.fail("element counts must be at least 1");
          m.box[d] = int(n);
        }
      } else if (k == "spacing") {
        const auto w = l.words();
        if (w.size() == 1) {
          const double h = l.number(w[0]);
          m.spacing = {h, h, h};
        } else {
          m.spacing = l.vec3();
        }
        if (!(m.spacing.x > 0 && m.spacing.y > 0 && m.spacing.z > 0)) l.fail("spacing must be positive");
      } else if (k == "origin") m.origin = l.vec3();
      else if (k == "material") m.material = l.text();
      else if (k == "block") {
        const auto w = l.words();
        if (w.size() != 7) l.fail("expected: material x0 x1 y0 y1 z0 z1");
        BlockSpec b;
        b.material = w[0];
        b.x0 = l.number(w[1]);
        b.x1 = l.number(w[2]);
        b.y0 = l.number(w[3]);
        b.y1 = l.number(w[4]);
        b.z0 = l.number(w[5]);
        b.z1 = l.number(w[6]);
        m.blocks.push_back(b);
      } else if (k == "boundary") {
        auto kind = boundary_kind_from_string(l.text());
        if (!kind) l.fail("expected free, absorbing or symmetry");
        m.boundary.fill(*kind);
      } else {
        int face = -1;
        for (int f = 0; f < 6; ++f)
          if (k == detail::kFaceKeys[f]) face = f;
        if (face < 0) unknown();
        auto kind = boundary_kind_from_string(l.text());
        if (!kind) l.fail("expected free, absorbing or symmetry");
        m.boundary[face] = *kind;
      }
    } else if (section == "materials") {
      if (k == "builtin") cfg.builtin_materials = l.boolean();
      else if (k == "file") cfg.material_file = l.text();
      else unknown();
    } else if (section == "material") {
      auto& m = cfg.materials.back();
      if (k == "id") m.id = int(l.whole());
      else if (k == "name") m.props.name = l.text();
      else if (k == "rho") m.props.rho = l.real();
      else if (k == "vp") m.props.vp = l.real();
      else if (k == "vs") m.props.vs = l.real();
      else if (k == "hu_min") m.props.hu_min = l.real();
      else if (k == "hu_max") m.props.hu_max = l.real();
      else unknown();
    } else if (section == "solver") {
      if (k == "degree") {
        const long d = l.whole();
        if (d < 1 || d > kMaxDegree) l.fail("must lie in [1, " + std::to_string(kMaxDegree) + "]");
        cfg.degree = int(d);
      } else if (k == "courant") {
        cfg.courant = l.real();
        if (!(cfg.courant > 0 && cfg.courant < 1)) l.fail("must lie in (0, 1)");
      } else if (k == "t_end") cfg.t_end = l.positive();
      else if (k == "blowup_every") {
        cfg.blowup_every = int(l.whole());
        if (cfg.blowup_every < 1) l.fail("must be at least 1");
      } else if (k == "energy_every") {
        cfg.energy_every = int(l.whole());
        if (cfg.energy_every < 0) l.fail("must not be negative");
      } else unknown();
    } else if (section == "output") {
      if (k == "dir") cfg.output_dir = l.text();
      else if (k == "snapshot_every") {
        cfg.snapshot_every = l.whole();
        if (cfg.snapshot_every < 0) l.fail("must not be negative");
      } else unknown();
    } else if (section == "source") {
      auto& src = cfg.sources.back();
      if (k == "kind") {
        auto kind = source_kind_from_string(l.text());
        if (!kind) l.fail("expected pressure, force-z or force");
        src.kind = *kind;
      } else if (k == "position") src.position = l.vec3();
      else if (k == "direction") {
        src.direction = l.vec3();
        if (!(norm(src.direction) > 0)) l.fail("must be non-zero");
      } else if (!detail::stf_key(src.stf, l)) unknown();
    } else if (section == "plane_wave") {
      auto& pw = cfg.plane_waves.back();
      if (k == "axis") pw.axis = detail::axis_from(l);
      else if (k == "plane") pw.plane = l.real();
      else if (k == "spacing") pw.spacing = l.positive();
      else if (k == "direction") {
        pw.direction = l.real();
        if (pw.direction != 1 && pw.direction != -1) l.fail("must be 1 or -1");
      } else if (k == "r_flat") pw.r_flat = l.non_negative();
      else if (k == "sigma") pw.sigma = l.positive();
      else if (!detail::stf_key(pw.stf, l)) unknown();
    } else if (section == "receiver") {
      auto& r = cfg.receivers.back();
      if (k == "name") {
        r.name = l.text();
        if (r.name.find_first_of(" \t,") != std::string::npos) l.fail("names may not contain spaces or commas");
      } else if (k == "position") r.position = l.vec3();
      else if (k == "quantities") {
        r.quantities.clear();
        for (const auto& w : l.words()) {
          auto c = channel_from_string(w);
          if (!c) l.fail("unknown quantity " + w + " (expected p, vx, vy, vz)");
          r.quantities.push_back(*c);
        }
      } else unknown();
    } else if (section == "reciprocity") {
      auto& r = *cfg.reciprocity;
      if (k == "r1") r.r1 = l.vec3();
      else if (k == "r2") r.r2 = l.vec3();
      else if (k == "kind") {
        if (l.text() == "pressure") r.kind = SourceKind::Pressure;
        else if (l.text() == "force") r.kind = SourceKind::ForceVector;
        else l.fail("expected pressure or force");
      } else if (k == "direction") {
        r.direction = l.vec3();
        if (!(norm(r.direction) > 0)) l.fail("must be non-zero");
      } else if (k == "threshold_db") r.threshold_db = l.real();
      else if (!detail::stf_key(r.stf, l)) unknown();
    } else if (section == "oracle") {
      auto& o = *cfg.oracle;
      if (k == "source") o.source = l.vec3();
      else if (k == "receiver") o.receiver = l.vec3();
      else if (k == "tolerance") o.tolerance = l.positive();
      else if (k == "min_points_per_wavelength") o.min_points_per_wavelength = l.non_negative();
      else if (!detail::stf_key(o.stf, l)) unknown();
    } else if (section == "converge") {
      auto& c = *cfg.converge;
      if (k == "material") c.material = l.text();
      else if (k == "length") c.length = l.positive();
      else if (k == "elements") {
        c.elements = int(l.whole());
        if (c.elements < 1) l.fail("must be at least 1");
      } else if (k == "degrees") {
        c.degrees.clear();
        for (const auto& w : l.words()) {
          const long d = l.integer(w);
          if (d < 1 || d > kMaxDegree) l.fail("degrees must lie in [1, " + std::to_string(kMaxDegree) + "]");
          c.degrees.push_back(int(d));
        }
        if (c.degrees.size() < 2) l.fail("need at least two degrees");
      } else if (k == "periods") c.periods = l.positive();
      else if (k == "min_ratio") c.min_ratio = l.positive();
      else unknown();
    }
  }

  for (std::size_t i = 0; i < cfg.materials.size(); ++i) {
    auto& m = cfg.materials[i];
    if (m.id < 0) throw Error(ErrorKind::Config, "[material] block " + std::to_string(i + 1) + " lacks an id");
    if (m.props.name.empty()) m.props.name = "material_" + std::to_string(m.id);
    try {
      validate(m.props);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, "[material] id " + std::to_string(m.id) + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < cfg.receivers.size(); ++i) {
    auto& r = cfg.receivers[i];
    if (r.name.empty()) r.name = "r" + std::to_string(i + 1);
    if (r.quantities.empty()) r.quantities = {Channel::Pressure};
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.receivers[j].name == r.name) throw Error(ErrorKind::Config, "duplicate receiver name " + r.name);
  }
  for (std::size_t i = 0; i < cfg.plane_waves.size(); ++i)
    if (!(cfg.plane_waves[i].spacing > 0))
      throw Error(ErrorKind::Config, "[plane_wave] block " + std::to_string(i + 1) + " needs a spacing");
  return cfg;
}

inline SimulationConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open config file " + path.string());
  return parse_config(f, path.parent_path());
}

/// Writes every field, defaults included, in the grammar parse_config reads.
inline void serialize_config(std::ostream& os, const SimulationConfig& c) {
  using detail::put;
  os << "[mesh]\n";
  const auto& m = c.mesh;
  if (!m.file.empty()) put(os, "file", m.file);
  if (!m.voxels.empty()) put(os, "voxels", m.voxels);
  if (!m.hu_voxels.empty()) put(os, "hu_voxels", m.hu_voxels);
  if (m.box[0] > 0)
    put(os, "box", std::to_string(m.box[0]) + " " + std::to_string(m.box[1]) + " " + std::to_string(m.box[2]));
  if (m.spacing != Vec3{}) put(os, "spacing", m.spacing);
  put(os, "origin", m.origin);
  if (!m.material.empty()) put(os, "material", m.material);
  for (const auto& b : m.blocks)
    put(os, "block", b.material + " " + format_double(b.x0) + " " + format_double(b.x1) + " " + format_double(b.y0) +
                         " " + format_double(b.y1) + " " + format_double(b.z0) + " " + format_double(b.z1));
  for (int f = 0; f < 6; ++f) put(os, detail::kFaceKeys[f], to_string(m.boundary[f]));

  os << "\n[materials]\n";
  put(os, "builtin", c.builtin_materials ? "true" : "false");
  if (!c.material_file.empty()) put(os, "file", c.material_file);
  for (const auto& mat : c.materials) {
    os << "\n[material]\n";
    put(os, "id", std::to_string(mat.id));
    put(os, "name", mat.props.name);
    put(os, "rho", mat.props.rho);
    put(os, "vp", mat.props.vp);
    put(os, "vs", mat.props.vs);
    if (mat.props.hu_min) put(os, "hu_min", *mat.props.hu_min);
    if (mat.props.hu_max) put(os, "hu_max", *mat.props.hu_max);
  }

  os << "\n[solver]\n";
  put(os, "degree", std::to_string(c.degree));
  put(os, "courant", c.courant);
  if (c.t_end) put(os, "t_end", *c.t_end);
  put(os, "blowup_every", std::to_string(c.blowup_every));
  put(os, "energy_every", std::to_string(c.energy_every));

  os << "\n[output]\n";
  put(os, "dir", c.output_dir);
  put(os, "snapshot_every", std::to_string(c.snapshot_every));

  for (const auto& s : c.sources) {
    os << "\n[source]\n";
    put(os, "kind", to_string(s.kind));
    put(os, "position", s.position);
    put(os, "direction", s.direction);
    detail::put_stf(os, s.stf);
  }
  for (const auto& p : c.plane_waves) {
    os << "\n[plane_wave]\n";
    put(os, "axis", std::string(1, "xyz"[p.axis]));
    put(os, "plane", p.plane);
    put(os, "spacing", p.spacing);
    put(os, "direction", p.direction);
    if (p.r_flat) put(os, "r_flat", *p.r_flat);
    if (p.sigma) put(os, "sigma", *p.sigma);
    detail::put_stf(os, p.stf);
  }
  for (const auto& r : c.receivers) {
    os << "\n[receiver]\n";
    put(os, "name", r.name);
    put(os, "position", r.position);
    std::string q;
    for (auto ch : r.quantities) q += (q.empty() ? "" : " ") + std::string(to_string(ch));
    put(os, "quantities", q);
  }
  if (c.reciprocity) {
    const auto& r = *c.reciprocity;
    os << "\n[reciprocity]\n";
    put(os, "r1", r.r1);
    put(os, "r2", r.r2);
    put(os, "kind", r.kind == SourceKind::Pressure ? "pressure" : "force");
    put(os, "direction", r.direction);
    put(os, "threshold_db", r.threshold_db);
    detail::put_stf(os, r.stf);
  }
  if (c.oracle) {
    const auto& o = *c.oracle;
    os << "\n[oracle]\n";
    put(os, "source", o.source);
    put(os, "receiver", o.receiver);
    put(os, "tolerance", o.tolerance);
    put(os, "min_points_per_wavelength", o.min_points_per_wavelength);
    detail::put_stf(os, o.stf);
  }
  if (c.converge) {
    const auto& v = *c.converge;
    os << "\n[converge]\n";
    put(os, "material", v.material);
    put(os, "length", v.length);
    put(os, "elements", std::to_string(v.elements));
    std::string d;
    for (int x : v.degrees) d += (d.empty() ? "" : " ") + std::to_string(x);
    put(os, "degrees", d);
    put(os, "periods", v.periods);
    put(os, "min_ratio", v.min_ratio);
  }
}

inline std::string serialize_config(const SimulationConfig& c) {
  std::ostringstream os;
  serialize_config(os, c);
  return os.str();
}

// ---- building the simulation ----------------------------------------------------

inline std::string resolve_path(const SimulationConfig& c, const std::string& p) {
  const std::filesystem::path path(p);
  return (path.is_absolute() || c.base_dir.empty() ? path : c.base_dir / path).string();
}

inline MaterialTable build_material_table(const SimulationConfig& c) {
  MaterialTable t;
  if (!c.material_file.empty()) t = read_smat1_file(resolve_path(c, c.material_file));
  else if (c.builtin_materials) t = builtin_dolphin_table();
  for (const auto& m : c.materials) {
    if (t.contains(m.id)) throw Error(ErrorKind::Config, "material id " + std::to_string(m.id) + " defined twice");
    t.add(m.id, m.props);
  }
  if (t.empty()) throw Error(ErrorKind::Config, "no materials defined");
  return t;
}

/// A material reference is an id or a name.
inline int resolve_material(const MaterialTable& t, const std::string& ref) {
  if (auto id = t.find(ref)) return *id;
  try {
    std::size_t used = 0;
    const int id = std::stoi(ref, &used);
    if (used == ref.size() && t.contains(id)) return id;
  } catch (const std::logic_error&) {
  }
  throw Error(ErrorKind::Config, "unknown material '" + ref + "'");
}

inline VoxelVolume build_voxels(const SimulationConfig& c, const MaterialTable& table, bool hu_snap) {
  const auto& m = c.mesh;
  const int given = int(!m.voxels.empty()) + int(!m.hu_voxels.empty()) + int(m.box[0] > 0);
  if (given != 1 || !m.file.empty())
    throw Error(ErrorKind::Config, "[mesh] needs exactly one of box, voxels or hu_voxels for voxel meshing");
  VoxelVolume v;
  if (!m.voxels.empty()) {
    v = voxels_from_ids(read_svox1_file(resolve_path(c, m.voxels)));
  } else if (!m.hu_voxels.empty()) {
    v = voxels_from_hu(read_svox1_file(resolve_path(c, m.hu_voxels)), table, hu_snap);
  } else {
    if (m.material.empty()) throw Error(ErrorKind::Config, "[mesh] box needs a background material");
    if (!(m.spacing.x > 0)) throw Error(ErrorKind::Config, "[mesh] box needs a spacing");
    v = uniform_volume(m.box[0], m.box[1], m.box[2], m.spacing, resolve_material(table, m.material));
    for (const auto& b : m.blocks) {
      const int id = resolve_material(table, b.material);
      for (int k = 0; k < v.nz; ++k)
        for (int j = 0; j < v.ny; ++j)
          for (int i = 0; i < v.nx; ++i) {
            const double x = m.origin.x + (i + 0.5) * m.spacing.x;
            const double y = m.origin.y + (j + 0.5) * m.spacing.y;
            const double z = m.origin.z + (k + 0.5) * m.spacing.z;
            if (x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1 && z >= b.z0 && z < b.z1)
              v.material[i + v.nx * (j + v.ny * k)] = id;
          }
    }
  }
  v.origin = m.origin;
  for (int id : v.material)
    if (!table.contains(id)) throw Error(ErrorKind::Config, "voxel material " + std::to_string(id) + " is undefined");
  return v;
}

inline HexMesh build_mesh(const SimulationConfig& c, const MaterialTable& table, bool hu_snap) {
  HexMesh mesh;
  if (!c.mesh.file.empty()) {
    mesh = read_shex1_file(resolve_path(c, c.mesh.file));
  } else {
    mesh = voxels_to_hexmesh(build_voxels(c, table, hu_snap), c.mesh.boundary);
  }
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    if (!table.contains(mesh.elements[e].material))
      throw Error(ErrorKind::Config, "element " + std::to_string(e) + " uses undefined material " +
                                         std::to_string(mesh.elements[e].material));
  return mesh;
}

inline std::vector<PointSource> build_sources(const SimulationConfig& c, const HexMesh& mesh,
                                              const MaterialTable& table) {
  std::vector<PointSource> out;
  for (const auto& s : c.sources) {
    PointSource p;
    p.position = s.position;
    p.kind = s.kind;
    p.direction = s.direction;
    p.stf = s.stf.build();
    out.push_back(p);
  }
  for (const auto& pw : c.plane_waves) {
    PlaneWaveConfig cfg;
    cfg.axis = pw.axis;
    cfg.plane = pw.plane;
    cfg.spacing = pw.spacing;
    cfg.direction = pw.direction;
    cfg.r_flat = pw.r_flat;
    cfg.sigma = pw.sigma;
    cfg.stf = pw.stf.build();
    const auto arr = build_plane_wave_array(cfg, mesh, table);
    out.insert(out.end(), arr.sources.begin(), arr.sources.end());
  }
  return out;
}

inline SimulationInput build_simulation(const SimulationConfig& c, bool hu_snap, int threads) {
  if (!c.t_end) throw Error(ErrorKind::Config, "[solver] t_end is required");
  SimulationInput in;
  in.table = build_material_table(c);
  in.mesh = build_mesh(c, in.table, hu_snap);
  in.degree = c.degree;
  in.courant = c.courant;
  in.t_end = *c.t_end;
  in.sources = build_sources(c, in.mesh, in.table);
  for (const auto& r : c.receivers) in.receivers.push_back({r.name, r.position, r.quantities});
  in.threads = threads;
  in.options.blowup_every = c.blowup_every;
  in.options.energy_every = c.energy_every;
  return in;
}

/// Defaults that were applied because the file did not set them.
inline Manifest applied_defaults(const SimulationConfig& c) {
  Manifest m;
  auto note = [&](const std::string& key, const std::string& value) {
    if (!c.explicit_keys.count(key)) m.push_back({"default." + key, value});
  };
  note("solver.degree", std::to_string(c.degree));
  note("solver.courant", format_double(c.courant));
  note("solver.blowup_every", std::to_string(c.blowup_every));
  note("materials.builtin", c.builtin_materials ? "true" : "false");
  if ((!c.sources.empty() || !c.plane_waves.empty()) && !c.explicit_keys.count("source.alpha") &&
      !c.explicit_keys.count("plane_wave.alpha"))
    m.push_back({"default.tukey_alpha", format_double(StfSpec{}.alpha)});
  return m;
}

}  // namespace specwave
