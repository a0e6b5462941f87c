#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "specwave/error.hpp"

namespace specwave {

enum class DomainKind { Acoustic, Elastic };

struct TissueProperties {
  std::string name;
  std::optional<double> hu_min;  // missing bound means unbounded on that side
  std::optional<double> hu_max;
  double rho = 0;  // kg/m^3
  double vp = 0;   // m/s
  double vs = 0;   // m/s, 0 for fluids

  double impedance() const { return rho * vp; }
  double lame_mu() const { return rho * vs * vs; }
  double lame_lambda() const { return rho * (vp * vp - 2.0 * vs * vs); }
  double bulk_modulus() const { return rho * vp * vp; }

  bool hu_contains(double hu) const {
    if (!hu_min && !hu_max) return false;
    return (!hu_min || hu >= *hu_min) && (!hu_max || hu <= *hu_max);
  }
};

inline DomainKind domain_kind(const TissueProperties& p) {
  return p.vs == 0.0 ? DomainKind::Acoustic : DomainKind::Elastic;
}

/// Throws InvalidMaterial if the properties are not physical for this solver.
inline void validate(const TissueProperties& p) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::InvalidMaterial, "material '" + p.name + "': " + why);
  };
  if (!(p.rho > 0) || !std::isfinite(p.rho)) fail("density must be positive");
  if (!(p.vp > 0) || !std::isfinite(p.vp)) fail("vp must be positive");
  if (!(p.vs >= 0) || !std::isfinite(p.vs)) fail("vs must be non-negative");
  if (!(p.vs < p.vp)) fail("vs must be smaller than vp");
  if (p.lame_lambda() < 0) fail("lambda < 0 (vp^2 < 2 vs^2)");
  if (p.hu_min && p.hu_max && *p.hu_min > *p.hu_max) fail("hu_min > hu_max");
}

class MaterialTable {
 public:
  void add(int id, TissueProperties props) {
    validate(props);
    if (by_id_.count(id))
      throw Error(ErrorKind::InvalidMaterial, "duplicate material id " + std::to_string(id));
    order_.push_back(id);
    by_id_.emplace(id, std::move(props));
  }

  bool contains(int id) const { return by_id_.count(id) != 0; }
  bool empty() const { return order_.empty(); }
  std::size_t size() const { return order_.size(); }
  const std::vector<int>& ids() const { return order_; }

  const TissueProperties& at(int id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end())
      throw Error(ErrorKind::InvalidMaterial, "unknown material id " + std::to_string(id));
    return it->second;
  }

  std::optional<int> find(const std::string& name) const {
    for (int id : order_)
      if (by_id_.at(id).name == name) return id;
    return std::nullopt;
  }

  const TissueProperties& by_name(const std::string& name) const {
    auto id = find(name);
    if (!id) throw Error(ErrorKind::InvalidMaterial, "unknown material '" + name + "'");
    return at(*id);
  }

  friend bool operator==(const MaterialTable& a, const MaterialTable& b) {
    if (a.order_ != b.order_) return false;
    for (int id : a.order_) {
      const auto& p = a.by_id_.at(id);
      const auto& q = b.by_id_.at(id);
      if (p.name != q.name || p.rho != q.rho || p.vp != q.vp || p.vs != q.vs ||
          p.hu_min != q.hu_min || p.hu_max != q.hu_max)
        return false;
    }
    return true;
  }

 private:
  std::vector<int> order_;
  std::map<int, TissueProperties> by_id_;
};

/// Dolphin-head tissues and surrounding water, ids 1..5 in table order.
inline MaterialTable builtin_dolphin_table() {
  MaterialTable t;
  t.add(1, {"soft_tissue", -35.0, 110.0, 1013.0, 1536.0, 215.0});
  t.add(2, {"acoustic_fat", -115.0, -35.0, 928.0, 1390.0, 186.0});
  t.add(3, {"melon", -115.0, -35.0, 884.0, 1316.0, 184.0});
  t.add(4, {"bone", 235.0, 2030.0, 2035.0, 3400.0, 1817.0});
  t.add(5, {"water", std::nullopt, -2000.0, 1028.0, 1480.0, 0.0});
  return t;
}

/// Material ids whose HU range contains `hu`. May be empty or ambiguous.
inline std::vector<int> classify_hu(const MaterialTable& table, double hu) {
  std::vector<int> out;
  for (int id : table.ids())
    if (table.at(id).hu_contains(hu)) out.push_back(id);
  return out;
}

/// Nearest-range assignment used with --hu-snap: exact matches if any, otherwise
/// every tissue at the minimum distance to its HU range.
inline std::vector<int> classify_hu_snapped(const MaterialTable& table, double hu) {
  auto exact = classify_hu(table, hu);
  if (!exact.empty()) return exact;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> out;
  for (int id : table.ids()) {
    const auto& p = table.at(id);
    if (!p.hu_min && !p.hu_max) continue;
    double d = 0;
    if (p.hu_min && hu < *p.hu_min) d = *p.hu_min - hu;
    if (p.hu_max && hu > *p.hu_max) d = hu - *p.hu_max;
    if (d < best) {
      best = d;
      out.assign(1, id);
    } else if (d == best) {
      out.push_back(id);
    }
  }
  return out;
}

// ---- SMAT1 ----------------------------------------------------------------
// Lines: <material_id> <name> <rho> <vp> <vs> [hu_min hu_max]; '#' comments.
// An unbounded HU side is written as -inf / inf.

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_smat1(std::ostream& os, const MaterialTable& t) {
  os << "SMAT1\n";
  for (int id : t.ids()) {
    const auto& p = t.at(id);
    os << id << ' ' << p.name << ' ' << format_double(p.rho) << ' ' << format_double(p.vp) << ' '
       << format_double(p.vs);
    if (p.hu_min || p.hu_max) {
      os << ' ' << (p.hu_min ? format_double(*p.hu_min) : std::string("-inf")) << ' '
         << (p.hu_max ? format_double(*p.hu_max) : std::string("inf"));
    }
    os << '\n';
  }
}

inline MaterialTable read_smat1(std::istream& is) {
  MaterialTable t;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string s; ls >> s;) tok.push_back(s);
    if (tok.empty()) continue;
    if (!header) {
      header = true;
      if (tok[0] == "SMAT1") continue;
    }
    auto bad = [&](const std::string& why) {
      throw Error(ErrorKind::Config, "SMAT1 line " + std::to_string(lineno) + ": " + why);
    };
    if (tok.size() != 5 && tok.size() != 7) bad("expected 5 or 7 fields");
    TissueProperties p;
    int id = 0;
    try {
      id = std::stoi(tok[0]);
      p.name = tok[1];
      p.rho = std::stod(tok[2]);
      p.vp = std::stod(tok[3]);
      p.vs = std::stod(tok[4]);
      if (tok.size() == 7) {
        const double lo = std::stod(tok[5]);
        const double hi = std::stod(tok[6]);
        if (std::isfinite(lo)) p.hu_min = lo;
        if (std::isfinite(hi)) p.hu_max = hi;
      }
    } catch (const std::logic_error&) {
      bad("malformed number");
    }
    try {
      t.add(id, p);
    } catch (const Error& e) {
      bad(e.what());
    }
  }
  return t;
}

inline MaterialTable read_smat1_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot open material file " + path);
  return read_smat1(f);
}

}  // namespace specwave
