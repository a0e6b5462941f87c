#pragma once

// Verification harnesses: reciprocity, analytic Green's function, interface
// reflection, absorbing-boundary reflection and spectral convergence.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "specwave/assembly.hpp"
#include "specwave/error.hpp"
#include "specwave/hexmesh.hpp"
#include "specwave/material.hpp"
#include "specwave/solver.hpp"
#include "specwave/source.hpp"

namespace specwave {

/// 64-bit FNV-1a of the text, as 16 hex digits.
inline std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Common simulation parameters of a validation run.
struct RunParameters {
  int degree = 2;
  double courant = kDefaultCourant;
  int threads = 1;
};

namespace detail {

inline double l2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Samples of `trace` with t in [t0, t1].
inline std::vector<double> window(const std::vector<double>& time, const std::vector<double>& trace, double t0,
                                  double t1) {
  std::vector<double> out;
  for (std::size_t i = 0; i < time.size(); ++i)
    if (time[i] >= t0 && time[i] <= t1) out.push_back(trace[i]);
  return out;
}

// Linear interpolation of a uniformly sampled trace; zero outside.
inline double sample_at(const std::vector<double>& trace, double dt, double t) {
  const double x = t / dt;
  if (x < 0 || x > double(trace.size() - 1)) return 0.0;
  const std::size_t i = std::min(std::size_t(x), trace.size() - 2);
  const double f = x - double(i);
  return (1 - f) * trace[i] + f * trace[i + 1];
}

inline void bounding_box(const HexMesh& mesh, Vec3& lo, Vec3& hi) {
  lo = hi = mesh.nodes.front();
  for (const auto& p : mesh.nodes)
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
}

inline const TissueProperties& material_at(const HexMesh& mesh, const MaterialTable& table, const Vec3& x,
                                           const std::string& what) {
  auto loc = locate_point(mesh, x);
  if (!loc) throw Error(ErrorKind::SourcePlacement, what + " is outside the mesh");
  return table.at(mesh.elements[loc->elem].material);
}

}  // namespace detail

// ---- reciprocity -----------------------------------------------------------------

struct ReciprocitySetup {
  HexMesh mesh;
  MaterialTable table;
  RunParameters run;
  double t_end = 0;
  Vec3 r1, r2;
  SourceKind kind = SourceKind::Pressure;
  Vec3 direction{0, 0, 1};  // orientation at r1 for force sources; r2 uses the opposite
  SourceTimeFunction stf;
};

struct ReciprocityResult {
  std::vector<double> time, trace_12, trace_21;
  double max_abs_diff = 0;
  double max_abs_signal = 0;
  double ratio_db = 0;
  bool zero_signal = false;
  double dt = 0;
  long n_steps = 0;
};

inline ReciprocityResult reciprocity_from_traces(std::vector<double> time, std::vector<double> t12,
                                                 std::vector<double> t21) {
  if (t12.size() != t21.size()) throw Error(ErrorKind::Config, "reciprocity traces differ in length");
  ReciprocityResult r;
  r.time = std::move(time);
  r.trace_12 = std::move(t12);
  r.trace_21 = std::move(t21);
  for (std::size_t i = 0; i < r.trace_12.size(); ++i) {
    r.max_abs_diff = std::max(r.max_abs_diff, std::abs(r.trace_12[i] - r.trace_21[i]));
    r.max_abs_signal = std::max({r.max_abs_signal, std::abs(r.trace_12[i]), std::abs(r.trace_21[i])});
  }
  r.zero_signal = r.max_abs_signal == 0.0;
  r.ratio_db = r.zero_signal ? -std::numeric_limits<double>::infinity()
               : r.max_abs_diff == 0.0 ? -std::numeric_limits<double>::infinity()
                                       : 20.0 * std::log10(r.max_abs_diff / r.max_abs_signal);
  return r;
}

/// Two runs: source at r1 recorded at r2, then source at r2 recorded at r1.
/// Pressure sources record pressure; force sources use opposite orientations
/// at the two points and record the velocity component along the other
/// point's orientation.
inline ReciprocityResult reciprocity_test(const ReciprocitySetup& s) {
  if (s.kind == SourceKind::ForceZ) throw Error(ErrorKind::Config, "use an oriented force for reciprocity");
  const auto& m1 = detail::material_at(s.mesh, s.table, s.r1, "r1");
  const auto& m2 = detail::material_at(s.mesh, s.table, s.r2, "r2");
  if (domain_kind(m1) != domain_kind(m2))
    throw Error(ErrorKind::Config, "reciprocity points must lie in the same domain kind");
  Vec3 d1 = s.direction;
  if (s.kind == SourceKind::ForceVector) {
    if (!(norm(d1) > 0)) throw Error(ErrorKind::Config, "force direction must be non-zero");
    d1 *= 1.0 / norm(d1);
  }
  const Vec3 d2 = -d1;

  auto one_run = [&](const Vec3& src, const Vec3& dsrc, const Vec3& rec, const Vec3& drec) {
    SimulationInput in;
    in.mesh = s.mesh;
    in.table = s.table;
    in.degree = s.run.degree;
    in.courant = s.run.courant;
    in.threads = s.run.threads;
    in.t_end = s.t_end;
    PointSource ps;
    ps.position = src;
    ps.kind = s.kind;
    ps.direction = dsrc;
    ps.stf = s.stf;
    in.sources = {ps};
    Receiver r;
    r.name = "rec";
    r.position = rec;
    r.channels = s.kind == SourceKind::Pressure
                     ? std::vector<Channel>{Channel::Pressure}
                     : std::vector<Channel>{Channel::VelocityX, Channel::VelocityY, Channel::VelocityZ};
    in.receivers = {r};
    auto res = simulate(in);
    std::vector<double> trace(res.traces.time.size());
    for (std::size_t i = 0; i < trace.size(); ++i)
      trace[i] = s.kind == SourceKind::Pressure
                     ? res.traces.channels[0][i]
                     : drec.x * res.traces.channels[0][i] + drec.y * res.traces.channels[1][i] +
                           drec.z * res.traces.channels[2][i];
    return std::make_pair(res, trace);
  };
  auto [res12, t12] = one_run(s.r1, d1, s.r2, d2);
  auto [res21, t21] = one_run(s.r2, d2, s.r1, d1);
  if (res12.grid.dt != res21.grid.dt || res12.grid.n_steps != res21.grid.n_steps)
    throw Error(ErrorKind::Config, "reciprocity runs used different time grids");
  auto r = reciprocity_from_traces(res12.traces.time, std::move(t12), std::move(t21));
  r.dt = res12.grid.dt;
  r.n_steps = res12.grid.n_steps;
  return r;
}

// ---- analytic Green's function ---------------------------------------------------

struct GreensSetup {
  HexMesh mesh;
  MaterialTable table;
  RunParameters run;
  Vec3 source, receiver;
  SourceTimeFunction stf;
  double margin_periods = 3.0;
  double min_points_per_wavelength = 10.0;
};

struct GreensResult {
  double distance = 0, velocity = 0;
  double arrival_expected = 0, arrival_measured = 0;
  double window_start = 0, window_end = 0;
  double misfit = 0;  // relative L2 over the direct-arrival window
  double points_per_wavelength = 0;
  double dt = 0;
  long n_steps = 0;
  std::vector<double> time, numeric, analytic;
};

/// Average GLL points per wavelength at f0 for the coarsest element.
inline double points_per_wavelength(const HexMesh& mesh, double velocity, double f0, int degree) {
  double hmax = 0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto c = mesh.corners(int(e));
    for (int a = 0; a < 8; ++a)
      for (int b = a + 1; b < 8; ++b) {
        int diff = 0;
        for (int d = 0; d < 3; ++d) diff += kCornerSigns[a][d] != kCornerSigns[b][d];
        if (diff == 1) hmax = std::max(hmax, norm(c[a] - c[b]));
      }
  }
  return velocity / f0 / (hmax / degree);
}

inline GreensResult greens_oracle_test(const GreensSetup& s) {
  const int mat = s.mesh.elements.front().material;
  for (const auto& e : s.mesh.elements)
    if (e.material != mat) throw Error(ErrorKind::Config, "Green's function test needs a homogeneous mesh");
  const auto& props = s.table.at(mat);
  if (domain_kind(props) != DomainKind::Acoustic)
    throw Error(ErrorKind::Config, "Green's function test needs an acoustic medium");

  GreensResult g;
  g.velocity = props.vp;
  g.distance = norm(s.receiver - s.source);
  if (!(g.distance > 0)) throw Error(ErrorKind::Config, "receiver coincides with the source");
  g.points_per_wavelength = points_per_wavelength(s.mesh, props.vp, s.stf.f0, s.run.degree);
  if (g.points_per_wavelength < s.min_points_per_wavelength)
    throw Error(ErrorKind::Config, "only " + format_double(g.points_per_wavelength) +
                                       " points per wavelength; refine the mesh or raise the degree");
  const double period = 1.0 / s.stf.f0;
  g.arrival_expected = s.stf.delay + g.distance / g.velocity;
  g.window_start = std::max(0.0, g.arrival_expected - s.margin_periods * period);
  g.window_end = g.arrival_expected + s.stf.window_length + s.margin_periods * period;

  // The earliest boundary reflection comes from the nearest image source.
  Vec3 lo, hi;
  detail::bounding_box(s.mesh, lo, hi);
  double image = std::numeric_limits<double>::infinity();
  for (int d = 0; d < 3; ++d)
    for (double plane : {lo[d], hi[d]}) {
      Vec3 mirrored = s.source;
      mirrored[d] = 2 * plane - s.source[d];
      image = std::min(image, norm(s.receiver - mirrored));
    }
  if (s.stf.delay + image / g.velocity < g.window_end) {
    const double need = (g.window_end - s.stf.delay) * g.velocity;
    throw Error(ErrorKind::Config, "boundary reflections reach the receiver inside the direct-arrival window; "
                                   "the image path must be at least " + format_double(need) + " m (is " +
                                   format_double(image) + " m)");
  }

  SimulationInput in;
  in.mesh = s.mesh;
  in.table = s.table;
  in.degree = s.run.degree;
  in.courant = s.run.courant;
  in.threads = s.run.threads;
  in.t_end = g.window_end;
  PointSource ps;
  ps.position = s.source;
  ps.kind = SourceKind::Pressure;
  ps.stf = s.stf;
  in.sources = {ps};
  in.receivers = {{"r", s.receiver, {Channel::Pressure}}};
  const auto res = simulate(in);
  g.dt = res.grid.dt;
  g.n_steps = res.grid.n_steps;

  const auto& time = res.traces.time;
  const auto& p = res.traces.channels[0];
  std::vector<double> full_analytic(time.size());
  for (std::size_t i = 0; i < time.size(); ++i)
    full_analytic[i] = s.stf(time[i] - g.distance / g.velocity) / (4.0 * std::numbers::pi * g.distance);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < time.size(); ++i) {
    if (time[i] < g.window_start || time[i] > g.window_end) continue;
    g.time.push_back(time[i]);
    g.numeric.push_back(p[i]);
    g.analytic.push_back(full_analytic[i]);
    num += (p[i] - full_analytic[i]) * (p[i] - full_analytic[i]);
    den += full_analytic[i] * full_analytic[i];
  }
  g.misfit = den > 0 ? std::sqrt(num / den) : std::numeric_limits<double>::infinity();

  // Arrival from the cross-correlation peak with the analytic trace, refined
  // by a parabola through the three samples around the peak.
  const int max_lag = int(std::ceil(0.5 * period / g.dt));
  std::vector<double> xc(2 * max_lag + 1, 0.0);
  for (int l = -max_lag; l <= max_lag; ++l) {
    double acc = 0;
    for (std::size_t i = 0; i < time.size(); ++i) {
      const long j = long(i) + l;
      if (j < 0 || j >= long(time.size())) continue;
      acc += p[j] * full_analytic[i];
    }
    xc[l + max_lag] = acc;
  }
  const int k = int(std::max_element(xc.begin(), xc.end()) - xc.begin());
  double shift = k - max_lag;
  if (k > 0 && k + 1 < int(xc.size())) {
    const double a = xc[k - 1], b = xc[k], c = xc[k + 1];
    const double denom = a - 2 * b + c;
    if (denom != 0) shift += 0.5 * (a - c) / denom;
  }
  g.arrival_measured = g.arrival_expected + shift * g.dt;
  return g;
}

// ---- 1D columns --------------------------------------------------------------------

/// A column along z, `lateral` x `lateral` cells wide, with symmetry side
/// faces and absorbing ends. `layers` lists (material, cell count) from the
/// bottom (z = 0) up.
inline HexMesh column_mesh(double cell, int lateral, const std::vector<std::pair<int, int>>& layers) {
  int nz = 0;
  for (const auto& [m, n] : layers) nz += n;
  VoxelVolume v;
  v.nx = v.ny = lateral;
  v.nz = nz;
  v.spacing = {cell, cell, cell};
  v.material.reserve(std::size_t(lateral) * lateral * nz);
  for (const auto& [m, n] : layers)
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < lateral * lateral; ++c) v.material.push_back(m);
  const BoundaryPolicy policy = {BoundaryKind::Symmetry, BoundaryKind::Symmetry, BoundaryKind::Symmetry,
                                 BoundaryKind::Symmetry, BoundaryKind::Absorbing, BoundaryKind::Absorbing};
  return voxels_to_hexmesh(v, policy);
}

/// Point sources on every GLL node of the horizontal plane z = z_plane (an
/// element face plane), weighted by the face quadrature so that together
/// they act as a uniform plane source of the given stf.
inline std::vector<PointSource> plane_source(const HexMesh& mesh, const GllRule& rule, double z_plane,
                                             SourceKind kind, const SourceTimeFunction& stf) {
  std::map<std::pair<long long, long long>, std::pair<Vec3, double>> nodes;
  const int n = rule.points();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto c = mesh.corners(int(e));
    if (std::abs(c[0].z - z_plane) > kLocateTolerance) continue;
    const double hx = norm(c[1] - c[0]), hy = norm(c[3] - c[0]);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 x = map_point(c, {rule.nodes[i], rule.nodes[j], -1.0});
        const double w = rule.weights[i] * rule.weights[j] * 0.25 * hx * hy;
        auto& entry = nodes[{std::llround(x.x / kMergeTolerance), std::llround(x.y / kMergeTolerance)}];
        entry.first = x;
        entry.second += w;
      }
  }
  if (nodes.empty()) throw Error(ErrorKind::SourcePlacement, "no element face lies on the source plane");
  std::vector<PointSource> out;
  for (const auto& [key, pw] : nodes) {
    PointSource s;
    s.position = pw.first;
    s.kind = kind;
    s.direction = {0, 0, 1};
    s.stf = stf;
    s.stf.amplitude *= pw.second;
    out.push_back(s);
  }
  return out;
}

struct Window {
  double start = 0, end = 0;
  bool overlaps(const Window& o) const { return start < o.end && o.start < end; }
};

inline Window pulse_window(double arrival, const SourceTimeFunction& stf, double margin_periods) {
  const double period = 1.0 / stf.f0;
  return {std::max(0.0, arrival - margin_periods * period), arrival + stf.window_length + margin_periods * period};
}

// ---- interface reflection ------------------------------------------------------------

struct InterfaceSetup {
  MaterialTable table;
  int fluid_material = 5;
  int second_material = 4;
  RunParameters run;
  double cell = 2.5e-3;
  int lateral = 1;
  int fluid_cells = 120;       // above the interface
  int second_cells = 200;      // below the interface
  int source_cells = 4;        // source plane depth below the top
  int receiver_cells = 80;     // fluid receiver height above the interface
  int transmit_cells = 20;     // second-medium receiver depth below the interface
  SourceTimeFunction stf = tone_burst(40e3, 4);
  double margin_periods = 3.0;
};

struct InterfaceResult {
  double impedance_1 = 0, impedance_2 = 0;
  double r_analytic = 0, r_measured = 0, r_least_squares = 0;
  double t_analytic = 0, t_measured = 0;  // particle-velocity transmission
  Window incident, reflected, transmitted;
  double dt = 0;
  long n_steps = 0;
  double max_boundary_flux = 0;
  Seismogram traces;
};

/// Normal-incidence plane wave travelling -z through fluid onto a flat
/// interface. R compares reflected and incident pressure at the fluid receiver
/// (signed L2 ratio); T compares transmitted and incident vertical velocity.
inline InterfaceResult interface_rt_test(const InterfaceSetup& s) {
  const auto& m1 = s.table.at(s.fluid_material);
  const auto& m2 = s.table.at(s.second_material);
  if (domain_kind(m1) != DomainKind::Acoustic)
    throw Error(ErrorKind::Config, "interface test needs a fluid incident medium");
  if (s.source_cells < 1 || s.source_cells >= s.fluid_cells || s.receiver_cells < 1 ||
      s.receiver_cells >= s.fluid_cells - s.source_cells || s.transmit_cells < 1 ||
      s.transmit_cells >= s.second_cells)
    throw Error(ErrorKind::Config, "interface test geometry does not fit in the column");

  InterfaceResult r;
  r.impedance_1 = m1.impedance();
  r.impedance_2 = m2.impedance();
  r.r_analytic = (r.impedance_2 - r.impedance_1) / (r.impedance_2 + r.impedance_1);
  r.t_analytic = 2 * r.impedance_1 / (r.impedance_1 + r.impedance_2);

  const double h = s.cell;
  const double z_i = s.second_cells * h;
  const double z_top = (s.second_cells + s.fluid_cells) * h;
  const double z_s = z_top - s.source_cells * h;
  const double z_r = z_i + s.receiver_cells * h;
  const double z_t = z_i - s.transmit_cells * h;
  const double c1 = m1.vp, c2 = m2.vp;
  const double t_inc = s.stf.delay + (z_s - z_r) / c1;
  const double t_ref = s.stf.delay + (z_s - z_i + z_r - z_i) / c1;
  r.incident = pulse_window(t_inc, s.stf, s.margin_periods);
  r.reflected = pulse_window(t_ref, s.stf, s.margin_periods);
  r.transmitted = pulse_window(s.stf.delay + (z_s - z_i) / c1 + (z_i - z_t) / c2, s.stf, s.margin_periods);
  if (r.incident.overlaps(r.reflected))
    throw Error(ErrorKind::Config, "incident and reflected windows overlap; move the receiver further "
                                   "from the interface");
  // Echoes from the top boundary of the up-going half of the source and from
  // the bottom boundary must arrive after the measurement windows.
  const double bottom_echo = s.stf.delay + (z_s - z_i) / c1 + (z_i + z_t) / c2;
  if (bottom_echo - s.margin_periods / s.stf.f0 < r.transmitted.end)
    throw Error(ErrorKind::Config, "bottom boundary echo overlaps the transmitted window; lengthen the "
                                   "second medium");

  const HexMesh mesh = column_mesh(h, s.lateral, {{s.second_material, s.second_cells}, {s.fluid_material, s.fluid_cells}});
  const GllRule rule = gll_rule(s.run.degree);
  SimulationInput in;
  in.mesh = mesh;
  in.table = s.table;
  in.degree = s.run.degree;
  in.courant = s.run.courant;
  in.threads = s.run.threads;
  in.t_end = std::max(r.reflected.end, r.transmitted.end);
  in.sources = plane_source(mesh, rule, z_s, SourceKind::Pressure, s.stf);
  const double xc = 0.5 * s.lateral * h;
  in.receivers = {{"fluid", {xc, xc, z_r}, {Channel::Pressure, Channel::VelocityZ}},
                  {"second", {xc, xc, z_t}, {Channel::VelocityZ}}};
  const auto res = simulate(in);
  r.dt = res.grid.dt;
  r.n_steps = res.grid.n_steps;
  r.traces = res.traces;
  for (double f : res.diagnostics.boundary_flux) r.max_boundary_flux = std::max(r.max_boundary_flux, f);

  const auto& t = res.traces.time;
  const auto& p = res.traces.channel("fluid_p");
  const auto inc = detail::window(t, p, r.incident.start, r.incident.end);
  const auto ref = detail::window(t, p, r.reflected.start, r.reflected.end);
  const double shift = t_ref - t_inc;
  double dot_ri = 0, dot_ii = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < r.reflected.start || t[i] > r.reflected.end) continue;
    const double pi = detail::sample_at(p, r.dt, t[i] - shift);
    dot_ri += p[i] * pi;
    dot_ii += pi * pi;
  }
  const double sign = dot_ri < 0 ? -1.0 : 1.0;
  r.r_measured = sign * detail::l2(ref) / detail::l2(inc);
  r.r_least_squares = dot_ii > 0 ? dot_ri / dot_ii : 0.0;

  const auto& vf = res.traces.channel("fluid_vz");
  const auto& vs = res.traces.channel("second_vz");
  const auto vinc = detail::window(t, vf, r.incident.start, r.incident.end);
  const auto vtr = detail::window(t, vs, r.transmitted.start, r.transmitted.end);
  r.t_measured = detail::l2(vtr) / detail::l2(vinc);
  return r;
}

// ---- absorbing boundary ------------------------------------------------------------

struct AbsorbingSetup {
  MaterialTable table;
  int material = 4;
  RunParameters run;
  double cell = 2.5e-3;
  int lateral = 1;
  int cells = 400;
  int source_cells = 4;     // source plane depth below the top
  int receiver_cells = 200;  // receiver height above the bottom
  SourceTimeFunction stf = tone_burst(40e3, 4);
  double margin_periods = 3.0;
};

struct AbsorbingResult {
  double incident_peak = 0, reflected_peak = 0, ratio = 0;
  Window incident, reflected;
  double max_boundary_flux = 0;
  double dt = 0;
  long n_steps = 0;
  Seismogram traces;
};

/// Plane wave travelling down a homogeneous column onto the absorbing bottom
/// face; compares the peak of the echo with the peak of the incident pulse.
/// Fluids use a pressure plane source and pressure receiver, solids a
/// vertical force plane source and vertical velocity.
inline AbsorbingResult absorbing_column_test(const AbsorbingSetup& s) {
  const auto& m = s.table.at(s.material);
  const bool fluid = domain_kind(m) == DomainKind::Acoustic;
  if (s.source_cells < 1 || s.receiver_cells < 1 || s.receiver_cells >= s.cells - s.source_cells)
    throw Error(ErrorKind::Config, "absorbing test geometry does not fit in the column");
  const double h = s.cell;
  const double z_top = s.cells * h;
  const double z_s = z_top - s.source_cells * h;
  const double z_r = s.receiver_cells * h;
  AbsorbingResult r;
  r.incident = pulse_window(s.stf.delay + (z_s - z_r) / m.vp, s.stf, s.margin_periods);
  r.reflected = pulse_window(s.stf.delay + (z_s + z_r) / m.vp, s.stf, s.margin_periods);
  if (r.incident.overlaps(r.reflected))
    throw Error(ErrorKind::Config, "incident and reflected windows overlap; raise the receiver");

  const HexMesh mesh = column_mesh(h, s.lateral, {{s.material, s.cells}});
  const GllRule rule = gll_rule(s.run.degree);
  SimulationInput in;
  in.mesh = mesh;
  in.table = s.table;
  in.degree = s.run.degree;
  in.courant = s.run.courant;
  in.threads = s.run.threads;
  in.t_end = r.reflected.end;
  in.sources = plane_source(mesh, rule, z_s, fluid ? SourceKind::Pressure : SourceKind::ForceZ, s.stf);
  const double xc = 0.5 * s.lateral * h;
  in.receivers = {{"rec", {xc, xc, z_r}, {fluid ? Channel::Pressure : Channel::VelocityZ}}};
  const auto res = simulate(in);
  r.dt = res.grid.dt;
  r.n_steps = res.grid.n_steps;
  r.traces = res.traces;
  for (double f : res.diagnostics.boundary_flux) r.max_boundary_flux = std::max(r.max_boundary_flux, f);
  const auto& t = res.traces.time;
  const auto& v = res.traces.channels[0];
  r.incident_peak = detail::max_abs(detail::window(t, v, r.incident.start, r.incident.end));
  r.reflected_peak = detail::max_abs(detail::window(t, v, r.reflected.start, r.reflected.end));
  r.ratio = r.incident_peak > 0 ? r.reflected_peak / r.incident_peak : 0.0;
  return r;
}

// ---- spectral convergence ------------------------------------------------------------

struct ConvergenceSetup {
  MaterialTable table;
  int material = 5;
  double length = 0.01;  // cube edge (m)
  int elements = 2;      // per edge
  std::vector<int> degrees{2, 4, 6};
  double courant = kDefaultCourant;
  int threads = 1;
  double periods = 2.0;  // simulated duration in mode periods
  double floor = 1e-11;  // relative error treated as round-off
};

struct ConvergenceRow {
  int degree = 0;
  double dt = 0;
  long steps = 0;
  double omega_exact = 0;
  double omega_semi_discrete = 0;  // time-dispersion removed
  double omega_raw = 0;            // phase advance per step / dt
  double error = 0;                // relative, semi-discrete
  double error_half_dt = 0;        // same with dt / 2
  bool time_contaminated = false;
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  std::vector<double> ratios;  // error[i] / error[i + 1], floored
};

namespace detail {

// Frequency of the (1,1,1) standing mode of a closed fluid cube, measured from
// the projections a_n = phi_n^T M phi_0. For a pure discrete mode the central
// difference recursion gives 2 a_n - a_{n+1} - a_{n-1} = (omega_h dt)^2 a_n.
inline std::pair<double, double> mode_frequency(const HexMesh& mesh, const MaterialTable& table, int degree,
                                                double dt, long steps, int threads, double length) {
  const GllRule rule = gll_rule(degree);
  const WaveOperators ops(mesh, table, rule, threads);
  TimeGrid grid;
  grid.dt = dt;
  grid.n_steps = steps;
  RunOptions opt;
  opt.record_diagnostics = false;
  SolverRun run(mesh, table, ops, grid, {}, {}, opt);
  const auto& dm = ops.dofs();
  std::vector<double> phi0(dm.num_fluid);
  for (std::size_t g = 0; g < dm.num_global(); ++g) {
    const Vec3& x = dm.coords[g];
    const double k = std::numbers::pi / length;
    phi0[dm.fluid_index[g]] = std::cos(k * x.x) * std::cos(k * x.y) * std::cos(k * x.z);
  }
  run.state().phi = phi0;
  run.initialize_accelerations();
  const auto& m = ops.mass().fluid;
  auto project = [&] {
    double a = 0;
    for (std::size_t i = 0; i < phi0.size(); ++i) a += m[i] * run.state().phi[i] * phi0[i];
    return a;
  };
  std::vector<double> a{project()};
  for (long n = 0; n < steps; ++n) {
    run.step();
    a.push_back(project());
  }
  run.check_finite();
  double num = 0, den = 0;
  for (std::size_t n = 1; n + 1 < a.size(); ++n) {
    num += a[n] * (2 * a[n] - a[n + 1] - a[n - 1]);
    den += a[n] * a[n];
  }
  const double lambda = num / den;
  const double semi = std::sqrt(lambda) / dt;
  const double raw = std::acos(1.0 - 0.5 * lambda) / dt;
  return {semi, raw};
}

}  // namespace detail

inline ConvergenceResult convergence_study(const ConvergenceSetup& s) {
  const auto& props = s.table.at(s.material);
  if (domain_kind(props) != DomainKind::Acoustic)
    throw Error(ErrorKind::Config, "convergence study uses an acoustic material");
  if (s.elements < 1 || !(s.length > 0)) throw Error(ErrorKind::Config, "invalid convergence box");
  const double h = s.length / s.elements;
  const HexMesh mesh = voxels_to_hexmesh(uniform_volume(s.elements, s.elements, s.elements, {h, h, h}, s.material),
                                         kAllFree);
  ConvergenceResult out;
  for (int degree : s.degrees) {
    ConvergenceRow row;
    row.degree = degree;
    row.omega_exact = props.vp * std::numbers::pi * std::sqrt(3.0) / s.length;
    row.dt = stable_dt(mesh, s.table, gll_rule(degree), s.courant);
    row.steps = std::max<long>(200, long(std::ceil(s.periods * 2 * std::numbers::pi / row.omega_exact / row.dt)));
    const auto [semi, raw] = detail::mode_frequency(mesh, s.table, degree, row.dt, row.steps, s.threads, s.length);
    row.omega_semi_discrete = semi;
    row.omega_raw = raw;
    row.error = std::abs(semi / row.omega_exact - 1.0);
    const auto [semi2, raw2] =
        detail::mode_frequency(mesh, s.table, degree, 0.5 * row.dt, 2 * row.steps, s.threads, s.length);
    (void)raw2;
    row.error_half_dt = std::abs(semi2 / row.omega_exact - 1.0);
    row.time_contaminated = std::max(row.error, row.error_half_dt) > s.floor &&
                            std::abs(row.error - row.error_half_dt) > 0.05 * row.error;
    out.rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < out.rows.size(); ++i)
    out.ratios.push_back(std::max(out.rows[i].error, s.floor) / std::max(out.rows[i + 1].error, s.floor));
  return out;
}

// ---- reports -------------------------------------------------------------------------

inline Manifest reciprocity_report(const ReciprocityResult& r, double threshold_db, const std::string& hash) {
  return {{"test", "reciprocity"},
          {"config_hash", hash},
          {"dt", format_double(r.dt)},
          {"n_steps", std::to_string(r.n_steps)},
          {"max_abs_diff", format_double(r.max_abs_diff)},
          {"max_abs_signal", format_double(r.max_abs_signal)},
          {"ratio_db", r.zero_signal ? "undefined" : format_double(r.ratio_db)},
          {"zero_signal", r.zero_signal ? "true" : "false"},
          {"threshold_db", format_double(threshold_db)},
          {"pass", !r.zero_signal && r.ratio_db <= threshold_db ? "true" : "false"}};
}

inline Manifest greens_report(const GreensResult& g, double tolerance, const std::string& hash) {
  const bool arrival_ok = std::abs(g.arrival_measured - g.arrival_expected) <= g.dt;
  return {{"test", "oracle"},
          {"config_hash", hash},
          {"dt", format_double(g.dt)},
          {"n_steps", std::to_string(g.n_steps)},
          {"distance", format_double(g.distance)},
          {"points_per_wavelength", format_double(g.points_per_wavelength)},
          {"arrival_expected", format_double(g.arrival_expected)},
          {"arrival_measured", format_double(g.arrival_measured)},
          {"window_start", format_double(g.window_start)},
          {"window_end", format_double(g.window_end)},
          {"misfit", format_double(g.misfit)},
          {"tolerance", format_double(tolerance)},
          {"pass", g.misfit <= tolerance && arrival_ok ? "true" : "false"}};
}

inline Manifest convergence_report(const ConvergenceResult& c, double min_ratio, const std::string& hash) {
  Manifest m{{"test", "converge"}, {"config_hash", hash}};
  bool pass = true;
  for (const auto& row : c.rows) {
    const std::string p = "N" + std::to_string(row.degree) + "_";
    m.push_back({p + "dt", format_double(row.dt)});
    m.push_back({p + "steps", std::to_string(row.steps)});
    m.push_back({p + "omega_exact", format_double(row.omega_exact)});
    m.push_back({p + "omega", format_double(row.omega_semi_discrete)});
    m.push_back({p + "omega_raw", format_double(row.omega_raw)});
    m.push_back({p + "error", format_double(row.error)});
    m.push_back({p + "error_half_dt", format_double(row.error_half_dt)});
    m.push_back({p + "time_contaminated", row.time_contaminated ? "true" : "false"});
    pass = pass && !row.time_contaminated;
  }
  for (std::size_t i = 0; i < c.ratios.size(); ++i) {
    m.push_back({"ratio_" + std::to_string(c.rows[i].degree) + "_" + std::to_string(c.rows[i + 1].degree),
                 format_double(c.ratios[i])});
    pass = pass && c.ratios[i] >= min_ratio;
  }
  m.push_back({"min_ratio", format_double(min_ratio)});
  m.push_back({"pass", pass ? "true" : "false"});
  return m;
}

}  // namespace specwave
