#pragma once

// Explicit Newmark (beta = 0, gamma = 1/2) time stepping of the coupled system.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specwave/assembly.hpp"
#include "specwave/error.hpp"
#include "specwave/hexmesh.hpp"
#include "specwave/material.hpp"
#include "specwave/source.hpp"

namespace specwave {

inline constexpr double kDefaultCourant = 0.3;
inline constexpr double kBlowUpThreshold = 1e30;

struct TimeGrid {
  double dt = 0;
  long n_steps = 0;
  double t_end = 0;
  double courant = kDefaultCourant;

  double time(long step) const { return double(step) * dt; }
};

/// dt = C * min over elements of (min GLL spacing / vp).
inline double stable_dt(const HexMesh& mesh, const MaterialTable& table, const GllRule& rule, double courant) {
  if (!(courant > 0)) throw Error(ErrorKind::Config, "Courant number must be positive");
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& props = table.at(mesh.elements[e].material);
    m = std::min(m, element_min_gll_spacing(mesh, int(e), rule) / props.vp);
  }
  if (!std::isfinite(m) || !(m > 0)) throw Error(ErrorKind::MeshUnusable, "cannot derive a time step");
  return courant * m;
}

inline TimeGrid compute_dt(const HexMesh& mesh, const MaterialTable& table, const GllRule& rule, double courant,
                           double t_end = 0.0) {
  TimeGrid g;
  g.courant = courant;
  g.dt = stable_dt(mesh, table, rule, courant);
  g.t_end = t_end;
  g.n_steps = t_end > 0 ? long(std::ceil(t_end / g.dt - 1e-9)) : 0;
  return g;
}

struct Diagnostics {
  std::vector<double> max_phi_ddot;   // per completed step
  std::vector<double> max_u_ddot;
  std::vector<double> boundary_flux;  // absorbing-boundary power, per step
  std::vector<long> energy_steps;
  std::vector<double> energy;
};

struct RunOptions {
  int blowup_every = 50;
  int energy_every = 0;  // 0 disables energy sampling
  bool record_diagnostics = true;
};

/// Newmark predictor: x += dt v + dt^2/2 a, v += dt/2 a.
inline void newmark_predict(std::span<double> x, std::span<double> v, std::span<const double> a, double dt) {
  const double half_dt2 = 0.5 * dt * dt, half_dt = 0.5 * dt;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] += dt * v[i] + half_dt2 * a[i];
    v[i] += half_dt * a[i];
  }
}

/// Newmark corrector: v += dt/2 a_new.
inline void newmark_correct(std::span<double> v, std::span<const double> a, double dt) {
  const double half_dt = 0.5 * dt;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += half_dt * a[i];
}

/// One simulation: state, time grid, placed sources and receivers.
class SolverRun {
 public:
  SolverRun(const HexMesh& mesh, const MaterialTable& table, const WaveOperators& ops, TimeGrid grid,
            const std::vector<PointSource>& sources, const std::vector<Receiver>& receivers,
            RunOptions options = {})
      : ops_(ops), grid_(grid), options_(options), state_(FieldVectors::zeros(ops.dofs())) {
    if (!(grid_.dt > 0)) throw Error(ErrorKind::Config, "time step must be positive");
    for (const auto& s : sources) sources_.push_back(place_source(s, mesh, table, ops));
    for (const auto& r : receivers) {
      for (const auto& r2 : receivers_)
        if (r2.name == r.name) throw Error(ErrorKind::Config, "duplicate receiver name " + r.name);
      for (auto& pc : place_receiver(r, mesh, table, ops)) {
        trace_.names.push_back(r.name + "_" + to_string(pc.channel));
        channels_.push_back(std::move(pc));
      }
      receivers_.push_back(r);
    }
    trace_.channels.resize(channels_.size());
    build_source_tables();
    fluid_load_.assign(ops.dofs().num_fluid, 0.0);
    solid_load_.assign(3 * ops.dofs().num_solid, 0.0);
  }

  const TimeGrid& grid() const { return grid_; }
  long step_count() const { return step_; }
  double time() const { return grid_.time(step_); }
  const FieldVectors& state() const { return state_; }
  FieldVectors& state() { return state_; }
  const Seismogram& seismogram() const { return trace_; }
  const Diagnostics& diagnostics() const { return diag_; }
  const WaveOperators& operators() const { return ops_; }

  /// Sets accelerations consistent with the current displacement-level state
  /// and the loads at the current time.
  void initialize_accelerations() { solve_accelerations(step_); }

  void record() {
    trace_.time.push_back(time());
    for (std::size_t c = 0; c < channels_.size(); ++c) trace_.channels[c].push_back(sample_channel(channels_[c], state_));
  }

  void step() {
    const double dt = grid_.dt;
    newmark_predict(state_.phi, state_.phi_dot, state_.phi_ddot, dt);
    newmark_predict(state_.u, state_.u_dot, state_.u_ddot, dt);
    ++step_;
    solve_accelerations(step_);
    newmark_correct(state_.phi_dot, state_.phi_ddot, dt);
    newmark_correct(state_.u_dot, state_.u_ddot, dt);

    if (options_.record_diagnostics) {
      double mp = 0, mu = 0;
      for (double a : state_.phi_ddot) mp = std::max(mp, std::abs(a));
      for (double a : state_.u_ddot) mu = std::max(mu, std::abs(a));
      diag_.max_phi_ddot.push_back(mp);
      diag_.max_u_ddot.push_back(mu);
      diag_.boundary_flux.push_back(boundary_flux());
    }
    if (options_.energy_every > 0 && step_ % options_.energy_every == 0) sample_energy();
    if (options_.blowup_every > 0 && step_ % options_.blowup_every == 0) check_finite();
  }

  void sample_energy() {
    diag_.energy_steps.push_back(step_);
    diag_.energy.push_back(ops_.energy(state_));
  }

  /// Power delivered by the absorbing boundaries to the physical energy:
  /// -sum coef phi_tt^2 in the fluid and -u_t . B u_t in the solid (never positive).
  double boundary_flux() const {
    double p = 0;
    for (const auto& a : ops_.fluid_absorbing_points()) {
      const double v = state_.phi_ddot[a.fluid_dof];
      p -= a.coef * v * v;
    }
    for (const auto& a : ops_.solid_absorbing_points()) {
      const double* v = &state_.u_dot[3 * a.solid_node];
      const Vec3 vel{v[0], v[1], v[2]};
      const double vn = dot(vel, a.normal);
      p -= a.weight * (a.rho_vp * vn * vn + a.rho_vs * (dot(vel, vel) - vn * vn));
    }
    return p;
  }

  /// Throws a blow-up error naming the step and first offending DOF.
  void check_finite() const {
    auto scan = [&](const std::vector<double>& v, const char* name, int comps) {
      for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]) || std::abs(v[i]) > kBlowUpThreshold)
          throw Error(ErrorKind::BlowUp, "field " + std::string(name) + " diverged at step " +
                                             std::to_string(step_) + ", dof " + std::to_string(i / comps) +
                                             (comps == 3 ? " component " + std::to_string(i % 3) : ""));
    };
    scan(state_.phi, "phi", 1);
    scan(state_.phi_dot, "phi_t", 1);
    scan(state_.phi_ddot, "phi_tt", 1);
    scan(state_.u, "u", 3);
    scan(state_.u_dot, "u_t", 3);
    scan(state_.u_ddot, "u_tt", 3);
  }

  /// Records the initial state, then steps to the end of the grid. The
  /// observer, if given, is called after every recorded state.
  void run(const std::function<void(const SolverRun&)>& observer = {}) {
    if (step_ == 0) {
      initialize_accelerations();
      record();
      if (observer) observer(*this);
    }
    while (step_ < grid_.n_steps) {
      step();
      record();
      if (observer) observer(*this);
    }
    check_finite();
  }

 private:
  struct SourceGroup {
    std::vector<double> factor;  // per step, unit amplitude
  };

  // Time factors for each distinct time function (amplitude divided out) are
  // tabulated once per step.
  void build_source_tables() {
    std::vector<std::pair<SourceTimeFunction, bool>> keys;
    for (const auto& ps : sources_) {
      SourceTimeFunction unit = ps.stf;
      unit.amplitude = 1.0;
      const bool pressure = ps.kind == SourceKind::Pressure;
      std::size_t k = 0;
      while (k < keys.size() && !(keys[k].first == unit && keys[k].second == pressure)) ++k;
      if (k == keys.size()) {
        keys.push_back({unit, pressure});
        SourceGroup g;
        g.factor.resize(grid_.n_steps + 1);
        for (long n = 0; n <= grid_.n_steps; ++n) {
          const double t = grid_.time(n);
          g.factor[n] = pressure ? unit.double_integral(t) : unit(t);
        }
        groups_.push_back(std::move(g));
      }
      source_group_.push_back(int(k));
    }
  }

  double factor_at(std::size_t s, long step) const {
    const auto& ps = sources_[s];
    const double scale = ps.stf.amplitude * (ps.kind == SourceKind::Pressure ? ps.scale : 1.0);
    const auto& tab = groups_[source_group_[s]].factor;
    if (step < long(tab.size())) return scale * tab[step];
    const double t = grid_.time(step);
    SourceTimeFunction unit = ps.stf;
    unit.amplitude = 1.0;
    return scale * (ps.kind == SourceKind::Pressure ? unit.double_integral(t) : unit(t));
  }

  // Fluid first with the predicted solid displacement, then the solid with the
  // fresh fluid acceleration. Boundary damping acts on the corrected velocity
  // v_pred + dt/2 a, which keeps the node-local solve explicit.
  void solve_accelerations(long step) {
    std::fill(fluid_load_.begin(), fluid_load_.end(), 0.0);
    std::fill(solid_load_.begin(), solid_load_.end(), 0.0);
    for (std::size_t s = 0; s < sources_.size(); ++s)
      inject_point_source(sources_[s], factor_at(s, step), fluid_load_, solid_load_);

    const double dt = grid_.dt;
    if (!state_.phi.empty()) {
      ops_.apply_acoustic_stiffness(state_.phi, state_.phi_ddot);
      for (std::size_t i = 0; i < fluid_load_.size(); ++i) fluid_load_[i] -= state_.phi_ddot[i];
      ops_.add_coupling_to_fluid(state_.u, fluid_load_);
      ops_.add_stacey_fluid(state_.phi_dot, fluid_load_);
      ops_.solve_fluid_acceleration(fluid_load_, dt, state_.phi_ddot);
    }
    if (!state_.u.empty()) {
      ops_.apply_elastic_stiffness(state_.u, state_.u_ddot);
      for (std::size_t i = 0; i < solid_load_.size(); ++i) solid_load_[i] -= state_.u_ddot[i];
      ops_.add_coupling_to_solid(state_.phi_ddot, solid_load_);
      ops_.add_stacey_solid(state_.u_dot, solid_load_);
      ops_.solve_solid_acceleration(solid_load_, dt, state_.u_ddot);
    }
  }

  const WaveOperators& ops_;
  TimeGrid grid_;
  RunOptions options_;
  FieldVectors state_;
  long step_ = 0;

  std::vector<PlacedSource> sources_;
  std::vector<int> source_group_;
  std::vector<SourceGroup> groups_;
  std::vector<Receiver> receivers_;
  std::vector<PlacedChannel> channels_;
  Seismogram trace_;
  Diagnostics diag_;
  std::vector<double> fluid_load_, solid_load_;
};

// ---- SNAP1 snapshots --------------------------------------------------------------
//
// Little-endian binary: 8-byte magic "SNAP1\0\0\0", uint64 step, float64 time,
// uint64 n_fluid, uint64 n_solid, then float64 arrays phi[n_fluid],
// phi_t[n_fluid], u[3 n_solid], u_t[3 n_solid] in DOF order.

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = char((bits >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

template <typename T>
T get_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw Error(ErrorKind::Io, "SNAP1: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline constexpr char kSnapMagic[8] = {'S', 'N', 'A', 'P', '1', 0, 0, 0};

struct Snapshot {
  std::uint64_t step = 0;
  double time = 0;
  std::vector<double> phi, phi_dot, u, u_dot;
};

inline void write_snap1(std::ostream& os, std::uint64_t step, double time, const FieldVectors& s) {
  os.write(kSnapMagic, 8);
  detail::put_le<std::uint64_t>(os, step);
  detail::put_le<double>(os, time);
  detail::put_le<std::uint64_t>(os, s.phi.size());
  detail::put_le<std::uint64_t>(os, s.u.size() / 3);
  for (const auto* v : {&s.phi, &s.phi_dot, &s.u, &s.u_dot})
    for (double x : *v) detail::put_le<double>(os, x);
}

inline Snapshot read_snap1(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kSnapMagic))
    throw Error(ErrorKind::Io, "not a SNAP1 file");
  Snapshot s;
  s.step = detail::get_le<std::uint64_t>(is);
  s.time = detail::get_le<double>(is);
  const auto nf = detail::get_le<std::uint64_t>(is);
  const auto ns = detail::get_le<std::uint64_t>(is);
  auto read = [&](std::vector<double>& v, std::uint64_t n) {
    v.resize(n);
    for (auto& x : v) x = detail::get_le<double>(is);
  };
  read(s.phi, nf);
  read(s.phi_dot, nf);
  read(s.u, 3 * ns);
  read(s.u_dot, 3 * ns);
  return s;
}

// ---- whole simulations ---------------------------------------------------------------

struct SimulationInput {
  HexMesh mesh;
  MaterialTable table;
  int degree = 2;
  double courant = kDefaultCourant;
  double t_end = 0;
  std::vector<PointSource> sources;
  std::vector<Receiver> receivers;
  int threads = 1;
  RunOptions options;
};

struct SimulationResult {
  TimeGrid grid;
  Seismogram traces;
  Diagnostics diagnostics;
  std::size_t elements = 0;
  std::size_t dofs_fluid = 0, dofs_solid = 0, dofs_interface = 0;
  double wall_seconds = 0;
  FieldVectors final_state;
};

/// Runs a full simulation; `observer` sees every recorded state.
inline SimulationResult simulate(const SimulationInput& in,
                                 const std::function<void(const SolverRun&)>& observer = {}) {
  if (!(in.t_end > 0)) throw Error(ErrorKind::Config, "t_end must be positive");
  const auto start = std::chrono::steady_clock::now();
  const GllRule rule = gll_rule(in.degree);
  const WaveOperators ops(in.mesh, in.table, rule, in.threads);
  const TimeGrid grid = compute_dt(in.mesh, in.table, rule, in.courant, in.t_end);
  SolverRun run(in.mesh, in.table, ops, grid, in.sources, in.receivers, in.options);
  run.run(observer);
  SimulationResult r;
  r.grid = grid;
  r.traces = run.seismogram();
  r.diagnostics = run.diagnostics();
  r.elements = in.mesh.num_elements();
  r.dofs_fluid = ops.dofs().num_fluid;
  r.dofs_solid = ops.dofs().num_solid;
  r.dofs_interface = ops.dofs().num_interface;
  r.final_state = run.state();
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Ordered key-value manifest written as `key=value` lines.
using Manifest = std::vector<std::pair<std::string, std::string>>;

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const auto& [k, v] : m) f << k << '=' << v << '\n';
  if (!f) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::map<std::string, std::string> m;
  std::string line;
  while (std::getline(f, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) m[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return m;
}

struct OutputOptions {
  std::filesystem::path dir;
  long snapshot_every = 0;
  Manifest extra;  // appended to the manifest (e.g. echoed defaults)
};

/// Simulates and writes manifest.txt, traces.csv (if any receivers) and
/// snap_<step>.bin files. A failed write leaves a PARTIAL marker behind.
inline SimulationResult run_simulation(const SimulationInput& in, const OutputOptions& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + out.dir.string());
  const fs::path marker = out.dir / "PARTIAL";
  {
    std::ofstream m(marker);
    m << "run in progress\n";
  }
  auto fail = [&](const std::string& what) {
    std::ofstream m(marker);
    m << "aborted: " << what << '\n';
    return Error(ErrorKind::Io, what);
  };

  std::function<void(const SolverRun&)> observer;
  if (out.snapshot_every > 0) {
    observer = [&](const SolverRun& r) {
      if (r.step_count() % out.snapshot_every != 0) return;
      char name[64];
      std::snprintf(name, sizeof name, "snap_%08ld.bin", r.step_count());
      std::ofstream f(out.dir / name, std::ios::binary);
      if (f) write_snap1(f, std::uint64_t(r.step_count()), r.time(), r.state());
      if (!f) throw fail(std::string("cannot write snapshot ") + name);
    };
  }
  SimulationResult res;
  try {
    res = simulate(in, observer);
  } catch (const Error& e) {
    std::ofstream m(marker);
    m << "aborted: " << e.what() << '\n';
    throw;
  }

  if (!in.receivers.empty()) {
    std::ofstream f(out.dir / "traces.csv");
    if (f) write_csv(f, res.traces);
    if (!f) throw fail("cannot write traces.csv");
  }
  Manifest m{{"dt", format_double(res.grid.dt)},
             {"n_steps", std::to_string(res.grid.n_steps)},
             {"t_end", format_double(res.grid.t_end)},
             {"courant", format_double(res.grid.courant)},
             {"degree", std::to_string(in.degree)},
             {"elements", std::to_string(res.elements)},
             {"dofs_fluid", std::to_string(res.dofs_fluid)},
             {"dofs_solid", std::to_string(res.dofs_solid)},
             {"dofs_interface", std::to_string(res.dofs_interface)},
             {"threads", std::to_string(in.threads)},
             {"pressure_source_normalization", "p(r,t)=A*s(t-r/c)/(4*pi*r)"},
             {"wall_seconds", format_double(res.wall_seconds)}};
  m.insert(m.end(), out.extra.begin(), out.extra.end());
  try {
    write_manifest(out.dir / "manifest.txt", m);
  } catch (const Error& e) {
    throw fail(e.what());
  }
  fs::remove(marker, ec);
  return res;
}

}  // namespace specwave
