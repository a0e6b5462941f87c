#pragma once

// Source time functions, point and plane-wave sources, receivers and traces.

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <fftw3.h>

#include "specwave/assembly.hpp"
#include "specwave/error.hpp"
#include "specwave/hexmesh.hpp"
#include "specwave/material.hpp"

namespace specwave {

/// Tukey-windowed tone burst s(t) = A w(t - t0) sin(2 pi f0 (t - t0)) on
/// [t0, t0 + n_cycles / f0], zero outside (endpoints included).
struct SourceTimeFunction {
  double f0 = 40e3;
  double n_cycles = 4;
  double window_length = 1e-4;
  double tukey_alpha = 0.5;
  double amplitude = 1.0;
  double delay = 0.0;

  friend bool operator==(const SourceTimeFunction&, const SourceTimeFunction&) = default;

  double window(double x) const {
    const double L = window_length;
    if (x <= 0.0 || x >= L) return 0.0;
    const double taper = 0.5 * tukey_alpha * L;
    if (taper <= 0.0) return 1.0;
    if (x < taper) return 0.5 * (1.0 - std::cos(std::numbers::pi * x / taper));
    if (x > L - taper) return 0.5 * (1.0 - std::cos(std::numbers::pi * (L - x) / taper));
    return 1.0;
  }

  double operator()(double t) const {
    const double x = t - delay;
    if (x <= 0.0 || x >= window_length) return 0.0;
    return amplitude * window(x) * std::sin(2.0 * std::numbers::pi * f0 * x);
  }

  /// int_0^t s, computed by piecewise Gauss-Legendre quadrature.
  double integral(double t) const { return moment_integral(t, false); }

  /// int_0^t int_0^t' s = int_0^t (t - tau) s(tau) dtau.
  double double_integral(double t) const { return moment_integral(t, true); }

 private:
  double moment_integral(double t, bool weighted) const {
    const double x_end = std::min(t - delay, window_length);
    if (x_end <= 0.0) return 0.0;
    std::vector<double> breaks{0.0, 0.5 * tukey_alpha * window_length,
                               window_length - 0.5 * tukey_alpha * window_length, window_length};
    const double quarter = 0.25 / f0;
    for (double b = quarter; b < window_length; b += quarter) breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    const double x_t = t - delay;
    auto f = [&](double x) {
      const double s = amplitude * window(x) * std::sin(2.0 * std::numbers::pi * f0 * x);
      return weighted ? (x_t - x) * s : s;
    };
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      const double a = breaks[i], b = std::min(breaks[i + 1], x_end);
      if (b <= a) continue;
      sum += boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
      if (breaks[i + 1] >= x_end) break;
    }
    return sum;
  }
};

inline SourceTimeFunction tone_burst(double f0, double n_cycles, double tukey_alpha = 0.5,
                                     double amplitude = 1.0, double delay = 0.0) {
  if (!(f0 > 0)) throw Error(ErrorKind::Config, "tone burst frequency must be positive");
  if (!(n_cycles >= 1)) throw Error(ErrorKind::Config, "tone burst needs at least one cycle");
  if (!(tukey_alpha >= 0 && tukey_alpha <= 1)) throw Error(ErrorKind::Config, "tukey alpha must be in [0, 1]");
  SourceTimeFunction s;
  s.f0 = f0;
  s.n_cycles = n_cycles;
  s.window_length = n_cycles / f0;
  s.tukey_alpha = tukey_alpha;
  s.amplitude = amplitude;
  s.delay = delay;
  return s;
}

// ---- spectrum ------------------------------------------------------------------

struct Spectrum {
  double resolution = 0;             // Hz per bin
  std::vector<double> magnitude;     // bins 0 .. n/2

  double frequency(std::size_t bin) const { return resolution * double(bin); }

  std::size_t peak_bin() const {
    return std::size_t(std::max_element(magnitude.begin(), magnitude.end()) - magnitude.begin());
  }

  /// First local minima below and above the peak; nullopt if none.
  std::pair<std::optional<std::size_t>, std::optional<std::size_t>> first_nulls() const {
    const std::size_t pk = peak_bin();
    std::optional<std::size_t> lo, hi;
    for (std::size_t b = pk; b-- > 0;)
      if (b == 0 || magnitude[b] <= magnitude[b - 1]) {
        if (magnitude[b] < magnitude[b + 1]) lo = b;
        break;
      }
    for (std::size_t b = pk + 1; b < magnitude.size(); ++b)
      if (b + 1 == magnitude.size() || magnitude[b] <= magnitude[b + 1]) {
        if (magnitude[b] < magnitude[b - 1]) hi = b;
        break;
      }
    return {lo, hi};
  }
};

/// DFT magnitude (times dt) of the stf sampled at dt from t = delay over
/// `record_length` seconds (default: the burst window, i.e. no padding).
inline Spectrum stf_spectrum(const SourceTimeFunction& stf, double dt, double record_length = 0.0) {
  if (!(dt > 0)) throw Error(ErrorKind::Config, "spectrum sampling step must be positive");
  if (record_length <= 0.0) record_length = stf.window_length;
  const int n = std::max(2, int(std::lround(record_length / dt)));
  std::vector<double> in(n);
  for (int i = 0; i < n; ++i) in[i] = stf(stf.delay + i * dt);
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                        FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
  Spectrum s;
  s.resolution = 1.0 / (n * dt);
  s.magnitude.resize(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) s.magnitude[i] = std::abs(out[i]) * dt;
  return s;
}

// ---- point sources ----------------------------------------------------------------

enum class SourceKind { ForceZ, ForceVector, Pressure };

inline const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::ForceZ: return "force-z";
    case SourceKind::ForceVector: return "force";
    case SourceKind::Pressure: return "pressure";
  }
  return "pressure";
}

inline std::optional<SourceKind> source_kind_from_string(const std::string& s) {
  if (s == "force-z") return SourceKind::ForceZ;
  if (s == "force") return SourceKind::ForceVector;
  if (s == "pressure") return SourceKind::Pressure;
  return std::nullopt;
}

/// Pressure sources are calibrated so that in an unbounded homogeneous fluid the
/// recorded pressure is p(r, t) = s(t - r/c) / (4 pi r): the potential equation
/// receives -(1/rho) times the double time integral of s.
struct PointSource {
  Vec3 position;
  SourceKind kind = SourceKind::Pressure;
  Vec3 direction{0, 0, 1};
  SourceTimeFunction stf;
};

/// Lagrange weights of a point inside one element.
struct Interpolant {
  int elem = -1;
  Vec3 ref;
  std::vector<int> global;     // global node per local GLL point
  std::vector<double> weight;  // l_i(xi) l_j(eta) l_k(zeta)
};

inline Interpolant make_interpolant(const HexMesh& mesh, const WaveOperators& ops, const Vec3& x,
                                    const std::string& what) {
  auto loc = locate_point(mesh, x);
  if (!loc)
    throw Error(ErrorKind::SourcePlacement, what + " at (" + format_double(x.x) + ", " +
                                                format_double(x.y) + ", " + format_double(x.z) +
                                                ") is outside the mesh");
  const auto& B = ops.basis();
  const int n = B.points();
  Interpolant ip;
  ip.elem = loc->elem;
  ip.ref = loc->ref;
  const auto lx = B.values(loc->ref.x), ly = B.values(loc->ref.y), lz = B.values(loc->ref.z);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        ip.global.push_back(ops.dofs().global(loc->elem, i + n * (j + n * k)));
        ip.weight.push_back(lx[i] * ly[j] * lz[k]);
      }
  return ip;
}

/// A source bound to the mesh: per-DOF load weights and the time-function scale.
struct PlacedSource {
  SourceKind kind = SourceKind::Pressure;
  std::vector<int> dofs;        // fluid DOFs (pressure) or solid nodes (forces)
  std::vector<double> weights;
  Vec3 direction;
  double scale = 1.0;           // -1/rho for pressure sources, 1 for forces
  SourceTimeFunction stf;
};

inline PlacedSource place_source(const PointSource& src, const HexMesh& mesh, const MaterialTable& table,
                                 const WaveOperators& ops) {
  const auto ip = make_interpolant(mesh, ops, src.position, "source");
  const auto& props = table.at(mesh.elements[ip.elem].material);
  const bool fluid = domain_kind(props) == DomainKind::Acoustic;
  PlacedSource ps;
  ps.kind = src.kind;
  ps.stf = src.stf;
  if (src.kind == SourceKind::Pressure) {
    if (!fluid)
      throw Error(ErrorKind::DomainMismatch, "pressure source in elastic element " + std::to_string(ip.elem));
    ps.scale = -1.0 / props.rho;
  } else {
    if (fluid)
      throw Error(ErrorKind::DomainMismatch, "force source in acoustic element " + std::to_string(ip.elem));
    ps.direction = src.kind == SourceKind::ForceZ ? Vec3{0, 0, 1} : src.direction;
    const double len = norm(ps.direction);
    if (!(len > 0)) throw Error(ErrorKind::Config, "force source direction must be non-zero");
    ps.direction *= 1.0 / len;
  }
  for (std::size_t q = 0; q < ip.global.size(); ++q) {
    const int g = ip.global[q];
    ps.dofs.push_back(fluid ? ops.dofs().fluid_index[g] : ops.dofs().solid_index[g]);
    ps.weights.push_back(ip.weight[q]);
  }
  return ps;
}

/// Time factor multiplying the spatial weights at time t.
inline double source_time_factor(const PlacedSource& ps, double t) {
  return ps.kind == SourceKind::Pressure ? ps.scale * ps.stf.double_integral(t) : ps.stf(t);
}

/// Adds the load of one source given its time factor.
inline void inject_point_source(const PlacedSource& ps, double factor, std::span<double> fluid_load,
                                std::span<double> solid_load) {
  if (factor == 0.0) return;
  if (ps.kind == SourceKind::Pressure) {
    for (std::size_t q = 0; q < ps.dofs.size(); ++q) fluid_load[ps.dofs[q]] += factor * ps.weights[q];
  } else {
    for (std::size_t q = 0; q < ps.dofs.size(); ++q) {
      const double w = factor * ps.weights[q];
      double* f = &solid_load[3 * ps.dofs[q]];
      f[0] += w * ps.direction.x;
      f[1] += w * ps.direction.y;
      f[2] += w * ps.direction.z;
    }
  }
}

// ---- plane-wave arrays --------------------------------------------------------------

struct PlaneWaveConfig {
  int axis = 2;                 // plane normal axis (0 x, 1 y, 2 z)
  double plane = 0.0;           // plane coordinate along axis (m)
  double spacing = 0.0;         // grid spacing of point sources (m)
  double direction = -1.0;      // nominal propagation sign along axis
  std::optional<double> r_flat; // default: 35% of transverse half-width
  std::optional<double> sigma;  // default: 15% of transverse half-width
  SourceTimeFunction stf;
};

struct PlaneWaveArray {
  std::vector<PointSource> sources;
  std::vector<double> amplitudes;  // taper factor per source
  Vec3 center;
  double r_flat = 0, sigma = 0;
};

/// a(d) = 1 for d <= r_flat, exp(-((d - r_flat) / sigma)^2) beyond.
inline double plane_wave_taper(double d, double r_flat, double sigma) {
  if (d <= r_flat) return 1.0;
  const double x = (d - r_flat) / sigma;
  return std::exp(-x * x);
}

/// Slowest acoustic velocity in the table: water if present, else the minimum fluid vp.
inline double reference_fluid_velocity(const MaterialTable& table) {
  if (auto id = table.find("water")) return table.at(*id).vp;
  double v = 0;
  for (int id : table.ids())
    if (domain_kind(table.at(id)) == DomainKind::Acoustic && (v == 0 || table.at(id).vp < v)) v = table.at(id).vp;
  if (v == 0) throw Error(ErrorKind::Config, "plane-wave array needs an acoustic material");
  return v;
}

/// Pressure point sources on a regular grid covering the mesh cross-section at
/// the plane, Gaussian-tapered towards the transverse boundaries.
inline PlaneWaveArray build_plane_wave_array(const PlaneWaveConfig& cfg, const HexMesh& mesh,
                                             const MaterialTable& table) {
  if (cfg.axis < 0 || cfg.axis > 2) throw Error(ErrorKind::Config, "plane-wave axis must be 0, 1 or 2");
  const double lambda_min = reference_fluid_velocity(table) / cfg.stf.f0;
  if (!(cfg.spacing > 0) || cfg.spacing > lambda_min / 4.0 * (1 + 1e-12))
    throw Error(ErrorKind::Config, "plane-wave spacing must be in (0, " + format_double(lambda_min / 4.0) +
                                       "] m (quarter wavelength)");
  Vec3 lo = mesh.nodes.front(), hi = mesh.nodes.front();
  for (const auto& p : mesh.nodes)
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  const int t1 = (cfg.axis + 1) % 3, t2 = (cfg.axis + 2) % 3;
  PlaneWaveArray arr;
  arr.center = 0.5 * (lo + hi);
  arr.center[cfg.axis] = cfg.plane;
  const double half = 0.5 * std::min(hi[t1] - lo[t1], hi[t2] - lo[t2]);
  arr.r_flat = cfg.r_flat.value_or(0.35 * half);
  arr.sigma = cfg.sigma.value_or(0.15 * half);
  if (!(arr.sigma > 0)) throw Error(ErrorKind::Config, "plane-wave taper width must be positive");

  const int n1 = int(std::floor((hi[t1] - lo[t1]) / cfg.spacing + 1e-9)) + 1;
  const int n2 = int(std::floor((hi[t2] - lo[t2]) / cfg.spacing + 1e-9)) + 1;
  const double o1 = arr.center[t1] - 0.5 * (n1 - 1) * cfg.spacing;
  const double o2 = arr.center[t2] - 0.5 * (n2 - 1) * cfg.spacing;
  for (int b = 0; b < n2; ++b)
    for (int a = 0; a < n1; ++a) {
      Vec3 x;
      x[cfg.axis] = cfg.plane;
      x[t1] = o1 + a * cfg.spacing;
      x[t2] = o2 + b * cfg.spacing;
      auto loc = locate_point(mesh, x);
      if (!loc) throw Error(ErrorKind::SourcePlacement, "plane-wave array point outside the mesh");
      if (domain_kind(table.at(mesh.elements[loc->elem].material)) != DomainKind::Acoustic)
        throw Error(ErrorKind::SourcePlacement, "plane-wave array point in elastic element " +
                                                    std::to_string(loc->elem));
      const double d = std::hypot(x[t1] - arr.center[t1], x[t2] - arr.center[t2]);
      const double amp = plane_wave_taper(d, arr.r_flat, arr.sigma);
      PointSource s;
      s.position = x;
      s.kind = SourceKind::Pressure;
      s.stf = cfg.stf;
      s.stf.amplitude *= amp;
      arr.sources.push_back(s);
      arr.amplitudes.push_back(amp);
    }
  return arr;
}

// ---- receivers ----------------------------------------------------------------------

enum class Channel { Pressure, VelocityX, VelocityY, VelocityZ };

inline const char* to_string(Channel c) {
  switch (c) {
    case Channel::Pressure: return "p";
    case Channel::VelocityX: return "vx";
    case Channel::VelocityY: return "vy";
    case Channel::VelocityZ: return "vz";
  }
  return "p";
}

inline std::optional<Channel> channel_from_string(const std::string& s) {
  if (s == "p" || s == "pressure") return Channel::Pressure;
  if (s == "vx") return Channel::VelocityX;
  if (s == "vy") return Channel::VelocityY;
  if (s == "vz") return Channel::VelocityZ;
  return std::nullopt;
}

struct Receiver {
  std::string name;
  Vec3 position;
  std::vector<Channel> channels;
};

/// Per channel: sample = sum_q weight[q] * field[dof[q]] where field is
/// phi_tt (pressure, weights negated), phi_t (fluid velocity) or u_t component.
struct PlacedChannel {
  Channel channel;
  bool fluid = true;
  int component = 0;  // for solid velocity
  std::vector<int> dofs;
  std::vector<double> weights;
};

inline std::vector<PlacedChannel> place_receiver(const Receiver& rec, const HexMesh& mesh,
                                                 const MaterialTable& table, const WaveOperators& ops) {
  const auto ip = make_interpolant(mesh, ops, rec.position, "receiver '" + rec.name + "'");
  const auto& props = table.at(mesh.elements[ip.elem].material);
  const bool fluid = domain_kind(props) == DomainKind::Acoustic;
  const auto& dm = ops.dofs();
  std::vector<PlacedChannel> out;
  for (Channel ch : rec.channels) {
    PlacedChannel pc;
    pc.channel = ch;
    pc.fluid = fluid;
    if (ch == Channel::Pressure) {
      if (!fluid)
        throw Error(ErrorKind::ChannelMismatch,
                    "pressure requested for receiver '" + rec.name + "' in an elastic element");
      for (std::size_t q = 0; q < ip.global.size(); ++q) {
        pc.dofs.push_back(dm.fluid_index[ip.global[q]]);
        pc.weights.push_back(-ip.weight[q]);
      }
    } else {
      const int comp = int(ch) - int(Channel::VelocityX);
      pc.component = comp;
      if (fluid) {
        // v = rho^-1 grad(phi_t): differentiate the interpolant at the receiver.
        const auto& B = ops.basis();
        const int n = B.points();
        const auto c = mesh.corners(ip.elem);
        const Mat3 inv = map_jacobian(c, ip.ref).inverse();
        for (int k = 0; k < n; ++k)
          for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
              const double dref[3] = {B.derivative(i, ip.ref.x) * B.value(j, ip.ref.y) * B.value(k, ip.ref.z),
                                      B.value(i, ip.ref.x) * B.derivative(j, ip.ref.y) * B.value(k, ip.ref.z),
                                      B.value(i, ip.ref.x) * B.value(j, ip.ref.y) * B.derivative(k, ip.ref.z)};
              const double g = dref[0] * inv(0, comp) + dref[1] * inv(1, comp) + dref[2] * inv(2, comp);
              pc.dofs.push_back(dm.fluid_index[dm.global(ip.elem, i + n * (j + n * k))]);
              pc.weights.push_back(g / props.rho);
            }
      } else {
        for (std::size_t q = 0; q < ip.global.size(); ++q) {
          pc.dofs.push_back(dm.solid_index[ip.global[q]]);
          pc.weights.push_back(ip.weight[q]);
        }
      }
    }
    out.push_back(std::move(pc));
  }
  return out;
}

inline double sample_channel(const PlacedChannel& pc, const FieldVectors& s) {
  double v = 0;
  if (pc.channel == Channel::Pressure) {
    for (std::size_t q = 0; q < pc.dofs.size(); ++q) v += pc.weights[q] * s.phi_ddot[pc.dofs[q]];
  } else if (pc.fluid) {
    for (std::size_t q = 0; q < pc.dofs.size(); ++q) v += pc.weights[q] * s.phi_dot[pc.dofs[q]];
  } else {
    for (std::size_t q = 0; q < pc.dofs.size(); ++q) v += pc.weights[q] * s.u_dot[3 * pc.dofs[q] + pc.component];
  }
  return v;
}

struct Seismogram {
  std::vector<double> time;
  std::vector<std::string> names;              // "<receiver>_<quantity>"
  std::vector<std::vector<double>> channels;

  const std::vector<double>& channel(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return channels[i];
    throw Error(ErrorKind::Config, "no channel named " + name);
  }
};

inline void write_csv(std::ostream& os, const Seismogram& s) {
  os << "t_seconds";
  for (const auto& n : s.names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < s.time.size(); ++i) {
    os << format_double(s.time[i]);
    for (const auto& c : s.channels) os << ',' << format_double(c[i]);
    os << '\n';
  }
}

}  // namespace specwave
