#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "specwave/solver.hpp"

using namespace specwave;

namespace {

// Undamped oscillator x'' = -w^2 x integrated with the shared Newmark kernels.
double oscillator_error(double dt_fraction) {
  const double w = 2 * std::numbers::pi;
  const double dt = dt_fraction;
  std::vector<double> x{1.0}, v{0.0}, a{-w * w};
  const long n = std::lround(1.0 / dt);
  for (long i = 0; i < n; ++i) {
    newmark_predict(x, v, a, dt);
    a[0] = -w * w * x[0];
    newmark_correct(v, a, dt);
  }
  return std::abs(x[0] - std::cos(w * n * dt));
}

HexMesh water_cube(int n, double h, const BoundaryPolicy& p = kAllFree) {
  return voxels_to_hexmesh(uniform_volume(n, n, n, {h, h, h}, 5), p);
}

}  // namespace

TEST(Newmark, OscillatorAccuracyAndOrder) {
  const double e1 = oscillator_error(1e-3);
  const double e2 = oscillator_error(5e-4);
  EXPECT_LE(e1, 1e-4);
  EXPECT_GT(e1 / e2, 3.5);
}

TEST(TimeGrid, WaterCubeExample) {
  const auto table = builtin_dolphin_table();
  const auto mesh = water_cube(4, 2.5e-3);
  const auto g = compute_dt(mesh, table, gll_rule(2), 0.3, 0.7e-3);
  EXPECT_NEAR(g.dt, 0.3 * 1.25e-3 / 1480, 1e-20);
  EXPECT_NEAR(g.dt, 2.534e-7, 1e-10);
  EXPECT_EQ(g.n_steps, 2763);
  EXPECT_THROW(compute_dt(mesh, table, gll_rule(2), 0.0), Error);
}

TEST(TimeGrid, MostRestrictiveCellControlsStep) {
  const auto table = builtin_dolphin_table();
  auto v = uniform_volume(2, 1, 1, {2e-3, 2e-3, 2e-3}, 5);
  v.at(1, 0, 0) = 4;
  auto mesh = voxels_to_hexmesh(v);
  // Bone is faster, so the bone cell sets dt; thinning the water cell hands control to it.
  EXPECT_NEAR(stable_dt(mesh, table, gll_rule(2), 0.3), 0.3 * 1e-3 / 3400, 1e-20);
  for (auto& p : mesh.nodes)
    if (p.x < 0.1e-3) p.x = 1.5e-3;
  EXPECT_NEAR(stable_dt(mesh, table, gll_rule(2), 0.3), 0.3 * 0.25e-3 / 1480, 1e-20);
}

TEST(Solver, ZeroInputStaysZero) {
  SimulationInput in;
  in.table = builtin_dolphin_table();
  auto v = uniform_volume(3, 3, 3, {1e-3, 1e-3, 1e-3}, 5);
  v.at(1, 1, 1) = 4;
  in.mesh = voxels_to_hexmesh(v);
  in.t_end = 1e-5;
  in.receivers = {{"a", {0.5e-3, 0.5e-3, 0.5e-3}, {Channel::Pressure, Channel::VelocityZ}},
                  {"b", {1.5e-3, 1.5e-3, 1.5e-3}, {Channel::VelocityX}}};
  const auto res = simulate(in);
  EXPECT_EQ(res.traces.time.size(), std::size_t(res.grid.n_steps + 1));
  for (const auto& c : res.traces.channels)
    for (double x : c) EXPECT_EQ(x, 0.0);
  for (double x : res.final_state.u) EXPECT_EQ(x, 0.0);
}

TEST(Solver, StandingModeFrequency) {
  const auto table = builtin_dolphin_table();
  const double L = 0.01;
  const auto mesh = water_cube(2, L / 2);
  const auto rule = gll_rule(4);
  const WaveOperators ops(mesh, table, rule);
  auto grid = compute_dt(mesh, table, rule, 0.3);
  const double period = 2 * L / 1480.0;
  grid.n_steps = long(std::ceil(3 * period / grid.dt));
  SolverRun run(mesh, table, ops, grid, {}, {});
  const auto& dm = ops.dofs();
  int probe = -1;
  for (std::size_t g = 0; g < dm.num_global(); ++g) {
    run.state().phi[dm.fluid_index[g]] = std::cos(std::numbers::pi * dm.coords[g].x / L);
    if (dm.coords[g] == Vec3{0, 0, 0}) probe = dm.fluid_index[g];
  }
  ASSERT_GE(probe, 0);
  run.initialize_accelerations();
  std::vector<double> crossings;
  double prev = run.state().phi[probe];
  for (long n = 1; n <= grid.n_steps; ++n) {
    run.step();
    const double cur = run.state().phi[probe];
    if ((prev > 0) != (cur > 0)) crossings.push_back((n - 1 + prev / (prev - cur)) * grid.dt);
    prev = cur;
  }
  ASSERT_GE(crossings.size(), 4u);
  const double measured = 2 * (crossings.back() - crossings.front()) / double(crossings.size() - 1);
  EXPECT_NEAR(measured, period, 0.005 * period);
}

TEST(Solver, ClosedBoxConservesEnergy) {
  const auto table = builtin_dolphin_table();
  auto v = uniform_volume(3, 3, 3, {2e-3, 2e-3, 2e-3}, 5);
  v.at(1, 1, 1) = 4;
  const auto mesh = voxels_to_hexmesh(v, kAllFree);
  const auto rule = gll_rule(3);
  const WaveOperators ops(mesh, table, rule);
  auto grid = compute_dt(mesh, table, rule, 0.3, 0);
  grid.n_steps = 1500;
  PointSource s;
  s.position = {1e-3, 1.1e-3, 0.9e-3};
  s.stf = tone_burst(150e3, 2);
  RunOptions opt;
  opt.energy_every = 10;
  SolverRun run(mesh, table, ops, grid, {s}, {}, opt);
  run.run();
  const auto& d = run.diagnostics();
  const double source_end = s.stf.window_length;
  double lo = 1e300, hi = 0;
  for (std::size_t i = 0; i < d.energy.size(); ++i)
    if (grid.time(d.energy_steps[i]) > source_end + 2 * grid.dt) {
      lo = std::min(lo, d.energy[i]);
      hi = std::max(hi, d.energy[i]);
    }
  ASSERT_GT(hi, 0.0);
  EXPECT_LE((hi - lo) / hi, 1e-3);
  for (double f : d.boundary_flux) EXPECT_EQ(f, 0.0);
}

TEST(Solver, AbsorbingBoundaryDrainsEnergy) {
  const auto table = builtin_dolphin_table();
  auto v = uniform_volume(4, 4, 4, {2e-3, 2e-3, 2e-3}, 5);
  v.at(2, 2, 2) = v.at(1, 2, 2) = 4;
  const auto mesh = voxels_to_hexmesh(v);
  const auto rule = gll_rule(2);
  const WaveOperators ops(mesh, table, rule);
  auto grid = compute_dt(mesh, table, rule, 0.3, 0);
  grid.n_steps = 3000;
  PointSource s;
  s.position = {3.1e-3, 4.2e-3, 2.9e-3};
  s.stf = tone_burst(200e3, 2);
  RunOptions opt;
  opt.energy_every = 100;
  SolverRun run(mesh, table, ops, grid, {s}, {}, opt);
  run.run();
  const auto& d = run.diagnostics();
  for (double f : d.boundary_flux) EXPECT_LE(f, 0.0);
  double peak = 0;
  for (double e : d.energy) peak = std::max(peak, e);
  EXPECT_LT(d.energy.back(), 0.05 * peak);
}

TEST(Solver, BlowUpDetected) {
  const auto table = builtin_dolphin_table();
  const auto mesh = water_cube(3, 2e-3);
  const auto rule = gll_rule(2);
  const WaveOperators ops(mesh, table, rule);
  auto grid = compute_dt(mesh, table, rule, 1.5);
  grid.n_steps = 2000;
  SolverRun run(mesh, table, ops, grid, {}, {});
  for (std::size_t i = 0; i < run.state().phi.size(); ++i) run.state().phi[i] = std::sin(0.37 * double(i));
  try {
    run.run();
    FAIL() << "no blow-up";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BlowUp);
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos);
    EXPECT_LE(run.step_count(), 2000);
  }
}

TEST(Snap1, RoundTripIsBitExact) {
  FieldVectors s;
  s.phi = {1.0, -2.5e-300, std::numbers::pi};
  s.phi_dot = {0.1, 0.2, 0.3};
  s.u = {1, 2, 3, 4, 5, 6};
  s.u_dot = {-1, -2, -3, -4, -5, 1e300};
  std::stringstream ss;
  write_snap1(ss, 42, 1.25e-5, s);
  EXPECT_EQ(ss.str().size(), 8u + 32u + 8u * (3 + 3 + 6 + 6));
  EXPECT_EQ(ss.str().substr(0, 5), "SNAP1");
  const auto back = read_snap1(ss);
  EXPECT_EQ(back.step, 42u);
  EXPECT_EQ(back.time, 1.25e-5);
  EXPECT_EQ(back.phi, s.phi);
  EXPECT_EQ(back.phi_dot, s.phi_dot);
  EXPECT_EQ(back.u, s.u);
  EXPECT_EQ(back.u_dot, s.u_dot);
  std::istringstream bad("SNAP2...........");
  EXPECT_THROW(read_snap1(bad), Error);
}

TEST(Snap1, LittleEndianLayout) {
  FieldVectors s;
  s.phi = {1.0};
  s.phi_dot = {0.0};
  std::stringstream ss;
  write_snap1(ss, 1, 0.0, s);
  const std::string b = ss.str();
  EXPECT_EQ(static_cast<unsigned char>(b[8]), 1u);  // step, low byte first
  // 1.0 = 0x3FF0000000000000
  const std::size_t phi0 = 8 + 32;
  EXPECT_EQ(static_cast<unsigned char>(b[phi0 + 7]), 0x3Fu);
  EXPECT_EQ(static_cast<unsigned char>(b[phi0 + 6]), 0xF0u);
}

TEST(RunSimulation, WritesManifestTracesAndSnapshots) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "specwave_run_test";
  fs::remove_all(dir);
  SimulationInput in;
  in.table = builtin_dolphin_table();
  in.mesh = water_cube(3, 2e-3, kAllAbsorbing);
  in.t_end = 5e-6;
  PointSource s;
  s.position = {3e-3, 3e-3, 3e-3};
  s.stf = tone_burst(200e3, 1);
  in.sources = {s};
  in.receivers = {{"r1", {1e-3, 2e-3, 3e-3}, {Channel::Pressure, Channel::VelocityY}}};
  OutputOptions out;
  out.dir = dir;
  out.snapshot_every = 10;
  const auto res = run_simulation(in, out);
  EXPECT_FALSE(fs::exists(dir / "PARTIAL"));
  const auto m = read_manifest(dir / "manifest.txt");
  for (const char* k : {"dt", "n_steps", "dofs_fluid", "dofs_solid", "dofs_interface", "wall_seconds"})
    EXPECT_TRUE(m.count(k)) << k;
  EXPECT_EQ(std::stod(m.at("dt")), res.grid.dt);
  EXPECT_EQ(std::stol(m.at("n_steps")), res.grid.n_steps);
  EXPECT_EQ(m.at("dofs_solid"), "0");

  std::ifstream csv(dir / "traces.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t_seconds,r1_p,r1_vy");
  long rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  EXPECT_EQ(rows, res.grid.n_steps + 1);

  long snaps = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().filename().string().rfind("snap_", 0) == 0) ++snaps;
  EXPECT_EQ(snaps, res.grid.n_steps / 10 + 1);
  std::ifstream last(dir / "snap_00000010.bin", std::ios::binary);
  const auto snap = read_snap1(last);
  EXPECT_EQ(snap.step, 10u);
  EXPECT_EQ(snap.phi.size(), res.dofs_fluid);
  fs::remove_all(dir);
}
