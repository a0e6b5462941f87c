#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "specwave/validation.hpp"

using namespace specwave;

TEST(ConfigHash, Fnv1aReferenceValues) {
  EXPECT_EQ(config_hash(""), "cbf29ce484222325");
  EXPECT_EQ(config_hash("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(config_hash("foobar"), "85944171f73967e8");
}

TEST(Reciprocity, MetricIsSymmetric) {
  const std::vector<double> t{0, 1, 2, 3};
  const std::vector<double> a{0.0, 1.0, -2.0, 0.5};
  const std::vector<double> b{0.0, 1.001, -2.0, 0.5};
  const auto r1 = reciprocity_from_traces(t, a, b);
  const auto r2 = reciprocity_from_traces(t, b, a);
  EXPECT_EQ(r1.ratio_db, r2.ratio_db);
  EXPECT_NEAR(r1.ratio_db, 20 * std::log10(0.001 / 2.0), 1e-9);
  EXPECT_FALSE(r1.zero_signal);
}

TEST(Reciprocity, ZeroSignalFlagged) {
  const std::vector<double> t{0, 1, 2};
  const std::vector<double> z(3, 0.0);
  const auto r = reciprocity_from_traces(t, z, z);
  EXPECT_TRUE(r.zero_signal);
  const auto rep = reciprocity_report(r, -40, "0");
  bool pass_false = false, undefined = false;
  for (const auto& [k, v] : rep) {
    if (k == "pass") pass_false = v == "false";
    if (k == "ratio_db") undefined = v == "undefined";
  }
  EXPECT_TRUE(pass_false);
  EXPECT_TRUE(undefined);
}

TEST(Reciprocity, ElasticForceSwap) {
  ReciprocitySetup s;
  s.table = builtin_dolphin_table();
  const double h = 2e-3;
  s.mesh = voxels_to_hexmesh(uniform_volume(6, 6, 8, {h, h, h}, 4));
  s.kind = SourceKind::ForceVector;
  s.direction = {0.3, -0.2, 1.0};
  s.r1 = {2.3e-3, 3.7e-3, 4.1e-3};
  s.r2 = {8.9e-3, 7.2e-3, 11.6e-3};
  s.stf = tone_burst(200e3, 2);
  s.t_end = 8e-6;
  const auto r = reciprocity_test(s);
  EXPECT_FALSE(r.zero_signal);
  EXPECT_LE(r.ratio_db, -40.0);
}

TEST(Reciprocity, CoupledPressureSwap) {
  ReciprocitySetup s;
  s.table = builtin_dolphin_table();
  const double h = 2e-3;
  auto v = uniform_volume(6, 6, 10, {h, h, h}, 5);
  for (int k = 4; k < 6; ++k)
    for (int j = 0; j < 6; ++j)
      for (int i = 0; i < 6; ++i) v.at(i, j, k) = 4;
  s.mesh = voxels_to_hexmesh(v);
  s.r1 = {2.3e-3, 3.7e-3, 3.1e-3};
  s.r2 = {8.9e-3, 7.2e-3, 15.6e-3};
  s.stf = tone_burst(200e3, 2);
  s.t_end = 1.6e-5;
  const auto r = reciprocity_test(s);
  EXPECT_FALSE(r.zero_signal);
  EXPECT_LE(r.ratio_db, -40.0);
}

TEST(Reciprocity, MixedDomainsRejected) {
  ReciprocitySetup s;
  s.table = builtin_dolphin_table();
  auto v = uniform_volume(2, 1, 1, {1e-3, 1e-3, 1e-3}, 5);
  v.at(1, 0, 0) = 4;
  s.mesh = voxels_to_hexmesh(v);
  s.r1 = {0.5e-3, 0.5e-3, 0.5e-3};
  s.r2 = {1.5e-3, 0.5e-3, 0.5e-3};
  s.t_end = 1e-6;
  s.stf = tone_burst(40e3, 4);
  EXPECT_THROW(reciprocity_test(s), Error);
}

TEST(Columns, PlaneSourceWeightsCoverCrossSection) {
  const auto mesh = column_mesh(2e-3, 3, {{4, 5}, {5, 6}});
  EXPECT_EQ(mesh.num_elements(), 3u * 3 * 11);
  EXPECT_EQ(mesh.face_set("absorbing").size(), 18u);
  EXPECT_EQ(mesh.face_set("symmetry").size(), 4u * 3 * 11);
  const auto rule = gll_rule(3);
  const auto src = plane_source(mesh, rule, 16e-3, SourceKind::Pressure, tone_burst(40e3, 4));
  EXPECT_EQ(src.size(), 10u * 10u);
  double total = 0;
  for (const auto& s : src) {
    EXPECT_NEAR(s.position.z, 16e-3, 1e-15);
    total += s.stf.amplitude;
  }
  EXPECT_NEAR(total, 36e-6, 1e-18);
  EXPECT_THROW(plane_source(mesh, rule, 15e-3, SourceKind::Pressure, tone_burst(40e3, 4)), Error);
}

TEST(Columns, PulseWindows) {
  const auto stf = tone_burst(40e3, 4);
  const auto w = pulse_window(1e-4, stf, 3);
  EXPECT_NEAR(w.start, 1e-4 - 7.5e-5, 1e-18);
  EXPECT_NEAR(w.end, 2e-4 + 7.5e-5, 1e-18);
  EXPECT_TRUE(w.overlaps({2.5e-4, 3e-4}));
  EXPECT_FALSE(w.overlaps({2.8e-4, 3e-4}));
}

TEST(Interface, WaterToSoftTissue) {
  InterfaceSetup s;
  s.table = builtin_dolphin_table();
  s.second_material = 1;
  s.run.degree = 4;
  const auto r = interface_rt_test(s);
  const double z1 = 1028.0 * 1480, z2 = 1013.0 * 1536;
  EXPECT_NEAR(r.r_analytic, (z2 - z1) / (z2 + z1), 1e-15);
  EXPECT_NEAR(r.r_analytic, 0.0112, 1e-4);
  EXPECT_NEAR(r.r_measured, r.r_analytic, 0.003);
  EXPECT_NEAR(r.t_measured, r.t_analytic, 0.002);
  EXPECT_LE(r.max_boundary_flux, 0.0);
}

TEST(Interface, RejectsBadGeometry) {
  InterfaceSetup s;
  s.table = builtin_dolphin_table();
  s.receiver_cells = s.fluid_cells;
  EXPECT_THROW(interface_rt_test(s), Error);
  s = {};
  s.table = builtin_dolphin_table();
  s.fluid_material = 4;
  EXPECT_THROW(interface_rt_test(s), Error);
}

TEST(Absorbing, WaterColumn) {
  AbsorbingSetup s;
  s.table = builtin_dolphin_table();
  s.material = 5;
  s.cells = 160;
  s.receiver_cells = 80;
  const auto r = absorbing_column_test(s);
  EXPECT_GT(r.incident_peak, 0.0);
  EXPECT_LE(r.ratio, 0.02);
  EXPECT_LE(r.max_boundary_flux, 0.0);
}

TEST(Greens, RejectsCloseBoundaries) {
  GreensSetup s;
  s.table = builtin_dolphin_table();
  const double h = 5e-3;
  s.mesh = voxels_to_hexmesh(uniform_volume(20, 10, 10, {h, h, h}, 5));
  s.run.degree = 4;
  s.source = {0.025, 0.025, 0.025};
  s.receiver = {0.075, 0.025, 0.025};
  s.stf = tone_burst(40e3, 4);
  try {
    greens_oracle_test(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("image path"), std::string::npos);
  }
}

TEST(Greens, RejectsCoarseMesh) {
  GreensSetup s;
  s.table = builtin_dolphin_table();
  const double h = 20e-3;
  s.mesh = voxels_to_hexmesh(uniform_volume(10, 10, 10, {h, h, h}, 5));
  s.run.degree = 2;
  s.source = {0.05, 0.1, 0.1};
  s.receiver = {0.15, 0.1, 0.1};
  s.stf = tone_burst(40e3, 4);
  EXPECT_NEAR(points_per_wavelength(s.mesh, 1480, 40e3, 2), 37e-3 / 20e-3 * 2, 1e-12);
  EXPECT_THROW(greens_oracle_test(s), Error);
}

TEST(Convergence, SmallStudy) {
  ConvergenceSetup s;
  s.table = builtin_dolphin_table();
  s.degrees = {2, 3, 4};
  const auto c = convergence_study(s);
  ASSERT_EQ(c.rows.size(), 3u);
  EXPECT_GT(c.rows[0].error, c.rows[1].error);
  EXPECT_GT(c.rows[1].error, c.rows[2].error);
  for (const auto& row : c.rows) {
    EXPECT_FALSE(row.time_contaminated);
    // Central differences only ever lengthen the period.
    EXPECT_GE(row.omega_raw, row.omega_semi_discrete);
  }
  const auto rep = convergence_report(c, 3.0, "x");
  EXPECT_EQ(rep.back().first, "pass");
  EXPECT_EQ(rep.back().second, "true");
}
