#include <sstream>

#include <gtest/gtest.h>

#include "specwave/hexmesh.hpp"
#include "specwave/mesh_io.hpp"

using namespace specwave;

namespace {

HexMesh unit_cube() {
  HexMesh m;
  for (const auto& s : kCornerSigns) m.nodes.push_back({0.5 * (s[0] + 1), 0.5 * (s[1] + 1), 0.5 * (s[2] + 1)});
  HexElement e;
  for (int a = 0; a < 8; ++a) e.nodes[a] = a;
  e.material = 1;
  m.elements.push_back(e);
  return m;
}

}  // namespace

TEST(HexMesh, VoxelMeshCounts) {
  const auto m = voxels_to_hexmesh(uniform_volume(10, 10, 20, {2.5e-3, 2.5e-3, 2.5e-3}, 5));
  EXPECT_EQ(m.num_elements(), 2000u);
  EXPECT_EQ(m.nodes.size(), 11u * 11 * 21);
  EXPECT_EQ(m.face_set("absorbing").size(), 2u * (100 + 200 + 200));
  validate_mesh(m);
}

TEST(HexMesh, VoxelMeshScaledJacobianIsExactlyOne) {
  const auto m = voxels_to_hexmesh(uniform_volume(3, 4, 5, {1e-3, 2e-3, 0.5e-3}, 1));
  for (std::size_t e = 0; e < m.num_elements(); ++e) EXPECT_EQ(scaled_jacobian(m, int(e)).scaled_jacobian, 1.0);
  const auto q = quality_report(m);
  EXPECT_EQ(q.min, 1.0);
  EXPECT_EQ(q.max, 1.0);
  EXPECT_EQ(q.average, 1.0);
  EXPECT_EQ(q.std_dev, 0.0);
  EXPECT_TRUE(q.warnings.empty());
}

TEST(HexMesh, CollapsedElementIsUnusable) {
  auto m = unit_cube();
  m.nodes[6] = m.nodes[0];  // fold the far corner onto the origin corner
  try {
    quality_report(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MeshUnusable);
    EXPECT_NE(std::string(e.what()).find("0"), std::string::npos);
  }
  auto flat = unit_cube();
  for (int a = 4; a < 8; ++a) flat.nodes[a].z = 0.0;
  EXPECT_THROW(quality_report(flat), Error);
}

TEST(HexMesh, SkewedElementWarns) {
  auto m = unit_cube();
  for (int a = 4; a < 8; ++a) m.nodes[a].x += 5.0;  // strong shear
  const auto sj = scaled_jacobian(m, 0).scaled_jacobian;
  EXPECT_GT(sj, 0.0);
  EXPECT_LT(sj, 0.2);
  const auto q = quality_report(m);
  ASSERT_EQ(q.warnings.size(), 1u);
  EXPECT_EQ(q.warnings[0], 0);
}

TEST(HexMesh, ShearedScaledJacobianMatchesCosine) {
  auto m = unit_cube();
  for (int a = 4; a < 8; ++a) m.nodes[a].x += 1.0;  // 45 degree shear
  EXPECT_NEAR(scaled_jacobian(m, 0).scaled_jacobian, std::sqrt(0.5), 1e-15);
}

TEST(HexMesh, EmptyVolumeRejected) {
  try {
    voxels_to_hexmesh(uniform_volume(0, 3, 3, {1, 1, 1}, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyVolume);
  }
}

TEST(HexMesh, GeometryOfScaledBox) {
  const auto m = voxels_to_hexmesh(uniform_volume(1, 1, 1, {2.0, 3.0, 4.0}, 1));
  const auto rule = gll_rule(3);
  const auto g = element_geometry(m, 0, rule);
  double vol = 0;
  const int n = rule.points();
  for (int p = 0; p < n * n * n; ++p)
    vol += rule.weights[p % n] * rule.weights[(p / n) % n] * rule.weights[p / (n * n)] * g.det[p];
  EXPECT_NEAR(vol, 24.0, 1e-12);
  const double areas[6] = {12, 12, 8, 8, 6, 6};
  for (int f = 0; f < 6; ++f) {
    double a = 0;
    for (std::size_t q = 0; q < g.faces[f].points.size(); ++q) {
      a += g.faces[f].weights[q] * g.faces[f].surface_jacobian[q];
      const Vec3 nrm = g.faces[f].normals[q];
      EXPECT_NEAR(nrm[f / 2], f % 2 ? 1.0 : -1.0, 1e-15);
    }
    EXPECT_NEAR(a, areas[f], 1e-12);
  }
}

TEST(HexMesh, MinGllSpacing) {
  const auto m = voxels_to_hexmesh(uniform_volume(2, 2, 2, {2.5e-3, 2.5e-3, 2.5e-3}, 1));
  EXPECT_NEAR(min_gll_spacing(m, gll_rule(2)), 1.25e-3, 1e-15);
  const double x1 = std::sqrt(3.0 / 7.0);
  EXPECT_NEAR(min_gll_spacing(m, gll_rule(4)), 1.25e-3 * (1 - x1), 1e-15);
}

TEST(HexMesh, LocatePointPicksLowestElement) {
  const auto m = voxels_to_hexmesh(uniform_volume(2, 2, 2, {1, 1, 1}, 1));
  auto loc = locate_point(m, {1.0, 1.0, 1.0});
  ASSERT_TRUE(loc);
  EXPECT_EQ(loc->elem, 0);
  loc = locate_point(m, {1.5, 0.25, 0.5});
  ASSERT_TRUE(loc);
  EXPECT_EQ(loc->elem, 1);
  EXPECT_NEAR(loc->ref.x, 0.0, 1e-12);
  EXPECT_NEAR(loc->ref.y, -0.5, 1e-12);
  EXPECT_NEAR(loc->ref.z, 0.0, 1e-12);
  EXPECT_FALSE(locate_point(m, {2.5, 1, 1}));
}

TEST(HexMesh, InvertMapOnDistortedElement) {
  auto m = unit_cube();
  m.nodes[6] = {1.3, 1.2, 1.1};
  const auto c = m.corners(0);
  const Vec3 ref{0.3, -0.6, 0.8};
  const auto back = invert_map(c, map_point(c, ref));
  ASSERT_TRUE(back);
  EXPECT_NEAR(back->x, ref.x, 1e-12);
  EXPECT_NEAR(back->y, ref.y, 1e-12);
  EXPECT_NEAR(back->z, ref.z, 1e-12);
}

TEST(HexMesh, Shex1RoundTrip) {
  auto v = uniform_volume(3, 2, 2, {1e-3, 1e-3, 1e-3}, 5);
  v.at(1, 1, 1) = 4;
  BoundaryPolicy policy = kAllAbsorbing;
  policy[0] = BoundaryKind::Symmetry;
  policy[5] = BoundaryKind::Free;
  const auto m = voxels_to_hexmesh(v, policy);
  std::stringstream ss;
  write_shex1(ss, m);
  const auto back = read_shex1(ss);
  ASSERT_EQ(back.nodes.size(), m.nodes.size());
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    for (int d = 0; d < 3; ++d) EXPECT_EQ(back.nodes[i][d], m.nodes[i][d]);
  ASSERT_EQ(back.num_elements(), m.num_elements());
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    EXPECT_EQ(back.elements[e].nodes, m.elements[e].nodes);
    EXPECT_EQ(back.elements[e].material, m.elements[e].material);
  }
  EXPECT_EQ(back.face_sets, m.face_sets);
  EXPECT_EQ(back.face_set("symmetry").size(), 4u);
  EXPECT_EQ(back.face_sets.count("free"), 0u);
}

TEST(HexMesh, ValidationRejectsInteriorFaceSetAndNonConformal) {
  auto m = voxels_to_hexmesh(uniform_volume(2, 1, 1, {1, 1, 1}, 1), kAllFree);
  m.face_sets["absorbing"].push_back({0, 1});
  try {
    validate_mesh(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BoundarySetup);
  }
  auto n = voxels_to_hexmesh(uniform_volume(2, 1, 1, {1, 1, 1}, 1), kAllFree);
  n.elements.push_back(n.elements[0]);
  EXPECT_THROW(validate_mesh(n), Error);
}

TEST(HexMesh, Svox1RoundTrip) {
  auto v = uniform_volume(2, 3, 2, {1e-3, 2e-3, 3e-3}, 5);
  v.at(1, 2, 1) = 4;
  std::stringstream ss;
  write_svox1(ss, v);
  const auto raw = read_svox1(ss);
  const auto back = voxels_from_ids(raw);
  EXPECT_EQ(back.material, v.material);
  EXPECT_EQ(back.spacing.y, 2e-3);
}
