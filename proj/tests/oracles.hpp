#pragma once

// Test-side oracles shared by the unit tests and the acceptance runner.

#include <array>
#include <random>
#include <vector>

#include "specwave/assembly.hpp"

namespace oracle {

using namespace specwave;

struct DenseElement {
  int n = 0;
  std::vector<double> weight;        // w_q |J_q|
  std::vector<std::array<double, 3>> grad;  // grad[q * npe + a]: physical gradient of basis a at point q
};

// Dense reference built directly from the trilinear map and 1D Lagrange products.
DenseElement dense_reference(const std::array<Vec3, 8>& c, const GllRule& rule) {
  const int n = rule.points(), npe = n * n * n;
  const LagrangeTable t(rule);
  DenseElement d;
  d.n = n;
  d.weight.resize(npe);
  d.grad.resize(std::size_t(npe) * npe);
  for (int q = 0; q < npe; ++q) {
    const int qi = q % n, qj = (q / n) % n, qk = q / (n * n);
    const double xi[3] = {rule.nodes[qi], rule.nodes[qj], rule.nodes[qk]};
    double J[3][3] = {};
    for (int a = 0; a < 8; ++a) {
      const double s[3] = {double(kCornerSigns[a][0]), double(kCornerSigns[a][1]), double(kCornerSigns[a][2])};
      for (int col = 0; col < 3; ++col) {
        double dn = s[col] / 8.0;
        for (int o = 0; o < 3; ++o)
          if (o != col) dn *= 1 + s[o] * xi[o];
        for (int r = 0; r < 3; ++r) J[r][col] += dn * c[a][r];
      }
    }
    const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                       J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                       J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
    double inv[3][3];
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) {
        const int r1 = (col + 1) % 3, r2 = (col + 2) % 3, c1 = (r + 1) % 3, c2 = (r + 2) % 3;
        inv[r][col] = (J[r1][c1] * J[r2][c2] - J[r1][c2] * J[r2][c1]) / det;
      }
    d.weight[q] = rule.weights[qi] * rule.weights[qj] * rule.weights[qk] * det;
    for (int a = 0; a < npe; ++a) {
      const int ai = a % n, aj = (a / n) % n, ak = a / (n * n);
      const double ref[3] = {t.derivative(ai, xi[0]) * t.value(aj, xi[1]) * t.value(ak, xi[2]),
                             t.value(ai, xi[0]) * t.derivative(aj, xi[1]) * t.value(ak, xi[2]),
                             t.value(ai, xi[0]) * t.value(aj, xi[1]) * t.derivative(ak, xi[2])};
      auto& g = d.grad[std::size_t(q) * npe + a];
      for (int r = 0; r < 3; ++r) g[r] = inv[0][r] * ref[0] + inv[1][r] * ref[1] + inv[2][r] * ref[2];
    }
  }
  return d;
}

HexMesh distorted_element(int material) {
  auto m = voxels_to_hexmesh(uniform_volume(1, 1, 1, {2e-3, 2e-3, 2e-3}, material), kAllFree);
  const auto& c = m.elements[0].nodes;
  m.nodes[c[7]] = {0.3e-3, 2.4e-3, 1.8e-3};
  m.nodes[c[1]] = {2.2e-3, -0.2e-3, 0.1e-3};
  m.nodes[c[6]] = {2.1e-3, 1.9e-3, 2.3e-3};
  return m;
}

// Random interior perturbation; boundary nodes stay on the box.
HexMesh distorted_box(int nx, int ny, int nz, double h, int material, unsigned seed) {
  auto m = voxels_to_hexmesh(uniform_volume(nx, ny, nz, {h, h, h}, material), kAllFree);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-0.15 * h, 0.15 * h);
  const int px = nx + 1, py = ny + 1, pz = nz + 1;
  for (int k = 1; k < pz - 1; ++k)
    for (int j = 1; j < py - 1; ++j)
      for (int i = 1; i < px - 1; ++i) {
        auto& p = m.nodes[i + px * (j + py * k)];
        p += Vec3{u(rng), u(rng), u(rng)};
      }
  return m;
}

/// Dense element matrices assembled from DenseElement.
inline std::vector<double> dense_acoustic(const DenseElement& d, double inv_rho) {
  const int npe = int(d.weight.size());
  std::vector<double> k(std::size_t(npe) * npe, 0.0);
  for (int a = 0; a < npe; ++a)
    for (int b = 0; b < npe; ++b) {
      double s = 0;
      for (int q = 0; q < npe; ++q) {
        const auto& ga = d.grad[std::size_t(q) * npe + a];
        const auto& gb = d.grad[std::size_t(q) * npe + b];
        s += d.weight[q] * inv_rho * (ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2]);
      }
      k[std::size_t(a) * npe + b] = s;
    }
  return k;
}

inline std::vector<double> dense_elastic(const DenseElement& d, double lambda, double mu) {
  const int npe = int(d.weight.size());
  const int nd = 3 * npe;
  std::vector<double> k(std::size_t(nd) * nd, 0.0);
  for (int a = 0; a < npe; ++a)
    for (int b = 0; b < npe; ++b)
      for (int q = 0; q < npe; ++q) {
        const auto& ga = d.grad[std::size_t(q) * npe + a];
        const auto& gb = d.grad[std::size_t(q) * npe + b];
        const double gg = ga[0] * gb[0] + ga[1] * gb[1] + ga[2] * gb[2];
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j)
            k[std::size_t(3 * a + i) * nd + 3 * b + j] +=
                d.weight[q] * (lambda * ga[i] * gb[j] + mu * ((i == j ? gg : 0.0) + ga[j] * gb[i]));
      }
  return k;
}

}  // namespace oracle
