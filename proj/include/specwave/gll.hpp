#pragma once

// Gauss-Lobatto-Legendre nodes/weights and the nodal Lagrange basis built on them.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "specwave/error.hpp"

namespace specwave {

inline constexpr int kMaxDegree = 10;

struct GllRule {
  int degree = 0;
  std::vector<double> nodes;    // ascending, nodes.front() == -1, nodes.back() == +1
  std::vector<double> weights;  // all positive, sum to 2

  int points() const { return degree + 1; }
};

namespace detail {

// Legendre P_n(x) and P_{n-1}(x) by the three-term recurrence.
inline void legendre_pair(int n, double x, double& pn, double& pnm1) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    pn = 1.0;
    pnm1 = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  pn = p1;
  pnm1 = p0;
}

}  // namespace detail

/// Nodes are the roots of (1 - x^2) P'_N(x), found by Newton iteration from
/// Chebyshev-Gauss-Lobatto guesses, then made exactly symmetric.
inline GllRule gll_rule(int degree) {
  if (degree < 1 || degree > kMaxDegree) {
    throw Error(ErrorKind::InvalidDegree,
                "polynomial degree must be in [1, " + std::to_string(kMaxDegree) + "], got " +
                    std::to_string(degree));
  }
  const int n = degree;
  GllRule rule;
  rule.degree = n;
  rule.nodes.resize(n + 1);
  rule.weights.resize(n + 1);

  for (int i = 0; i <= n; ++i) {
    double x = -std::cos(std::numbers::pi * i / n);
    if (i == 0 || i == n) {
      rule.nodes[i] = x;
      continue;
    }
    // x P_N - P_{N-1} vanishes exactly where (1-x^2) P'_N does; its derivative is (N+1) P_N.
    for (int it = 0; it < 100; ++it) {
      double pn, pnm1;
      detail::legendre_pair(n, x, pn, pnm1);
      const double dx = (x * pn - pnm1) / ((n + 1) * pn);
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = x;
  }

  rule.nodes.front() = -1.0;
  rule.nodes.back() = 1.0;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    const double a = 0.5 * (rule.nodes[n - i] - rule.nodes[i]);
    rule.nodes[i] = -a;
    rule.nodes[n - i] = a;
  }
  if (n % 2 == 0) rule.nodes[n / 2] = 0.0;

  for (int i = 0; i <= n; ++i) {
    double pn, pnm1;
    detail::legendre_pair(n, rule.nodes[i], pn, pnm1);
    rule.weights[i] = 2.0 / (n * (n + 1.0) * pn * pn);
  }
  for (int i = 0; i < (n + 1) / 2; ++i) {
    const double w = 0.5 * (rule.weights[i] + rule.weights[n - i]);
    rule.weights[i] = w;
    rule.weights[n - i] = w;
  }
  return rule;
}

/// Nodal Lagrange basis on a GLL rule. deriv(i, j) = l'_j(xi_i).
class LagrangeTable {
 public:
  LagrangeTable() = default;

  explicit LagrangeTable(const GllRule& rule) : nodes_(rule.nodes), n_(rule.points()) {
    bary_.assign(n_, 1.0);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j) bary_[i] /= (nodes_[i] - nodes_[j]);

    deriv_.assign(n_ * n_, 0.0);
    for (int i = 0; i < n_; ++i) {
      double diag = 0.0;
      for (int j = 0; j < n_; ++j) {
        if (i == j) continue;
        const double d = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
        deriv_[i * n_ + j] = d;
        diag -= d;
      }
      deriv_[i * n_ + i] = diag;
    }
  }

  int degree() const { return n_ - 1; }
  int points() const { return n_; }
  const std::vector<double>& nodes() const { return nodes_; }

  double deriv(int i, int j) const { return deriv_[i * n_ + j]; }
  const std::vector<double>& deriv_matrix() const { return deriv_; }

  /// l_i(xi) by the product formula. No domain check; see lagrange_eval.
  double value(int i, double xi) const {
    double v = 1.0;
    for (int j = 0; j < n_; ++j)
      if (j != i) v *= (xi - nodes_[j]) / (nodes_[i] - nodes_[j]);
    return v;
  }

  /// l_i'(xi) at an arbitrary point, by the product rule.
  double derivative(int i, double xi) const {
    double sum = 0.0;
    for (int m = 0; m < n_; ++m) {
      if (m == i) continue;
      double term = 1.0 / (nodes_[i] - nodes_[m]);
      for (int j = 0; j < n_; ++j)
        if (j != i && j != m) term *= (xi - nodes_[j]) / (nodes_[i] - nodes_[j]);
      sum += term;
    }
    return sum;
  }

  /// All basis values at xi.
  std::vector<double> values(double xi) const {
    std::vector<double> out(n_);
    for (int i = 0; i < n_; ++i) out[i] = value(i, xi);
    return out;
  }

  /// Apply D to nodal samples: returns derivative samples at the nodes.
  std::vector<double> differentiate(const std::vector<double>& samples) const {
    std::vector<double> out(n_, 0.0);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out[i] += deriv_[i * n_ + j] * samples[j];
    return out;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> bary_;
  std::vector<double> deriv_;
  int n_ = 0;
};

inline LagrangeTable derivative_matrix(const GllRule& rule) { return LagrangeTable(rule); }

inline double lagrange_eval(const GllRule& rule, int i, double xi) {
  if (i < 0 || i > rule.degree)
    throw Error(ErrorKind::OutOfReferenceDomain, "basis index " + std::to_string(i) + " out of range");
  if (!(xi >= -1.0 && xi <= 1.0))
    throw Error(ErrorKind::OutOfReferenceDomain, "xi = " + std::to_string(xi) + " outside [-1, 1]");
  double v = 1.0;
  for (int j = 0; j <= rule.degree; ++j)
    if (j != i) v *= (xi - rule.nodes[j]) / (rule.nodes[i] - rule.nodes[j]);
  return v;
}

}  // namespace specwave
