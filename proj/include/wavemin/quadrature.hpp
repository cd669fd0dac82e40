// Copyright 2026 The wavemin Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "wavemin/core.hpp"

namespace wavemin {

using Vector3 = Eigen::Vector3d;

struct QuadratureRule {
  std::vector<double> x;
  std::vector<double> w;
};

/// n-point Gauss-Legendre rule on [a, b] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(int n, double a = -1.0, double b = 1.0) {
  if (n < 1) throw ValidationError("quadrature order must be positive");
  QuadratureRule r;
  r.x.resize(n);
  r.w.resize(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
    }
    const double wt = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x[i] = mid - half * z;
    r.x[n - 1 - i] = mid + half * z;
    r.w[i] = r.w[n - 1 - i] = half * wt;
  }
  return r;
}

/// Orthonormal frame (e1, e2, n) with polar axis n. The frames of n and -n
/// share e1, so their quadrature nodes are exact negatives of each other.
struct SphereFrame {
  Vector3 n, e1, e2;

  explicit SphereFrame(const Vector3& axis) {
    n = axis.normalized();
    int k = 0;
    for (int i = 1; i < 3; ++i)
      if (std::abs(n(i)) < std::abs(n(k))) k = i;
    Vector3 ref = Vector3::Zero();
    ref(k) = 1.0;
    e1 = (ref - ref.dot(n) * n).normalized();
    e2 = n.cross(e1);
  }

  /// Direction at polar coordinate t = xi . n and azimuth phi.
  Vector3 direction(double t, double phi) const {
    const double s = std::sqrt(std::max(0.0, 1.0 - t * t));
    return t * n + s * (std::cos(phi) * e1 + std::sin(phi) * e2);
  }
};

struct SphereNode {
  Vector3 xi;
  double t = 0.0;  // xi . axis
  double w = 0.0;
};

/// Product rule over the unit sphere: Gauss-Legendre in t = xi . axis on each
/// interval between consecutive breakpoints (n points each), uniform
/// trapezoid with 2n points in azimuth.
inline std::vector<SphereNode> sphere_rule(const SphereFrame& f, int n, std::vector<double> breaks = {}) {
  breaks.push_back(-1.0);
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  std::vector<SphereNode> out;
  const int nphi = 2 * n;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = std::max(-1.0, breaks[k]), b = std::min(1.0, breaks[k + 1]);
    if (!(b - a > 1e-14)) continue;
    const QuadratureRule g = gauss_legendre(n, a, b);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < nphi; ++j) {
        const double phi = 2.0 * kPi * j / nphi;
        out.push_back({f.direction(g.x[i], phi), g.x[i], g.w[i] * 2.0 * kPi / nphi});
      }
  }
  return out;
}

/// Points of the circle {xi : xi . axis = t}, each with azimuthal weight 2 pi / m.
inline std::vector<SphereNode> ring_rule(const SphereFrame& f, double t, int m) {
  std::vector<SphereNode> out;
  for (int j = 0; j < m; ++j) {
    const double phi = 2.0 * kPi * j / m;
    out.push_back({f.direction(t, phi), t, 2.0 * kPi / m});
  }
  return out;
}

}  // namespace wavemin
