#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tfb/types.hpp"

namespace tfb {

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Hermite rule (physicists' weight exp(-x^2)) via Golub-Welsch.
inline QuadRule gauss_hermite(int n) {
  if (n < 1) throw InvalidParameter("gauss_hermite: n must be >= 1");
  Mat J = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(0.5 * i);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = sqrt_pi * v0 * v0;
  }
  return rule;
}

/// Gauss-Legendre rule on [-1, 1] via Golub-Welsch.
inline QuadRule gauss_legendre(int n) {
  if (n < 1) throw InvalidParameter("gauss_legendre: n must be >= 1");
  Mat J = Mat::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = static_cast<double>(i) / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(J);
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = 2.0 * v0 * v0;
  }
  return rule;
}

/// E[f(Z)] for Z ~ N(0, sd^2), 64-point Gauss-Hermite. Smooth integrands only.
template <typename Fn>
double gaussian_expectation(Fn&& f, double sd, int points = 64) {
  static thread_local QuadRule cache;
  static thread_local int cached_n = 0;
  if (cached_n != points) {
    cache = gauss_hermite(points);
    cached_n = points;
  }
  const double scale = std::sqrt(2.0) * sd;
  double acc = 0.0;
  for (std::size_t i = 0; i < cache.nodes.size(); ++i)
    acc += cache.weights[i] * f(scale * cache.nodes[i]);
  return acc / std::sqrt(M_PI);
}

/// E[f(Z)] for Z ~ N(0, sd^2) when f has kinks at the given abscissae:
/// Gauss-Legendre on each smooth segment of [-8 sd, 8 sd], weighted by the
/// normal density. Tails beyond 8 sd carry ~1e-15 of the mass.
template <typename Fn>
double gaussian_expectation_kinked(Fn&& f, double sd, std::vector<double> kinks,
                                   int points = 64) {
  if (sd <= 0.0) return f(0.0);
  const double lo = -8.0 * sd;
  const double hi = 8.0 * sd;
  kinks.push_back(lo);
  kinks.push_back(hi);
  std::sort(kinks.begin(), kinks.end());
  kinks.erase(std::unique(kinks.begin(), kinks.end()), kinks.end());
  static thread_local QuadRule gl;
  static thread_local int gl_n = 0;
  if (gl_n != points) {
    gl = gauss_legendre(points);
    gl_n = points;
  }
  const double inv_norm = 1.0 / (std::sqrt(2.0 * M_PI) * sd);
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < kinks.size(); ++s) {
    const double a = std::max(lo, kinks[s]);
    const double b = std::min(hi, kinks[s + 1]);
    if (b <= a) continue;
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double x = mid + half * gl.nodes[i];
      acc += half * gl.weights[i] * f(x) * inv_norm * std::exp(-0.5 * x * x / (sd * sd));
    }
  }
  return acc;
}

}  // namespace tfb
