#pragma once

// Independent reference computations shared by the unit and acceptance tests. Nothing here calls
// the library code it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using P2 = std::array<double, 2>;

// Plain Monte Carlo when the incumbent is below the mean. Above it, importance sampling of the
// improvement from an exponential matched to the Gaussian tail at the incumbent, so z = -30
// (EI near 1e-200) is still resolved to a relative error of order 1/sqrt(draws).
inline double mc_ei(double mu, double sigma, double incumbent, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double z = (mu - incumbent) / sigma;
  if (z >= 0.0) {
    std::normal_distribution<double> n(mu, sigma);
    double s = 0.0;
    for (std::size_t i = 0; i < draws; ++i) s += std::max(0.0, n(rng) - incumbent);
    return s / static_cast<double>(draws);
  }
  const double rate = (std::abs(z) + 1.0 / (1.0 + std::abs(z))) / sigma;
  std::exponential_distribution<double> e(rate);
  // Work relative to the Gaussian density at the incumbent to stay in range for large |z|.
  double s = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double d = e(rng);
    const double u = (incumbent + d - mu) / sigma;
    const double log_w = -0.5 * (u * u - z * z) - std::log(sigma * std::sqrt(2 * std::numbers::pi)) - std::log(rate) + rate * d;
    s += d * std::exp(log_w);
  }
  const double base = std::exp(-0.5 * z * z);  // underflows only far beyond z = -38
  return base * s / static_cast<double>(draws);
}

// Dominated area of a point set (minimization) inside the box below ref, by sweeping the points
// sorted on the first objective.
inline double hv(std::vector<P2> pts, const P2& ref) {
  std::vector<P2> in;
  for (const auto& p : pts)
    if (p[0] < ref[0] && p[1] < ref[1]) in.push_back(p);
  std::sort(in.begin(), in.end());
  // Horizontal slabs: the first point (in x) to drop below the current ceiling covers the slab
  // between its y and the ceiling from its x out to ref.
  double area = 0.0, ceiling = ref[1];
  for (const auto& p : in) {
    if (p[1] >= ceiling) continue;
    area += (ref[0] - p[0]) * (ceiling - p[1]);
    ceiling = p[1];
  }
  return area;
}

// Counts cell centres of a res x res grid over [lo, ref] that some point dominates.
inline double grid_hv(const std::vector<P2>& pts, const P2& ref, int res = 512) {
  double lo0 = ref[0], lo1 = ref[1];
  for (const auto& p : pts) {
    lo0 = std::min(lo0, p[0]);
    lo1 = std::min(lo1, p[1]);
  }
  const double w = (ref[0] - lo0) / res, h = (ref[1] - lo1) / res;
  long long count = 0;
  for (int i = 0; i < res; ++i) {
    const double x = lo0 + (i + 0.5) * w;
    for (int j = 0; j < res; ++j) {
      const double y = lo1 + (j + 0.5) * h;
      for (const auto& p : pts)
        if (p[0] <= x && p[1] <= y) {
          ++count;
          break;
        }
    }
  }
  return static_cast<double>(count) * w * h;
}

inline bool dominated_by(const P2& a, const P2& b) {  // b dominates a
  return b[0] <= a[0] && b[1] <= a[1] && (b[0] < a[0] || b[1] < a[1]);
}

// O(n^2) nondominated filter, input order kept.
inline std::vector<std::size_t> brute_front(const std::vector<P2>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dom = false;
    for (std::size_t j = 0; j < pts.size() && !dom; ++j) dom = j != i && dominated_by(pts[i], pts[j]);
    if (!dom) out.push_back(i);
  }
  return out;
}

// Monte Carlo EHVI of independent Gaussian objectives against a front (minimization).
inline double mc_ehvi(const P2& mu, const P2& sigma, const std::vector<P2>& front, const P2& ref, std::size_t draws,
                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const double base = hv(front, ref);
  std::vector<P2> with = front;
  with.push_back({0, 0});
  double s = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const P2 y{mu[0] + sigma[0] * n(rng), mu[1] + sigma[1] * n(rng)};
    if (!(y[0] < ref[0] && y[1] < ref[1])) continue;
    bool dom = false;
    for (const auto& p : front)
      if (p[0] <= y[0] && p[1] <= y[1]) {
        dom = true;
        break;
      }
    if (dom) continue;
    with.back() = y;
    s += hv(with, ref) - base;
  }
  return s / static_cast<double>(draws);
}

// Keeps drawing in batches until the standard error is below rel_se of the mean.
inline double mc_ehvi_precise(const P2& mu, const P2& sigma, const std::vector<P2>& front, const P2& ref, double rel_se,
                              std::size_t max_draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const double base = hv(front, ref);
  std::vector<P2> with = front;
  with.push_back({0, 0});
  double s = 0.0, s2 = 0.0;
  std::size_t i = 0;
  while (i < max_draws) {
    for (std::size_t b = 0; b < 1'000'000; ++b, ++i) {
      const P2 y{mu[0] + sigma[0] * n(rng), mu[1] + sigma[1] * n(rng)};
      if (!(y[0] < ref[0] && y[1] < ref[1])) continue;
      bool dom = false;
      for (const auto& p : front)
        if (p[0] <= y[0] && p[1] <= y[1]) {
          dom = true;
          break;
        }
      if (dom) continue;
      with.back() = y;
      const double g = hv(with, ref) - base;
      s += g;
      s2 += g * g;
    }
    const double m = s / i, se = std::sqrt(std::max(0.0, s2 / i - m * m) / i);
    if (m > 0.0 && se <= rel_se * m) break;
  }
  return s / static_cast<double>(i);
}

// Random mutually nondominated front of m points in the unit square.
inline std::vector<P2> random_front(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(m), ys(m);
  for (auto& x : xs) x = u(rng);
  for (auto& y : ys) y = u(rng);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end(), std::greater<>());
  std::vector<P2> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back({xs[i], ys[i]});
  return out;
}

}  // namespace oracle
