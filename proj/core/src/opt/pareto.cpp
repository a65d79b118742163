#include "qcopilot/opt/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qcopilot/error.hpp"

namespace qcp::opt {

bool dominates(const Point2& a, const Point2& b) {
  return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

ParetoFront pareto_front(const std::vector<Point2>& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  ParetoFront out;
  // Sweep by f1 ascending; a point survives iff its f2 is below every earlier f2, or it exactly
  // equals the last survivor.
  double best_f2 = std::numeric_limits<double>::infinity();
  for (std::size_t idx : order) {
    const Point2& p = points[idx];
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw DomainError("pareto_front: non-finite objective");
    if (p[1] < best_f2) {
      out.points.push_back(p);
      out.provenance.push_back(idx);
      best_f2 = p[1];
    } else if (!out.points.empty() && out.points.back() == p) {
      out.points.push_back(p);
      out.provenance.push_back(idx);
    }
  }
  return out;
}

double hypervolume_2d(const std::vector<Point2>& front, const Point2& ref) {
  std::vector<Point2> pts;
  for (const auto& p : front)
    if (p[0] < ref[0] && p[1] < ref[1]) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  // Keep the staircase: f2 strictly decreasing along f1.
  std::vector<Point2> stair;
  for (const auto& p : pts)
    if (stair.empty() || p[1] < stair.back()[1]) stair.push_back(p);
  double area = 0.0;
  for (std::size_t i = 0; i < stair.size(); ++i) {
    const double right = i + 1 < stair.size() ? stair[i + 1][0] : ref[0];
    area += (right - stair[i][0]) * (ref[1] - stair[i][1]);
  }
  return area;
}

Point2 reference_point(const std::vector<Point2>& points, double padding) {
  if (points.empty()) throw ArityError("reference_point needs at least one point");
  Point2 lo = points.front(), hi = points.front();
  for (const auto& p : points)
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  Point2 ref;
  for (int k = 0; k < 2; ++k) {
    const double span = hi[k] - lo[k];
    ref[k] = hi[k] + padding * (span > 0.0 ? span : 1.0);
  }
  return ref;
}

}  // namespace qcp::opt
