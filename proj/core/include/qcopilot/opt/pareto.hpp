#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace qcp::opt {

using Point2 = std::array<double, 2>;

// Minimization form throughout.
struct ParetoFront {
  std::vector<Point2> points;         // sorted by first objective, then second
  std::vector<std::size_t> provenance;  // index of each point in the input list
};

// a dominates b: no worse in both and strictly better in at least one.
bool dominates(const Point2& a, const Point2& b);

// Exact nondominated subset. Exact duplicates of a nondominated point are all kept since
// neither dominates the other.
ParetoFront pareto_front(const std::vector<Point2>& points);

// Area dominated by the front and bounded by ref. Points not strictly better than ref in both
// objectives contribute nothing.
double hypervolume_2d(const std::vector<Point2>& front, const Point2& ref);
inline double hypervolume_2d(const ParetoFront& front, const Point2& ref) { return hypervolume_2d(front.points, ref); }

// Componentwise max of the points plus `padding` times the span (span of 0 falls back to 1).
Point2 reference_point(const std::vector<Point2>& points, double padding = 0.1);

}  // namespace qcp::opt
