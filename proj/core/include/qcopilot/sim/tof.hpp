#pragma once

#include <span>
#include <vector>

namespace qcp::sim {

// Default time-of-flight frames [s].
inline const std::vector<double> kDefaultTofTimes = {5e-3, 10e-3, 15e-3, 20e-3};

struct TofFit {
  double temperature = 0.0;  // [K]
  double sigma0_sq = 0.0;    // intercept [m^2]
  double residual = 0.0;     // rms residual of sigma^2 [m^2]
  bool degenerate = false;   // slope <= 0
};

// Least-squares line through (t^2, sigma^2); T = slope * mass / kb.
// Throws ArityError unless there are >= 3 distinct times and matching lengths.
TofFit fit_temperature(std::span<const double> widths, std::span<const double> times, double mass,
                       double kb = 1.380649e-23);

}  // namespace qcp::sim
