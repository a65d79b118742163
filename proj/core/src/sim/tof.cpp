#include "qcopilot/sim/tof.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "qcopilot/error.hpp"

namespace qcp::sim {

TofFit fit_temperature(std::span<const double> widths, std::span<const double> times, double mass, double kb) {
  if (widths.size() != times.size()) throw ArityError("widths and times differ in length");
  if (std::set<double>(times.begin(), times.end()).size() < 3) throw ArityError("TOF fit needs >= 3 distinct times");
  const std::size_t n = times.size();
  double mean_u = 0.0, mean_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_u += times[i] * times[i];
    mean_s += widths[i] * widths[i];
  }
  mean_u /= n;
  mean_s /= n;
  double suu = 0.0, sus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = times[i] * times[i] - mean_u;
    suu += du * du;
    sus += du * (widths[i] * widths[i] - mean_s);
  }
  const double slope = sus / suu;
  TofFit fit;
  fit.sigma0_sq = mean_s - slope * mean_u;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = widths[i] * widths[i] - (fit.sigma0_sq + slope * times[i] * times[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  // Round-off on constant widths leaves a slope many orders below the signal; treat it as zero.
  const double u_max = *std::max_element(times.begin(), times.end());
  if (slope * u_max * u_max <= 1e-12 * std::abs(mean_s)) {
    fit.degenerate = true;
    fit.temperature = 0.0;
  } else {
    fit.temperature = slope * mass / kb;
  }
  return fit;
}

}  // namespace qcp::sim
