#include "qcopilot/sim/faults.hpp"

#include <algorithm>
#include <cmath>

#include "qcopilot/error.hpp"

namespace qcp::sim {

void check_fault(const FaultSpec& fault) {
  if (const auto* s = std::get_if<Scale>(&fault.mode)) {
    if (!(s->factor > 0.0) || !std::isfinite(s->factor)) throw SpecError("fault scale factor must be positive");
  } else if (!std::isfinite(std::get<Clamp>(fault.mode).value)) {
    throw SpecError("fault clamp value must be finite");
  }
}

Setting apply_faults(const ParameterSpace& space, const Setting& requested, std::span<const FaultSpec> faults) {
  Setting out = requested;
  for (std::size_t i = 0; i < space.dimension() && i < out.values.size(); ++i) {
    const auto& symbol = space[i].symbol;
    const FaultSpec* clamp = nullptr;
    std::vector<double> scales;
    for (const auto& f : faults) {
      if (!f.active || f.target_symbol != symbol) continue;
      check_fault(f);
      if (std::holds_alternative<Clamp>(f.mode)) {
        if (!clamp) clamp = &f;
      } else {
        const double factor = std::get<Scale>(f.mode).factor;
        if (std::find(scales.begin(), scales.end(), factor) == scales.end()) scales.push_back(factor);
      }
    }
    if (clamp) {
      out.values[i] = std::get<Clamp>(clamp->mode).value;
    } else {
      for (double factor : scales) out.values[i] *= factor;
    }
  }
  return out;
}

}  // namespace qcp::sim
