#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qcopilot/param_space.hpp"

namespace qcp::sim {

struct Clamp {
  double value = 0.0;
  bool operator==(const Clamp&) const = default;
};

struct Scale {
  double factor = 1.0;
  bool operator==(const Scale&) const = default;
};

// A hardware fault: the applied value of one knob no longer follows the requested value.
struct FaultSpec {
  std::string target_symbol;
  std::variant<Clamp, Scale> mode;
  bool active = true;

  bool operator==(const FaultSpec&) const = default;
};

// Throws SpecError on non-positive scale or non-finite clamp.
void check_fault(const FaultSpec& fault);

// Maps a requested setting to the values the hardware actually applies. Faults are treated as a
// set: repeated identical specs act once, and a clamp on a symbol overrides any scale on it.
Setting apply_faults(const ParameterSpace& space, const Setting& requested, std::span<const FaultSpec> faults);

}  // namespace qcp::sim
