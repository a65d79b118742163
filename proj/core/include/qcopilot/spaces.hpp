#pragma once

#include <vector>

#include "qcopilot/param_space.hpp"

namespace qcp {

// Five MOT knobs X1..X5. X2 and X4 names are stand-ins; only X1, X3, X5 are documented upstream.
ParameterSpace mot_space();
// Six PGC knobs P1..P6; P5 is a step count, P6 (total duration) is our choice of sixth knob.
ParameterSpace pgc_space();

// Raw observable keys emitted by the simulated rig.
inline constexpr const char* kPixelIntegral = "pixel_integral";
inline constexpr const char* kAtomNumber = "atom_number";
inline constexpr const char* kTemperature = "temperature_uK";

// Maximize the MOT pixel integral.
std::vector<ObjectiveSpec> mot_objectives();
// Minimize temperature (acceptance below 10 uK) and maximize atom number.
std::vector<ObjectiveSpec> pgc_objectives();

}  // namespace qcp
