#include "qcopilot/spaces.hpp"

namespace qcp {

ParameterSpace mot_space() {
  return ParameterSpace("MOT", {
                                   {"OPLL reference frequency", "X1", "MHz", 36.0, 42.0},
                                   {"VCO frequency difference", "X2", "MHz", 8.0, 12.0},
                                   {"cooling light intensity", "X3", "mW/cm^2", 2.0, 16.0},
                                   {"repump light intensity", "X4", "mW/cm^2", 0.5, 3.0},
                                   {"gradient magnetic field voltage", "X5", "V", 1.0, 5.0},
                               });
}

ParameterSpace pgc_space() {
  return ParameterSpace("PGC", {
                                   {"high-detuned PGC frequency", "P1", "MHz", 40.0, 120.0},
                                   {"cooling light attenuation endpoint intensity", "P2", "mW/cm^2", 0.0, 0.8},
                                   {"re-lighting interval", "P3", "ms", 0.1, 3.0},
                                   {"initial reactivated cooling intensity", "P4", "mW/cm^2", 1.0, 10.0},
                                   {"attenuation step count", "P5", "steps", 1.0, 20.0, true},
                                   {"total PGC duration", "P6", "ms", 2.0, 15.0},
                               });
}

std::vector<ObjectiveSpec> mot_objectives() { return {{kPixelIntegral, Direction::maximize, std::nullopt}}; }

std::vector<ObjectiveSpec> pgc_objectives() {
  return {{kTemperature, Direction::minimize, Threshold{10.0, "uK"}}, {kAtomNumber, Direction::maximize, std::nullopt}};
}

}  // namespace qcp
