#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qcopilot/sim/ccd.hpp"
#include "qcopilot/sim/faults.hpp"
#include "qcopilot/sim/response.hpp"

namespace qcp::sim {

struct SimulatorConfig {
  PhysicalConstants constants;
  MotResponseModel mot;  // constants field is overwritten from `constants` on load
  PgcResponseModel pgc;
  CcdGeometry ccd;
  std::vector<double> tof_times;  // [s]
  std::vector<FaultSpec> faults;

  SimulatorConfig();
};

// JSON text. Missing sections keep their defaults; unknown keys are rejected with SchemaError so
// that typos in a hand-edited config do not silently fall back.
SimulatorConfig simulator_config_from_text(const std::string& text);
std::string simulator_config_to_text(const SimulatorConfig& config);

// Throws IoError when the file cannot be read or written.
SimulatorConfig load_simulator_config(const std::filesystem::path& path);
void save_simulator_config(const SimulatorConfig& config, const std::filesystem::path& path);

// Adds or replaces the fault on fault.target_symbol (one armed fault per symbol).
void arm_fault(SimulatorConfig& config, const FaultSpec& fault);

}  // namespace qcp::sim
