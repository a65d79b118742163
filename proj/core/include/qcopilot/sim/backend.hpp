#pragma once

#include <cstdint>
#include <vector>

#include "qcopilot/param_space.hpp"
#include "qcopilot/sim/ccd.hpp"
#include "qcopilot/sim/config.hpp"

namespace qcp::sim {

struct MotShot {
  CloudState cloud;
  CcdImage image;  // in-situ frame, tag "MOT"
  Observables observables;  // pixel_integral
};

struct PgcShot {
  CloudState mot_cloud;
  CloudState cloud;
  std::vector<CcdImage> frames;  // one per TOF time, tags "PGC@<ms>ms"
  Observables observables;       // atom_number (from the first frame), temperature_uK (TOF fit)
};

// The simulated rig: MOT loading followed by PGC, imaged on a CCD. Shots are pure functions of
// (settings, config, seed).
class ColdAtomRig {
 public:
  // Calibrates the MOT model; throws SpecError on an invalid config.
  explicit ColdAtomRig(SimulatorConfig config);

  const SimulatorConfig& config() const { return config_; }
  const ParameterSpace& mot() const { return mot_; }
  const ParameterSpace& pgc() const { return pgc_; }
  const MotResponseModel& mot_model() const { return mot_model_; }

  void set_faults(std::vector<FaultSpec> faults);
  const std::vector<FaultSpec>& faults() const { return config_.faults; }

  MotShot shoot_mot(const Setting& mot_setting, std::uint64_t seed) const;
  // PGC needs a loaded MOT; mot_setting is normally the fixed best MOT parameters.
  PgcShot shoot_pgc(const Setting& mot_setting, const Setting& pgc_setting, std::uint64_t seed) const;

 private:
  SimulatorConfig config_;
  ParameterSpace mot_;
  ParameterSpace pgc_;
  MotResponseModel mot_model_;
};

// Prefix of an exposure tag before '@' ("PGC@5ms" -> "PGC").
std::string sub_experiment_of(const std::string& exposure_tag);

}  // namespace qcp::sim
