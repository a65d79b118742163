#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcopilot/param_space.hpp"
#include "qcopilot/sim/backend.hpp"

namespace qcp::sim {

struct PipelineRun {
  Observables observables;  // every sub-experiment's outputs
  std::vector<CcdImage> images;
};

// What the orchestrator drives: ordered sub-experiments, each evaluated with the upstream ones
// held at their fixed settings.
class ExperimentBackend {
 public:
  virtual ~ExperimentBackend() = default;
  virtual std::vector<std::string> sub_experiments() const = 0;
  virtual const ParameterSpace& space(const std::string& sub) const = 0;  // LookupError
  // Throws StateError when an upstream sub-experiment is not fixed yet.
  virtual Observables evaluate(const std::string& sub, const Setting& setting, std::uint64_t seed) const = 0;
  virtual void fix(const std::string& sub, const Setting& setting) = 0;
  virtual std::optional<Setting> fixed(const std::string& sub) const = 0;
  // One pass through the fixed sub-experiments, in order; unfixed downstream stages are skipped.
  virtual PipelineRun run_pipeline(std::uint64_t seed) const = 0;
  virtual double pixel_size() const = 0;
  virtual void arm_fault(const FaultSpec& fault) = 0;
  virtual void clear_faults() = 0;
};

// MOT then PGC on the simulated rig.
class SimulatedLab final : public ExperimentBackend {
 public:
  explicit SimulatedLab(SimulatorConfig config);

  std::vector<std::string> sub_experiments() const override { return {"MOT", "PGC"}; }
  const ParameterSpace& space(const std::string& sub) const override;
  Observables evaluate(const std::string& sub, const Setting& setting, std::uint64_t seed) const override;
  void fix(const std::string& sub, const Setting& setting) override;
  std::optional<Setting> fixed(const std::string& sub) const override;
  PipelineRun run_pipeline(std::uint64_t seed) const override;
  double pixel_size() const override { return rig_.config().ccd.pixel_size; }
  void arm_fault(const FaultSpec& fault) override;
  void clear_faults() override { rig_.set_faults({}); }

  const ColdAtomRig& rig() const { return rig_; }

 private:
  ColdAtomRig rig_;
  std::map<std::string, Setting> fixed_;

  const Setting& require_fixed(const std::string& sub) const;
};

}  // namespace qcp::sim
