#include "qcopilot/sim/lab.hpp"

#include "qcopilot/error.hpp"
#include "qcopilot/rng.hpp"

namespace qcp::sim {

SimulatedLab::SimulatedLab(SimulatorConfig config) : rig_(std::move(config)) {}

const ParameterSpace& SimulatedLab::space(const std::string& sub) const {
  if (sub == "MOT") return rig_.mot();
  if (sub == "PGC") return rig_.pgc();
  throw LookupError("no sub-experiment '" + sub + "'");
}

const Setting& SimulatedLab::require_fixed(const std::string& sub) const {
  const auto it = fixed_.find(sub);
  if (it == fixed_.end()) throw StateError(sub + " parameters are not fixed yet");
  return it->second;
}

Observables SimulatedLab::evaluate(const std::string& sub, const Setting& setting, std::uint64_t seed) const {
  if (sub == "MOT") return rig_.shoot_mot(setting, seed).observables;
  if (sub == "PGC") return rig_.shoot_pgc(require_fixed("MOT"), setting, seed).observables;
  throw LookupError("no sub-experiment '" + sub + "'");
}

void SimulatedLab::fix(const std::string& sub, const Setting& setting) {
  const auto& sp = space(sub);
  if (!validate_setting(sp, setting).empty()) throw RangeError("fixed " + sub + " setting is outside its space");
  fixed_[sub] = setting;
}

std::optional<Setting> SimulatedLab::fixed(const std::string& sub) const {
  const auto it = fixed_.find(sub);
  if (it == fixed_.end()) return std::nullopt;
  return it->second;
}

PipelineRun SimulatedLab::run_pipeline(std::uint64_t seed) const {
  const Setting& mot = require_fixed("MOT");
  // Same derived seed as the MOT load inside shoot_pgc, so the two views share one cloud.
  auto mot_shot = rig_.shoot_mot(mot, derive_seed(seed, {1}));
  PipelineRun run;
  run.observables = mot_shot.observables;
  run.images.push_back(std::move(mot_shot.image));
  const auto pgc = fixed_.find("PGC");
  if (pgc == fixed_.end()) return run;  // MOT-only task
  auto pgc_shot = rig_.shoot_pgc(mot, pgc->second, seed);
  for (const auto& [k, v] : pgc_shot.observables) run.observables[k] = v;
  for (auto& f : pgc_shot.frames) run.images.push_back(std::move(f));
  return run;
}

void SimulatedLab::arm_fault(const FaultSpec& fault) {
  check_fault(fault);
  if (!rig_.mot().index_of(fault.target_symbol) && !rig_.pgc().index_of(fault.target_symbol))
    throw LookupError("fault targets unknown symbol '" + fault.target_symbol + "'");
  auto faults = rig_.faults();
  std::erase_if(faults, [&](const FaultSpec& f) { return f.target_symbol == fault.target_symbol; });
  faults.push_back(fault);
  rig_.set_faults(std::move(faults));
}

}  // namespace qcp::sim
