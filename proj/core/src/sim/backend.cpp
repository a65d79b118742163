#include "qcopilot/sim/backend.hpp"

#include <cmath>
#include <sstream>

#include "qcopilot/error.hpp"
#include "qcopilot/rng.hpp"
#include "qcopilot/spaces.hpp"
#include "qcopilot/sim/tof.hpp"

namespace qcp::sim {

ColdAtomRig::ColdAtomRig(SimulatorConfig config)
    : config_(std::move(config)), mot_(mot_space()), pgc_(pgc_space()) {
  config_.mot.constants = config_.constants;
  config_.pgc.constants = config_.constants;
  mot_model_ = calibrate(config_.mot, mot_);
  check_model(config_.pgc);
  check_geometry(config_.ccd);
  if (config_.tof_times.size() < 3) throw SpecError("need at least three TOF frames");
  for (const auto& f : config_.faults) {
    check_fault(f);
    if (!mot_.index_of(f.target_symbol) && !pgc_.index_of(f.target_symbol))
      throw LookupError("fault targets unknown symbol '" + f.target_symbol + "'");
  }
}

void ColdAtomRig::set_faults(std::vector<FaultSpec> faults) {
  for (const auto& f : faults) check_fault(f);
  config_.faults = std::move(faults);
}

MotShot ColdAtomRig::shoot_mot(const Setting& mot_setting, std::uint64_t seed) const {
  if (mot_setting.values.size() != mot_.dimension()) throw ArityError("MOT setting has wrong length");
  MotShot shot;
  shot.cloud = run_mot(mot_, mot_setting, mot_model_, config_.faults, seed);
  shot.image = render_ccd(shot.cloud, 0.0, config_.ccd, config_.constants, "MOT");
  shot.observables[kPixelIntegral] = pixel_integral(shot.image, config_.ccd.border);
  return shot;
}

PgcShot ColdAtomRig::shoot_pgc(const Setting& mot_setting, const Setting& pgc_setting, std::uint64_t seed) const {
  if (pgc_setting.values.size() != pgc_.dimension()) throw ArityError("PGC setting has wrong length");
  PgcShot shot;
  shot.mot_cloud = run_mot(mot_, mot_setting, mot_model_, config_.faults, derive_seed(seed, {1}));
  shot.cloud = run_pgc(pgc_, shot.mot_cloud, pgc_setting, config_.pgc, config_.faults, derive_seed(seed, {2}));
  std::vector<double> widths;
  for (double t : config_.tof_times) {
    std::ostringstream tag;
    tag << "PGC@" << std::lround(t * 1e3) << "ms";
    shot.frames.push_back(render_ccd(shot.cloud, t, config_.ccd, config_.constants, tag.str()));
    widths.push_back(cloud_width(shot.frames.back(), config_.ccd.pixel_size, config_.ccd.border));
  }
  const TofFit fit = fit_temperature(widths, config_.tof_times, config_.constants.mass, config_.constants.kb);
  shot.observables[kAtomNumber] = pixel_integral(shot.frames.front(), config_.ccd.border) / shot.cloud.brightness_per_atom;
  shot.observables[kTemperature] = fit.temperature * 1e6;
  return shot;
}

std::string sub_experiment_of(const std::string& exposure_tag) {
  return exposure_tag.substr(0, exposure_tag.find('@'));
}

}  // namespace qcp::sim
