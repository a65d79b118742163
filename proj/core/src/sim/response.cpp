#include "qcopilot/sim/response.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "qcopilot/error.hpp"
#include "qcopilot/rng.hpp"

namespace qcp::sim {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double lognormal_factor(double rel, Rng& rng) {
  if (rel <= 0.0) return 1.0;
  std::normal_distribution<double> normal(0.0, 1.0);
  return std::exp(rel * normal(rng));
}

}  // namespace

double MotResponseModel::detuning(double x1, double x2) const {
  const double mhz = detuning_map.offset_mhz + detuning_map.per_x1 * x1 + detuning_map.per_x2 * x2;
  return 2.0 * std::numbers::pi * mhz * 1e6;
}

double MotResponseModel::gradient(double x5) const {
  return std::max(0.0, gradient_map.offset + gradient_map.per_volt * x5);
}

double MotResponseModel::raw_response(std::span<const double> x) const {
  if (x.size() != 5) throw ArityError("MOT response expects 5 inputs");
  const double i_cool = std::max(0.0, x[2]);
  const double delta = detuning(x[0], x[1]);
  const double s0 = i_cool / constants.i_sat;
  const double cooling = s0 > 0.0 ? logistic((std::log(s0) - std::log(cooling_center)) / cooling_width) : 0.0;
  const double kappa = spring_constant(constants, i_cool, delta, gradient(x[4]));
  const double trap_on = kappa > 0.0 ? logistic((std::log(kappa) - std::log(capture_scale)) / capture_width) : 0.0;
  const double trapping = trap_floor + (1.0 - trap_floor) * trap_on;
  const double repump = 1.0 - std::exp(-std::max(0.0, x[3]) / repump_scale);
  return cooling * trapping * repump;
}

MotResponseModel calibrate(MotResponseModel model, const ParameterSpace& mot) {
  check_constants(model.constants);
  if (mot.dimension() != 5) throw SpecError("MOT space must have 5 parameters");
  if (model.detuning_map.per_x1 == 0.0 || model.detuning_map.per_x2 == 0.0)
    throw SpecError("detuning map must depend on X1 and X2");
  if (!(model.gradient_map.per_volt > 0.0)) throw SpecError("gradient map must increase with X5");
  if (!(model.noise_rel >= 0.0 && model.noise_rel <= 0.2)) throw SpecError("noise_rel must lie in [0, 0.2]");
  if (!(model.capture_scale > 0.0 && model.capture_width > 0.0 && model.cooling_center > 0.0 &&
        model.cooling_width > 0.0 && model.repump_scale > 0.0 && model.saturation_level > 0.0 &&
        model.sigma_ref > 0.0 && model.brightness_per_atom > 0.0))
    throw SpecError("MOT response scales must be positive");
  if (!(model.trap_floor >= 0.0 && model.trap_floor < 1.0)) throw SpecError("trap_floor must lie in [0, 1)");
  // Red detuning beyond the Doppler optimum everywhere in the box keeps every factor monotone, so
  // the best point is a corner.
  for (double x1 : {mot[0].lower, mot[0].upper})
    for (double x2 : {mot[1].lower, mot[1].upper}) {
      const double x = 2.0 * model.detuning(x1, x2) / model.constants.gamma;
      if (!(x < -1.0 / std::sqrt(3.0))) throw SpecError("detuning map must stay red of -Gamma/(2 sqrt 3)");
    }
  double peak = 0.0;
  std::vector<double> corner(5);
  for (unsigned mask = 0; mask < 32; ++mask) {
    for (std::size_t i = 0; i < 5; ++i) corner[i] = (mask >> i) & 1U ? mot[i].upper : mot[i].lower;
    peak = std::max(peak, model.raw_response(corner));
  }
  if (!(peak > 0.0)) throw SpecError("MOT response vanishes on the whole box");
  model.response_peak = peak;
  return model;
}

double mot_atom_number(const MotResponseModel& model, std::span<const double> effective) {
  if (!(model.response_peak > 0.0)) throw StateError("MOT response model is not calibrated");
  return model.saturation_level * model.raw_response(effective) / model.response_peak;
}

CloudState run_mot(const ParameterSpace& space, const Setting& inputs, const MotResponseModel& model,
                   std::span<const FaultSpec> faults, std::uint64_t seed) {
  const Setting applied = apply_faults(space, applied_setting(space, inputs), faults);
  Rng rng = make_rng(seed, {0x4d4f54});
  CloudState cloud;
  cloud.atom_number = mot_atom_number(model, applied.values) * lognormal_factor(model.noise_rel, rng);
  const double delta = model.detuning(applied.values[0], applied.values[1]);
  cloud.temperature = doppler_temperature(model.constants, std::max(0.0, applied.values[2]), delta);
  const double fill = std::max(cloud.atom_number / model.saturation_level, 0.008);
  cloud.sigma0 = model.sigma_ref * std::cbrt(fill);
  cloud.brightness_per_atom = model.brightness_per_atom;
  return cloud;
}

void check_model(const PgcResponseModel& m) {
  check_constants(m.constants);
  if (!(m.noise_rel >= 0.0 && m.noise_rel <= 0.2)) throw SpecError("noise_rel must lie in [0, 0.2]");
  const double pos[] = {m.temperature_floor, m.heating, m.cold_scale, m.relight_optimum, m.power_reference,
                        m.loss_time};
  for (double v : pos)
    if (!(v > 0.0)) throw SpecError("PGC response scales must be positive");
  const double nonneg[] = {m.cold_loss, m.hot_loss, m.relight_loss, m.power_loss, m.step_loss};
  for (double v : nonneg)
    if (!(v >= 0.0)) throw SpecError("PGC loss coefficients must be nonnegative");
}

PgcOutcome pgc_response(const PgcResponseModel& m, std::span<const double> x) {
  if (x.size() != 6) throw ArityError("PGC response expects 6 inputs");
  const auto& c = m.constants;
  const double detuning_linewidths = std::max(std::abs(x[0]) * 2.0 * std::numbers::pi * 1e6 / c.gamma, 1e-6);
  const double s_end = std::max(0.0, x[1]) / c.i_sat;
  const double hbar_gamma_over_kb = c.hbar() * c.gamma / c.kb;
  PgcOutcome out;
  out.temperature = m.temperature_floor + m.heating * hbar_gamma_over_kb * s_end / detuning_linewidths;
  const double relight = std::log(std::max(x[2], 1e-6) / m.relight_optimum);
  const double penalty = m.cold_loss * std::exp(-out.temperature / m.cold_scale) + m.hot_loss * out.temperature +
                         m.relight_loss * relight * relight + m.power_loss * m.power_reference / std::max(x[3], 1e-6) +
                         m.step_loss / std::max(x[4], 1.0) + std::max(x[5], 0.0) / m.loss_time;
  out.retention = std::exp(-penalty);
  return out;
}

CloudState run_pgc(const ParameterSpace& space, const CloudState& cloud, const Setting& inputs,
                   const PgcResponseModel& model, std::span<const FaultSpec> faults, std::uint64_t seed) {
  const Setting applied = apply_faults(space, applied_setting(space, inputs), faults);
  const PgcOutcome outcome = pgc_response(model, applied.values);
  Rng rng = make_rng(seed, {0x504743});
  CloudState out = cloud;
  out.temperature = outcome.temperature * lognormal_factor(model.noise_rel, rng);
  out.atom_number = cloud.atom_number * outcome.retention * lognormal_factor(model.noise_rel, rng);
  return out;
}

}  // namespace qcp::sim
