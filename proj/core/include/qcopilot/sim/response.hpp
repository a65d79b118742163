#pragma once

#include <cstdint>
#include <span>

#include "qcopilot/param_space.hpp"
#include "qcopilot/sim/faults.hpp"
#include "qcopilot/sim/physics.hpp"

namespace qcp::sim {

struct CloudState {
  double atom_number = 0.0;
  double temperature = 0.0;  // [K]
  double sigma0 = 0.0;       // initial rms radius [m]
  double brightness_per_atom = 1.0;
};

// detuning / 2pi [MHz] = offset + per_x1 * X1 + per_x2 * X2
struct DetuningMap {
  double offset_mhz = 1.95;
  double per_x1 = -0.05;
  double per_x2 = -1.0;
};

// dB/dz [T/m] = offset + per_volt * X5
struct GradientMap {
  double offset = 0.0;
  double per_volt = 0.03;
};

// Steady-state MOT loading surrogate. The atom number is a product of saturating factors:
//   cooling  logistic in ln(I/I_sat)
//   trapping floor + (1 - floor) * logistic in ln(kappa), kappa the spring constant of the force law
//   repump   1 - exp(-I_rep / repump_scale)
// normalized so that the best corner of the parameter box yields saturation_level atoms.
struct MotResponseModel {
  PhysicalConstants constants;
  DetuningMap detuning_map;
  GradientMap gradient_map;
  double capture_scale = 4.248354e-18;  // spring constant at the trapping midpoint [N/m]
  double capture_width = 0.4;           // logistic width in ln(kappa)
  double trap_floor = 0.05;
  double cooling_center = 2.0;  // I/I_sat at the cooling midpoint
  double cooling_width = 0.5;   // logistic width in ln(I/I_sat)
  double repump_scale = 0.1;    // [mW/cm^2]
  double saturation_level = 1e8;
  double noise_rel = 0.03;
  double sigma_ref = 5e-4;  // cloud radius at saturation_level atoms [m]
  double brightness_per_atom = 1e-3;
  // Filled by calibrate(); normalizes the best box corner to saturation_level.
  double response_peak = 0.0;

  double detuning(double x1, double x2) const;  // [rad/s]
  double gradient(double x5) const;             // [T/m]
  // Unnormalized noiseless response for effective X1..X5.
  double raw_response(std::span<const double> effective) const;
};

// Throws SpecError on invalid maps or noise outside [0, 0.2]; computes response_peak.
MotResponseModel calibrate(MotResponseModel model, const ParameterSpace& mot);

// One MOT shot. Faults transform the applied setting before evaluation.
CloudState run_mot(const ParameterSpace& space, const Setting& inputs, const MotResponseModel& model,
                   std::span<const FaultSpec> faults, std::uint64_t seed);

// Noiseless atom number for an applied setting (no faults).
double mot_atom_number(const MotResponseModel& model, std::span<const double> effective);

// Sub-Doppler cooling surrogate. temperature = floor + heating * (hbar Gamma / kB) * s_end / (|delta| / Gamma)
// with s_end = P2 / I_sat and |delta| = P1 [MHz]. Retention exp(-penalty) couples to temperature:
// ramps that cool hardest lose the most atoms, hot clouds lose atoms to expansion.
struct PgcResponseModel {
  PhysicalConstants constants;
  double temperature_floor = 0.4e-6;  // [K]
  double heating = 0.5;
  double cold_loss = 1.5;
  double cold_scale = 0.8e-6;     // [K]
  double hot_loss = 0.15e6;       // per kelvin
  double relight_loss = 0.3;
  double relight_optimum = 0.8;   // [ms]
  double power_loss = 0.3;
  double power_reference = 2.0;   // [mW/cm^2]
  double step_loss = 0.5;
  double loss_time = 40.0;        // [ms]
  double noise_rel = 0.03;
};

void check_model(const PgcResponseModel& model);

struct PgcOutcome {
  double temperature = 0.0;  // noiseless equilibrium [K]
  double retention = 1.0;
};

// Noiseless PGC response for effective P1..P6.
PgcOutcome pgc_response(const PgcResponseModel& model, std::span<const double> effective);

CloudState run_pgc(const ParameterSpace& space, const CloudState& cloud, const Setting& inputs,
                   const PgcResponseModel& model, std::span<const FaultSpec> faults, std::uint64_t seed);

}  // namespace qcp::sim
