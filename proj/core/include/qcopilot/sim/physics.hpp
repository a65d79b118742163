#pragma once

namespace qcp::sim {

// Rb-87 D2 line defaults.
struct PhysicalConstants {
  double hbar_k = 8.4923355287e-28;  // photon momentum [kg m/s]
  double gamma = 3.8117571985e7;     // natural linewidth [rad/s]
  double i_sat = 1.669;              // saturation intensity [mW/cm^2]
  double mu_b = 9.2740100783e-24;    // Bohr magneton [J/T]
  double g_factor = 1.0;             // g_F' M_F' - g_F M_F
  double mass = 1.443160648e-25;     // [kg]
  double k = 8.0528754816e6;         // wavenumber [1/m]
  double kb = 1.380649e-23;          // [J/K]

  double hbar() const { return hbar_k / k; }
};

// Throws SpecError unless every constant is strictly positive (g_factor nonzero).
void check_constants(const PhysicalConstants& c);

// Velocity coefficient of the MOT force law: F = -beta v - kappa z. Positive for red detuning.
double damping_coefficient(const PhysicalConstants& c, double i_cool, double detuning);
// Position coefficient: beta * (g mu_B / hbar k) * dB/dz.
double spring_constant(const PhysicalConstants& c, double i_cool, double detuning, double dbdz);

// Radiation force on an atom at velocity v [m/s] and position z [m] in a 1-D MOT with cooling
// intensity i_cool [mW/cm^2], detuning [rad/s] and field gradient dbdz [T/m].
// Throws DomainError on non-finite input, negative intensity or negative gradient.
double mot_force(const PhysicalConstants& c, double v, double z, double i_cool, double detuning, double dbdz);

// Doppler-limited temperature [K] including power broadening.
double doppler_temperature(const PhysicalConstants& c, double i_cool, double detuning);

}  // namespace qcp::sim
