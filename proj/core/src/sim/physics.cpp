#include "qcopilot/sim/physics.hpp"

#include <cmath>

#include "qcopilot/error.hpp"

namespace qcp::sim {

void check_constants(const PhysicalConstants& c) {
  const double pos[] = {c.hbar_k, c.gamma, c.i_sat, c.mu_b, c.mass, c.k, c.kb};
  for (double v : pos)
    if (!(v > 0.0) || !std::isfinite(v)) throw SpecError("physical constants must be finite and positive");
  if (c.g_factor == 0.0 || !std::isfinite(c.g_factor)) throw SpecError("g_factor must be finite and nonzero");
}

double damping_coefficient(const PhysicalConstants& c, double i_cool, double detuning) {
  const double x = 2.0 * detuning / c.gamma;
  const double lorentz = 1.0 + x * x;
  return 4.0 * c.hbar_k * c.k * (i_cool / c.i_sat) * (-x) / (lorentz * lorentz);
}

double spring_constant(const PhysicalConstants& c, double i_cool, double detuning, double dbdz) {
  return damping_coefficient(c, i_cool, detuning) * (c.g_factor * c.mu_b / c.hbar_k) * dbdz;
}

double mot_force(const PhysicalConstants& c, double v, double z, double i_cool, double detuning, double dbdz) {
  for (double a : {v, z, i_cool, detuning, dbdz})
    if (!std::isfinite(a)) throw DomainError("mot_force: non-finite input");
  if (i_cool < 0.0) throw DomainError("mot_force: negative intensity");
  if (dbdz < 0.0) throw DomainError("mot_force: negative field gradient");
  return -damping_coefficient(c, i_cool, detuning) * v - spring_constant(c, i_cool, detuning, dbdz) * z;
}

double doppler_temperature(const PhysicalConstants& c, double i_cool, double detuning) {
  const double x = std::abs(2.0 * detuning / c.gamma);
  const double s0 = i_cool / c.i_sat;
  const double hbar_gamma = c.hbar() * c.gamma;
  return hbar_gamma / 4.0 * (1.0 + s0 + x * x) / std::max(x, 1e-9) / c.kb;
}

}  // namespace qcp::sim
