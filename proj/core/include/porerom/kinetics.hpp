#pragma once

#include "porerom/grid.hpp"

namespace porerom {

// Material and kinetic constants of the pore-scale cell model, CGS units
// (cm, s, mol, A, V, K).
struct PhysicalConstants {
  double D_e = 1.622e-6;      // electrolyte interdiffusion [cm^2/s]
  double kappa = 0.02;        // electrolyte ion conductivity [S/cm]
  double t_plus = 0.39989;    // transference number
  double R = 8.314;           // [J/(mol K)]
  double F = 96487.0;         // [As/mol]
  double temperature = 298.0; // [K]
  double D_s = 1e-10;         // solid diffusion [cm^2/s]
  double sigma_neg = 10.0;    // neg electrode and collector [S/cm]
  double sigma_pos = 0.38;    // pos electrode and collector [S/cm]
  double c_max_neg = 24681e-6;  // [mol/cm^3]
  double c_max_pos = 23671e-6;
  double k_neg = 0.002;       // [A cm^2.5 / mol^1.5]
  double k_pos = 0.2;

  // Throws DomainError unless every constant is positive and t_plus in (0,1).
  void validate() const;

  double c_max(ElectrodeSide side) const { return side == ElectrodeSide::Neg ? c_max_neg : c_max_pos; }
  double rate(ElectrodeSide side) const { return side == ElectrodeSide::Neg ? k_neg : k_pos; }
  // F / (2 R T) [1/V]
  double sinh_scale() const { return F / (2.0 * R * temperature); }
  // kappa (1 - t_plus) R T / F, coefficient of (1/c) grad c in the
  // electrolyte current [A/cm]
  double log_conc_coefficient() const { return kappa * (1.0 - t_plus) * R * temperature / F; }

  // stable hash of all values, for cache keys
  std::uint64_t hash() const;
};

// Open circuit potential U0(s) [V] with its derivative dU0/ds.
struct OcpValue {
  double value;
  double derivative;
};

// Neg: -0.132 + 1.41 exp(-3.52 s). Pos: the tanh / power / exponential fit.
// Throws DomainError unless 0 < s < 1 (pos additionally needs s < 1.00167).
// The neg branch is also evaluated at the closed end s = 0 and s = 1.
OcpValue open_circuit_potential(double s, ElectrodeSide side);

struct ButlerVolmerResult {
  double j;        // current density from electrode into electrolyte [A/cm^2]
  double N;        // ion flux j / F [mol/(cm^2 s)]
  bool clamped;    // sinh argument hit the +-50 clamp
  // partial derivatives of j with respect to c_e, c_s, phi_e, phi_s
  double dj_dce;
  double dj_dcs;
  double dj_dphie;
  double dj_dphis;
  double du0_dcs;  // slope of the open circuit potential in c_s
};

inline constexpr double kSinhClamp = 50.0;
inline constexpr double kConcentrationFloor = 1e-12;

// j = 2 k sqrt(c_e c_s (c_max - c_s)) sinh((phi_s - phi_e - U0(c_s/c_max)) F / (2RT)).
// Throws DomainError unless c_e > 0 and 0 < c_s < c_max.
ButlerVolmerResult butler_volmer(double c_e, double c_s, double phi_e, double phi_s,
                                 ElectrodeSide side, const PhysicalConstants& k);

// Overpotential argument of the sinh, unclamped.
double butler_volmer_argument(double c_s, double phi_e, double phi_s, ElectrodeSide side,
                              const PhysicalConstants& k);

}  // namespace porerom
