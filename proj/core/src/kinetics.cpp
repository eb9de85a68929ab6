#include "porerom/kinetics.hpp"

#include "porerom/errors.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace porerom {

void PhysicalConstants::validate() const {
  const double values[] = {D_e, kappa, t_plus, R, F, temperature, D_s, sigma_neg, sigma_pos,
                           c_max_neg, c_max_pos, k_neg, k_pos};
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("physical constants must be positive");
  }
  if (!(t_plus < 1.0)) throw DomainError("transference number must lie in (0, 1)");
}

std::uint64_t PhysicalConstants::hash() const {
  const double values[] = {D_e, kappa, t_plus, R, F, temperature, D_s, sigma_neg, sigma_pos,
                           c_max_neg, c_max_pos, k_neg, k_pos};
  std::uint64_t h = 1469598103934665603ull;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ull;
    }
  }
  return h;
}

OcpValue open_circuit_potential(double s, ElectrodeSide side) {
  if (side == ElectrodeSide::Neg) {
    if (!(s >= 0.0 && s <= 1.0)) {
      std::ostringstream os;
      os << "neg open circuit potential: stoichiometry " << s << " outside [0, 1]";
      throw DomainError(os.str());
    }
    const double e = 1.41 * std::exp(-3.52 * s);
    return {-0.132 + e, -3.52 * e};
  }
  if (!(s > 0.0 && s < 1.0)) {
    std::ostringstream os;
    os << "pos open circuit potential: stoichiometry " << s << " outside (0, 1)";
    throw DomainError(os.str());
  }
  const double th = std::tanh(-21.8502 * s + 12.8268);
  const double base = 1.00167 - s;
  const double pw = std::pow(base, -0.379571);
  const double s2 = s * s;
  const double s7 = s2 * s2 * s2 * s;
  const double e8 = std::exp(-71.69 * s7 * s);
  const double e200 = std::exp(-200.0 * (s - 0.19));
  const double value = 0.0677504 * th - 0.105734 * (pw - 1.576) - 0.045 * e8 + 0.01 * e200 + 4.06279;
  const double derivative = 0.0677504 * (1.0 - th * th) * -21.8502
                            - 0.105734 * 0.379571 * pw / base
                            + 0.045 * 71.69 * 8.0 * s7 * e8
                            - 2.0 * e200;
  return {value, derivative};
}

double butler_volmer_argument(double c_s, double phi_e, double phi_s, ElectrodeSide side,
                              const PhysicalConstants& k) {
  const double u0 = open_circuit_potential(c_s / k.c_max(side), side).value;
  return (phi_s - phi_e - u0) * k.sinh_scale();
}

ButlerVolmerResult butler_volmer(double c_e, double c_s, double phi_e, double phi_s,
                                 ElectrodeSide side, const PhysicalConstants& k) {
  const double c_max = k.c_max(side);
  if (!(c_e > 0.0) || !(c_s > 0.0) || !(c_s < c_max)) {
    std::ostringstream os;
    os << "Butler-Volmer: concentrations out of range (c_e = " << c_e << ", c_s = " << c_s << ")";
    throw DomainError(os.str());
  }
  const OcpValue u0 = open_circuit_potential(c_s / c_max, side);
  const double scale = k.sinh_scale();
  double arg = (phi_s - phi_e - u0.value) * scale;
  bool clamped = false;
  if (arg > kSinhClamp) {
    arg = kSinhClamp;
    clamped = true;
  } else if (arg < -kSinhClamp) {
    arg = -kSinhClamp;
    clamped = true;
  }
  const double prod = c_e * c_s * (c_max - c_s);
  const double root = std::sqrt(prod);
  const double pre = 2.0 * k.rate(side) * root;
  const double sh = std::sinh(arg);
  const double ch = clamped ? 0.0 : std::sqrt(1.0 + sh * sh);  // cosh

  ButlerVolmerResult r;
  r.j = pre * sh;
  r.N = r.j / k.F;
  r.clamped = clamped;
  // d sqrt(p)/dx = p_x / (2 sqrt p)
  const double dpre_dce = 2.0 * k.rate(side) * (c_s * (c_max - c_s)) / (2.0 * root);
  const double dpre_dcs = 2.0 * k.rate(side) * (c_e * (c_max - 2.0 * c_s)) / (2.0 * root);
  r.dj_dce = dpre_dce * sh;
  r.dj_dcs = dpre_dcs * sh - pre * ch * scale * u0.derivative / c_max;
  r.dj_dphis = pre * ch * scale;
  r.dj_dphie = -r.dj_dphis;
  r.du0_dcs = u0.derivative / c_max;
  return r;
}

}  // namespace porerom
