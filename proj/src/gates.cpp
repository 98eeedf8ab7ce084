#include "epsim/gates.hpp"

#include <cmath>

namespace epsim {

CMatrix qubit_rotation(Axis axis, double angle) {
  const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
  CMatrix r(2, 2);
  if (axis == Axis::X)
    r << c, cplx(0, -s), cplx(0, -s), c;
  else
    r << c, -s, s, c;
  return r;
}

CMatrix rotation(int dim, Axis axis, double angle, const Encoding* enc) {
  if (enc == nullptr) {
    if (dim != 2) throw ConfigError("rotation on a " + std::to_string(dim) + "-level mode needs a declared encoding");
    return qubit_rotation(axis, angle);
  }
  if (enc->cavity_dim() != dim) throw ConfigError("rotation: encoding truncation does not match the mode");
  const CMatrix v = enc->isometry();
  return CMatrix::Identity(dim, dim) - v * v.adjoint() + v * qubit_rotation(axis, angle) * v.adjoint();
}

CMatrix dispersive_cz(double chi_mhz, double duration_ns, int cavity_dim) {
  if (!(chi_mhz > 0)) throw ConfigError("dispersive_cz: chi must be positive");
  if (duration_ns < 0) throw ConfigError("dispersive_cz: negative duration");
  const double t_us = 1e-3 * duration_ns;
  CMatrix u = CMatrix::Zero(2 * cavity_dim, 2 * cavity_dim);
  for (int n = 0; n < cavity_dim; ++n) {
    u(2 * n, 2 * n) = 1.0;
    u(2 * n + 1, 2 * n + 1) = std::polar(1.0, -kTwoPi * chi_mhz * n * t_us);
  }
  return u;
}

double cz_duration_ns(double chi_mhz, const Encoding& enc) {
  if (!(chi_mhz > 0)) throw ConfigError("cz_duration_ns: chi must be positive");
  return 1e3 / (2.0 * chi_mhz * enc.photon_spacing());
}

namespace {

CMatrix s_gate(bool dagger) {
  CMatrix s = CMatrix::Identity(2, 2);
  s(1, 1) = dagger ? cplx(0, -1) : cplx(0, 1);
  return s;
}

}  // namespace

CMatrix cnot_pre_rotation() { return qubit_rotation(Axis::X, kPi / 2) * s_gate(false); }
CMatrix cnot_post_rotation() { return s_gate(true) * qubit_rotation(Axis::X, -kPi / 2); }

CMatrix logical_cnot(const Encoding& enc) {
  const int d = enc.cavity_dim();
  // chi drops out: only chi*T matters, fix chi = 1 MHz.
  const CMatrix cz = dispersive_cz(1.0, cz_duration_ns(1.0, enc), d);
  const Dims dims{d, 2};
  return embed(cnot_post_rotation(), dims, {1}) * cz * embed(cnot_pre_rotation(), dims, {1});
}

CMatrix swap_transmon_cavity(const Encoding& enc) {
  const int d = enc.cavity_dim();
  const CMatrix v = enc.isometry();
  const CMatrix pc = v * v.adjoint();
  CMatrix u = CMatrix::Identity(2 * d, 2 * d);
  // subtract the projector onto qubit (x) code space
  for (int q = 0; q < 2; ++q) u.block(q * d, q * d, d, d) -= pc;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      // |b>|a_L> <a|<b_L|
      CVector out = CVector::Zero(2 * d), in = CVector::Zero(2 * d);
      out.segment(b * d, d) = v.col(a);
      in.segment(a * d, d) = v.col(b);
      u += out * in.adjoint();
    }
  return u;
}

CMatrix vacuum_to_code_frame(const Encoding& enc) {
  const int d = enc.cavity_dim();
  CMatrix u = CMatrix::Identity(d, d);
  if (enc.kind() == CodeKind::Binomial) {
    const double r = 1.0 / std::sqrt(2.0);
    u(0, 0) = r;
    u(4, 0) = r;
    u(0, 4) = r;
    u(4, 4) = -r;
  }
  return u;
}

}  // namespace epsim
