#include "epsim/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

namespace epsim {

namespace {

SparseC to_sparse(const CMatrix& m) {
  SparseC s = m.sparseView(1.0, 1e-300);
  s.makeCompressed();
  return s;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

double ns_to_us(double t_ns) { return 1e-3 * t_ns; }

}  // namespace

Dims HamiltonianSpec::dims() const {
  if (device == nullptr) throw ConfigError("HamiltonianSpec has no device");
  return device->dims_of(active_modes);
}

int HamiltonianSpec::local_index(int device_mode) const {
  auto it = std::find(active_modes.begin(), active_modes.end(), device_mode);
  if (it == active_modes.end()) throw ConfigError("mode " + std::to_string(device_mode) + " is not active");
  return static_cast<int>(it - active_modes.begin());
}

void HamiltonianSpec::validate() const {
  if (device == nullptr) throw ConfigError("HamiltonianSpec has no device");
  if (active_modes.empty()) throw ConfigError("HamiltonianSpec has no active modes");
  for (std::size_t i = 0; i < active_modes.size(); ++i) {
    if (active_modes[i] < 0 || active_modes[i] >= device->size()) throw ConfigError("active mode out of range");
    for (std::size_t j = i + 1; j < active_modes.size(); ++j)
      if (active_modes[i] == active_modes[j]) throw ConfigError("active mode listed twice");
  }
  for (const auto& d : drives) {
    local_index(d.mode);
    if (!d.envelope) throw ConfigError("drive on mode " + std::to_string(d.mode) + " has no envelope");
  }
  for (const auto& [m, off] : frequency_offsets) local_index(m);
}

void IntegratorConfig::validate() const {
  if (!(dt_ns > 0)) throw ConfigError("integrator dt must be positive");
  if (method == IntegrationMethod::Adaptive && !(max_step_error > 0))
    throw ConfigError("adaptive integrator needs a positive max_step_error");
}

namespace {

// Static Hermitian part (rad/us): self-Kerr, cross-Kerr, detunings, offsets.
CMatrix static_hamiltonian(const HamiltonianSpec& spec) {
  spec.validate();
  const Dims dims = spec.dims();
  const auto n = static_cast<Eigen::Index>(total_dimension(dims));
  CMatrix h = CMatrix::Zero(n, n);
  const auto& dev = *spec.device;
  const int k = static_cast<int>(spec.active_modes.size());

  for (int i = 0; i < k; ++i) {
    const ModeSpec& m = dev.mode(spec.active_modes[i]);
    if (spec.include_self_kerr && m.self_kerr_mhz != 0.0 && dims[i] > 2) {
      const CMatrix a = destroy(dims[i]);
      const CMatrix ad = a.adjoint();
      h += kTwoPi * m.self_kerr_mhz * embed(ad * ad * a * a, dims, {i});
    }
  }
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double chi = dev.chi_mhz(spec.active_modes[i], spec.active_modes[j]);
      if (chi == 0.0) continue;
      h += kTwoPi * chi * embed(number_op(dims[i]), dims, {i}) * embed(number_op(dims[j]), dims, {j});
    }
  for (const auto& d : spec.drives) {
    if (d.detuning_mhz == 0.0) continue;
    const int li = spec.local_index(d.mode);
    h += kTwoPi * d.detuning_mhz * embed(number_op(dims[li]), dims, {li});
  }
  for (const auto& [mode, off] : spec.frequency_offsets) {
    const int li = spec.local_index(mode);
    h += kTwoPi * off * embed(number_op(dims[li]), dims, {li});
  }
  return h;
}

}  // namespace

CMatrix build_hamiltonian(const HamiltonianSpec& spec, double t_ns) {
  CMatrix h = static_hamiltonian(spec);
  const Dims dims = spec.dims();
  for (const auto& d : spec.drives) {
    const int li = spec.local_index(d.mode);
    const CMatrix raise = embed(destroy(dims[li]).adjoint(), dims, {li});
    const cplx eps = kTwoPi * d.envelope(t_ns);
    h += eps * raise + std::conj(eps) * raise.adjoint();
  }
  return h;
}

std::vector<SparseC> collapse_operators(const HamiltonianSpec& spec) {
  std::vector<SparseC> out;
  if (!spec.noise.decoherence) return out;
  const Dims dims = spec.dims();
  for (std::size_t i = 0; i < spec.active_modes.size(); ++i) {
    const ModeSpec& m = spec.device->mode(spec.active_modes[i]);
    const int li = static_cast<int>(i);
    const double nth = spec.noise.thermal ? m.n_th : 0.0;
    const CMatrix a = destroy(dims[li]);
    out.push_back(to_sparse(std::sqrt((1.0 + nth) / m.t1_us) * embed(a, dims, {li})));
    if (nth > 0) out.push_back(to_sparse(std::sqrt(nth / m.t1_us) * embed(a.adjoint(), dims, {li})));
    const double gphi = m.pure_dephasing_rate();
    if (gphi > 0) out.push_back(to_sparse(std::sqrt(2.0 * gphi) * embed(number_op(dims[li]), dims, {li})));
  }
  return out;
}

// ---- Lindbladian ----------------------------------------------------------

Lindbladian::Lindbladian(const HamiltonianSpec& spec) {
  const CMatrix h = static_hamiltonian(spec);
  dim_ = static_cast<std::size_t>(h.rows());
  h_static_herm_ = to_sparse(h);
  jumps_ = collapse_operators(spec);
  CMatrix heff = h;
  for (const auto& l : jumps_) heff -= cplx(0, 0.5) * CMatrix(SparseC(l.adjoint()) * l);
  h_static_ = to_sparse(heff);
  const Dims dims = spec.dims();
  for (const auto& d : spec.drives) {
    const int li = spec.local_index(d.mode);
    DriveTerm term;
    term.raise = to_sparse(embed(destroy(dims[li]).adjoint(), dims, {li}));
    auto env = d.envelope;
    term.envelope = [env](double t_ns) { return kTwoPi * env(t_ns); };
    term.detuning = kTwoPi * d.detuning_mhz;
    drives_.push_back(std::move(term));
  }
}

double Lindbladian::reference_energy(double t_us) const {
  double e = 0.0;
  for (const auto& d : drives_)
    if (d.detuning != 0.0) e -= std::norm(d.envelope(1e3 * t_us)) / d.detuning;
  return e;
}

CMatrix Lindbladian::rhs(double t_us, const CMatrix& rho) const {
  // -i (Heff rho - rho Heff^dag) + sum L rho L^dag, drives folded into Heff.
  CMatrix left = h_static_ * rho;
  for (const auto& d : drives_) {
    const cplx eps = d.envelope(1e3 * t_us);
    if (eps == cplx(0.0)) continue;
    left.noalias() += eps * (d.raise * rho);
    left.noalias() += std::conj(eps) * (d.raise.adjoint() * rho);
  }
  // rho Heff^dag = (Heff rho^dag)^dag; rho is Hermitian up to integration error
  // but the general form keeps the map exact for any input.
  CMatrix right = h_static_ * rho.adjoint();
  for (const auto& d : drives_) {
    const cplx eps = d.envelope(1e3 * t_us);
    if (eps == cplx(0.0)) continue;
    right.noalias() += eps * (d.raise * rho.adjoint());
    right.noalias() += std::conj(eps) * (d.raise.adjoint() * rho.adjoint());
  }
  CMatrix out = cplx(0, -1) * (left - right.adjoint());
  for (const auto& l : jumps_) {
    const CMatrix lr = l * rho;
    out.noalias() += (l * lr.adjoint()).adjoint();
  }
  return out;
}

CVector Lindbladian::schrodinger_rhs(double t_us, const CVector& psi) const {
  CVector hpsi = h_static_herm_ * psi - reference_energy(t_us) * psi;
  for (const auto& d : drives_) {
    const cplx eps = d.envelope(1e3 * t_us);
    if (eps == cplx(0.0)) continue;
    hpsi.noalias() += eps * (d.raise * psi);
    hpsi.noalias() += std::conj(eps) * (d.raise.adjoint() * psi);
  }
  return cplx(0, -1) * hpsi;
}

namespace {

template <class State, class Rhs>
State rk4_step(const Rhs& f, double t, const State& y, double h) {
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * h, y + (0.5 * h) * k1);
  const State k3 = f(t + 0.5 * h, y + (0.5 * h) * k2);
  const State k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class State, class Rhs>
State integrate(const Rhs& f, State y, double t0_us, double duration_us, const IntegratorConfig& cfg) {
  if (duration_us <= 0) return y;
  const double dt = ns_to_us(cfg.dt_ns);
  if (cfg.method == IntegrationMethod::Rk4) {
    const auto steps = std::max<long>(1, static_cast<long>(std::ceil(duration_us / dt - 1e-9)));
    const double h = duration_us / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) y = rk4_step(f, t0_us + h * s, y, h);
    return y;
  }
  // Step doubling with Richardson extrapolation.
  double t = t0_us;
  const double t_end = t0_us + duration_us;
  double h = dt;
  int rejections = 0;
  while (t < t_end - 1e-15) {
    h = std::min(h, t_end - t);
    const State full = rk4_step(f, t, y, h);
    const State half = rk4_step(f, t + 0.5 * h, rk4_step(f, t, y, 0.5 * h), 0.5 * h);
    const double err = (half - full).cwiseAbs().maxCoeff() / 15.0;
    if (err <= cfg.max_step_error || h < 1e-9) {
      y = half + (half - full) / 15.0;
      t += h;
      rejections = 0;
      const double grow = err > 0 ? 0.9 * std::pow(cfg.max_step_error / err, 0.2) : 2.0;
      h *= std::clamp(grow, 0.2, 2.0);
    } else {
      h *= std::clamp(0.9 * std::pow(cfg.max_step_error / err, 0.2), 0.1, 0.9);
      if (++rejections > 60) throw NumericalError("adaptive integrator failed to converge");
    }
  }
  return y;
}

}  // namespace

DensityMatrix lindblad_evolve(const DensityMatrix& rho, const Lindbladian& lv, double duration_ns,
                              const IntegratorConfig& cfg, double t0_ns) {
  cfg.validate();
  if (duration_ns < 0) throw ConfigError("evolution duration must be non-negative");
  if (rho.dimension() != lv.dimension()) throw ConfigError("state dimension does not match Hamiltonian");
  if (duration_ns == 0) return rho;
  auto f = [&lv](double t, const CMatrix& r) { return lv.rhs(t, r); };
  CMatrix out = integrate<CMatrix>(f, rho.matrix(), ns_to_us(t0_ns), ns_to_us(duration_ns), cfg);
  const cplx drift = out.trace() - rho.trace();
  if (!(std::abs(drift) <= 1e-6))
    throw NumericalError("integrator trace drift " + std::to_string(std::abs(drift)) + " exceeds 1e-6");
  return DensityMatrix(0.5 * (out + out.adjoint()), rho.dims());
}

DensityMatrix lindblad_evolve(const DensityMatrix& rho, const HamiltonianSpec& spec, double duration_ns,
                              const IntegratorConfig& cfg, double t0_ns) {
  if (rho.dims() != spec.dims()) throw ConfigError("state space does not match active modes");
  return lindblad_evolve(rho, Lindbladian(spec), duration_ns, cfg, t0_ns);
}

PureState schrodinger_evolve(const PureState& psi, const Lindbladian& lv, double duration_ns,
                             const IntegratorConfig& cfg, double t0_ns) {
  cfg.validate();
  if (duration_ns < 0) throw ConfigError("evolution duration must be non-negative");
  if (duration_ns == 0) return psi;
  auto f = [&lv](double t, const CVector& v) { return lv.schrodinger_rhs(t, v); };
  const double t0 = ns_to_us(t0_ns), dur = ns_to_us(duration_ns);
  CVector out = integrate<CVector>(f, psi.amplitudes(), t0, dur, cfg);
  // restore exp(-i int c dt), composite Simpson on a fine grid
  const int pieces = 2 * std::max(1, static_cast<int>(std::ceil(dur / ns_to_us(0.25 * cfg.dt_ns))));
  double phase = 0.0;
  for (int k = 0; k <= pieces; ++k) {
    const double w = (k == 0 || k == pieces) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    phase += w * lv.reference_energy(t0 + dur * k / pieces);
  }
  out *= std::polar(1.0, -phase * dur / (3.0 * pieces));
  const double drift = std::abs(out.squaredNorm() - 1.0);
  if (!(drift <= 1e-6)) throw NumericalError("integrator norm drift " + std::to_string(drift) + " exceeds 1e-6");
  out.normalize();
  return PureState(out, psi.dims());
}

PureState schrodinger_evolve(const PureState& psi, const HamiltonianSpec& spec, double duration_ns,
                             const IntegratorConfig& cfg, double t0_ns) {
  if (psi.dims() != spec.dims()) throw ConfigError("state space does not match active modes");
  return schrodinger_evolve(psi, Lindbladian(spec), duration_ns, cfg, t0_ns);
}

// ---- idle channel ---------------------------------------------------------

CMatrix mode_liouvillian(const ModeSpec& mode, int dim, const NoiseModel& noise) {
  const auto d2 = static_cast<Eigen::Index>(dim) * dim;
  CMatrix gen = CMatrix::Zero(d2, d2);
  if (!noise.decoherence) return gen;
  const CMatrix id = CMatrix::Identity(dim, dim);
  const double nth = noise.thermal ? mode.n_th : 0.0;
  std::vector<CMatrix> ls;
  const CMatrix a = destroy(dim);
  ls.push_back(std::sqrt((1.0 + nth) / mode.t1_us) * a);
  if (nth > 0) ls.push_back(std::sqrt(nth / mode.t1_us) * a.adjoint());
  const double gphi = mode.pure_dephasing_rate();
  if (gphi > 0) ls.push_back(std::sqrt(2.0 * gphi) * number_op(dim));
  for (const auto& l : ls) {
    const CMatrix ldl = l.adjoint() * l;
    gen += kron(l.conjugate(), l) - 0.5 * kron(id, ldl) - 0.5 * kron(ldl.transpose(), id);
  }
  return gen;
}

CMatrix idle_superoperator(const ModeSpec& mode, int dim, double duration_us, const NoiseModel& noise) {
  if (duration_us < 0) throw ConfigError("idle duration must be non-negative");
  const auto d2 = static_cast<Eigen::Index>(dim) * dim;
  if (duration_us == 0 || !noise.decoherence) return CMatrix::Identity(d2, d2);
  const CMatrix gen = mode_liouvillian(mode, dim, noise) * duration_us;
  return gen.exp();
}

DensityMatrix idle_channel(const DensityMatrix& rho, int mode, const ModeSpec& spec, double duration_us,
                           const NoiseModel& noise) {
  if (mode < 0 || mode >= static_cast<int>(rho.num_modes())) throw ConfigError("idle_channel: mode out of range");
  if (duration_us == 0 || !noise.decoherence) return rho;
  const int dim = rho.dims()[mode];
  return apply_mode_superoperator(rho, idle_superoperator(spec, dim, duration_us, noise), mode);
}

}  // namespace epsim
