#include <algorithm>
#include <cmath>
#include <limits>

#include "epsim/gates.hpp"
#include "epsim/parallel.hpp"

namespace epsim {

void CipParams::validate() const {
  if (delta_mhz == 0.0 || !std::isfinite(delta_mhz)) throw ConfigError("CIP detuning must be nonzero");
  if (!(tau_ns > 0)) throw ConfigError("CIP duration must be positive");
  if (!(amp_mhz >= 0)) throw ConfigError("CIP amplitude must be non-negative");
}

double cip_envelope(const CipParams& p, double t_ns, PulseShape shape) {
  if (t_ns < 0 || t_ns > p.tau_ns) return 0.0;
  const double x = (t_ns - 0.5 * p.tau_ns) / p.tau_ns;
  const double g = std::exp(-8.0 * x * x);
  if (shape == PulseShape::Truncated) return p.amp_mhz * g;
  const double edge = std::exp(-2.0);
  return p.amp_mhz * (g - edge) / (1.0 - edge);
}

double wrap_phase(double x) {
  double y = std::fmod(x + kPi, kTwoPi);
  if (y <= 0) y += kTwoPi;
  return y - kPi;
}

double EchoResult::combined_phase() const { return wrap_phase(phases[0] + phases[1] - phases[2]); }

CipSystem CipSystem::from_device(const DeviceGraph& dev, int bus_dim, NoiseModel noise, const std::string& q1,
                                 const std::string& bus, const std::string& q2, const std::string& s1,
                                 const std::string& s2) {
  CipSystem sys;
  sys.device = dev.with_dimension(bus, bus_dim);
  sys.qubit1 = dev.index_of(q1);
  sys.bus = dev.index_of(bus);
  sys.qubit2 = dev.index_of(q2);
  sys.storage1 = s1.empty() ? -1 : dev.index_of(s1);
  sys.storage2 = s2.empty() ? -1 : dev.index_of(s2);
  if (dev.mode(sys.qubit1).dimension != 2 || dev.mode(sys.qubit2).dimension != 2)
    throw ConfigError("CIP qubits must be two-level modes");
  sys.noise = noise;
  return sys;
}

Dims CipSystem::dims() const { return device.dims_of({qubit1, bus, qubit2}); }

HamiltonianSpec CipSystem::hamiltonian(const CipParams& p, StoragePhotons n) const {
  p.validate();
  HamiltonianSpec spec;
  spec.device = &device;
  spec.active_modes = {qubit1, bus, qubit2};
  const PulseShape sh = shape;
  spec.drives.push_back({bus, [p, sh](double t) { return cplx(cip_envelope(p, t, sh), 0.0); }, p.delta_mhz});
  if (n.n1 != 0) spec.frequency_offsets.emplace_back(qubit1, chi_q1_storage() * n.n1);
  if (n.n2 != 0) spec.frequency_offsets.emplace_back(qubit2, chi_q2_storage() * n.n2);
  spec.noise = noise;
  return spec;
}

namespace {

// Flip on both qubits of (Y1, S2, Y2), or on (Y1, Y2) of a two-qubit space.
CMatrix both_flips() {
  const CMatrix x = qubit_rotation(Axis::X, kPi);
  CMatrix out(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block(2 * i, 2 * j, 2, 2) = x(i, j) * x;
  return out;
}

int flip_state(int s) { return 3 - s; }

}  // namespace

DensityMatrix cip_evolve(const DensityMatrix& rho, const CipSystem& sys, const CipParams& p,
                         const IntegratorConfig& cfg, StoragePhotons n) {
  return lindblad_evolve(rho, sys.hamiltonian(p, n), p.tau_ns, cfg);
}

double bus_photons(const DensityMatrix& rho, const CipSystem& sys) {
  const DensityMatrix b = partial_trace(rho, {1});
  return (number_op(sys.bus_dim()) * b.matrix()).trace().real();
}

std::array<double, 3> echo_phases(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg,
                                  StoragePhotons n) {
  const Lindbladian lv(sys.hamiltonian(p, n));
  const Dims dims = sys.dims();
  const CMatrix flips = both_flips();
  // qubit basis state s with the bus in vacuum
  auto index = [&](int s) { return static_cast<Eigen::Index>((s / 2) * dims[1] * 2 + (s % 2)); };
  std::array<double, 4> first{}, second{};
  for (int s = 0; s < 4; ++s) {
    PureState psi = PureState::basis(dims, {s / 2, 0, s % 2});
    psi = schrodinger_evolve(psi, lv, p.tau_ns, cfg);
    first[s] = std::arg(psi.amplitudes()(index(s)));
    psi = apply_unitary(psi, flips, {0, 2});
    psi = schrodinger_evolve(psi, lv, p.tau_ns, cfg);
    const int f = flip_state(s);
    const double total = std::arg(psi.amplitudes()(index(f)));
    // the flips contribute (-i)^2 = -1 to every branch
    second[f] = wrap_phase(total - first[s] - kPi);
  }
  // gg=0, ge=1, eg=2, ee=3
  return {wrap_phase(first[1] - first[0]), wrap_phase(second[2] - first[0]), wrap_phase(second[3] - first[0])};
}

std::pair<DensityMatrix, EchoResult> echoed_cip(const DensityMatrix& rho, const CipSystem& sys,
                                                const CipParams& p, const IntegratorConfig& cfg,
                                                StoragePhotons n, bool flips) {
  if (rho.dims() != sys.dims()) throw ConfigError("echoed_cip: expected a state over (Y1, bus, Y2)");
  const Lindbladian lv(sys.hamiltonian(p, n));
  DensityMatrix out = lindblad_evolve(rho, lv, p.tau_ns, cfg);
  if (flips) out = apply_unitary(out, both_flips(), {0, 2});
  out = lindblad_evolve(out, lv, p.tau_ns, cfg);

  EchoResult res;
  res.phases = echo_phases(sys, p, cfg, n);
  const DensityMatrix q = partial_trace(out, {0, 2});
  res.p_gg = std::clamp(q.matrix()(0, 0).real(), 0.0, 1.0);
  res.residual_photons = std::max(0.0, bus_photons(out, sys));
  res.adiabatic = res.residual_photons <= kAdiabaticPhotonThreshold;
  return {out, res};
}

DensityMatrix cip_input_state(const CipSystem& sys) {
  const Dims dims = sys.dims();
  const CMatrix ry = qubit_rotation(Axis::Y, kPi / 2);
  PureState psi = PureState::basis(dims, {0, 0, 0});
  psi = apply_unitary(psi, ry, {0});
  psi = apply_unitary(psi, ry, {2});
  return DensityMatrix::from_pure(psi);
}

DensityMatrix reentangled_pair(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg,
                               StoragePhotons n) {
  auto [out, res] = echoed_cip(cip_input_state(sys), sys, p, cfg, n);
  (void)res;
  out = apply_unitary(out, qubit_rotation(Axis::X, -kPi / 2), {0});
  return partial_trace(out, {0, 2});
}

CalibrationPoint calibration_point(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg) {
  const Dims dims = sys.dims();
  const Lindbladian lv(sys.hamiltonian(p));
  const CMatrix flips = both_flips();
  CalibrationPoint pt{p.tau_ns, p.amp_mhz, 0.0, 0.0};
  PureState psi0 = apply_unitary(PureState::basis(dims, {0, 0, 0}), qubit_rotation(Axis::Y, kPi / 2), {2});
  DensityMatrix rho;
  if (sys.noise.decoherence) {
    rho = DensityMatrix::from_pure(psi0);
    rho = lindblad_evolve(rho, lv, p.tau_ns, cfg);
    rho = apply_unitary(rho, flips, {0, 2});
    rho = lindblad_evolve(rho, lv, p.tau_ns, cfg);
  } else {
    PureState psi = schrodinger_evolve(psi0, lv, p.tau_ns, cfg);
    psi = apply_unitary(psi, flips, {0, 2});
    psi = schrodinger_evolve(psi, lv, p.tau_ns, cfg);
    rho = DensityMatrix::from_pure(psi);
  }
  pt.residual_photons = std::max(0.0, bus_photons(rho, sys));
  rho = apply_unitary(rho, qubit_rotation(Axis::X, kPi), {0});
  rho = apply_unitary(rho, qubit_rotation(Axis::X, -kPi / 2), {2});
  pt.p_gg = std::clamp(partial_trace(rho, {0, 2}).matrix()(0, 0).real(), 0.0, 1.0);
  return pt;
}

CalibrationResult calibrate_echo(const CipSystem& sys, double delta_mhz, const std::vector<double>& tau_grid_ns,
                                 const std::vector<double>& amp_grid_mhz, const IntegratorConfig& cfg,
                                 int threads) {
  if (tau_grid_ns.empty() || amp_grid_mhz.empty()) throw ConfigError("calibrate_echo: empty grid");
  CalibrationResult res;
  res.surface.resize(tau_grid_ns.size() * amp_grid_mhz.size());
  parallel_for(res.surface.size(), threads, [&](std::size_t k) {
    CipParams p;
    p.delta_mhz = delta_mhz;
    p.tau_ns = tau_grid_ns[k / amp_grid_mhz.size()];
    p.amp_mhz = amp_grid_mhz[k % amp_grid_mhz.size()];
    res.surface[k] = calibration_point(sys, p, cfg);
  });
  const CalibrationPoint* best = nullptr;
  for (const auto& pt : res.surface) {
    if (pt.residual_photons > kAdiabaticPhotonThreshold) continue;
    const bool better = best == nullptr || pt.p_gg > best->p_gg ||
                        (pt.p_gg == best->p_gg &&
                         (pt.tau_ns < best->tau_ns || (pt.tau_ns == best->tau_ns && pt.amp_mhz < best->amp_mhz)));
    if (better) best = &pt;
  }
  if (best == nullptr) throw NumericalError("calibrate_echo: every grid point exceeds the residual-photon threshold");
  res.best = *best;
  res.tau_ns = best->tau_ns;
  res.amp_mhz = best->amp_mhz;

  CipParams p;
  p.delta_mhz = delta_mhz;
  p.tau_ns = best->tau_ns;
  p.amp_mhz = best->amp_mhz;
  try {
    CipParams q = p;
    q.amp_mhz = refine_amplitude(sys, p, cfg);
    if (calibration_point(sys, q, cfg).residual_photons <= kAdiabaticPhotonThreshold) p = q;
  } catch (const NumericalError&) {
  }
  res.amp_mhz = p.amp_mhz;
  EchoResult er;
  er.phases = echo_phases(sys, p, cfg);
  res.phase = er.combined_phase();
  return res;
}

double refine_amplitude(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg, double tol) {
  auto phase = [&](double a) {
    CipParams q = p;
    q.amp_mhz = a;
    EchoResult r;
    r.phases = echo_phases(sys, q, cfg);
    return r.combined_phase() - kPi / 2;
  };
  double lo = 0.0, hi = std::max(p.amp_mhz, 1e-3);
  int expand = 0;
  while (phase(hi) < 0) {
    lo = hi;
    hi *= 1.25;
    if (++expand > 30) throw NumericalError("refine_amplitude: echo phase never reaches pi/2");
  }
  for (int it = 0; it < 60 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phase(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---- bus-eliminated joint gate --------------------------------------------

namespace {

using Mat4 = Eigen::Matrix4cd;

struct QubitNoise {
  std::vector<Mat4> jumps;
  Mat4 decay = Mat4::Zero();  // -1/2 sum L^dag L
};

QubitNoise qubit_noise(const CipSystem& sys) {
  QubitNoise qn;
  if (!sys.noise.decoherence) return qn;
  const int modes[2] = {sys.qubit1, sys.qubit2};
  for (int q = 0; q < 2; ++q) {
    const ModeSpec& m = sys.device.mode(modes[q]);
    const double nth = sys.noise.thermal ? m.n_th : 0.0;
    CMatrix lower = destroy(2), raise = destroy(2).adjoint(), proj = number_op(2);
    std::vector<CMatrix> ls{std::sqrt((1 + nth) / m.t1_us) * lower};
    if (nth > 0) ls.push_back(std::sqrt(nth / m.t1_us) * raise);
    if (m.pure_dephasing_rate() > 0) ls.push_back(std::sqrt(2 * m.pure_dephasing_rate()) * proj);
    for (const auto& l : ls) {
      const Mat4 full = embed(l, {2, 2}, {q});
      qn.jumps.push_back(full);
      qn.decay -= 0.5 * full.adjoint() * full;
    }
  }
  return qn;
}

}  // namespace

JointEchoedCip::JointEchoedCip(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg,
                               double block_dt_ns)
    : sys_(sys), params_(p), cfg_(cfg) {
  p.validate();
  cfg.validate();
  if (!(block_dt_ns > 0)) throw ConfigError("JointEchoedCip: block step must be positive");
  const double tau_us = 1e-3 * p.tau_ns;
  block_steps_ = static_cast<std::size_t>(std::max(1.0, std::ceil(p.tau_ns / block_dt_ns - 1e-9)));
  block_h_us_ = tau_us / static_cast<double>(block_steps_);
  // fine sub-steps per coarse half-step
  const auto sub = static_cast<std::size_t>(std::max(1.0, std::ceil(0.5e3 * block_h_us_ / cfg.dt_ns - 1e-9)));
  const std::size_t fine_n = 2 * block_steps_ * sub;  // fine steps per segment
  const double hf = tau_us / static_cast<double>(fine_n);

  const double chi1 = sys.device.chi_mhz(sys.qubit1, sys.bus);
  const double chi2 = sys.device.chi_mhz(sys.qubit2, sys.bus);
  auto detuning = [&](int s) { return kTwoPi * (p.delta_mhz + chi1 * (s / 2) + chi2 * (s % 2)); };
  auto eps = [&](double t_us) { return kTwoPi * cip_envelope(p, 1e3 * t_us, sys.shape); };

  // Per path: bus amplitude by RK4 on the fine grid, energy eps Re(alpha) at
  // fine points and midpoints, Simpson-accumulated phase at coarse half-steps.
  std::array<std::vector<double>, 4> path_phase, path_photons;
  for (int path = 0; path < 4; ++path) {
    std::vector<double>& ph = path_phase[path];
    std::vector<double>& pn = path_photons[path];
    ph.reserve(2 * (2 * block_steps_ + 1));
    cplx alpha = 0.0;
    double acc = 0.0, acc_n = 0.0;
    for (int seg = 0; seg < 2; ++seg) {
      const double d = detuning(seg == 0 ? path : flip_state(path));
      auto f = [&](double t, cplx a) { return cplx(0, -1) * (d * a + eps(t)); };
      ph.push_back(acc);
      pn.push_back(acc_n);
      for (std::size_t k = 0; k < fine_n; ++k) {
        const double t = hf * static_cast<double>(k);
        const cplx k1 = f(t, alpha);
        const cplx k2 = f(t + 0.5 * hf, alpha + 0.5 * hf * k1);
        const cplx k3 = f(t + 0.5 * hf, alpha + 0.5 * hf * k2);
        const cplx k4 = f(t + hf, alpha + hf * k3);
        // midpoint amplitude from a half step, endpoint from the full step
        const cplx h1 = f(t, alpha);
        const double hh = 0.5 * hf;
        const cplx m2 = f(t + 0.5 * hh, alpha + 0.5 * hh * h1);
        const cplx m3 = f(t + 0.5 * hh, alpha + 0.5 * hh * m2);
        const cplx m4 = f(t + hh, alpha + hh * m3);
        const cplx a_mid = alpha + hh / 6.0 * (h1 + 2.0 * m2 + 2.0 * m3 + m4);
        const cplx a_end = alpha + hf / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        acc += hf / 6.0 * (eps(t) * alpha.real() + 4.0 * eps(t + hh) * a_mid.real() + eps(t + hf) * a_end.real());
        acc_n += hf / 6.0 * (std::norm(alpha) + 4.0 * std::norm(a_mid) + std::norm(a_end));
        alpha = a_end;
        if ((k + 1) % sub == 0) {
          ph.push_back(acc);
          pn.push_back(acc_n);
        }
      }
    }
    final_alpha_[flip_state(path)] = alpha;
  }
  // Re-index by the state occupied at each time.
  const std::size_t per_seg = 2 * block_steps_ + 1;
  auto reindex = [&](const std::array<std::vector<double>, 4>& path, std::array<std::vector<double>, 4>& out) {
    for (int s = 0; s < 4; ++s) {
      out[s].resize(2 * per_seg);
      for (std::size_t j = 0; j < per_seg; ++j) {
        out[s][j] = path[s][j];
        // second segment: continue from this state's own first-segment total
        out[s][per_seg + j] = path[s][per_seg - 1] + path[flip_state(s)][per_seg + j] - path[flip_state(s)][per_seg];
      }
    }
  };
  reindex(path_phase, phase_);
  reindex(path_photons, photons_);
  const CMatrix ry = qubit_rotation(Axis::Y, kPi / 2);
  CVector in = CVector::Zero(4);
  in(0) = 1.0;
  in = embed(ry, {2, 2}, {0}) * embed(ry, {2, 2}, {1}) * in;
  input_ = in * in.adjoint();
}

CMatrix JointEchoedCip::evolve_block(int n1, int m1, int n3, int m3) const {
  const double chi12 = sys_.device.chi_mhz(sys_.qubit1, sys_.qubit2);
  const double c1 = sys_.chi_q1_storage(), c3 = sys_.chi_q2_storage();
  const double b1 = sys_.storage1 >= 0 ? sys_.device.chi_mhz(sys_.storage1, sys_.bus) : 0.0;
  const double b3 = sys_.storage2 >= 0 ? sys_.device.chi_mhz(sys_.storage2, sys_.bus) : 0.0;
  const double bus_n = kTwoPi * (b1 * n1 + b3 * n3), bus_m = kTwoPi * (b1 * m1 + b3 * m3);
  std::array<double, 4> stat_n{}, stat_m{};
  for (int s = 0; s < 4; ++s) {
    const int e1 = s / 2, e2 = s % 2;
    stat_n[s] = kTwoPi * (c1 * n1 * e1 + c3 * n3 * e2 + chi12 * e1 * e2);
    stat_m[s] = kTwoPi * (c1 * m1 * e1 + c3 * m3 * e2 + chi12 * e1 * e2);
  }
  const QubitNoise qn = qubit_noise(sys_);
  const std::size_t per_seg = 2 * block_steps_ + 1;
  const double tau_us = 1e-3 * params_.tau_ns;

  // Interaction-picture factor P_ab = exp(i (Phi^n_a - Phi^m_b)) at half-step j.
  auto factor = [&](std::size_t seg, std::size_t j) {
    const std::size_t idx = seg * per_seg + j;
    const double t = static_cast<double>(seg) * tau_us + 0.5 * block_h_us_ * static_cast<double>(j);
    Mat4 pf;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        pf(a, b) = std::polar(1.0, phase_[a][idx] + stat_n[a] * t + bus_n * photons_[a][idx] - phase_[b][idx] -
                                       stat_m[b] * t - bus_m * photons_[b][idx]);
    return pf;
  };
  auto dissipate = [&](const Mat4& x) {
    Mat4 out = qn.decay * x + x * qn.decay.adjoint();
    for (const auto& l : qn.jumps) out.noalias() += l * x * l.adjoint();
    return out;
  };
  auto rhs = [&](const Mat4& pf, const Mat4& y) -> Mat4 {
    const Mat4 x = pf.conjugate().cwiseProduct(y);
    return pf.cwiseProduct(dissipate(x));
  };

  Mat4 y = input_;
  const Mat4 flips = both_flips();
  const double h = block_h_us_;
  for (std::size_t seg = 0; seg < 2; ++seg) {
    if (seg == 1) {
      const Mat4 p0 = factor(1, 0);
      Mat4 x = p0.conjugate().cwiseProduct(y);
      x = flips * x * flips.adjoint();
      y = p0.cwiseProduct(x);
    }
    if (qn.jumps.empty()) continue;
    for (std::size_t k = 0; k < block_steps_; ++k) {
      const Mat4 pa = factor(seg, 2 * k), pm = factor(seg, 2 * k + 1), pb = factor(seg, 2 * k + 2);
      const Mat4 k1 = rhs(pa, y);
      const Mat4 k2 = rhs(pm, y + 0.5 * h * k1);
      const Mat4 k3 = rhs(pm, y + 0.5 * h * k2);
      const Mat4 k4 = rhs(pb, y + h * k3);
      y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  Mat4 x = factor(1, per_seg - 1).conjugate().cwiseProduct(y);
  // Leftover bus displacement entangled with the qubits.
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const cplx aa = final_alpha_[a], ab = final_alpha_[b];
      x(a, b) *= std::exp(-0.5 * std::norm(aa) - 0.5 * std::norm(ab) + std::conj(ab) * aa);
    }
  const Mat4 rx = embed(qubit_rotation(Axis::X, -kPi / 2), {2, 2}, {0});
  x = rx * x * rx.adjoint();
  // Remove the deterministic storage rotation exp(-i chi tau n).
  x *= std::polar(1.0, kTwoPi * tau_us * (c1 * (n1 - m1) + c3 * (n3 - m3)));
  return x;
}

DensityMatrix JointEchoedCip::apply(const DensityMatrix& rho) const {
  const Dims& dims = rho.dims();
  if (dims.size() != 4 || dims[2] != 2 || dims[3] != 2)
    throw ConfigError("JointEchoedCip: expected a state over (S1, S3, Y1, Y2)");
  const int d1 = dims[0], d3 = dims[1];
  const Eigen::Index ds = static_cast<Eigen::Index>(d1) * d3;
  // Qubits must be in |gg>.
  double gg = 0;
  for (Eigen::Index i = 0; i < ds; ++i) gg += rho.matrix()(4 * i, 4 * i).real();
  if (std::abs(gg - rho.trace().real()) > 1e-9) throw ConfigError("JointEchoedCip: communication qubits are not in |gg>");

  DensityMatrix r = rho;
  const double t_us = duration_us();
  r = idle_channel(r, 0, sys_.device.mode(sys_.storage1), t_us, sys_.noise);
  r = idle_channel(r, 1, sys_.device.mode(sys_.storage2), t_us, sys_.noise);

  CMatrix out = CMatrix::Zero(4 * ds, 4 * ds);
  for (Eigen::Index i = 0; i < ds; ++i)
    for (Eigen::Index j = 0; j < ds; ++j) {
      const cplx c = r.matrix()(4 * i, 4 * j);
      if (std::abs(c) < 1e-15) continue;
      const int n1 = static_cast<int>(i / d3), n3 = static_cast<int>(i % d3);
      const int m1 = static_cast<int>(j / d3), m3 = static_cast<int>(j % d3);
      const auto key = std::make_tuple(n1, m1, n3, m3);
      CMatrix g;
      {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(key);
        if (it != cache_.end()) g = it->second;
      }
      if (g.size() == 0) {
        g = evolve_block(n1, m1, n3, m3);
        std::lock_guard<std::mutex> lock(mutex_);
        cache_.emplace(key, g);
      }
      out.block(4 * i, 4 * j, 4, 4) = c * g;
    }
  return DensityMatrix(0.5 * (out + out.adjoint()), dims);
}

}  // namespace epsim
