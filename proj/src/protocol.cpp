#include "epsim/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace epsim {

std::string Strategy::name() const {
  if (ep && ed) return "ed+ep";
  if (ep) return "ep";
  if (ed) return "ed";
  return "none";
}

Strategy Strategy::parse(const std::string& s) {
  if (s == "none") return {false, false};
  if (s == "ep") return {true, false};
  if (s == "ed") return {false, true};
  if (s == "ed+ep" || s == "ep+ed") return {true, true};
  throw ConfigError("unknown strategy '" + s + "' (none, ep, ed, ed+ep)");
}

int ProtocolConfig::resolved_storage_dim() const {
  if (storage_dim > 0) return storage_dim;
  return encoding == CodeKind::Fock ? 3 : 6;
}

bool ProtocolConfig::resolved_twirl() const { return twirl.value_or(encoding == CodeKind::Fock); }

ReentangleModel ProtocolConfig::resolved_reentangle() const {
  return reentangle.value_or(encoding == CodeKind::Fock ? ReentangleModel::Parametric : ReentangleModel::FullCip);
}

void ProtocolConfig::validate() const {
  if (tau_us < 0 || tau1_us < 0 || tau2_us < 0) throw ConfigError("waits must be non-negative");
  if (rounds < 0) throw ConfigError("rounds must be non-negative");
  if (!(regen_fidelity >= 0.25 && regen_fidelity <= 1.0))
    throw ConfigError("regeneration fidelity must lie in [0.25, 1]");
  if (initial_fidelity && !(*initial_fidelity >= 0.0 && *initial_fidelity <= 1.0))
    throw ConfigError("initial fidelity must lie in [0, 1]");
  if (!(parity_flip_probability >= 0.0 && parity_flip_probability <= 1.0))
    throw ConfigError("parity flip probability must lie in [0, 1]");
  if (storage_dim < 0) throw ConfigError("storage_dim must be non-negative");
  Encoding(encoding, resolved_storage_dim());
  if (bus_dim < 2) throw ConfigError("bus_dim must be at least 2");
  if (shots < 0) throw ConfigError("shots must be non-negative");
  if (timings.regen_us < 0 || timings.measure_us < 0 || timings.swap_us < 0 || timings.encode_us < 0)
    throw ConfigError("timings must be non-negative");
  device.validate();
  integrator.validate();
  cip.validate();
  for (const char* label : {"S1", "S3", "Y1", "Y2"}) device.index_of(label);
}

PairMetrics pair_metrics(const DensityMatrix& storage_pair, const Encoding& enc) {
  const DecodedPair d = decode_pair(storage_pair, enc);
  const CVector psi = bell_state(Bell::PsiPlus).amplitudes();
  PairMetrics m;
  m.fidelity = std::clamp((psi.adjoint() * d.block * psi)(0, 0).real(), 0.0, 1.0);
  m.leakage = d.leakage;
  m.logical = d.completed();
  m.negativity = negativity(m.logical, {0});
  return m;
}

CipSystem protocol_cip_system(const ProtocolConfig& cfg) {
  const int ds = cfg.resolved_storage_dim();
  const DeviceGraph dev = cfg.device.with_dimension("S1", ds).with_dimension("S3", ds);
  CipSystem sys = CipSystem::from_device(dev, cfg.bus_dim, cfg.noise);
  sys.shape = cfg.cip_shape;
  return sys;
}

namespace {

// State layout (S1, S3, Y1, Y2).
constexpr int kS1 = 0, kS3 = 1, kY1 = 2, kY2 = 3;

class Run {
 public:
  Run(const ProtocolConfig& cfg, const JointEchoedCip* gate)
      : cfg_(cfg),
        ds_(cfg.resolved_storage_dim()),
        enc_(cfg.encoding, ds_),
        dev_(cfg.device.with_dimension("S1", ds_).with_dimension("S3", ds_)),
        s1_(dev_.index_of("S1")),
        s3_(dev_.index_of("S3")),
        y1_(dev_.index_of("Y1")),
        y2_(dev_.index_of("Y2")),
        gate_(gate),
        rng_(cfg.seed) {
    if (cfg.resolved_reentangle() == ReentangleModel::FullCip && gate_ == nullptr) {
      owned_gate_ = std::make_unique<JointEchoedCip>(protocol_cip_system(cfg), cfg.cip, cfg.integrator);
      gate_ = owned_gate_.get();
    }
    build_cnot();
  }

  ProtocolTrace physical() {
    ProtocolTrace trace;
    if (cfg_.initial_fidelity) {
      const DensityMatrix w = BellDiagonal::werner(*cfg_.initial_fidelity).density_matrix();
      // levels {0,1} of each storage cavity
      CMatrix iso = CMatrix::Zero(ds_, 2);
      iso(0, 0) = iso(1, 1) = 1.0;
      CMatrix v(ds_ * ds_, 4);
      v.setZero();
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) v(a * ds_ + b, 2 * a + b) = 1.0;
      storage_ = DensityMatrix(v * w.matrix() * v.adjoint(), {ds_, ds_});
    } else {
      storage_ = swap_in(fresh_pair(vacuum_storage()));
    }
    record(trace, 0, 1.0, 1.0, {});
    for (int r = 1; r <= cfg_.rounds; ++r) {
      storage_ = idle_storage(storage_, cfg_.tau_us);
      if (!pump_round(trace, r, 1.0)) break;
    }
    finish(trace);
    return trace;
  }

  ProtocolTrace logical() {
    ProtocolTrace trace;
    DensityMatrix full = fresh_pair(vacuum_storage());
    full = idle_channel(full, kY1, dev_.mode(y1_), cfg_.tau1_us, cfg_.noise);
    full = idle_channel(full, kY2, dev_.mode(y2_), cfg_.tau1_us, cfg_.noise);
    storage_ = swap_in(full);
    storage_ = idle_storage(storage_, cfg_.tau2_us);
    const bool per_round_ed = cfg_.strategy.ed && cfg_.ed_mode == EdMode::PerRound;
    record(trace, 0, 1.0, 1.0, {});
    const int ep_rounds = cfg_.strategy.ep ? cfg_.rounds : 0;
    for (int r = 1; r <= ep_rounds; ++r) {
      double parity_keep = 1.0;
      if (per_round_ed && !parity_filter(parity_keep)) {
        abort(trace, "parity check kept nothing");
        break;
      }
      if (!pump_round(trace, r, parity_keep)) break;
    }
    if (cfg_.strategy.ed && !trace.aborted) {
      double keep = 1.0;
      if (!parity_filter(keep)) {
        abort(trace, "parity check kept nothing");
      } else {
        RoundRecord& last = trace.rounds.back();
        const PairMetrics m = pair_metrics(storage_, enc_);
        last.fidelity = m.fidelity;
        last.negativity = m.negativity;
        last.p_parity_discard = 1.0 - (1.0 - last.p_parity_discard) * keep;
        last.p_kept *= keep;
        last.p_success_cum *= keep;
        if (last.kept_shots >= 0) last.kept_shots = sample_shots(last.kept_shots, keep);
      }
    }
    finish(trace);
    return trace;
  }

 private:
  DensityMatrix vacuum_storage() const {
    return DensityMatrix::from_pure(PureState::basis({ds_, ds_}, {0, 0}));
  }

  static DensityMatrix gg() { return DensityMatrix::from_pure(PureState::basis({2, 2}, {0, 0})); }

  DensityMatrix idle_storage(const DensityMatrix& rho, double t_us) const {
    if (t_us == 0) return rho;
    DensityMatrix r = idle_channel(rho, kS1, dev_.mode(s1_), t_us, cfg_.noise);
    return idle_channel(r, kS3, dev_.mode(s3_), t_us, cfg_.noise);
  }

  // Fresh communication-qubit pair next to `storage`; the state is over
  // (S1, S3, Y1, Y2).
  DensityMatrix fresh_pair(const DensityMatrix& storage) const {
    if (gate_ != nullptr) return gate_->apply(tensor(storage, gg()));
    return tensor(idle_storage(storage, cfg_.timings.regen_us), BellDiagonal::werner(cfg_.regen_fidelity).density_matrix());
  }

  // Moves the communication pair into the storage cavities (which must hold
  // the vacuum) and returns the storage pair.
  DensityMatrix swap_in(const DensityMatrix& full) const {
    const CMatrix v = vacuum_to_code_frame(enc_);
    const CMatrix sw = swap_transmon_cavity(enc_);
    DensityMatrix r = apply_unitary(full, v, {kS1});
    r = apply_unitary(r, v, {kS3});
    r = apply_unitary(r, sw, {kY1, kS1});
    r = apply_unitary(r, sw, {kY2, kS3});
    const double t = cfg_.encoding == CodeKind::Fock ? cfg_.timings.swap_us : cfg_.timings.encode_us;
    return idle_storage(partial_trace(r, {kS1, kS3}), t);
  }

  void build_cnot() {
    Eigen::MatrixXd chi = dev_.chi_matrix();
    if (!cfg_.cnot_crosstalk) chi(y1_, y2_) = chi(y2_, y1_) = 0.0;
    cnot_dev_ = DeviceGraph(dev_.modes(), chi);
    cnot_spec_.device = &cnot_dev_;
    cnot_spec_.active_modes = {s1_, s3_, y1_, y2_};
    cnot_spec_.include_self_kerr = false;
    cnot_spec_.noise = cfg_.noise;
    cnot_lv_ = std::make_unique<Lindbladian>(cnot_spec_);
    t1_ns_ = cz_duration_ns(dev_.chi_mhz(s1_, y1_), enc_);
    t3_ns_ = cz_duration_ns(dev_.chi_mhz(s3_, y2_), enc_);
  }

  // Storage controls, communication qubits as targets. The dispersive
  // interaction runs for the whole window; each qubit gets its closing
  // rotation once its own CZ time has elapsed. The pair that finishes first
  // keeps accruing exp(-i chi n |e><e| dt) until the window closes; that is
  // diagonal in the measured basis, so it is undone as a storage frame update
  // conditioned on the readout.
  DensityMatrix bilateral_cnot(const DensityMatrix& rho) const {
    const IntegratorConfig icfg = IntegratorConfig::undriven();
    const CMatrix pre = cnot_pre_rotation(), post = cnot_post_rotation();
    DensityMatrix r = apply_unitary(rho, pre, {kY1});
    r = apply_unitary(r, pre, {kY2});
    const bool first_is_1 = t1_ns_ <= t3_ns_;
    const double ta = std::min(t1_ns_, t3_ns_), tb = std::max(t1_ns_, t3_ns_);
    const int sa = first_is_1 ? kS1 : kS3, ya = first_is_1 ? kY1 : kY2;
    r = lindblad_evolve(r, *cnot_lv_, ta, icfg);
    r = apply_unitary(r, post, {ya});
    r = lindblad_evolve(r, *cnot_lv_, tb - ta, icfg, ta);
    r = apply_unitary(r, post, {first_is_1 ? kY2 : kY1});
    const double chi = dev_.chi_mhz(first_is_1 ? s1_ : s3_, first_is_1 ? y1_ : y2_);
    return apply_unitary(r, dispersive_cz(chi, tb - ta, ds_).adjoint(), {sa, ya});
  }

  DensityMatrix twirl(const DensityMatrix& rho) const {
    DensityMatrix r = apply_unitary(rho, rotation(ds_, Axis::X, kPi / 2, &enc_), {kS1});
    r = apply_unitary(r, rotation(ds_, Axis::X, -kPi / 2, &enc_), {kS3});
    r = apply_unitary(r, qubit_rotation(Axis::X, kPi / 2), {kY1});
    return apply_unitary(r, qubit_rotation(Axis::X, -kPi / 2), {kY2});
  }

  bool pump_round(ProtocolTrace& trace, int round, double parity_keep) {
    DensityMatrix full = fresh_pair(storage_);
    if (cfg_.resolved_twirl()) full = twirl(full);
    full = bilateral_cnot(full);
    const Postselected ps = postselect_qubits(full, cfg_.keep);
    if (!(ps.p_kept > 1e-300)) {
      abort(trace, "post-selection kept nothing in round " + std::to_string(round));
      return false;
    }
    const CMatrix m = ps.storage / ps.p_kept;
    storage_ = idle_storage(DensityMatrix(0.5 * (m + m.adjoint()), {ds_, ds_}), cfg_.timings.measure_us);
    record(trace, round, ps.p_kept * parity_keep, parity_keep, ps.outcomes);
    if (trace.rounds.back().kept_shots == 0) {
      abort(trace, "no shots kept in round " + std::to_string(round));
      return false;
    }
    return true;
  }

  // Even-parity filter on both storage cavities. `keep` receives the kept
  // fraction; false when nothing survives.
  bool parity_filter(double& keep) {
    keep = 1.0;
    for (int c : {kS1, kS3}) {
      const DetectionResult d = detect_error(storage_, c, enc_, cfg_.parity_flip_probability);
      if (!d.supported) continue;
      if (!d.kept) return false;
      keep *= d.even.probability;
      storage_ = *d.kept;
    }
    return true;
  }

  int sample_shots(int n, double p) {
    std::binomial_distribution<int> dist(n, std::clamp(p, 0.0, 1.0));
    return dist(rng_);
  }

  void record(ProtocolTrace& trace, int round, double p_kept, double parity_keep, const OutcomeStats& outcomes) {
    RoundRecord rec;
    rec.round = round;
    const PairMetrics m = pair_metrics(storage_, enc_);
    rec.fidelity = m.fidelity;
    rec.negativity = m.negativity;
    rec.p_kept = p_kept;
    rec.p_parity_discard = 1.0 - parity_keep;
    rec.p_success_cum = (trace.rounds.empty() ? 1.0 : trace.rounds.back().p_success_cum) * p_kept;
    rec.outcomes = outcomes;
    if (cfg_.shots > 0) {
      const int prev = trace.rounds.empty() ? cfg_.shots : trace.rounds.back().kept_shots;
      rec.kept_shots = round == 0 ? cfg_.shots : sample_shots(prev, p_kept);
    }
    trace.rounds.push_back(rec);
  }

  void abort(ProtocolTrace& trace, const std::string& why) const {
    trace.aborted = true;
    trace.abort_reason = why;
  }

  void finish(ProtocolTrace& trace) const { trace.final_state = pair_metrics(storage_, enc_).logical; }

  const ProtocolConfig& cfg_;
  int ds_;
  Encoding enc_;
  DeviceGraph dev_;
  int s1_, s3_, y1_, y2_;
  const JointEchoedCip* gate_;
  std::unique_ptr<JointEchoedCip> owned_gate_;
  DeviceGraph cnot_dev_;
  HamiltonianSpec cnot_spec_;
  std::unique_ptr<Lindbladian> cnot_lv_;
  double t1_ns_ = 0, t3_ns_ = 0;
  std::mt19937_64 rng_;
  DensityMatrix storage_;
};

}  // namespace

ProtocolTrace run_ep_physical(const ProtocolConfig& cfg) {
  cfg.validate();
  if (cfg.encoding != CodeKind::Fock) throw ConfigError("run_ep_physical needs fock encoding");
  return Run(cfg, nullptr).physical();
}

ProtocolTrace run_ep_logical(const ProtocolConfig& cfg) {
  cfg.validate();
  return Run(cfg, nullptr).logical();
}

ProtocolTrace run_ep_logical(const ProtocolConfig& cfg, const JointEchoedCip& gate) {
  cfg.validate();
  if (cfg.resolved_reentangle() != ReentangleModel::FullCip)
    throw ConfigError("a shared re-entangling gate needs the full-cip model");
  return Run(cfg, &gate).logical();
}

}  // namespace epsim
