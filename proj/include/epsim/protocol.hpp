#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "epsim/codes.hpp"
#include "epsim/dynamics.hpp"
#include "epsim/gates.hpp"
#include "epsim/purify.hpp"

namespace epsim {

struct Strategy {
  bool ep = false;
  bool ed = false;

  std::string name() const;  // none | ep | ed | ed+ep
  static Strategy parse(const std::string& s);
};

enum class ReentangleModel { Parametric, FullCip };
enum class EdMode { PerRound, Final };

/// Durations (us) of operations that are not simulated pulse by pulse.
struct Timings {
  double regen_us = 22.0;   // parametric regeneration; storage idles meanwhile
  double measure_us = 2.0;  // communication-qubit readout and reset
  double swap_us = 1.0;     // qubit -> cavity swap in the fock experiment
  double encode_us = 1.0;   // qubit -> binomial encoding
};

struct ProtocolConfig {
  CodeKind encoding = CodeKind::Fock;
  double tau_us = 0.0;   // wait between pumping rounds
  double tau1_us = 0.0;  // pre-encode wait on the communication qubits
  double tau2_us = 0.0;  // post-encode wait on the storage cavities
  int rounds = 3;
  Strategy strategy{true, false};
  // default: parametric for fock, full echoed CIP for binomial
  std::optional<ReentangleModel> reentangle;
  double regen_fidelity = 0.923;
  // Werner fidelity of the round-0 storage pair; unset means a regenerated
  // pair is swapped in.
  std::optional<double> initial_fidelity;
  std::optional<bool> twirl;  // default: on for fock, off for binomial
  EdMode ed_mode = EdMode::PerRound;
  KeepRule keep = KeepRule::GgOnly;
  double parity_flip_probability = 0.0;
  int storage_dim = 0;  // 0: 3 for fock, 6 for binomial
  int bus_dim = 15;
  DeviceGraph device;
  NoiseModel noise;
  IntegratorConfig integrator = IntegratorConfig::driven();
  CipParams cip{-10.0, 11.0552, 1500.0};
  // Keep the static Y1-Y2 cross-Kerr on during the local CNOTs.
  bool cnot_crosstalk = false;
  PulseShape cip_shape = PulseShape::Shifted;
  Timings timings;
  std::uint64_t seed = 0;
  // Optional shot sampling of the post-selection; 0 keeps exact branches.
  int shots = 0;

  int resolved_storage_dim() const;
  bool resolved_twirl() const;
  ReentangleModel resolved_reentangle() const;
  void validate() const;
};

struct RoundRecord {
  int round = 0;
  double fidelity = 0.0;
  double p_success_cum = 1.0;
  double p_parity_discard = 0.0;
  double negativity = 0.0;
  double p_kept = 1.0;  // this round's kept fraction (post-selection and parity)
  OutcomeStats outcomes;
  // Shot-sampling mode only: kept shots out of `shots`.
  int kept_shots = -1;
};

struct ProtocolTrace {
  std::vector<RoundRecord> rounds;
  DensityMatrix final_state;  // logical two-qubit state (leakage spread as I/4)
  bool aborted = false;
  std::string abort_reason;

  double final_fidelity() const { return rounds.empty() ? 0.0 : rounds.back().fidelity; }
  double final_negativity() const { return rounds.empty() ? 0.0 : rounds.back().negativity; }
};

/// Storage-pair metrics: fidelity to psi+ within the code space (leaked
/// weight counts as failure) and negativity of the logical state with the
/// leaked weight spread uniformly.
struct PairMetrics {
  double fidelity = 0.0;
  double negativity = 0.0;
  double leakage = 0.0;
  DensityMatrix logical;
};
PairMetrics pair_metrics(const DensityMatrix& storage_pair, const Encoding& enc);

/// Re-entanglement system for a config: storage truncation, bus truncation,
/// noise and pulse shape applied.
CipSystem protocol_cip_system(const ProtocolConfig& cfg);

/// Repetitive pumping on fock-encoded storage cavities.
ProtocolTrace run_ep_physical(const ProtocolConfig& cfg);

/// Entanglement preparation, waits, encoding and the selected EP/ED strategy
/// on binomial logical qubits.
ProtocolTrace run_ep_logical(const ProtocolConfig& cfg);
/// Same, reusing a prepared gate (its cache is shared across calls).
ProtocolTrace run_ep_logical(const ProtocolConfig& cfg, const JointEchoedCip& gate);

// ---- lifespan ---------------------------------------------------------------

struct ExponentialFit {
  double n0 = 0.0;
  double t_us = 0.0;  // +inf when the curve does not decay
  bool infinite = false;
  double rms_residual = 0.0;
};

/// Least-squares fit of N(t) = N0 exp(-t/T). Throws NumericalError when the
/// data cannot be fit (fewer than two positive points or a growing curve).
ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y);

struct LifespanCurve {
  Strategy strategy;
  std::vector<double> negativity;  // per grid point
  ExponentialFit fit;
};

struct LifespanSweep {
  std::vector<double> tau2_us;
  std::vector<LifespanCurve> curves;
};

LifespanSweep sweep_lifespan(const ProtocolConfig& base, const std::vector<double>& tau2_grid_us,
                             const std::vector<Strategy>& strategies, int threads = 1);

/// Negativity of (|01>+|10>)/sqrt2 in two fock cavities after both idle for
/// t: photon loss with rate 1/T1 on each, no dephasing or heating.
double damped_fock_bell_negativity(double t_us, double t1a_us, double t1b_us);

}  // namespace epsim
