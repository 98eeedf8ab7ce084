#pragma once

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <vector>

#include "epsim/codes.hpp"
#include "epsim/dynamics.hpp"

namespace epsim {

enum class Axis { X, Y };

/// exp(-i angle sigma/2) on a two-level mode.
CMatrix qubit_rotation(Axis axis, double angle);

/// Rotation on a mode of dimension `dim`: a plain qubit rotation when dim == 2
/// and no encoding is given, otherwise the rotation acts inside the code space
/// of `enc` and trivially on its complement. Throws for a cavity without an
/// encoding.
CMatrix rotation(int dim, Axis axis, double angle, const Encoding* enc = nullptr);

/// exp(-i chi n |e><e| T) on (cavity, qubit).
CMatrix dispersive_cz(double chi_mhz, double duration_ns, int cavity_dim);

/// Duration for which exp(-i chi n |e><e| T) is a logical CZ: pi / (chi * spacing).
double cz_duration_ns(double chi_mhz, const Encoding& enc);

// Single-qubit pieces of the logical CNOT; the CNOT is post * CZ * pre with
// pre = R_x(pi/2) S and post = S^dag R_x(-pi/2). The S gates are virtual Z
// frame updates that turn the R_x-conjugated CZ into an exact CNOT.
CMatrix cnot_pre_rotation();
CMatrix cnot_post_rotation();

/// Logical CNOT on (cavity, qubit): cavity code word is the control.
CMatrix logical_cnot(const Encoding& enc);

/// Exchanges the qubit {g,e} amplitudes with the cavity {0_L,1_L} amplitudes;
/// identity outside qubit (x) code space. Operator on (qubit, cavity).
CMatrix swap_transmon_cavity(const Encoding& enc);

/// Cavity unitary taking the vacuum to |0_L> (identity for fock).
CMatrix vacuum_to_code_frame(const Encoding& enc);

// ---- cavity-induced phase gate --------------------------------------------

struct CipParams {
  double delta_mhz = -10.0;  // bus detuning omega_bus - omega_drive
  double amp_mhz = 8.0;      // peak drive
  double tau_ns = 1500.0;    // single-CIP duration
  int bus_mode = -1;         // device index; -1 means the system's bus
  void validate() const;
};

enum class PulseShape { Truncated, Shifted };

/// Gaussian A exp(-8 (t - tau/2)^2 / tau^2) on [0, tau], zero outside. The
/// shifted variant subtracts the edge value and rescales so it starts and
/// ends at exactly zero.
double cip_envelope(const CipParams& p, double t_ns, PulseShape shape = PulseShape::Truncated);

struct StoragePhotons {
  int n1 = 0;
  int n2 = 0;
};

/// Modes taking part in re-entanglement: two communication qubits around a
/// bus, plus the storage cavities whose dispersive shifts enter as qubit
/// frequency offsets.
struct CipSystem {
  DeviceGraph device;  // with the bus truncation applied
  int qubit1 = -1, bus = -1, qubit2 = -1;
  int storage1 = -1, storage2 = -1;
  NoiseModel noise;
  PulseShape shape = PulseShape::Shifted;

  static CipSystem from_device(const DeviceGraph& dev, int bus_dim = 15, NoiseModel noise = {},
                               const std::string& q1 = "Y1", const std::string& bus = "S2",
                               const std::string& q2 = "Y2", const std::string& s1 = "S1",
                               const std::string& s2 = "S3");
  // (Y1, S2, Y2)
  Dims dims() const;
  int bus_dim() const { return device.mode(bus).dimension; }
  HamiltonianSpec hamiltonian(const CipParams& p, StoragePhotons n = {}) const;
  double chi_q1_storage() const { return storage1 >= 0 ? device.chi_mhz(qubit1, storage1) : 0.0; }
  double chi_q2_storage() const { return storage2 >= 0 ? device.chi_mhz(qubit2, storage2) : 0.0; }
};

struct EchoResult {
  std::array<double, 3> phases{};  // (Phi1, Phi2, Phi3)
  double p_gg = 0.0;
  double residual_photons = 0.0;
  bool adiabatic = true;  // residual photons within threshold

  double combined_phase() const;  // Phi1 + Phi2 - Phi3 wrapped to (-pi, pi]
};

inline constexpr double kAdiabaticPhotonThreshold = 0.01;

double wrap_phase(double x);

/// One CIP segment on a state over (Y1, S2, Y2).
DensityMatrix cip_evolve(const DensityMatrix& rho, const CipSystem& sys, const CipParams& p,
                         const IntegratorConfig& cfg, StoragePhotons n = {});

/// CIP -> R_x(pi) on both qubits -> CIP. With `flips` false the two segments
/// run back to back (used to show what the echo removes).
std::pair<DensityMatrix, EchoResult> echoed_cip(const DensityMatrix& rho, const CipSystem& sys,
                                                const CipParams& p, const IntegratorConfig& cfg,
                                                StoragePhotons n = {}, bool flips = true);

/// Phases of the echo from closed, branch-resolved evolution.
std::array<double, 3> echo_phases(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg,
                                  StoragePhotons n = {});

/// Product state (|g>+|e>)(|g>+|e>)/2 with the bus in vacuum.
DensityMatrix cip_input_state(const CipSystem& sys);
/// Echoed CIP followed by R_x(-pi/2) on Y1; returns the (Y1,Y2) state.
DensityMatrix reentangled_pair(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg,
                               StoragePhotons n = {});

/// Mean bus photon number of a state over (Y1, S2, Y2).
double bus_photons(const DensityMatrix& rho, const CipSystem& sys);

struct CalibrationPoint {
  double tau_ns = 0, amp_mhz = 0, p_gg = 0, residual_photons = 0;
};

struct CalibrationResult {
  // Operating point: the grid argmax with its amplitude refined so the echo
  // phase is exactly pi/2 (falls back to the grid point if that refinement
  // leaves the adiabatic region).
  double tau_ns = 0, amp_mhz = 0;
  double phase = 0;
  CalibrationPoint best;  // grid argmax
  std::vector<CalibrationPoint> surface;  // tau-major order
};

/// P_gg of the calibration sequence R_y(pi/2)_Y2 -> CIP -> flips -> CIP ->
/// R_x(pi)_Y1, R_x(-pi/2)_Y2, plus the residual bus photons after the echo.
CalibrationPoint calibration_point(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg);

/// Amplitude at fixed tau for which Phi1 + Phi2 - Phi3 = pi/2, by bisection
/// on [0, A] after expanding A until the phase passes pi/2.
double refine_amplitude(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg, double tol = 1e-5);

/// Grid scan; the argmax of P_gg over adiabatic points, lowest tau (then
/// lowest amplitude) on ties. Throws NumericalError if no point is adiabatic.
CalibrationResult calibrate_echo(const CipSystem& sys, double delta_mhz, const std::vector<double>& tau_grid_ns,
                                 const std::vector<double>& amp_grid_mhz, const IntegratorConfig& cfg,
                                 int threads = 1);

/// Echoed-CIP re-entanglement acting on a (S1, S3, Y1, Y2) state whose
/// qubits start in |gg>: R_y(pi/2) on both qubits, echoed CIP with the
/// storage dispersive shifts, R_x(-pi/2) on Y1, then the storage frame update
/// that removes the deterministic exp(-i chi tau n) rotation the echo leaves.
///
/// The bus is eliminated through its exact coherent-branch solution: for a
/// qubit-diagonal Hamiltonian each qubit basis state drives the bus along a
/// classical trajectory alpha_s(t), and the branch acquires energy
/// eps(t) Re alpha_s(t). Storage photon numbers are conserved during the gate,
/// so every storage block evolves independently under a two-sided 4x4 master
/// equation; storage decay is applied as an idle channel over the gate time.
/// Branch phases are integrated on the fine grid (cfg.dt_ns); the 4x4 blocks
/// are stepped in the interaction picture of those phases with `block_dt_ns`,
/// so only the weak qubit dissipator sees the coarse step.
class JointEchoedCip {
 public:
  JointEchoedCip(const CipSystem& sys, const CipParams& p, const IntegratorConfig& cfg, double block_dt_ns = 10.0);

  DensityMatrix apply(const DensityMatrix& rho) const;
  double duration_us() const { return 2e-3 * params_.tau_ns; }
  const CipParams& params() const { return params_; }

  // Accumulated branch phase (rad) of qubit basis state `state` at the end of
  // the echo, excluding storage and qubit-qubit dispersive terms.
  double branch_phase(int state) const { return phase_[state].back(); }

 private:
  CMatrix evolve_block(int n1, int m1, int n3, int m3) const;

  CipSystem sys_;
  CipParams params_;
  IntegratorConfig cfg_;
  double block_h_us_ = 0;              // coarse step
  std::size_t block_steps_ = 0;        // coarse steps per segment
  // phase_[s][j]: integral of the branch energy of the state occupied at each
  // time, at coarse half-steps j = 0..2*block_steps_ of each segment in turn
  std::array<std::vector<double>, 4> phase_;
  // same grid: integral of |alpha|^2 (us), for storage-bus cross-Kerr
  std::array<std::vector<double>, 4> photons_;
  std::array<cplx, 4> final_alpha_{};  // by final qubit state
  CMatrix input_;                       // R_y(pi/2)^2 |gg><gg|
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<int, int, int, int>, CMatrix> cache_;
};

}  // namespace epsim
