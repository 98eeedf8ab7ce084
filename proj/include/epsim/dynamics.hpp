#pragma once

#include <functional>
#include <vector>

#include <Eigen/Sparse>

#include "epsim/device.hpp"
#include "epsim/qstate.hpp"

namespace epsim {

using SparseC = Eigen::SparseMatrix<cplx>;

/// Coherent drive on one mode, in the rotating frame of the drive:
/// detuning * n + eps(t) a^dag + conj(eps(t)) a.
struct Drive {
  int mode = 0;                                 // device index
  std::function<cplx(double t_ns)> envelope;    // MHz (angular value is 2*pi times this)
  double detuning_mhz = 0.0;
};

/// Selects which collapse operators accompany the Hamiltonian.
struct NoiseModel {
  bool decoherence = true;
  // Drop the sqrt(n_th/T1) a^dag excitation channel (and the (1+n_th) boost).
  bool thermal = true;

  static NoiseModel off() { return {false, false}; }
};

struct HamiltonianSpec {
  const DeviceGraph* device = nullptr;
  ModeSet active_modes;   // device indices, in the order they appear in the state
  std::vector<Drive> drives;
  // Static frequency offsets on single modes, offset * n (MHz).
  std::vector<std::pair<int, double>> frequency_offsets;
  bool include_self_kerr = true;
  NoiseModel noise;

  Dims dims() const;
  // Position of a device mode within active_modes.
  int local_index(int device_mode) const;
  void validate() const;
};

enum class IntegrationMethod { Rk4, Adaptive };

struct IntegratorConfig {
  double dt_ns = 1.0;
  IntegrationMethod method = IntegrationMethod::Rk4;
  double max_step_error = 1e-9;  // adaptive only, per step (max elementwise)

  void validate() const;
  static IntegratorConfig driven() { return {1.0, IntegrationMethod::Rk4, 1e-9}; }
  static IntegratorConfig undriven() { return {10.0, IntegrationMethod::Rk4, 1e-9}; }
};

/// Dense Hamiltonian at time t, in rad/us.
CMatrix build_hamiltonian(const HamiltonianSpec& spec, double t_ns);

/// Collapse operators for the active modes (rates in 1/us).
std::vector<SparseC> collapse_operators(const HamiltonianSpec& spec);

/// Time-dependent Lindbladian assembled once and reused for many steps.
class Lindbladian {
 public:
  explicit Lindbladian(const HamiltonianSpec& spec);

  // d rho / dt in 1/us at t (us).
  CMatrix rhs(double t_us, const CMatrix& rho) const;
  // -i (H(t) - c(t)) psi with c(t) = reference_energy(t), for closed evolution.
  CVector schrodinger_rhs(double t_us, const CVector& psi) const;
  // Scalar -|eps|^2/delta summed over detuned drives: the energy a driven
  // oscillator in its adiabatic coherent state carries. Removing it from the
  // closed-evolution generator keeps the integrated state nearly stationary;
  // the phase is restored exactly afterwards.
  double reference_energy(double t_us) const;
  std::size_t dimension() const { return dim_; }
  bool has_jumps() const { return !jumps_.empty(); }

 private:
  struct DriveTerm {
    SparseC raise;   // a^dag on the full space
    std::function<cplx(double)> envelope;  // angular, rad/us, at t_ns
    double detuning = 0.0;                 // rad/us
  };
  std::size_t dim_ = 0;
  SparseC h_static_;        // includes -i/2 sum L^dag L
  SparseC h_static_herm_;   // Hermitian part only
  std::vector<DriveTerm> drives_;
  std::vector<SparseC> jumps_;
};

/// Integrates the master equation for `duration_ns`. Throws NumericalError if
/// the trace drifts by more than 1e-6.
DensityMatrix lindblad_evolve(const DensityMatrix& rho, const HamiltonianSpec& spec, double duration_ns,
                              const IntegratorConfig& cfg, double t0_ns = 0.0);
DensityMatrix lindblad_evolve(const DensityMatrix& rho, const Lindbladian& lv, double duration_ns,
                              const IntegratorConfig& cfg, double t0_ns = 0.0);

/// Closed evolution; ignores the noise model.
PureState schrodinger_evolve(const PureState& psi, const HamiltonianSpec& spec, double duration_ns,
                             const IntegratorConfig& cfg, double t0_ns = 0.0);
PureState schrodinger_evolve(const PureState& psi, const Lindbladian& lv, double duration_ns,
                             const IntegratorConfig& cfg, double t0_ns = 0.0);

/// Single-mode free-decay generator as a dim^2 x dim^2 superoperator (1/us),
/// column-stacking convention.
CMatrix mode_liouvillian(const ModeSpec& mode, int dim, const NoiseModel& noise);

/// Closed-form idle channel exp(L t) for one mode (amplitude damping, thermal
/// excitation and pure dephasing). No Hamiltonian: deterministic frame phases
/// during waits are tracked, not simulated.
CMatrix idle_superoperator(const ModeSpec& mode, int dim, double duration_us, const NoiseModel& noise);

DensityMatrix idle_channel(const DensityMatrix& rho, int mode, const ModeSpec& spec, double duration_us,
                           const NoiseModel& noise = {});

}  // namespace epsim
