#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epsim/qstate.hpp"

namespace epsim {

/// State-transfer control problem. Operators are in MHz; the generator of a
/// step is 2*pi*(drift + sum_k u_k controls[k]) in rad/us.
struct ControlProblem {
  CMatrix drift;
  std::vector<CMatrix> controls;
  std::vector<PureState> initial;
  std::vector<PureState> target;  // paired with `initial`
  int n_steps = 1;
  double dt_ns = 1.0;
  double amp_bound_mhz = 1.0;

  std::size_t dimension() const { return static_cast<std::size_t>(drift.rows()); }
  void validate() const;
};

/// Piecewise-constant amplitudes, amplitudes[k][j] for control k at step j.
struct PulseSchedule {
  double dt_ns = 1.0;
  std::vector<std::vector<double>> amplitudes;

  static PulseSchedule zeros(const ControlProblem& p);
  void validate(const ControlProblem& p) const;
};

struct Propagation {
  std::vector<PureState> final_states;
  double fidelity = 0.0;  // mean over pairs of |<target|U|initial>|^2
};

Propagation propagate(const ControlProblem& problem, const PulseSchedule& schedule);

/// Fidelity and its exact gradient with respect to every amplitude.
struct FidelityGradient {
  double fidelity = 0.0;
  std::vector<std::vector<double>> gradient;  // same shape as amplitudes
};
FidelityGradient fidelity_gradient(const ControlProblem& problem, const PulseSchedule& schedule);

/// Propagator of one step, exp(-i 2pi H dt).
CMatrix step_propagator(const ControlProblem& problem, const PulseSchedule& schedule, int step);

enum class InitKind { Random, Zero };

struct OptimizeOptions {
  InitKind init = InitKind::Random;
  int iterations = 200;
  std::uint64_t seed = 0;
  int restarts = 1;
  double target_fidelity = 0.999;  // stop early when reached
  int threads = 1;
  int memory = 10;  // L-BFGS history length
};

struct OptimizeResult {
  PulseSchedule schedule;
  double fidelity = 0.0;
  std::vector<double> history;  // best fidelity after each iteration
  bool reached_target = false;
  std::string message;
  int restart = 0;  // index of the restart that won
};

/// Projected L-BFGS ascent with a backtracking line search; amplitudes are
/// clipped to the bound. The history never decreases. Falls short of the
/// target with `reached_target` false and the best schedule found.
OptimizeResult optimize(const ControlProblem& problem, const OptimizeOptions& opts);

/// Two qubits dispersively coupled to a three-level bus, with x/y drives on
/// every mode; |g0g> -> (|g0e> + |e0g>)/sqrt2. Mode order (qubit1, bus, qubit2).
ControlProblem toy_reentangle_problem(double chi1_mhz = 1.433, double chi2_mhz = 0.711, int n_steps = 100,
                                      double dt_ns = 10.0, double amp_bound_mhz = 20.0);

/// Single qubit |g> -> |e> with x and y drives.
ControlProblem qubit_flip_problem(int n_steps = 20, double dt_ns = 10.0, double amp_bound_mhz = 20.0);

}  // namespace epsim
