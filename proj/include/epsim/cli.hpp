#pragma once

#include <string>

#include "epsim/csv.hpp"
#include "epsim/grape.hpp"
#include "epsim/json_util.hpp"
#include "epsim/protocol.hpp"

namespace epsim {

inline constexpr int kSchemaVersion = 1;

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

int run_cli(int argc, char** argv);

// ---- experiment payloads ----------------------------------------------------

/// Protocol settings from a run or sweep payload; `device` is used as is.
ProtocolConfig protocol_config_from_json(const json& payload, const DeviceGraph& device);
IntegratorConfig integrator_from_json(const json& j);
NoiseModel noise_from_json(const json& j);

/// Problem from a grape payload: either {"builtin": "qubit-flip" |
/// "toy-reentangle", ...overrides} or explicit operators.
ControlProblem control_problem_from_json(const json& payload);

// ---- tables -----------------------------------------------------------------

CsvTable trace_table(const ProtocolTrace& trace);
/// Inverse of trace_table for the per-round records and the abort footer.
ProtocolTrace trace_from_table(const CsvTable& table);

CsvTable sweep_table(const LifespanSweep& sweep);
CsvTable calibration_table(const CalibrationResult& cal);
CsvTable schedule_table(const PulseSchedule& schedule, double fidelity);

/// Tidy long format: series, x, y.
CsvTable trace_plot_table(const ProtocolTrace& trace);
CsvTable sweep_plot_table(const LifespanSweep& sweep);

}  // namespace epsim
