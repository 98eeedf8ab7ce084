#pragma once

#include <array>
#include <string>
#include <vector>

#include "epsim/qstate.hpp"

namespace epsim {

/// Bell-basis weights ordered (psi+, psi-, phi+, phi-).
class BellDiagonal {
 public:
  BellDiagonal() : w_{1.0, 0.0, 0.0, 0.0} {}
  explicit BellDiagonal(const std::array<double, 4>& w);

  static BellDiagonal werner(double fidelity);

  const std::array<double, 4>& weights() const { return w_; }
  double operator[](std::size_t i) const { return w_[i]; }
  double fidelity() const { return w_[0]; }

  DensityMatrix density_matrix() const;

 private:
  std::array<double, 4> w_;
};

struct WernerStep {
  double fidelity = 0.0;
  double p_pass = 0.0;
};

/// One round on two Werner pairs, keeping equal target outcomes.
WernerStep recurrence_werner(double fa, double fb);

/// Fixed point of the pumping map F -> recurrence_werner(F, fb).fidelity.
double f_limit(double fb);

struct BellStep {
  BellDiagonal state;
  double p_pass = 0.0;
};

/// Bilateral CNOT (pair A controls, pair B targets), keep when the two target
/// parities agree.
BellStep bell_step(const BellDiagonal& a, const BellDiagonal& b);

/// R_x(pi/2) (x) R_x(-pi/2): exchanges the psi- and phi- weights.
BellDiagonal dejmps_twirl(const BellDiagonal& s);
/// The twirl as a two-qubit unitary.
CMatrix dejmps_twirl_unitary();

/// Depolarizing ratio x = (4F - 1)/3.
double werner_ratio(double fidelity);

struct BudgetEntry {
  std::string label;
  double fidelity = 1.0;
  double ratio = 1.0;
};

class ErrorBudget {
 public:
  void add(const std::string& label, double fidelity);
  void add_ratio(const std::string& label, double ratio);
  const std::vector<BudgetEntry>& entries() const { return entries_; }
  double product() const;
  // Fidelity equivalent of the product, (3x + 1)/4.
  double fidelity() const { return (3.0 * product() + 1.0) / 4.0; }

 private:
  std::vector<BudgetEntry> entries_;
};

double budget_product(const ErrorBudget& b);
double budget_product(const std::vector<double>& ratios);

enum class KeepRule { GgOnly, GgOrEe };

struct OutcomeStats {
  std::array<double, 4> p{};  // gg, ge, eg, ee
};

struct PurifyResult {
  DensityMatrix state;  // normalized storage pair
  double p_success = 0.0;
  OutcomeStats outcomes;
};

/// Bilateral CNOT from the storage pair (controls) onto the communication
/// pair (targets), measurement of the communication pair and post-selection.
/// Input over (S1, S3, Y1, Y2), all two-level.
PurifyResult dm_purify_step(const DensityMatrix& rho4, KeepRule keep = KeepRule::GgOnly);

/// Conditions an (S1, S3, Y1, Y2) state of any storage truncation on the
/// measured communication-qubit outcomes; returns the unnormalized kept
/// storage block together with the outcome probabilities.
struct Postselected {
  CMatrix storage;  // unnormalized
  OutcomeStats outcomes;
  double p_kept = 0.0;
};
Postselected postselect_qubits(const DensityMatrix& rho4, KeepRule keep);

/// Sequence F_{n+1} = recurrence_werner(F_n, fb).fidelity, F_0 included.
std::vector<double> pump_iteration(double f0, double fb, int rounds);

}  // namespace epsim
