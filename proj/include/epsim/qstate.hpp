#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace epsim {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Dims = std::vector<int>;
using ModeSet = std::vector<int>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Largest composite dimension any state or operator may reach.
inline constexpr std::size_t kDefaultMaxDimension = 4096;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid inputs, malformed configuration, contract violations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Integrator failure, zero-probability branches and similar numerical faults.
class NumericalError : public Error {
 public:
  using Error::Error;
};

std::size_t total_dimension(const Dims& dims);

class PureState {
 public:
  PureState() = default;
  PureState(CVector amplitudes, Dims dims);

  static PureState basis(const Dims& dims, const std::vector<int>& levels);

  const CVector& amplitudes() const { return amps_; }
  const Dims& dims() const { return dims_; }
  std::size_t dimension() const { return static_cast<std::size_t>(amps_.size()); }

 private:
  CVector amps_;
  Dims dims_;
};

/// Density operator over a composite space of truncated modes.
///
/// Construction does not validate; call validate() where the invariants must
/// be enforced (trace one, Hermitian, no eigenvalue below -1e-8). States are
/// never re-projected onto the PSD cone.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  DensityMatrix(CMatrix matrix, Dims dims);

  static DensityMatrix from_pure(const PureState& psi);
  static DensityMatrix maximally_mixed(const Dims& dims);

  const CMatrix& matrix() const { return m_; }
  const Dims& dims() const { return dims_; }
  std::size_t dimension() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t num_modes() const { return dims_.size(); }

  cplx trace() const { return m_.trace(); }
  double purity() const;
  double min_eigenvalue() const;

  // Throws NumericalError if any invariant fails.
  void validate(double trace_tol = 1e-8, double herm_tol = 1e-10, double eig_tol = 1e-8) const;

 private:
  CMatrix m_;
  Dims dims_;
};

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b,
                     std::size_t max_dimension = kDefaultMaxDimension);
PureState tensor(const PureState& a, const PureState& b,
                 std::size_t max_dimension = kDefaultMaxDimension);

/// Reduced state on `keep`; kept modes stay in their order within `rho`.
DensityMatrix partial_trace(const DensityMatrix& rho, const ModeSet& keep);

double state_fidelity(const DensityMatrix& rho, const PureState& psi);

/// (||rho^{T_A}||_1 - 1) / 2 with T_A the partial transpose over `partition`.
double negativity(const DensityMatrix& rho, const ModeSet& partition);

DensityMatrix partial_transpose(const DensityMatrix& rho, const ModeSet& partition);

/// Bell-basis diagonal of a two-qubit state, ordered (psi+, psi-, phi+, phi-).
struct BellProjection {
  std::array<double, 4> weights{};
  // Frobenius norm of the Bell-basis off-diagonal part.
  double coherence = 0.0;
};

BellProjection bell_weights(const DensityMatrix& rho);

// |psi+> = (|01> + |10>)/sqrt2, etc., over two qubits.
enum class Bell { PsiPlus = 0, PsiMinus = 1, PhiPlus = 2, PhiMinus = 3 };
PureState bell_state(Bell which);
/// Bell vector over two modes of dimension `dim` using levels |0>, |1>.
PureState bell_state(Bell which, int dim);

// ---- operators over composite spaces --------------------------------------

CMatrix destroy(int dim);
CMatrix number_op(int dim);

/// Lifts `op`, acting on `modes` (in the listed order), to the full space.
CMatrix embed(const CMatrix& op, const Dims& dims, const ModeSet& modes);

DensityMatrix apply_unitary(const DensityMatrix& rho, const CMatrix& u, const ModeSet& modes);
PureState apply_unitary(const PureState& psi, const CMatrix& u, const ModeSet& modes);

/// Applies a single-mode superoperator (column-stacked, dim^2 x dim^2).
DensityMatrix apply_mode_superoperator(const DensityMatrix& rho, const CMatrix& superop, int mode);

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

bool is_unitary(const CMatrix& u, double tol);

}  // namespace epsim
