#pragma once

#include <optional>
#include <string>

#include "epsim/qstate.hpp"

namespace epsim {

enum class CodeKind { Fock, Binomial };

CodeKind parse_code_kind(const std::string& s);
std::string to_string(CodeKind k);

/// Logical qubit carried by one cavity.
///   fock:      |0_L> = |0>,               |1_L> = |1>
///   binomial:  |0_L> = (|0> + |4>)/sqrt2, |1_L> = |2>
class Encoding {
 public:
  Encoding(CodeKind kind, int cavity_dim);

  static Encoding fock(int cavity_dim) { return {CodeKind::Fock, cavity_dim}; }
  static Encoding binomial(int cavity_dim) { return {CodeKind::Binomial, cavity_dim}; }

  CodeKind kind() const { return kind_; }
  int cavity_dim() const { return dim_; }
  const PureState& logical_zero() const { return zero_; }
  const PureState& logical_one() const { return one_; }
  // Photon-number spacing between code words: 1 (fock) or 2 (binomial).
  int photon_spacing() const { return kind_ == CodeKind::Fock ? 1 : 2; }

  /// dim x 2 isometry whose columns are |0_L>, |1_L>.
  CMatrix isometry() const;
  CMatrix code_projector() const;

 private:
  CodeKind kind_;
  int dim_;
  PureState zero_;
  PureState one_;
};

PureState encode(const CVector& qubit_state, const Encoding& enc);

enum class Parity { Even, Odd };

struct ParityOutcome {
  Parity outcome = Parity::Even;
  double probability = 1.0;
};

struct DetectionResult {
  // Normalized state conditioned on a reported even parity; empty when that
  // report has zero probability.
  std::optional<DensityMatrix> kept;
  ParityOutcome even{Parity::Even, 1.0};
  ParityOutcome odd{Parity::Odd, 0.0};
  // False for encodings without a detectable parity (fock).
  bool supported = true;
};

CMatrix parity_projector(int dim, Parity p);

/// Projective photon-parity check on one cavity of a composite state.
/// `flip_probability` is the chance the reported parity is wrong.
DetectionResult detect_error(const DensityMatrix& rho, int cavity, const Encoding& enc,
                             double flip_probability = 0.0);

struct DecodedQubit {
  DensityMatrix logical;  // normalized 2x2 (maximally mixed if nothing is in the code space)
  CMatrix block;          // unnormalized code-space block
  double leakage = 0.0;   // 1 - Tr(P_code rho)
};

DecodedQubit decode(const DensityMatrix& cavity_state, const Encoding& enc);

/// Two-cavity version over (cavity_a, cavity_b): the unnormalized 4x4
/// code-space block and the leaked weight.
struct DecodedPair {
  CMatrix block;
  double leakage = 0.0;
  /// Block completed with the leaked weight spread uniformly (leakage * I/4).
  DensityMatrix completed() const;
};

DecodedPair decode_pair(const DensityMatrix& pair_state, const Encoding& enc);

}  // namespace epsim
