#include "epsim/codes.hpp"

#include <cmath>

namespace epsim {

CodeKind parse_code_kind(const std::string& s) {
  if (s == "fock") return CodeKind::Fock;
  if (s == "binomial") return CodeKind::Binomial;
  throw ConfigError("unknown encoding '" + s + "' (expected fock or binomial)");
}

std::string to_string(CodeKind k) { return k == CodeKind::Fock ? "fock" : "binomial"; }

Encoding::Encoding(CodeKind kind, int cavity_dim) : kind_(kind), dim_(cavity_dim) {
  const int need = kind == CodeKind::Binomial ? 5 : 2;
  if (cavity_dim < need)
    throw ConfigError(to_string(kind) + " encoding needs cavity truncation >= " + std::to_string(need));
  CVector z = CVector::Zero(dim_), o = CVector::Zero(dim_);
  if (kind == CodeKind::Fock) {
    z(0) = 1.0;
    o(1) = 1.0;
  } else {
    z(0) = z(4) = 1.0 / std::sqrt(2.0);
    o(2) = 1.0;
  }
  zero_ = PureState(z, {dim_});
  one_ = PureState(o, {dim_});
}

CMatrix Encoding::isometry() const {
  CMatrix v(dim_, 2);
  v.col(0) = zero_.amplitudes();
  v.col(1) = one_.amplitudes();
  return v;
}

CMatrix Encoding::code_projector() const {
  const CMatrix v = isometry();
  return v * v.adjoint();
}

PureState encode(const CVector& qubit_state, const Encoding& enc) {
  if (qubit_state.size() != 2) throw ConfigError("encode: expected a two-component qubit state");
  if (std::abs(qubit_state.squaredNorm() - 1.0) > 1e-10) throw ConfigError("encode: input is not normalized");
  return PureState(enc.isometry() * qubit_state, {enc.cavity_dim()});
}

CMatrix parity_projector(int dim, Parity p) {
  CMatrix out = CMatrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n)
    if ((n % 2 == 0) == (p == Parity::Even)) out(n, n) = 1.0;
  return out;
}

DetectionResult detect_error(const DensityMatrix& rho, int cavity, const Encoding& enc, double flip_probability) {
  if (cavity < 0 || cavity >= static_cast<int>(rho.num_modes())) throw ConfigError("detect_error: cavity out of range");
  if (!(flip_probability >= 0 && flip_probability <= 1)) throw ConfigError("detect_error: flip probability outside [0,1]");
  DetectionResult res;
  if (enc.kind() == CodeKind::Fock) {
    res.supported = false;
    res.kept = rho;
    return res;
  }
  const int dim = rho.dims()[cavity];
  const CMatrix pe = embed(parity_projector(dim, Parity::Even), rho.dims(), {cavity});
  const CMatrix po = embed(parity_projector(dim, Parity::Odd), rho.dims(), {cavity});
  const CMatrix even_branch = pe * rho.matrix() * pe;
  const CMatrix odd_branch = po * rho.matrix() * po;
  const double p_even = even_branch.trace().real();
  const double p_odd = odd_branch.trace().real();
  if (p_even + p_odd < 1e-14) throw NumericalError("detect_error: both parity outcomes have zero probability");

  const double report_even = (1.0 - flip_probability) * p_even + flip_probability * p_odd;
  res.even = {Parity::Even, report_even / (p_even + p_odd)};
  res.odd = {Parity::Odd, 1.0 - res.even.probability};
  if (report_even > 1e-14) {
    const CMatrix kept = ((1.0 - flip_probability) * even_branch + flip_probability * odd_branch) / report_even;
    res.kept = DensityMatrix(0.5 * (kept + kept.adjoint()), rho.dims());
  }
  return res;
}

DecodedQubit decode(const DensityMatrix& cavity_state, const Encoding& enc) {
  if (cavity_state.dims() != Dims{enc.cavity_dim()}) throw ConfigError("decode: expected a single cavity state");
  const CMatrix v = enc.isometry();
  DecodedQubit out{DensityMatrix::maximally_mixed({2}), v.adjoint() * cavity_state.matrix() * v, 0.0};
  const double in_code = out.block.trace().real();
  out.leakage = std::clamp(1.0 - in_code, 0.0, 1.0);
  if (in_code > 1e-14) out.logical = DensityMatrix(out.block / in_code, {2});
  return out;
}

DecodedPair decode_pair(const DensityMatrix& pair_state, const Encoding& enc) {
  if (pair_state.dims() != Dims{enc.cavity_dim(), enc.cavity_dim()})
    throw ConfigError("decode_pair: expected a two-cavity state");
  const CMatrix v = enc.isometry();
  CMatrix vv(v.rows() * v.rows(), 4);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (Eigen::Index i = 0; i < v.rows(); ++i)
        for (Eigen::Index j = 0; j < v.rows(); ++j) vv(i * v.rows() + j, 2 * a + b) = v(i, a) * v(j, b);
  DecodedPair out;
  out.block = vv.adjoint() * pair_state.matrix() * vv;
  out.leakage = std::clamp(1.0 - out.block.trace().real(), 0.0, 1.0);
  return out;
}

DensityMatrix DecodedPair::completed() const {
  CMatrix m = block + leakage * CMatrix::Identity(4, 4) / 4.0;
  m /= m.trace().real();
  return DensityMatrix(0.5 * (m + m.adjoint()), {2, 2});
}

}  // namespace epsim
