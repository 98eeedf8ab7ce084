#include "epsim/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace epsim {

namespace {

// Row-major strides: the last mode varies fastest.
std::vector<std::size_t> strides_of(const Dims& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (int k = static_cast<int>(dims.size()) - 2; k >= 0; --k)
    s[k] = s[k + 1] * static_cast<std::size_t>(dims[k + 1]);
  return s;
}

void check_modes(const Dims& dims, const ModeSet& modes, bool allow_empty = false) {
  if (modes.empty() && !allow_empty) throw ConfigError("mode set is empty");
  std::vector<int> seen;
  for (int m : modes) {
    if (m < 0 || m >= static_cast<int>(dims.size()))
      throw ConfigError("mode index " + std::to_string(m) + " out of range");
    if (std::find(seen.begin(), seen.end(), m) != seen.end())
      throw ConfigError("mode index " + std::to_string(m) + " repeated");
    seen.push_back(m);
  }
}

// For each full basis index, its index within the sub-space of `modes` (in the
// listed order) and within the complement (in original order).
struct Split {
  std::vector<std::size_t> sub;
  std::vector<std::size_t> rest;
  std::size_t sub_dim = 1;
  std::size_t rest_dim = 1;
};

Split split_indices(const Dims& dims, const ModeSet& modes) {
  Split out;
  const std::size_t total = total_dimension(dims);
  std::vector<bool> in_sub(dims.size(), false);
  for (int m : modes) in_sub[m] = true;
  ModeSet rest;
  for (int k = 0; k < static_cast<int>(dims.size()); ++k)
    if (!in_sub[k]) rest.push_back(k);
  for (int m : modes) out.sub_dim *= dims[m];
  for (int m : rest) out.rest_dim *= dims[m];

  out.sub.resize(total);
  out.rest.resize(total);
  std::vector<int> digits(dims.size(), 0);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t s = 0, r = 0;
    for (int m : modes) s = s * dims[m] + digits[m];
    for (int m : rest) r = r * dims[m] + digits[m];
    out.sub[i] = s;
    out.rest[i] = r;
    for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
      if (++digits[k] < dims[k]) break;
      digits[k] = 0;
    }
  }
  return out;
}

}  // namespace

std::size_t total_dimension(const Dims& dims) {
  std::size_t d = 1;
  for (int x : dims) {
    if (x < 1) throw ConfigError("mode dimension must be positive");
    d *= static_cast<std::size_t>(x);
  }
  return d;
}

// ---- PureState ------------------------------------------------------------

PureState::PureState(CVector amplitudes, Dims dims) : amps_(std::move(amplitudes)), dims_(std::move(dims)) {
  if (static_cast<std::size_t>(amps_.size()) != total_dimension(dims_))
    throw ConfigError("amplitude vector length does not match space dimensions");
  if (std::abs(amps_.squaredNorm() - 1.0) > 1e-10) throw ConfigError("pure state is not normalized");
}

PureState PureState::basis(const Dims& dims, const std::vector<int>& levels) {
  if (levels.size() != dims.size()) throw ConfigError("basis label length mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (levels[k] < 0 || levels[k] >= dims[k]) throw ConfigError("basis level out of range");
    idx = idx * dims[k] + levels[k];
  }
  CVector v = CVector::Zero(static_cast<Eigen::Index>(total_dimension(dims)));
  v(static_cast<Eigen::Index>(idx)) = 1.0;
  return PureState(v, dims);
}

// ---- DensityMatrix --------------------------------------------------------

DensityMatrix::DensityMatrix(CMatrix matrix, Dims dims) : m_(std::move(matrix)), dims_(std::move(dims)) {
  if (m_.rows() != m_.cols()) throw ConfigError("density matrix must be square");
  if (static_cast<std::size_t>(m_.rows()) != total_dimension(dims_))
    throw ConfigError("density matrix size does not match space dimensions");
}

DensityMatrix DensityMatrix::from_pure(const PureState& psi) {
  return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint(), psi.dims());
}

DensityMatrix DensityMatrix::maximally_mixed(const Dims& dims) {
  const auto d = static_cast<Eigen::Index>(total_dimension(dims));
  return DensityMatrix(CMatrix::Identity(d, d) / static_cast<double>(d), dims);
}

double DensityMatrix::purity() const { return (m_ * m_).trace().real(); }

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void DensityMatrix::validate(double trace_tol, double herm_tol, double eig_tol) const {
  const cplx tr = trace();
  if (std::abs(tr - 1.0) > trace_tol) {
    std::ostringstream os;
    os << "density matrix trace " << tr << " deviates from 1";
    throw NumericalError(os.str());
  }
  const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > herm_tol) throw NumericalError("density matrix is not Hermitian (" + std::to_string(herm) + ")");
  const double lam = min_eigenvalue();
  if (lam < -eig_tol) throw NumericalError("density matrix has negative eigenvalue " + std::to_string(lam));
}

// ---- products and traces --------------------------------------------------

namespace {

Dims concat(const Dims& a, const Dims& b) {
  Dims d = a;
  d.insert(d.end(), b.begin(), b.end());
  return d;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b, std::size_t max_dimension) {
  if (a.dimension() * b.dimension() > max_dimension)
    throw ConfigError("tensor product dimension " + std::to_string(a.dimension() * b.dimension()) +
                      " exceeds maximum " + std::to_string(max_dimension));
  return DensityMatrix(kron(a.matrix(), b.matrix()), concat(a.dims(), b.dims()));
}

PureState tensor(const PureState& a, const PureState& b, std::size_t max_dimension) {
  if (a.dimension() * b.dimension() > max_dimension)
    throw ConfigError("tensor product dimension exceeds maximum");
  CVector v(a.amplitudes().size() * b.amplitudes().size());
  for (Eigen::Index i = 0; i < a.amplitudes().size(); ++i)
    v.segment(i * b.amplitudes().size(), b.amplitudes().size()) = a.amplitudes()(i) * b.amplitudes();
  return PureState(v, concat(a.dims(), b.dims()));
}

DensityMatrix partial_trace(const DensityMatrix& rho, const ModeSet& keep) {
  check_modes(rho.dims(), keep);
  ModeSet ordered = keep;
  std::sort(ordered.begin(), ordered.end());
  const Split sp = split_indices(rho.dims(), ordered);

  // Group full indices by their traced-out label.
  std::vector<std::vector<std::size_t>> groups(sp.rest_dim);
  for (std::size_t i = 0; i < sp.sub.size(); ++i) groups[sp.rest[i]].push_back(i);

  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(sp.sub_dim), static_cast<Eigen::Index>(sp.sub_dim));
  const CMatrix& m = rho.matrix();
  for (const auto& g : groups)
    for (std::size_t i : g)
      for (std::size_t j : g) out(sp.sub[i], sp.sub[j]) += m(i, j);

  Dims d;
  for (int k : ordered) d.push_back(rho.dims()[k]);
  return DensityMatrix(out, d);
}

double state_fidelity(const DensityMatrix& rho, const PureState& psi) {
  if (rho.dims() != psi.dims()) throw ConfigError("state_fidelity: space mismatch");
  const cplx f = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
  if (std::abs(f.imag()) > 1e-10) throw NumericalError("state_fidelity: non-real overlap (non-Hermitian state?)");
  return std::clamp(f.real(), 0.0, 1.0);
}

DensityMatrix partial_transpose(const DensityMatrix& rho, const ModeSet& partition) {
  check_modes(rho.dims(), partition);
  ModeSet ordered = partition;
  std::sort(ordered.begin(), ordered.end());
  const Split sp = split_indices(rho.dims(), ordered);
  const std::size_t n = rho.dimension();

  // Full index from (sub, rest) labels.
  std::vector<std::size_t> compose(sp.sub_dim * sp.rest_dim);
  for (std::size_t i = 0; i < n; ++i) compose[sp.sub[i] * sp.rest_dim + sp.rest[i]] = i;

  CMatrix out(rho.matrix().rows(), rho.matrix().cols());
  const CMatrix& m = rho.matrix();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t ii = compose[sp.sub[j] * sp.rest_dim + sp.rest[i]];
      const std::size_t jj = compose[sp.sub[i] * sp.rest_dim + sp.rest[j]];
      out(ii, jj) = m(i, j);
    }
  return DensityMatrix(out, rho.dims());
}

double negativity(const DensityMatrix& rho, const ModeSet& partition) {
  if (partition.empty() || partition.size() >= rho.num_modes())
    throw ConfigError("negativity: partition must be a nonempty proper subset of modes");
  const DensityMatrix pt = partial_transpose(rho, partition);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(pt.matrix(), Eigen::EigenvaluesOnly);
  double neg = 0.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    if (es.eigenvalues()(k) < 0) neg -= es.eigenvalues()(k);
  // sum |lambda| = 1 + 2 * sum_{lambda<0} |lambda| for unit-trace inputs
  return neg;
}

PureState bell_state(Bell which) { return bell_state(which, 2); }

PureState bell_state(Bell which, int dim) {
  if (dim < 2) throw ConfigError("bell_state: dimension must be at least 2");
  const double s = 1.0 / std::sqrt(2.0);
  CVector v = CVector::Zero(dim * dim);
  auto at = [dim](int a, int b) { return a * dim + b; };
  switch (which) {
    case Bell::PsiPlus: v(at(0, 1)) = s; v(at(1, 0)) = s; break;
    case Bell::PsiMinus: v(at(0, 1)) = s; v(at(1, 0)) = -s; break;
    case Bell::PhiPlus: v(at(0, 0)) = s; v(at(1, 1)) = s; break;
    case Bell::PhiMinus: v(at(0, 0)) = s; v(at(1, 1)) = -s; break;
  }
  return PureState(v, {dim, dim});
}

BellProjection bell_weights(const DensityMatrix& rho) {
  if (rho.dims() != Dims{2, 2}) throw ConfigError("bell_weights: expected a two-qubit state");
  CMatrix basis(4, 4);
  for (int k = 0; k < 4; ++k) basis.col(k) = bell_state(static_cast<Bell>(k)).amplitudes();
  const CMatrix in_bell = basis.adjoint() * rho.matrix() * basis;
  BellProjection out;
  double off = 0.0;
  for (int a = 0; a < 4; ++a) {
    out.weights[a] = in_bell(a, a).real();
    for (int b = 0; b < 4; ++b)
      if (a != b) off += std::norm(in_bell(a, b));
  }
  out.coherence = std::sqrt(off);
  return out;
}

// ---- operators ------------------------------------------------------------

CMatrix destroy(int dim) {
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

CMatrix number_op(int dim) {
  CMatrix n = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
  return n;
}

CMatrix embed(const CMatrix& op, const Dims& dims, const ModeSet& modes) {
  check_modes(dims, modes);
  const Split sp = split_indices(dims, modes);
  if (static_cast<std::size_t>(op.rows()) != sp.sub_dim || op.rows() != op.cols())
    throw ConfigError("embed: operator size does not match selected modes");
  const std::size_t n = sp.sub.size();
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<std::vector<std::size_t>> groups(sp.rest_dim);
  for (std::size_t i = 0; i < n; ++i) groups[sp.rest[i]].push_back(i);
  for (const auto& g : groups)
    for (std::size_t i : g)
      for (std::size_t j : g) out(i, j) = op(sp.sub[i], sp.sub[j]);
  return out;
}

DensityMatrix apply_unitary(const DensityMatrix& rho, const CMatrix& u, const ModeSet& modes) {
  const CMatrix full = embed(u, rho.dims(), modes);
  return DensityMatrix(full * rho.matrix() * full.adjoint(), rho.dims());
}

PureState apply_unitary(const PureState& psi, const CMatrix& u, const ModeSet& modes) {
  const CMatrix full = embed(u, psi.dims(), modes);
  CVector v = full * psi.amplitudes();
  v.normalize();
  return PureState(v, psi.dims());
}

DensityMatrix apply_mode_superoperator(const DensityMatrix& rho, const CMatrix& superop, int mode) {
  check_modes(rho.dims(), {mode});
  const int d = rho.dims()[mode];
  if (superop.rows() != d * d || superop.cols() != d * d)
    throw ConfigError("apply_mode_superoperator: superoperator size mismatch");
  const Split sp = split_indices(rho.dims(), {mode});
  const std::size_t n = rho.dimension();

  // index of (level, rest) in the full space
  std::vector<std::size_t> full(n);
  for (std::size_t i = 0; i < n; ++i) full[sp.sub[i] * sp.rest_dim + sp.rest[i]] = i;

  const CMatrix& m = rho.matrix();
  CMatrix out(m.rows(), m.cols());
  CVector block(d * d);
  for (std::size_t r = 0; r < sp.rest_dim; ++r)
    for (std::size_t c = 0; c < sp.rest_dim; ++c) {
      for (int b = 0; b < d; ++b)
        for (int a = 0; a < d; ++a) block(a + d * b) = m(full[a * sp.rest_dim + r], full[b * sp.rest_dim + c]);
      const CVector res = superop * block;
      for (int b = 0; b < d; ++b)
        for (int a = 0; a < d; ++a) out(full[a * sp.rest_dim + r], full[b * sp.rest_dim + c]) = res(a + d * b);
    }
  return DensityMatrix(out, rho.dims());
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dims() != b.dims()) throw ConfigError("trace_distance: space mismatch");
  const CMatrix diff = a.matrix() - b.matrix();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

bool is_unitary(const CMatrix& u, double tol) {
  if (u.rows() != u.cols()) return false;
  const CMatrix id = CMatrix::Identity(u.rows(), u.cols());
  return (u.adjoint() * u - id).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace epsim
