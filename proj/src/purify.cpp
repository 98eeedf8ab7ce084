#include "epsim/purify.hpp"

#include <cmath>
#include <numeric>

namespace epsim {

namespace {

void check_unit(double f, const char* what) {
  if (!(f >= 0.0 && f <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

BellDiagonal::BellDiagonal(const std::array<double, 4>& w) : w_(w) {
  double sum = 0;
  for (double x : w_) {
    if (!(x >= -1e-12)) throw ConfigError("Bell weights must be non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("Bell weights must sum to one");
}

BellDiagonal BellDiagonal::werner(double fidelity) {
  check_unit(fidelity, "Werner fidelity");
  const double r = (1.0 - fidelity) / 3.0;
  return BellDiagonal({fidelity, r, r, 1.0 - fidelity - 2.0 * r});
}

DensityMatrix BellDiagonal::density_matrix() const {
  CMatrix m = CMatrix::Zero(4, 4);
  for (int k = 0; k < 4; ++k) {
    const CVector v = bell_state(static_cast<Bell>(k)).amplitudes();
    m += w_[k] * v * v.adjoint();
  }
  return DensityMatrix(m, {2, 2});
}

WernerStep recurrence_werner(double fa, double fb) {
  check_unit(fa, "F_A");
  check_unit(fb, "F_B");
  const double ra = (1.0 - fa) / 3.0, rb = (1.0 - fb) / 3.0;
  const double d = fa * fb + fa * rb + ra * fb + 5.0 * ra * rb;
  return {(fa * fb + ra * rb) / d, d};
}

double f_limit(double fb) {
  if (!(fb > 0.25) || fb > 1.0) throw ConfigError("f_limit needs 0.25 < F_B <= 1");
  return (3.0 * (2.0 * fb - 1.0) + std::sqrt(28.0 * fb * fb - 26.0 * fb + 7.0)) / (2.0 * (4.0 * fb - 1.0));
}

BellStep bell_step(const BellDiagonal& a, const BellDiagonal& b) {
  // (parity, phase): psi+ (1,0), psi- (1,1), phi+ (0,0), phi- (0,1). The
  // target parity picks up the control parity and the control phase picks up
  // the target phase; equal measured targets means equal parities.
  const double pp = a[0] * b[0] + a[1] * b[1];
  const double pm = a[0] * b[1] + a[1] * b[0];
  const double fp = a[2] * b[2] + a[3] * b[3];
  const double fm = a[2] * b[3] + a[3] * b[2];
  const double n = pp + pm + fp + fm;
  if (!(n > 0)) throw NumericalError("bell_step: post-selection has zero probability");
  return {BellDiagonal({pp / n, pm / n, fp / n, fm / n}), n};
}

BellDiagonal dejmps_twirl(const BellDiagonal& s) { return BellDiagonal({s[0], s[3], s[2], s[1]}); }

CMatrix dejmps_twirl_unitary() {
  const double c = std::cos(kPi / 4), s = std::sin(kPi / 4);
  CMatrix p(2, 2), m(2, 2);
  p << c, cplx(0, -s), cplx(0, -s), c;
  m << c, cplx(0, s), cplx(0, s), c;
  CMatrix out(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block(2 * i, 2 * j, 2, 2) = p(i, j) * m;
  return out;
}

double werner_ratio(double fidelity) {
  if (!(fidelity >= 0.25 - 1e-12 && fidelity <= 1.0)) throw ConfigError("werner_ratio needs F in [0.25, 1]");
  return std::max(0.0, (4.0 * fidelity - 1.0) / 3.0);
}

void ErrorBudget::add(const std::string& label, double fidelity) {
  entries_.push_back({label, fidelity, werner_ratio(fidelity)});
}

void ErrorBudget::add_ratio(const std::string& label, double ratio) {
  check_unit(ratio, "depolarizing ratio");
  entries_.push_back({label, (3.0 * ratio + 1.0) / 4.0, ratio});
}

double ErrorBudget::product() const {
  double x = 1.0;
  for (const auto& e : entries_) x *= e.ratio;
  return x;
}

double budget_product(const ErrorBudget& b) { return b.product(); }

double budget_product(const std::vector<double>& ratios) {
  double x = 1.0;
  for (double r : ratios) {
    check_unit(r, "depolarizing ratio");
    x *= r;
  }
  return x;
}

Postselected postselect_qubits(const DensityMatrix& rho4, KeepRule keep) {
  const Dims& d = rho4.dims();
  if (d.size() != 4 || d[2] != 2 || d[3] != 2) throw ConfigError("expected a state over (S1, S3, Y1, Y2)");
  const Eigen::Index ds = static_cast<Eigen::Index>(d[0]) * d[1];
  Postselected out;
  out.storage = CMatrix::Zero(ds, ds);
  const double tr = rho4.trace().real();
  for (int q = 0; q < 4; ++q) {
    CMatrix block(ds, ds);
    for (Eigen::Index i = 0; i < ds; ++i)
      for (Eigen::Index j = 0; j < ds; ++j) block(i, j) = rho4.matrix()(4 * i + q, 4 * j + q);
    out.outcomes.p[q] = std::max(0.0, block.trace().real() / tr);
    const bool kept = q == 0 || (q == 3 && keep == KeepRule::GgOrEe);
    if (kept) {
      out.storage += block / tr;
      out.p_kept += out.outcomes.p[q];
    }
  }
  return out;
}

namespace {

CMatrix bilateral_cnot() {
  // controls S1, S3 (modes 0, 1); targets Y1, Y2 (modes 2, 3)
  CMatrix cnot = CMatrix::Zero(4, 4);
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  const Dims dims{2, 2, 2, 2};
  return embed(cnot, dims, {0, 2}) * embed(cnot, dims, {1, 3});
}

}  // namespace

PurifyResult dm_purify_step(const DensityMatrix& rho4, KeepRule keep) {
  if (rho4.dims() != Dims{2, 2, 2, 2}) throw ConfigError("dm_purify_step: expected four two-level modes");
  const CMatrix u = bilateral_cnot();
  const DensityMatrix after(u * rho4.matrix() * u.adjoint(), rho4.dims());
  const Postselected ps = postselect_qubits(after, keep);
  if (!(ps.p_kept > 1e-300)) throw NumericalError("dm_purify_step: kept outcome has zero probability");
  const CMatrix m = ps.storage / ps.p_kept;
  return {DensityMatrix(0.5 * (m + m.adjoint()), {2, 2}), ps.p_kept, ps.outcomes};
}

std::vector<double> pump_iteration(double f0, double fb, int rounds) {
  if (rounds < 0) throw ConfigError("pump_iteration: negative round count");
  std::vector<double> f{f0};
  for (int r = 0; r < rounds; ++r) f.push_back(recurrence_werner(f.back(), fb).fidelity);
  return f;
}

}  // namespace epsim
