#include "doctest.h"
#include "helpers.hpp"

using namespace epsim;
using epsim::testing::max_abs;

namespace {

DensityMatrix basis_dm(const Dims& dims, const std::vector<int>& levels) {
  return DensityMatrix::from_pure(PureState::basis(dims, levels));
}

DensityMatrix werner(double f) {
  const CVector psi = bell_state(Bell::PsiPlus).amplitudes();
  const CMatrix m = f * psi * psi.adjoint() + (1 - f) / 3.0 * (CMatrix::Identity(4, 4) - psi * psi.adjoint());
  return DensityMatrix(m, {2, 2});
}

// Index-by-index partial trace over the last mode of a three-mode state.
CMatrix brute_trace_last(const DensityMatrix& rho) {
  const Dims& d = rho.dims();
  const int a = d[0] * d[1], c = d[2];
  CMatrix out = CMatrix::Zero(a, a);
  for (int i = 0; i < a; ++i)
    for (int j = 0; j < a; ++j)
      for (int k = 0; k < c; ++k) out(i, j) += rho.matrix()(i * c + k, j * c + k);
  return out;
}

}  // namespace

TEST_CASE("tensor of ground states has a single unit entry") {
  const DensityMatrix g = basis_dm({2}, {0});
  const DensityMatrix t = tensor(g, g);
  CHECK(t.dims() == Dims{2, 2});
  CHECK(t.matrix()(0, 0) == cplx(1.0));
  CHECK(t.matrix().cwiseAbs().sum() == doctest::Approx(1.0));
}

TEST_CASE("tensor with the maximally mixed state traces back") {
  std::mt19937_64 rng(11);
  const DensityMatrix rho = epsim::testing::random_density({3}, rng);
  const DensityMatrix t = tensor(rho, DensityMatrix::maximally_mixed({4}));
  CHECK(max_abs(partial_trace(t, {0}).matrix() - rho.matrix()) < 1e-12);
}

TEST_CASE("Bell pair product is rank one with unit trace") {
  const DensityMatrix b = DensityMatrix::from_pure(bell_state(Bell::PsiPlus));
  const DensityMatrix t = tensor(b, b);
  CHECK(t.dimension() == 16);
  CHECK(t.trace().real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.purity() == doctest::Approx(1.0).epsilon(1e-12));
  const CVector v = bell_state(Bell::PsiPlus).amplitudes();
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      CHECK(std::abs(t.matrix()(i, j) - v(i / 4) * std::conj(v(j / 4)) * v(i % 4) * std::conj(v(j % 4))) < 1e-14);
}

TEST_CASE("tensor refuses to exceed the dimension cap") {
  const DensityMatrix a = DensityMatrix::maximally_mixed({64});
  CHECK_THROWS_AS(tensor(a, a, 1024), ConfigError);
}

TEST_CASE("partial trace") {
  SUBCASE("maximally entangled marginal") {
    const DensityMatrix b = DensityMatrix::from_pure(bell_state(Bell::PsiPlus));
    CHECK(max_abs(partial_trace(b, {0}).matrix() - CMatrix::Identity(2, 2) / 2.0) < 1e-14);
  }
  SUBCASE("matches brute-force summation on a random three-mode state") {
    std::mt19937_64 rng(5);
    const DensityMatrix rho = epsim::testing::random_density({2, 3, 2}, rng);
    CHECK(max_abs(partial_trace(rho, {0, 1}).matrix() - brute_trace_last(rho)) < 1e-12);
  }
  SUBCASE("kept modes stay in original order") {
    const DensityMatrix t = tensor(basis_dm({2}, {1}), basis_dm({3}, {2}));
    const DensityMatrix r = partial_trace(t, {1, 0});
    CHECK(r.dims() == Dims{2, 3});
    CHECK(r.matrix()(5, 5).real() == doctest::Approx(1.0));
  }
  SUBCASE("invalid keep sets") {
    const DensityMatrix b = DensityMatrix::maximally_mixed({2, 2});
    CHECK_THROWS_AS(partial_trace(b, {}), ConfigError);
    CHECK_THROWS_AS(partial_trace(b, {0, 0}), ConfigError);
    CHECK_THROWS_AS(partial_trace(b, {2}), ConfigError);
  }
}

TEST_CASE("partial trace inverts tensor for random inputs") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const DensityMatrix a = epsim::testing::random_density({2, 3}, rng);
    const DensityMatrix b = epsim::testing::random_density({3}, rng);
    const DensityMatrix t = tensor(a, b);
    CHECK(max_abs(partial_trace(t, {0, 1}).matrix() - a.matrix()) < 1e-10);
    CHECK(std::abs(t.trace() - 1.0) < 1e-10);
    CHECK_NOTHROW(t.validate());
  }
}

TEST_CASE("state fidelity") {
  const PureState psi = bell_state(Bell::PsiPlus);
  CHECK(state_fidelity(DensityMatrix::from_pure(psi), psi) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(state_fidelity(DensityMatrix::maximally_mixed({2, 2}), psi) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(state_fidelity(werner(0.8), psi) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK_THROWS_AS(state_fidelity(DensityMatrix::maximally_mixed({4}), psi), ConfigError);
}

TEST_CASE("negativity") {
  CHECK(negativity(DensityMatrix::from_pure(bell_state(Bell::PsiPlus)), {0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(negativity(DensityMatrix::maximally_mixed({2, 2}), {0}) == doctest::Approx(0.0).epsilon(1e-12));
  for (double f : {0.3, 0.5, 0.6, 0.75, 0.9, 1.0})
    CHECK(negativity(werner(f), {0}) == doctest::Approx(std::max(0.0, (2 * f - 1) / 2)).epsilon(1e-12));
  CHECK(negativity(werner(0.75), {0}) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(negativity(werner(0.9), {}), ConfigError);
  CHECK_THROWS_AS(negativity(werner(0.9), {0, 1}), ConfigError);
}

TEST_CASE("negativity of separable product states vanishes") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    const DensityMatrix p = tensor(epsim::testing::random_density({2}, rng), epsim::testing::random_density({2}, rng));
    CHECK(negativity(p, {0}) < 1e-12);
  }
}

TEST_CASE("negativity is invariant under local unitaries") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const DensityMatrix rho = epsim::testing::random_density({2, 2}, rng);
    const CMatrix u = epsim::testing::random_unitary(2, rng), v = epsim::testing::random_unitary(2, rng);
    DensityMatrix r2 = apply_unitary(rho, u, {0});
    r2 = apply_unitary(r2, v, {1});
    CHECK(std::abs(negativity(rho, {0}) - negativity(r2, {0})) < 1e-8);
    CHECK(negativity(rho, {0}) <= 0.5 + 1e-12);
  }
}

TEST_CASE("Bell weights") {
  const BellProjection p = bell_weights(DensityMatrix::from_pure(bell_state(Bell::PsiPlus)));
  CHECK(p.weights[0] == doctest::Approx(1.0));
  for (int k = 1; k < 4; ++k) CHECK(std::abs(p.weights[k]) < 1e-14);
  for (double f : {0.4, 0.8, 0.923}) {
    const BellProjection w = bell_weights(werner(f));
    CHECK(std::abs(w.weights[0] - f) < 1e-12);
    for (int k = 1; k < 4; ++k) CHECK(std::abs(w.weights[k] - (1 - f) / 3) < 1e-12);
    CHECK(w.coherence < 1e-12);
  }
  CHECK_THROWS_AS(bell_weights(DensityMatrix::maximally_mixed({4})), ConfigError);
}

TEST_CASE("Bell weights of a random state sum to one and carry the rest as coherence") {
  std::mt19937_64 rng(4);
  const DensityMatrix rho = epsim::testing::random_density({2, 2}, rng);
  const BellProjection p = bell_weights(rho);
  double s = 0;
  for (double w : p.weights) {
    CHECK(w >= -1e-12);
    s += w;
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.coherence > 0);
}

TEST_CASE("density-matrix invariants are enforced by validate") {
  CHECK_NOTHROW(werner(0.7).validate());
  CMatrix bad = CMatrix::Identity(2, 2);
  CHECK_THROWS_AS(DensityMatrix(bad, {2}).validate(), NumericalError);
  CMatrix neg(2, 2);
  neg << 1.1, 0, 0, -0.1;
  CHECK_THROWS_AS(DensityMatrix(neg, {2}).validate(), NumericalError);
  CMatrix nh(2, 2);
  nh << 0.5, 0.1, 0.0, 0.5;
  CHECK_THROWS_AS(DensityMatrix(nh, {2}).validate(), NumericalError);
}

TEST_CASE("pure state construction checks") {
  CHECK_THROWS_AS(PureState(CVector::Ones(3), {3}), ConfigError);
  CHECK_THROWS_AS(PureState(CVector::Zero(4), {3}), ConfigError);
  CHECK_THROWS_AS(PureState::basis({2, 2}, {0, 2}), ConfigError);
}

TEST_CASE("embed places operators on the listed modes in order") {
  const CMatrix a = destroy(3);
  const Dims dims{2, 3};
  const CMatrix full = embed(a, dims, {1});
  CHECK(max_abs(full - Eigen::kroneckerProduct(CMatrix::Identity(2, 2), a).eval()) < 1e-15);
  const CMatrix sw = embed(Eigen::kroneckerProduct(number_op(3), destroy(2)).eval(), dims, {1, 0});
  CHECK(max_abs(sw - Eigen::kroneckerProduct(destroy(2), number_op(3)).eval()) < 1e-15);
}

TEST_CASE("trace distance and unitarity helpers") {
  const DensityMatrix g = basis_dm({2}, {0}), e = basis_dm({2}, {1});
  CHECK(trace_distance(g, e) == doctest::Approx(1.0));
  CHECK(trace_distance(g, g) == doctest::Approx(0.0));
  std::mt19937_64 rng(1);
  CHECK(is_unitary(epsim::testing::random_unitary(5, rng), 1e-12));
  CHECK_FALSE(is_unitary(destroy(3), 1e-6));
}
