#include "doctest.h"
#include "helpers.hpp"

#include "epsim/codes.hpp"
#include "epsim/dynamics.hpp"

using namespace epsim;
using epsim::testing::max_abs;

TEST_CASE("code words") {
  const Encoding b = Encoding::binomial(6);
  const CVector& z = b.logical_zero().amplitudes();
  CHECK(std::abs(z(0) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(z(4) - 1.0 / std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(b.logical_one().amplitudes()(2) - 1.0) < 1e-15);
  CHECK(b.photon_spacing() == 2);
  const CMatrix v = b.isometry();
  CHECK(max_abs(v.adjoint() * v - CMatrix::Identity(2, 2)) < 1e-15);

  const Encoding f = Encoding::fock(3);
  CHECK(std::abs(f.logical_one().amplitudes()(1) - 1.0) < 1e-15);
  CHECK(f.photon_spacing() == 1);
  CHECK_THROWS_AS(Encoding::binomial(4), ConfigError);
  CHECK_THROWS_AS(Encoding::fock(1), ConfigError);
  CHECK(parse_code_kind("binomial") == CodeKind::Binomial);
  CHECK_THROWS_AS(parse_code_kind("cat"), ConfigError);
}

TEST_CASE("both binomial code words have mean photon number two") {
  const Encoding b = Encoding::binomial(6);
  const CMatrix n = number_op(6);
  for (const PureState* w : {&b.logical_zero(), &b.logical_one()}) {
    const cplx mean = w->amplitudes().dot(n * w->amplitudes());
    CHECK(mean.real() == doctest::Approx(2.0));
  }
}

TEST_CASE("encode then decode is the identity on qubit states") {
  std::mt19937_64 rng(1);
  for (CodeKind k : {CodeKind::Fock, CodeKind::Binomial}) {
    const Encoding enc(k, 6);
    for (int trial = 0; trial < 10; ++trial) {
      const PureState q = epsim::testing::random_pure({2}, rng);
      const DecodedQubit d = decode(DensityMatrix::from_pure(encode(q.amplitudes(), enc)), enc);
      CHECK(d.leakage < 1e-14);
      CHECK(max_abs(d.logical.matrix() - DensityMatrix::from_pure(q).matrix()) < 1e-13);
    }
  }
  CHECK_THROWS_AS(encode(CVector::Ones(2), Encoding::fock(2)), ConfigError);
}

TEST_CASE("one photon loss flips binomial parity") {
  const Encoding enc = Encoding::binomial(6);
  const CMatrix a = destroy(6);
  for (const PureState* w : {&enc.logical_zero(), &enc.logical_one()}) {
    CVector lost = a * w->amplitudes();
    lost /= lost.norm();
    const DensityMatrix rho = DensityMatrix::from_pure(PureState(lost, {6}));
    const DetectionResult r = detect_error(rho, 0, enc);
    CHECK(r.supported);
    CHECK(r.odd.probability == doctest::Approx(1.0));
    CHECK_FALSE(r.kept.has_value());
  }
  const DetectionResult clean = detect_error(DensityMatrix::from_pure(enc.logical_zero()), 0, enc);
  CHECK(clean.even.probability == doctest::Approx(1.0));
  REQUIRE(clean.kept.has_value());
  CHECK(max_abs(clean.kept->matrix() - DensityMatrix::from_pure(enc.logical_zero()).matrix()) < 1e-14);
}

TEST_CASE("parity detection after idle loss") {
  // |2> idles: even weight is q^2 + (1-q)^2
  const Encoding enc = Encoding::binomial(6);
  const ModeSpec m{"s", 6, 261, 522, 0, 0};
  const double t = 100;
  const DensityMatrix rho = idle_channel(DensityMatrix::from_pure(enc.logical_one()), 0, m, t);
  const double q = std::exp(-t / 261);
  const double p_even = q * q + (1 - q) * (1 - q);
  const DetectionResult r = detect_error(rho, 0, enc);
  CHECK(r.even.probability == doctest::Approx(p_even).epsilon(1e-10));
  CHECK(r.even.probability + r.odd.probability == doctest::Approx(1.0));
}

TEST_CASE("parity misreports") {
  const Encoding enc = Encoding::binomial(6);
  const DensityMatrix even = DensityMatrix::from_pure(enc.logical_one());
  const DetectionResult r = detect_error(even, 0, enc, 0.1);
  CHECK(r.even.probability == doctest::Approx(0.9));
  CHECK(r.odd.probability == doctest::Approx(0.1));
  CHECK_THROWS_AS(detect_error(even, 0, enc, 1.5), ConfigError);
  CHECK_THROWS_AS(detect_error(even, 1, enc), ConfigError);
}

TEST_CASE("fock encoding has no parity check") {
  const Encoding enc = Encoding::fock(3);
  const DensityMatrix rho = DensityMatrix::from_pure(PureState::basis({3}, {1}));
  const DetectionResult r = detect_error(rho, 0, enc);
  CHECK_FALSE(r.supported);
  REQUIRE(r.kept.has_value());
  CHECK(max_abs(r.kept->matrix() - rho.matrix()) == 0.0);
}

TEST_CASE("detection acts on one cavity of a pair") {
  const Encoding enc = Encoding::binomial(5);
  CVector v = CVector::Zero(25);
  // (|0_L>|1_L> + |1_L>|0_L>)/sqrt2 built from the isometry
  const CMatrix iso = enc.isometry();
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) v(5 * i + j) = (iso(i, 0) * iso(j, 1) + iso(i, 1) * iso(j, 0)) / std::sqrt(2.0);
  const DensityMatrix pair = DensityMatrix::from_pure(PureState(v, {5, 5}));
  const DetectionResult r = detect_error(pair, 1, enc);
  CHECK(r.even.probability == doctest::Approx(1.0));
  const DecodedPair d = decode_pair(*r.kept, enc);
  CHECK(d.leakage < 1e-14);
  CHECK(max_abs(d.block - DensityMatrix::from_pure(bell_state(Bell::PsiPlus)).matrix()) < 1e-14);
}

TEST_CASE("leaked weight is spread uniformly") {
  const Encoding enc = Encoding::fock(3);
  CMatrix m = CMatrix::Zero(9, 9);
  m(4, 4) = 0.6;  // |11>
  m(8, 8) = 0.4;  // |22>, outside the code
  const DecodedPair d = decode_pair(DensityMatrix(m, {3, 3}), enc);
  CHECK(d.leakage == doctest::Approx(0.4));
  const DensityMatrix c = d.completed();
  CHECK(c.matrix()(3, 3).real() == doctest::Approx(0.7));
  CHECK(c.matrix()(0, 0).real() == doctest::Approx(0.1));
  const DecodedQubit q = decode(DensityMatrix::from_pure(PureState::basis({3}, {2})), enc);
  CHECK(q.leakage == doctest::Approx(1.0));
  CHECK(max_abs(q.logical.matrix() - CMatrix::Identity(2, 2) / 2.0) < 1e-15);
}
