#include "doctest.h"
#include "helpers.hpp"

#include "epsim/purify.hpp"

using namespace epsim;
using epsim::testing::max_abs;

namespace {

BellDiagonal random_bell(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<double, 4> w{};
  double s = 0;
  for (double& x : w) s += (x = u(rng));
  for (double& x : w) x /= s;
  return BellDiagonal(w);
}

}  // namespace

TEST_CASE("Werner states") {
  const BellDiagonal w = BellDiagonal::werner(0.7);
  CHECK(w.fidelity() == 0.7);
  CHECK(w[1] == doctest::Approx(0.1));
  CHECK(w[3] == doctest::Approx(0.1));
  const BellProjection p = bell_weights(w.density_matrix());
  for (int k = 0; k < 4; ++k) CHECK(p.weights[k] == doctest::Approx(w[k]));
  CHECK(p.coherence < 1e-14);
  CHECK_THROWS_AS(BellDiagonal::werner(1.2), ConfigError);
  CHECK_THROWS_AS(BellDiagonal({0.5, 0.5, 0.5, -0.5}), ConfigError);
  CHECK_THROWS_AS(BellDiagonal({0.5, 0.1, 0.1, 0.1}), ConfigError);
}

TEST_CASE("Werner recurrence") {
  const WernerStep s = recurrence_werner(0.9, 0.9);
  const double r = 0.1 / 3;
  const double n = 0.81 + 2 * 0.9 * r + 5 * r * r;
  CHECK(s.p_pass == doctest::Approx(n));
  CHECK(s.fidelity == doctest::Approx((0.81 + r * r) / n));
  CHECK(recurrence_werner(1.0, 1.0).fidelity == doctest::Approx(1.0));
  CHECK(recurrence_werner(1.0, 1.0).p_pass == doctest::Approx(1.0));
  // maximally mixed pairs stay maximally mixed and pass half the time
  CHECK(recurrence_werner(0.25, 0.25).fidelity == doctest::Approx(0.25));
  CHECK(recurrence_werner(0.25, 0.25).p_pass == doctest::Approx(0.5));
  CHECK_THROWS_AS(recurrence_werner(-0.1, 0.5), ConfigError);
}

TEST_CASE("pumping converges to the fixed point") {
  for (double fb : {0.6, 0.8, 0.9, 0.95}) {
    const double fl = f_limit(fb);
    CHECK(recurrence_werner(fl, fb).fidelity == doctest::Approx(fl).epsilon(1e-12));
    const std::vector<double> seq = pump_iteration(fb, fb, 60);
    CHECK(seq.size() == 61);
    CHECK(seq.back() == doctest::Approx(fl).epsilon(1e-9));
  }
  CHECK(f_limit(0.923) == doctest::Approx(0.9577).epsilon(1e-4));
  CHECK(f_limit(1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(f_limit(0.25), ConfigError);
  CHECK_THROWS_AS(pump_iteration(0.9, 0.9, -1), ConfigError);
}

TEST_CASE("Bell-diagonal step matches the density-matrix step") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const BellDiagonal a = random_bell(rng), b = random_bell(rng);
    const BellStep bs = bell_step(a, b);
    // (S1, S3) = pair a, (Y1, Y2) = pair b
    const PurifyResult dm = dm_purify_step(tensor(a.density_matrix(), b.density_matrix()), KeepRule::GgOrEe);
    CHECK(std::abs(dm.p_success - bs.p_pass) < 1e-10);
    CHECK(max_abs(dm.state.matrix() - bs.state.density_matrix().matrix()) < 1e-10);
  }
}

TEST_CASE("Werner recurrence agrees with the Bell-diagonal step on Werner inputs") {
  for (double fa : {0.5, 0.7, 0.93}) {
    const BellStep bs = bell_step(BellDiagonal::werner(fa), BellDiagonal::werner(0.85));
    const WernerStep ws = recurrence_werner(fa, 0.85);
    CHECK(bs.state.fidelity() == doctest::Approx(ws.fidelity).epsilon(1e-12));
    CHECK(bs.p_pass == doctest::Approx(ws.p_pass).epsilon(1e-12));
  }
}

TEST_CASE("keeping only gg halves the success probability of perfect pairs") {
  const DensityMatrix bell = DensityMatrix::from_pure(bell_state(Bell::PsiPlus));
  const PurifyResult r = dm_purify_step(tensor(bell, bell), KeepRule::GgOnly);
  CHECK(r.p_success == doctest::Approx(0.5));
  CHECK(r.outcomes.p[0] == doctest::Approx(0.5));
  CHECK(r.outcomes.p[3] == doctest::Approx(0.5));
  CHECK(max_abs(r.state.matrix() - bell.matrix()) < 1e-12);
  CHECK_THROWS_AS(dm_purify_step(bell), ConfigError);
}

TEST_CASE("twirl") {
  const BellDiagonal s({0.6, 0.25, 0.1, 0.05});
  const BellDiagonal t = dejmps_twirl(s);
  CHECK(t[1] == 0.05);
  CHECK(t[3] == 0.25);
  const BellDiagonal tt = dejmps_twirl(t);
  for (int k = 0; k < 4; ++k) CHECK(tt[k] == s[k]);
  const CMatrix u = dejmps_twirl_unitary();
  CHECK(is_unitary(u, 1e-14));
  const CMatrix rotated = u * s.density_matrix().matrix() * u.adjoint();
  CHECK(max_abs(rotated - t.density_matrix().matrix()) < 1e-14);
}

TEST_CASE("error budget") {
  CHECK(werner_ratio(1.0) == 1.0);
  CHECK(werner_ratio(0.25) == 0.0);
  CHECK(werner_ratio(0.85) == doctest::Approx(0.8));
  ErrorBudget b;
  b.add("pair", 0.923);
  b.add_ratio("wait", 0.9);
  CHECK(b.entries().size() == 2);
  CHECK(b.product() == doctest::Approx((4 * 0.923 - 1) / 3 * 0.9));
  CHECK(b.fidelity() == doctest::Approx((3 * b.product() + 1) / 4));
  CHECK(budget_product(std::vector<double>{0.5, 0.5}) == doctest::Approx(0.25));
  CHECK(budget_product(std::vector<double>{}) == 1.0);
  CHECK_THROWS_AS(budget_product(std::vector<double>{1.5}), ConfigError);
  CHECK_THROWS_AS(b.add("bad", 0.1), ConfigError);
}

TEST_CASE("post-selection on larger storage truncations") {
  std::mt19937_64 rng(8);
  const DensityMatrix rho = epsim::testing::random_density({3, 3, 2, 2}, rng);
  const Postselected gg = postselect_qubits(rho, KeepRule::GgOnly);
  const Postselected both = postselect_qubits(rho, KeepRule::GgOrEe);
  double total = 0;
  for (double p : gg.outcomes.p) total += p;
  CHECK(total == doctest::Approx(1.0));
  CHECK(gg.p_kept == doctest::Approx(gg.outcomes.p[0]));
  CHECK(both.p_kept == doctest::Approx(gg.outcomes.p[0] + gg.outcomes.p[3]));
  CHECK(gg.storage.trace().real() == doctest::Approx(gg.p_kept));
  CHECK(max_abs(partial_trace(rho, {0, 1}).matrix() - [&] {
          CMatrix m = CMatrix::Zero(9, 9);
          for (int q = 0; q < 4; ++q) {
            CMatrix blk(9, 9);
            for (int i = 0; i < 9; ++i)
              for (int j = 0; j < 9; ++j) blk(i, j) = rho.matrix()(4 * i + q, 4 * j + q);
            m += blk;
          }
          return m;
        }()) < 1e-14);
}
