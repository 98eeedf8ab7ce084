#include "doctest.h"
#include "helpers.hpp"

#include "epsim/protocol.hpp"

using namespace epsim;
using epsim::testing::max_abs;

namespace {

ProtocolConfig fock_config() {
  ProtocolConfig c;
  c.device = default_device();
  c.encoding = CodeKind::Fock;
  c.initial_fidelity = 0.8;
  c.rounds = 4;
  return c;
}

ProtocolConfig binomial_config() {
  ProtocolConfig c;
  c.device = default_device();
  c.encoding = CodeKind::Binomial;
  c.rounds = 1;
  c.bus_dim = 10;
  return c;
}

double expected_kept(const RoundRecord& r, KeepRule keep) {
  if (r.round == 0) return 1.0 - r.p_parity_discard;
  const double ps = r.outcomes.p[0] + (keep == KeepRule::GgOrEe ? r.outcomes.p[3] : 0.0);
  return ps * (1.0 - r.p_parity_discard);
}

void check_bookkeeping(const ProtocolTrace& t, KeepRule keep) {
  double cum = 1.0;
  for (const RoundRecord& r : t.rounds) {
    CHECK(r.p_kept == doctest::Approx(expected_kept(r, keep)).epsilon(1e-12));
    cum *= r.p_kept;
    CHECK(r.p_success_cum == doctest::Approx(cum).epsilon(1e-12));
    CHECK(r.fidelity >= 0.0);
    CHECK(r.fidelity <= 1.0);
  }
}

}  // namespace

TEST_CASE("strategy names") {
  CHECK(Strategy::parse("none").name() == "none");
  CHECK(Strategy::parse("ed+ep").name() == "ed+ep");
  CHECK(Strategy::parse("ep+ed").name() == "ed+ep");
  CHECK(Strategy::parse("ep").ep);
  CHECK_FALSE(Strategy::parse("ep").ed);
  CHECK_THROWS_AS(Strategy::parse("both"), ConfigError);
}

TEST_CASE("config defaults and validation") {
  ProtocolConfig c = fock_config();
  CHECK(c.resolved_storage_dim() == 3);
  CHECK(c.resolved_twirl());
  CHECK(c.resolved_reentangle() == ReentangleModel::Parametric);
  CHECK_NOTHROW(c.validate());
  ProtocolConfig b = binomial_config();
  CHECK(b.resolved_storage_dim() == 6);
  CHECK_FALSE(b.resolved_twirl());
  CHECK(b.resolved_reentangle() == ReentangleModel::FullCip);

  ProtocolConfig bad = c;
  bad.tau_us = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.regen_fidelity = 0.2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.rounds = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = b;
  bad.storage_dim = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.device = DeviceGraph();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.parity_flip_probability = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(run_ep_physical(b), ConfigError);
}

TEST_CASE("pair metrics") {
  const Encoding enc = Encoding::fock(3);
  const PureState bell = bell_state(Bell::PsiPlus, 3);
  const PairMetrics m = pair_metrics(DensityMatrix::from_pure(bell), enc);
  CHECK(m.fidelity == doctest::Approx(1.0));
  CHECK(m.negativity == doctest::Approx(0.5));
  CHECK(m.leakage < 1e-15);
  const PairMetrics v = pair_metrics(DensityMatrix::from_pure(PureState::basis({3, 3}, {2, 2})), enc);
  CHECK(v.fidelity == 0.0);
  CHECK(v.leakage == doctest::Approx(1.0));
  CHECK(v.negativity < 1e-12);
}

TEST_CASE("perfect pairs without noise stay perfect") {
  ProtocolConfig c = fock_config();
  c.noise = NoiseModel::off();
  c.initial_fidelity = 1.0;
  c.regen_fidelity = 1.0;
  c.tau_us = 5.0;
  const ProtocolTrace t = run_ep_physical(c);
  REQUIRE(t.rounds.size() == 5);
  for (const RoundRecord& r : t.rounds) {
    CHECK(r.fidelity == doctest::Approx(1.0).epsilon(1e-9));
    if (r.round > 0) CHECK(r.p_kept == doctest::Approx(0.5).epsilon(1e-9));
  }
  CHECK(t.rounds.back().p_success_cum == doctest::Approx(std::pow(0.5, 4)).epsilon(1e-9));
  CHECK(t.final_negativity() == doctest::Approx(0.5).epsilon(1e-9));
  check_bookkeeping(t, c.keep);

  ProtocolConfig k = c;
  k.keep = KeepRule::GgOrEe;
  const ProtocolTrace tk = run_ep_physical(k);
  for (std::size_t i = 1; i < tk.rounds.size(); ++i) CHECK(tk.rounds[i].p_kept == doctest::Approx(1.0).epsilon(1e-9));
  check_bookkeeping(tk, k.keep);
}

TEST_CASE("pumping approaches a plateau") {
  ProtocolConfig c = fock_config();
  c.rounds = 8;
  const ProtocolTrace t = run_ep_physical(c);
  REQUIRE(t.rounds.size() == 9);
  CHECK(t.rounds[0].fidelity == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(t.rounds[1].fidelity > t.rounds[0].fidelity);
  const double last = t.rounds[8].fidelity;
  CHECK(std::abs(t.rounds[3].fidelity - last) < std::abs(t.rounds[1].fidelity - last));
  for (std::size_t i = 5; i < t.rounds.size(); ++i) CHECK(std::abs(t.rounds[i].fidelity - last) < 2e-3);
  check_bookkeeping(t, c.keep);
}

TEST_CASE("regenerated round-zero pair") {
  ProtocolConfig c = fock_config();
  c.initial_fidelity.reset();
  c.rounds = 1;
  const ProtocolTrace t = run_ep_physical(c);
  REQUIRE(t.rounds.size() == 2);
  CHECK(t.rounds[0].fidelity < c.regen_fidelity);
  CHECK(t.rounds[0].fidelity > 0.85);
  check_bookkeeping(t, c.keep);
}

TEST_CASE("runs are deterministic") {
  ProtocolConfig c = fock_config();
  c.shots = 500;
  c.seed = 11;
  const ProtocolTrace a = run_ep_physical(c), b = run_ep_physical(c);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    CHECK(a.rounds[i].fidelity == b.rounds[i].fidelity);
    CHECK(a.rounds[i].kept_shots == b.rounds[i].kept_shots);
  }
  CHECK(max_abs(a.final_state.matrix() - b.final_state.matrix()) == 0.0);
}

TEST_CASE("shot sampling") {
  ProtocolConfig c = fock_config();
  c.shots = 2000;
  c.seed = 3;
  const ProtocolTrace t = run_ep_physical(c);
  CHECK_FALSE(t.aborted);
  CHECK(t.rounds[0].kept_shots == 2000);
  for (std::size_t i = 1; i < t.rounds.size(); ++i) {
    CHECK(t.rounds[i].kept_shots <= t.rounds[i - 1].kept_shots);
    const double expect = t.rounds[i - 1].kept_shots * t.rounds[i].p_kept;
    CHECK(std::abs(t.rounds[i].kept_shots - expect) < 5 * std::sqrt(expect) + 1);
  }
  SUBCASE("running out of shots aborts with the rounds so far") {
    ProtocolConfig s = c;
    s.shots = 1;
    s.rounds = 30;
    const ProtocolTrace a = run_ep_physical(s);
    CHECK(a.aborted);
    CHECK_FALSE(a.abort_reason.empty());
    CHECK(a.rounds.size() < 31);
    CHECK(a.rounds.back().kept_shots == 0);
    CHECK(a.final_state.dims() == Dims{2, 2});
  }
}

TEST_CASE("binomial storage loses negativity while idle") {
  ProtocolConfig c = binomial_config();
  c.strategy = Strategy::parse("none");
  double prev = 1.0;
  for (double tau2 : {0.0, 20.0, 40.0}) {
    c.tau2_us = tau2;
    const ProtocolTrace t = run_ep_logical(c);
    REQUIRE(t.rounds.size() == 1);
    CHECK(t.final_negativity() < prev);
    prev = t.final_negativity();
  }
  CHECK(prev > 0.0);
}

TEST_CASE("logical strategies") {
  ProtocolConfig c = binomial_config();
  c.tau2_us = 100.0;
  const JointEchoedCip gate(protocol_cip_system(c), c.cip, c.integrator);
  c.strategy = Strategy::parse("none");
  const ProtocolTrace none = run_ep_logical(c, gate);
  c.strategy = Strategy::parse("ed");
  const ProtocolTrace ed = run_ep_logical(c, gate);
  c.strategy = Strategy::parse("ed+ep");
  const ProtocolTrace both = run_ep_logical(c, gate);

  CHECK(ed.rounds.size() == 1);
  CHECK(both.rounds.size() == 2);
  CHECK(ed.final_fidelity() > none.final_fidelity());
  CHECK(ed.rounds.back().p_parity_discard > 0.0);
  CHECK(ed.rounds.back().p_success_cum < 1.0);
  check_bookkeeping(ed, c.keep);
  check_bookkeeping(both, c.keep);

  SUBCASE("a shared gate reproduces a private one") {
    const ProtocolTrace own = run_ep_logical(c);
    CHECK(own.final_fidelity() == doctest::Approx(both.final_fidelity()).epsilon(1e-12));
  }
  SUBCASE("a shared gate needs the full model") {
    ProtocolConfig p = c;
    p.reentangle = ReentangleModel::Parametric;
    CHECK_THROWS_AS(run_ep_logical(p, gate), ConfigError);
  }
}
