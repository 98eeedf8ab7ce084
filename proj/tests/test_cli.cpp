#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epsim/cli.hpp"

using namespace epsim;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("epsim_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result run(const std::string& args) {
  const fs::path out = scratch_dir() / "stdout.txt", err = scratch_dir() / "stderr.txt";
  const std::string cmd = std::string("\"") + EPSIM_CLI_PATH + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p;
}

std::string source(const std::string& rel) { return (fs::path(EPSIM_SOURCE_DIR) / rel).string(); }

}  // namespace

TEST_CASE("analytic subcommand") {
  const Result r = run("analytic --flimit 0.923");
  CHECK(r.code == 0);
  CHECK(r.out == "0.9577\n");
  CHECK(run("analytic --flimit 0.923 --digits 6").out == "0.957726\n");
  const Result b = run("analytic --budget 0.5,0.5");
  CHECK(b.out == "0.2500\n");
  const Result w = run("analytic --werner-ratio 0.85 --recurrence 0.8 0.923");
  CHECK(w.code == 0);
  CHECK(w.out.rfind("0.8000\n", 0) == 0);
  CHECK(run("analytic").code == 1);
  CHECK(run("analytic --flimit 0.1").code == 1);
}

TEST_CASE("analytic config writes a summary") {
  const fs::path out = scratch_dir() / "analytic.json";
  const Result r = run("--config \"" + source("configs/analytic.json") + "\" --out \"" + out.string() + "\" analytic");
  CHECK(r.code == 0);
  const json j = json::parse(slurp(out));
  CHECK(j.at("flimit").get<double>() == doctest::Approx(f_limit(0.923)));
  CHECK(j.at("recurrence").at("fidelity").get<double>() == doctest::Approx(recurrence_werner(0.8, 0.923).fidelity));
}

TEST_CASE("usage errors") {
  SUBCASE("missing config names the file") {
    const Result r = run("--config /nonexistent/run.json run");
    CHECK(r.code == 1);
    CHECK(r.err.find("/nonexistent/run.json") != std::string::npos);
  }
  SUBCASE("malformed JSON reports line and column") {
    const fs::path p = write("bad.json", "{\n  \"schema\": 1,\n  \"run\": {\"rounds\": 3,,}\n}\n");
    const Result r = run("--config \"" + p.string() + "\" run");
    CHECK(r.code == 1);
    CHECK(r.err.find("line 3") != std::string::npos);
    CHECK(r.err.find("column") != std::string::npos);
  }
  SUBCASE("unknown keys are rejected") {
    const fs::path p = write("typo.json", R"({"schema": 1, "run": {"encoding": "fock", "roundz": 3}})");
    const Result r = run("--config \"" + p.string() + "\" run");
    CHECK(r.code == 1);
    CHECK(r.err.find("roundz") != std::string::npos);
  }
  SUBCASE("payload must match the subcommand") {
    const Result r = run("--config \"" + source("configs/pumping.json") + "\" sweep");
    CHECK(r.code == 1);
  }
  SUBCASE("unknown subcommand") {
    const Result r = run("frobnicate");
    CHECK(r.code == 1);
    CHECK(r.err.find("frobnicate") != std::string::npos);
  }
  SUBCASE("no subcommand") { CHECK(run("").code == 1); }
  SUBCASE("bad schema version") {
    const fs::path p = write("schema.json", R"({"schema": 99, "run": {}})");
    CHECK(run("--config \"" + p.string() + "\" run").code == 1);
  }
  SUBCASE("bad thread count in the environment") {
    const fs::path p = write("env.json", R"({"schema": 1, "sweep": {"encoding": "fock", "tau2_grid_us": [0, 10]}})");
    ::setenv("EPSIM_THREADS", "many", 1);
    const Result r = run("--config \"" + p.string() + "\" sweep");
    ::unsetenv("EPSIM_THREADS");
    CHECK(r.code == 1);
    CHECK(r.err.find("EPSIM_THREADS") != std::string::npos);
  }
  SUBCASE("help exits cleanly") { CHECK(run("--help").code == 0); }
}

TEST_CASE("run output is byte-identical across invocations and matches the library") {
  const fs::path a = scratch_dir() / "a.csv", b = scratch_dir() / "b.csv";
  const std::string cfg = "--config \"" + source("configs/pumping.json") + "\"";
  REQUIRE(run(cfg + " --out \"" + a.string() + "\" run").code == 0);
  REQUIRE(run(cfg + " --out \"" + b.string() + "\" run").code == 0);
  const std::string text = slurp(a);
  CHECK(text == slurp(b));

  ProtocolConfig c;
  c.device = default_device();
  c.encoding = CodeKind::Fock;
  c.rounds = 3;
  c.initial_fidelity = 0.8;
  c.regen_fidelity = 0.923;
  c.seed = 1;
  const ProtocolTrace t = run_ep_physical(c);
  CHECK(text == trace_table(t).to_string());

  SUBCASE("table round trip") {
    const ProtocolTrace back = trace_from_table(CsvTable::parse(text));
    REQUIRE(back.rounds.size() == t.rounds.size());
    for (std::size_t i = 0; i < t.rounds.size(); ++i) {
      CHECK(back.rounds[i].fidelity == t.rounds[i].fidelity);
      CHECK(back.rounds[i].p_success_cum == t.rounds[i].p_success_cum);
      CHECK(back.rounds[i].negativity == t.rounds[i].negativity);
      CHECK(back.rounds[i].outcomes.p == t.rounds[i].outcomes.p);
    }
    CHECK(back.aborted == t.aborted);
    CHECK((back.final_state.matrix() - t.final_state.matrix()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(trace_table(back).to_string() == text);
  }
  SUBCASE("plot data") {
    const fs::path p = scratch_dir() / "plot.csv";
    REQUIRE(run(cfg + " --out /dev/null --emit-plot-data \"" + p.string() + "\" run").code == 0);
    const CsvTable plot = CsvTable::parse(slurp(p));
    CHECK(plot.header == std::vector<std::string>{"series", "x", "y"});
    CHECK(!plot.rows.empty());
  }
}

TEST_CASE("seed override changes only shot sampling") {
  const fs::path p = write("shots.json", R"({"schema": 1, "run": {"encoding": "fock", "rounds": 2,
    "initial_fidelity": 0.8, "shots": 1000, "seed": 1}})");
  const Result a = run("--config \"" + p.string() + "\" run");
  const Result b = run("--config \"" + p.string() + "\" --seed 1 run");
  const Result c = run("--config \"" + p.string() + "\" --seed 2 run");
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const CsvTable ta = CsvTable::parse(a.out), tc = CsvTable::parse(c.out);
  CHECK(ta.number(2, "fidelity") == tc.number(2, "fidelity"));
}

TEST_CASE("sweep output matches the library sweep") {
  const fs::path p = write("sweep.json", R"({"schema": 1, "sweep": {"encoding": "fock",
    "tau2_grid_us": [0, 50, 100], "strategies": ["none", "ep"], "rounds": 1,
    "reentangle": {"model": "parametric", "fidelity": 0.95}}})");
  const Result r = run("--config \"" + p.string() + "\" --threads 2 sweep");
  REQUIRE(r.code == 0);
  ProtocolConfig c;
  c.device = default_device();
  c.encoding = CodeKind::Fock;
  c.rounds = 1;
  c.reentangle = ReentangleModel::Parametric;
  c.regen_fidelity = 0.95;
  const LifespanSweep s = sweep_lifespan(c, {0, 50, 100}, {Strategy::parse("none"), Strategy::parse("ep")});
  CHECK(r.out == sweep_table(s).to_string());
  const CsvTable t = CsvTable::parse(r.out);
  CHECK(t.rows.size() == 6);
  CHECK(t.comments.size() == 2);
}

TEST_CASE("grape subcommand") {
  const fs::path out = scratch_dir() / "pulse.csv";
  const Result r = run("--config \"" + source("configs/grape_toy.json") + "\" --out \"" + out.string() + "\" grape");
  CHECK(r.code == 0);
  const CsvTable t = CsvTable::parse(slurp(out));
  CHECK(t.header.front() == "t_ns");
  CHECK(t.rows.size() == 100);

  const fs::path hard = write("hard.json", R"({"schema": 1, "grape": {"problem": {"builtin": "qubit-flip",
    "n_steps": 2, "dt_ns": 1, "amp_bound_mhz": 1}, "iterations": 20}})");
  const Result h = run("--config \"" + hard.string() + "\" --out /dev/null grape");
  CHECK(h.code == 2);
}
