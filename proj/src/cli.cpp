#include "epsim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"

namespace epsim {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
void maybe(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get<T>(j, key, where);
}

CMatrix matrix_from_json(const json& j, const std::string& where) {
  check_keys(j, {"re", "im"}, where);
  const auto re = get<std::vector<std::vector<double>>>(j, "re", where);
  std::vector<std::vector<double>> im;
  maybe(j, "im", im, where);
  const auto n = static_cast<Eigen::Index>(re.size());
  CMatrix m = CMatrix::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(re[r].size()) != n) throw ConfigError(where + ": matrix must be square");
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = re[r][c];
  }
  if (!im.empty()) {
    if (static_cast<Eigen::Index>(im.size()) != n) throw ConfigError(where + ": im has the wrong shape");
    for (Eigen::Index r = 0; r < n; ++r) {
      if (static_cast<Eigen::Index>(im[r].size()) != n) throw ConfigError(where + ": im has the wrong shape");
      for (Eigen::Index c = 0; c < n; ++c) m(r, c) += cplx(0, im[r][c]);
    }
  }
  return m;
}

PureState state_from_json(const json& j, const Dims& dims, const std::string& where) {
  check_keys(j, {"re", "im"}, where);
  const auto re = get<std::vector<double>>(j, "re", where);
  std::vector<double> im(re.size(), 0.0);
  maybe(j, "im", im, where);
  if (im.size() != re.size()) throw ConfigError(where + ": re and im differ in length");
  CVector v(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) v(static_cast<Eigen::Index>(i)) = cplx(re[i], im[i]);
  if (v.size() != static_cast<Eigen::Index>(total_dimension(dims))) throw ConfigError(where + ": length differs from dims");
  return PureState(v, dims);
}

std::string fmt(double x) { return format_double(x); }

}  // namespace

IntegratorConfig integrator_from_json(const json& j) {
  const std::string w = "integrator";
  check_keys(j, {"dt_ns", "method", "max_step_error"}, w);
  IntegratorConfig c = IntegratorConfig::driven();
  maybe(j, "dt_ns", c.dt_ns, w);
  maybe(j, "max_step_error", c.max_step_error, w);
  if (j.contains("method")) {
    const auto m = get<std::string>(j, "method", w);
    if (m == "rk4")
      c.method = IntegrationMethod::Rk4;
    else if (m == "adaptive")
      c.method = IntegrationMethod::Adaptive;
    else
      throw ConfigError("integrator.method must be rk4 or adaptive");
  }
  c.validate();
  return c;
}

NoiseModel noise_from_json(const json& j) {
  check_keys(j, {"decoherence", "thermal"}, "noise");
  NoiseModel n;
  maybe(j, "decoherence", n.decoherence, "noise");
  maybe(j, "thermal", n.thermal, "noise");
  return n;
}

namespace {

PulseShape shape_from_string(const std::string& s) {
  if (s == "shifted") return PulseShape::Shifted;
  if (s == "truncated") return PulseShape::Truncated;
  throw ConfigError("cip.shape must be shifted or truncated");
}

}  // namespace

ProtocolConfig protocol_config_from_json(const json& j, const DeviceGraph& device) {
  const std::string w = "payload";
  check_keys(j,
             {"experiment", "encoding", "tau_us", "tau1_us", "tau2_us", "tau2_grid_us", "strategies", "rounds",
              "strategy", "reentangle", "initial_fidelity", "twirl", "ed_mode", "keep", "parity_flip_probability",
              "storage_dim", "bus_dim", "noise", "integrator", "cip", "timings", "seed", "shots", "cnot_crosstalk"},
             w);
  ProtocolConfig c;
  c.device = device;
  if (j.contains("encoding")) c.encoding = parse_code_kind(get<std::string>(j, "encoding", w));
  maybe(j, "tau_us", c.tau_us, w);
  maybe(j, "tau1_us", c.tau1_us, w);
  maybe(j, "tau2_us", c.tau2_us, w);
  maybe(j, "rounds", c.rounds, w);
  if (j.contains("strategy")) {
    const json& s = j.at("strategy");
    if (s.is_string()) {
      c.strategy = Strategy::parse(s.get<std::string>());
    } else {
      check_keys(s, {"ep", "ed"}, "strategy");
      c.strategy = {false, false};
      maybe(s, "ep", c.strategy.ep, "strategy");
      maybe(s, "ed", c.strategy.ed, "strategy");
    }
  }
  if (j.contains("reentangle")) {
    const json& r = j.at("reentangle");
    check_keys(r, {"model", "fidelity"}, "reentangle");
    if (r.contains("model")) {
      const auto m = get<std::string>(r, "model", "reentangle");
      if (m == "parametric")
        c.reentangle = ReentangleModel::Parametric;
      else if (m == "full-cip")
        c.reentangle = ReentangleModel::FullCip;
      else
        throw ConfigError("reentangle.model must be parametric or full-cip");
    }
    maybe(r, "fidelity", c.regen_fidelity, "reentangle");
  }
  if (j.contains("initial_fidelity")) c.initial_fidelity = get<double>(j, "initial_fidelity", w);
  if (j.contains("twirl")) c.twirl = get<bool>(j, "twirl", w);
  if (j.contains("ed_mode")) {
    const auto m = get<std::string>(j, "ed_mode", w);
    if (m == "per_round")
      c.ed_mode = EdMode::PerRound;
    else if (m == "final")
      c.ed_mode = EdMode::Final;
    else
      throw ConfigError("ed_mode must be per_round or final");
  }
  if (j.contains("keep")) {
    const auto k = get<std::string>(j, "keep", w);
    if (k == "gg")
      c.keep = KeepRule::GgOnly;
    else if (k == "gg-or-ee")
      c.keep = KeepRule::GgOrEe;
    else
      throw ConfigError("keep must be gg or gg-or-ee");
  }
  maybe(j, "parity_flip_probability", c.parity_flip_probability, w);
  maybe(j, "storage_dim", c.storage_dim, w);
  maybe(j, "bus_dim", c.bus_dim, w);
  if (j.contains("noise")) c.noise = noise_from_json(j.at("noise"));
  if (j.contains("integrator")) c.integrator = integrator_from_json(j.at("integrator"));
  if (j.contains("cip")) {
    const json& p = j.at("cip");
    check_keys(p, {"delta_mhz", "amp_mhz", "tau_ns", "shape"}, "cip");
    maybe(p, "delta_mhz", c.cip.delta_mhz, "cip");
    maybe(p, "amp_mhz", c.cip.amp_mhz, "cip");
    maybe(p, "tau_ns", c.cip.tau_ns, "cip");
    if (p.contains("shape")) c.cip_shape = shape_from_string(get<std::string>(p, "shape", "cip"));
  }
  if (j.contains("timings")) {
    const json& t = j.at("timings");
    check_keys(t, {"regen_us", "measure_us", "swap_us", "encode_us"}, "timings");
    maybe(t, "regen_us", c.timings.regen_us, "timings");
    maybe(t, "measure_us", c.timings.measure_us, "timings");
    maybe(t, "swap_us", c.timings.swap_us, "timings");
    maybe(t, "encode_us", c.timings.encode_us, "timings");
  }
  maybe(j, "seed", c.seed, w);
  maybe(j, "shots", c.shots, w);
  maybe(j, "cnot_crosstalk", c.cnot_crosstalk, w);
  c.validate();
  return c;
}

ControlProblem control_problem_from_json(const json& j) {
  const std::string w = "grape.problem";
  check_keys(j, {"builtin", "chi1_mhz", "chi2_mhz", "n_steps", "dt_ns", "amp_bound_mhz", "dims", "drift", "controls",
                 "initial", "target"},
             w);
  ControlProblem p;
  if (j.contains("builtin")) {
    const auto name = get<std::string>(j, "builtin", w);
    int n_steps = 0;
    double dt = 0, bound = 0;
    maybe(j, "n_steps", n_steps, w);
    maybe(j, "dt_ns", dt, w);
    maybe(j, "amp_bound_mhz", bound, w);
    if (name == "qubit-flip") {
      p = qubit_flip_problem(n_steps ? n_steps : 20, dt > 0 ? dt : 10.0, bound > 0 ? bound : 20.0);
    } else if (name == "toy-reentangle") {
      double c1 = 1.433, c2 = 0.711;
      maybe(j, "chi1_mhz", c1, w);
      maybe(j, "chi2_mhz", c2, w);
      p = toy_reentangle_problem(c1, c2, n_steps ? n_steps : 100, dt > 0 ? dt : 10.0, bound > 0 ? bound : 20.0);
    } else {
      throw ConfigError("grape.problem.builtin must be qubit-flip or toy-reentangle");
    }
  } else {
    const auto dims = get<Dims>(j, "dims", w);
    p.drift = matrix_from_json(j.at("drift"), w + ".drift");
    for (const json& c : get<json>(j, "controls", w)) p.controls.push_back(matrix_from_json(c, w + ".controls"));
    for (const json& s : get<json>(j, "initial", w)) p.initial.push_back(state_from_json(s, dims, w + ".initial"));
    for (const json& s : get<json>(j, "target", w)) p.target.push_back(state_from_json(s, dims, w + ".target"));
    p.n_steps = get<int>(j, "n_steps", w);
    p.dt_ns = get<double>(j, "dt_ns", w);
    p.amp_bound_mhz = get<double>(j, "amp_bound_mhz", w);
  }
  p.validate();
  return p;
}

// ---- tables -----------------------------------------------------------------

CsvTable trace_table(const ProtocolTrace& trace) {
  CsvTable t;
  t.header = {"round", "fidelity", "p_success_cum", "p_parity_discard", "negativity",
              "p_kept", "p_gg", "p_ge", "p_eg", "p_ee", "kept_shots"};
  for (const RoundRecord& r : trace.rounds) {
    t.rows.push_back({std::to_string(r.round), fmt(r.fidelity), fmt(r.p_success_cum), fmt(r.p_parity_discard),
                      fmt(r.negativity), fmt(r.p_kept), fmt(r.outcomes.p[0]), fmt(r.outcomes.p[1]),
                      fmt(r.outcomes.p[2]), fmt(r.outcomes.p[3]), std::to_string(r.kept_shots)});
  }
  t.comments.push_back(std::string("aborted ") + (trace.aborted ? "1" : "0"));
  if (trace.aborted) t.comments.push_back("abort_reason " + trace.abort_reason);
  const CMatrix& m = trace.final_state.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      t.comments.push_back("final_state " + std::to_string(r) + " " + std::to_string(c) + " " + fmt(m(r, c).real()) +
                           " " + fmt(m(r, c).imag()));
  return t;
}

ProtocolTrace trace_from_table(const CsvTable& t) {
  ProtocolTrace trace;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    RoundRecord r;
    r.round = static_cast<int>(t.number(i, "round"));
    r.fidelity = t.number(i, "fidelity");
    r.p_success_cum = t.number(i, "p_success_cum");
    r.p_parity_discard = t.number(i, "p_parity_discard");
    r.negativity = t.number(i, "negativity");
    r.p_kept = t.number(i, "p_kept");
    r.outcomes.p = {t.number(i, "p_gg"), t.number(i, "p_ge"), t.number(i, "p_eg"), t.number(i, "p_ee")};
    r.kept_shots = static_cast<int>(t.number(i, "kept_shots"));
    trace.rounds.push_back(r);
  }
  std::vector<std::tuple<int, int, cplx>> entries;
  int n = 0;
  for (const std::string& c : t.comments) {
    std::istringstream in(c);
    std::string key;
    in >> key;
    if (key == "aborted") {
      int a = 0;
      in >> a;
      trace.aborted = a != 0;
    } else if (key == "abort_reason") {
      trace.abort_reason = c.size() > key.size() + 1 ? c.substr(key.size() + 1) : "";
    } else if (key == "final_state") {
      int r = 0, col = 0;
      std::string re, im;
      in >> r >> col >> re >> im;
      entries.emplace_back(r, col, cplx(parse_double(re), parse_double(im)));
      n = std::max({n, r + 1, col + 1});
    }
  }
  if (n > 0) {
    CMatrix m = CMatrix::Zero(n, n);
    for (const auto& [r, c, v] : entries) m(r, c) = v;
    trace.final_state = DensityMatrix(m, {2, 2});
  }
  return trace;
}

CsvTable sweep_table(const LifespanSweep& s) {
  CsvTable t;
  t.header = {"tau2_us", "strategy", "negativity", "fit_T_us"};
  for (std::size_t i = 0; i < s.tau2_us.size(); ++i)
    for (const LifespanCurve& c : s.curves)
      t.rows.push_back({fmt(s.tau2_us[i]), c.strategy.name(), fmt(c.negativity[i]), fmt(c.fit.t_us)});
  for (const LifespanCurve& c : s.curves)
    t.comments.push_back("fit strategy=" + c.strategy.name() + " T_us=" + fmt(c.fit.t_us) + " N0=" + fmt(c.fit.n0) +
                         " rms=" + fmt(c.fit.rms_residual) + " infinite=" + (c.fit.infinite ? "1" : "0"));
  return t;
}

CsvTable calibration_table(const CalibrationResult& cal) {
  CsvTable t;
  t.header = {"tau_ns", "amp_mhz", "p_gg", "residual_photons"};
  for (const CalibrationPoint& p : cal.surface)
    t.rows.push_back({fmt(p.tau_ns), fmt(p.amp_mhz), fmt(p.p_gg), fmt(p.residual_photons)});
  t.comments.push_back("grid_best tau_ns=" + fmt(cal.best.tau_ns) + " amp_mhz=" + fmt(cal.best.amp_mhz) +
                       " p_gg=" + fmt(cal.best.p_gg));
  t.comments.push_back("operating_point tau_ns=" + fmt(cal.tau_ns) + " amp_mhz=" + fmt(cal.amp_mhz) +
                       " phase=" + fmt(cal.phase));
  return t;
}

CsvTable schedule_table(const PulseSchedule& s, double fidelity) {
  CsvTable t;
  t.header = {"t_ns"};
  for (std::size_t k = 0; k < s.amplitudes.size(); ++k) t.header.push_back("u" + std::to_string(k) + "_mhz");
  const std::size_t n = s.amplitudes.empty() ? 0 : s.amplitudes[0].size();
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<std::string> row{fmt(static_cast<double>(j) * s.dt_ns)};
    for (const auto& a : s.amplitudes) row.push_back(fmt(a[j]));
    t.rows.push_back(row);
  }
  t.comments.push_back("fidelity " + fmt(fidelity));
  return t;
}

CsvTable trace_plot_table(const ProtocolTrace& trace) {
  CsvTable t;
  t.header = {"series", "x", "y"};
  for (const char* name : {"fidelity", "negativity", "p_success_cum"})
    for (const RoundRecord& r : trace.rounds) {
      const double y = std::string(name) == "fidelity"     ? r.fidelity
                       : std::string(name) == "negativity" ? r.negativity
                                                           : r.p_success_cum;
      t.rows.push_back({name, std::to_string(r.round), fmt(y)});
    }
  return t;
}

CsvTable sweep_plot_table(const LifespanSweep& s) {
  CsvTable t;
  t.header = {"series", "x", "y"};
  for (const LifespanCurve& c : s.curves) {
    for (std::size_t i = 0; i < s.tau2_us.size(); ++i)
      t.rows.push_back({"negativity:" + c.strategy.name(), fmt(s.tau2_us[i]), fmt(c.negativity[i])});
    if (!c.fit.infinite)
      for (double x : s.tau2_us)
        t.rows.push_back({"fit:" + c.strategy.name(), fmt(x), fmt(c.fit.n0 * std::exp(-x / c.fit.t_us))});
  }
  return t;
}

// ---- command line -----------------------------------------------------------

namespace {

struct Globals {
  std::string config, device, out, plot;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

struct Experiment {
  json payload = json::object();
  DeviceGraph device;
  std::string out;
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("EPSIM_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("EPSIM_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

Experiment load_experiment(const Globals& g, const std::string& command, bool need_config) {
  namespace fs = std::filesystem;
  Experiment e;
  std::string device_file;
  if (!g.config.empty()) {
    const json root = parse_json_text(read_text_file(g.config, "config"), g.config);
    check_keys(root, {"schema", "device_file", "out", "analytic", "run", "sweep", "calibrate-cip", "grape"}, g.config);
    const int schema = get<int>(root, "schema", g.config);
    if (schema != kSchemaVersion) throw ConfigError(g.config + ": unsupported schema version " + std::to_string(schema));
    int payloads = 0;
    for (const char* k : {"analytic", "run", "sweep", "calibrate-cip", "grape"}) payloads += root.contains(k);
    if (payloads != 1) throw ConfigError(g.config + ": expected exactly one payload");
    if (!root.contains(command))
      throw ConfigError(g.config + ": payload does not match subcommand '" + command + "'");
    e.payload = root.at(command);
    if (!e.payload.is_object()) throw ConfigError(g.config + ": payload must be an object");
    if (root.contains("device_file")) {
      fs::path p = get<std::string>(root, "device_file", g.config);
      if (p.is_relative()) p = fs::path(g.config).parent_path() / p;
      device_file = p.string();
    }
    maybe(root, "out", e.out, g.config);
  } else if (need_config) {
    throw ConfigError(command + " needs --config");
  }
  if (!g.device.empty()) device_file = g.device;
  e.device = device_file.empty() ? default_device() : DeviceGraph::load(device_file);
  if (!g.out.empty()) e.out = g.out;
  return e;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty())
    std::cout << text;
  else
    write_file_atomic(out, text);
}

int cmd_analytic(const Globals& g, const std::optional<double>& flimit, const std::optional<double>& ratio,
                 const std::vector<double>& budget, const std::vector<double>& recurrence, int digits) {
  Experiment e = load_experiment(g, "analytic", false);
  std::optional<double> fl = flimit, wr = ratio;
  std::vector<double> bud = budget, rec = recurrence;
  if (!g.config.empty()) {
    check_keys(e.payload, {"flimit", "werner_ratio", "budget", "recurrence"}, "analytic");
    if (!fl && e.payload.contains("flimit")) fl = get<double>(e.payload, "flimit", "analytic");
    if (!wr && e.payload.contains("werner_ratio")) wr = get<double>(e.payload, "werner_ratio", "analytic");
    if (bud.empty()) maybe(e.payload, "budget", bud, "analytic");
    if (rec.empty()) maybe(e.payload, "recurrence", rec, "analytic");
  }
  if (!fl && !wr && bud.empty() && rec.empty()) throw ConfigError("analytic: nothing requested");
  if (!rec.empty() && rec.size() != 2) throw ConfigError("analytic: recurrence takes F_A and F_B");
  json summary = json::object();
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  if (fl) {
    summary["flimit"] = f_limit(*fl);
    os << summary["flimit"].get<double>() << '\n';
  }
  if (wr) {
    summary["werner_ratio"] = werner_ratio(*wr);
    os << summary["werner_ratio"].get<double>() << '\n';
  }
  if (!bud.empty()) {
    summary["budget_product"] = budget_product(bud);
    os << summary["budget_product"].get<double>() << '\n';
  }
  if (!rec.empty()) {
    const WernerStep s = recurrence_werner(rec[0], rec[1]);
    summary["recurrence"] = {{"fidelity", s.fidelity}, {"p_pass", s.p_pass}};
    os << s.fidelity << ' ' << s.p_pass << '\n';
  }
  std::cout << os.str();
  if (!e.out.empty()) write_file_atomic(e.out, summary.dump(2) + "\n");
  return kExitOk;
}

int cmd_run(const Globals& g) {
  Experiment e = load_experiment(g, "run", true);
  std::string experiment;
  json payload = e.payload;
  if (payload.contains("experiment")) experiment = get<std::string>(payload, "experiment", "run");
  ProtocolConfig cfg = protocol_config_from_json(payload, e.device);
  if (g.seed) cfg.seed = *g.seed;
  if (experiment.empty()) experiment = cfg.encoding == CodeKind::Fock ? "physical" : "logical";
  ProtocolTrace trace;
  if (experiment == "physical")
    trace = run_ep_physical(cfg);
  else if (experiment == "logical")
    trace = run_ep_logical(cfg);
  else
    throw ConfigError("run.experiment must be physical or logical");
  emit(e.out, trace_table(trace).to_string());
  if (!g.plot.empty()) write_file_atomic(g.plot, trace_plot_table(trace).to_string());
  if (trace.aborted) std::cerr << "run aborted: " << trace.abort_reason << '\n';
  return kExitOk;
}

int cmd_sweep(const Globals& g) {
  Experiment e = load_experiment(g, "sweep", true);
  const auto grid = get<std::vector<double>>(e.payload, "tau2_grid_us", "sweep");
  std::vector<Strategy> strategies{Strategy::parse("ed"), Strategy::parse("ed+ep")};
  if (e.payload.contains("strategies")) {
    strategies.clear();
    for (const auto& s : get<std::vector<std::string>>(e.payload, "strategies", "sweep"))
      strategies.push_back(Strategy::parse(s));
  }
  if (e.payload.contains("experiment")) throw ConfigError("sweep: experiment is always logical");
  ProtocolConfig cfg = protocol_config_from_json(e.payload, e.device);
  if (g.seed) cfg.seed = *g.seed;
  const LifespanSweep sw = sweep_lifespan(cfg, grid, strategies, resolve_threads(g.threads));
  emit(e.out, sweep_table(sw).to_string());
  if (!g.plot.empty()) write_file_atomic(g.plot, sweep_plot_table(sw).to_string());
  return kExitOk;
}

int cmd_calibrate(const Globals& g) {
  Experiment e = load_experiment(g, "calibrate-cip", true);
  const json& j = e.payload;
  const std::string w = "calibrate-cip";
  check_keys(j, {"delta_mhz", "tau_grid_ns", "amp_grid_mhz", "bus_dim", "noise", "integrator", "shape"}, w);
  double delta = -10.0;
  int bus_dim = 15;
  maybe(j, "delta_mhz", delta, w);
  maybe(j, "bus_dim", bus_dim, w);
  const NoiseModel noise = j.contains("noise") ? noise_from_json(j.at("noise")) : NoiseModel::off();
  const IntegratorConfig icfg = j.contains("integrator") ? integrator_from_json(j.at("integrator")) : IntegratorConfig::driven();
  CipSystem sys = CipSystem::from_device(e.device, bus_dim, noise);
  if (j.contains("shape")) sys.shape = shape_from_string(get<std::string>(j, "shape", w));
  const CalibrationResult cal = calibrate_echo(sys, delta, get<std::vector<double>>(j, "tau_grid_ns", w),
                                               get<std::vector<double>>(j, "amp_grid_mhz", w), icfg,
                                               resolve_threads(g.threads));
  emit(e.out, calibration_table(cal).to_string());
  if (!g.plot.empty()) {
    CsvTable t;
    t.header = {"series", "x", "y"};
    for (const auto& p : cal.surface)
      t.rows.push_back({"p_gg:tau_ns=" + fmt(p.tau_ns), fmt(p.amp_mhz), fmt(p.p_gg)});
    write_file_atomic(g.plot, t.to_string());
  }
  return kExitOk;
}

int cmd_grape(const Globals& g) {
  Experiment e = load_experiment(g, "grape", true);
  const json& j = e.payload;
  const std::string w = "grape";
  check_keys(j, {"problem", "iterations", "seed", "restarts", "init", "target_fidelity", "memory"}, w);
  const ControlProblem p = control_problem_from_json(get<json>(j, "problem", w));
  OptimizeOptions o;
  maybe(j, "iterations", o.iterations, w);
  maybe(j, "seed", o.seed, w);
  maybe(j, "restarts", o.restarts, w);
  maybe(j, "target_fidelity", o.target_fidelity, w);
  maybe(j, "memory", o.memory, w);
  if (j.contains("init")) {
    const auto s = get<std::string>(j, "init", w);
    if (s == "random")
      o.init = InitKind::Random;
    else if (s == "zero")
      o.init = InitKind::Zero;
    else
      throw ConfigError("grape.init must be random or zero");
  }
  if (g.seed) o.seed = *g.seed;
  o.threads = resolve_threads(g.threads);
  const OptimizeResult r = optimize(p, o);
  emit(e.out, schedule_table(r.schedule, r.fidelity).to_string());
  if (!g.plot.empty()) {
    CsvTable t;
    t.header = {"series", "x", "y"};
    for (std::size_t i = 0; i < r.history.size(); ++i) t.rows.push_back({"fidelity", std::to_string(i + 1), fmt(r.history[i])});
    write_file_atomic(g.plot, t.to_string());
  }
  std::cerr << "grape: fidelity " << fmt(r.fidelity) << " (" << r.message << ")\n";
  return r.reached_target ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Entanglement pumping and bosonic-code simulation toolkit", "epsim"};
  app.require_subcommand(0, 1);
  app.allow_extras();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Experiment JSON file");
  app.add_option("--device", g.device, "Device JSON file (overrides the config)");
  app.add_option("--out", g.out, "Output path (overrides the config)");
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
  app.add_option("--threads", g.threads, "Worker threads (default: EPSIM_THREADS or 1)")->check(CLI::PositiveNumber);
  app.add_option("--emit-plot-data", g.plot, "Also write a long-format series,x,y CSV here");

  auto* analytic = app.add_subcommand("analytic", "Closed-form purification algebra");
  std::optional<double> flimit, ratio;
  std::vector<double> budget, recurrence;
  int digits = 4;
  analytic->add_option("--flimit", flimit, "Pumping fixed point for a fresh-pair fidelity");
  analytic->add_option("--werner-ratio", ratio, "Depolarizing ratio (4F-1)/3");
  analytic->add_option("--budget", budget, "Product of depolarizing ratios")->delimiter(',');
  analytic->add_option("--recurrence", recurrence, "One Werner round: F_A F_B")->expected(2);
  analytic->add_option("--digits", digits, "Printed decimals")->check(CLI::Range(0, 17));
  auto* run = app.add_subcommand("run", "Run one protocol experiment");
  auto* sweep = app.add_subcommand("sweep", "Negativity lifespan sweep over tau2");
  auto* cal = app.add_subcommand("calibrate-cip", "Echoed CIP calibration scan");
  auto* grape = app.add_subcommand("grape", "Pulse optimization");
  for (auto* s : {analytic, run, sweep, cal, grape}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;
  if (app.get_subcommands().empty()) {
    const auto rest = app.remaining();
    std::cerr << "error: " << (rest.empty() ? "a subcommand is required" : "unknown subcommand '" + rest.front() + "'")
              << " (analytic, run, sweep, calibrate-cip, grape)\n";
    return kExitConfig;
  }
  if (!app.remaining().empty()) {
    std::cerr << "error: unexpected argument '" << app.remaining().front() << "'\n";
    return kExitConfig;
  }

  try {
    if (analytic->parsed()) return cmd_analytic(g, flimit, ratio, budget, recurrence, digits);
    if (run->parsed()) return cmd_run(g);
    if (sweep->parsed()) return cmd_sweep(g);
    if (cal->parsed()) return cmd_calibrate(g);
    if (grape->parsed()) return cmd_grape(g);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}

}  // namespace epsim
