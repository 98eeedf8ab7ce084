#include "epsim/grape.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include <Eigen/Eigenvalues>

#include "epsim/parallel.hpp"

namespace epsim {

void ControlProblem::validate() const {
  if (drift.rows() == 0 || drift.rows() != drift.cols()) throw ConfigError("grape: drift must be a non-empty square matrix");
  if ((drift - drift.adjoint()).cwiseAbs().maxCoeff() > 1e-10) throw ConfigError("grape: drift is not Hermitian");
  for (const CMatrix& c : controls) {
    if (c.rows() != drift.rows() || c.cols() != drift.cols()) throw ConfigError("grape: control shape differs from the drift");
    if ((c - c.adjoint()).cwiseAbs().maxCoeff() > 1e-10) throw ConfigError("grape: control is not Hermitian");
  }
  if (initial.empty() || initial.size() != target.size())
    throw ConfigError("grape: initial and target lists must be non-empty and of equal length");
  for (const auto* list : {&initial, &target})
    for (const PureState& s : *list) {
      if (s.dimension() != dimension()) throw ConfigError("grape: state dimension differs from the drift");
      if (std::abs(s.amplitudes().squaredNorm() - 1.0) > 1e-10) throw ConfigError("grape: states must be normalized");
    }
  if (n_steps < 1) throw ConfigError("grape: n_steps must be at least 1");
  if (!(dt_ns > 0)) throw ConfigError("grape: dt must be positive");
  if (!(amp_bound_mhz > 0)) throw ConfigError("grape: amplitude bound must be positive");
}

PulseSchedule PulseSchedule::zeros(const ControlProblem& p) {
  PulseSchedule s;
  s.dt_ns = p.dt_ns;
  s.amplitudes.assign(p.controls.size(), std::vector<double>(static_cast<std::size_t>(p.n_steps), 0.0));
  return s;
}

void PulseSchedule::validate(const ControlProblem& p) const {
  if (std::abs(dt_ns - p.dt_ns) > 1e-12) throw ConfigError("schedule dt differs from the problem");
  if (amplitudes.size() != p.controls.size()) throw ConfigError("schedule needs one array per control");
  for (const auto& a : amplitudes) {
    if (a.size() != static_cast<std::size_t>(p.n_steps)) throw ConfigError("schedule arrays need n_steps entries");
    for (double x : a)
      if (!(std::abs(x) <= p.amp_bound_mhz * (1 + 1e-12))) throw ConfigError("schedule amplitude exceeds the bound");
  }
}

namespace {

struct StepEig {
  CMatrix v;
  Eigen::VectorXd lambda;  // rad/us
  CVector phase;           // exp(-i lambda dt)
};

StepEig step_eig(const ControlProblem& p, const PulseSchedule& s, int j) {
  CMatrix h = p.drift;
  for (std::size_t k = 0; k < p.controls.size(); ++k) h += s.amplitudes[k][static_cast<std::size_t>(j)] * p.controls[k];
  h = kTwoPi * 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  StepEig e{es.eigenvectors(), es.eigenvalues(), CVector(h.rows())};
  const double dt = 1e-3 * p.dt_ns;
  for (Eigen::Index a = 0; a < h.rows(); ++a) e.phase(a) = std::polar(1.0, -e.lambda(a) * dt);
  return e;
}

CMatrix to_matrix(const StepEig& e) { return e.v * e.phase.asDiagonal() * e.v.adjoint(); }

}  // namespace

CMatrix step_propagator(const ControlProblem& problem, const PulseSchedule& schedule, int step) {
  return to_matrix(step_eig(problem, schedule, step));
}

Propagation propagate(const ControlProblem& problem, const PulseSchedule& schedule) {
  problem.validate();
  schedule.validate(problem);
  std::vector<CVector> psi;
  for (const auto& s : problem.initial) psi.push_back(s.amplitudes());
  for (int j = 0; j < problem.n_steps; ++j) {
    const CMatrix u = step_propagator(problem, schedule, j);
    for (auto& v : psi) v = u * v;
  }
  Propagation out;
  const Dims& dims = problem.initial.front().dims();
  double f = 0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    f += std::norm(problem.target[i].amplitudes().dot(psi[i]));
    out.final_states.emplace_back(psi[i] / psi[i].norm(), dims);
  }
  out.fidelity = std::clamp(f / static_cast<double>(psi.size()), 0.0, 1.0);
  return out;
}

FidelityGradient fidelity_gradient(const ControlProblem& problem, const PulseSchedule& schedule) {
  problem.validate();
  schedule.validate(problem);
  const int n = problem.n_steps;
  const std::size_t np = problem.initial.size(), nk = problem.controls.size();
  const Eigen::Index d = static_cast<Eigen::Index>(problem.dimension());
  const double dt = 1e-3 * problem.dt_ns;

  std::vector<StepEig> eig;
  eig.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) eig.push_back(step_eig(problem, schedule, j));

  // forward states: fwd[j][p] is the state before step j
  std::vector<std::vector<CVector>> fwd(static_cast<std::size_t>(n) + 1, std::vector<CVector>(np));
  for (std::size_t p = 0; p < np; ++p) fwd[0][p] = problem.initial[p].amplitudes();
  for (int j = 0; j < n; ++j) {
    const CMatrix u = to_matrix(eig[static_cast<std::size_t>(j)]);
    for (std::size_t p = 0; p < np; ++p) fwd[static_cast<std::size_t>(j) + 1][p] = u * fwd[static_cast<std::size_t>(j)][p];
  }
  std::vector<cplx> z(np);
  double f = 0;
  for (std::size_t p = 0; p < np; ++p) {
    z[p] = problem.target[p].amplitudes().dot(fwd[static_cast<std::size_t>(n)][p]);
    f += std::norm(z[p]);
  }

  FidelityGradient out;
  out.fidelity = f / static_cast<double>(np);
  out.gradient.assign(nk, std::vector<double>(static_cast<std::size_t>(n), 0.0));

  // back states: chi after step j, i.e. (U_N ... U_{j+1})^dag target
  std::vector<CVector> back(np);
  for (std::size_t p = 0; p < np; ++p) back[p] = problem.target[p].amplitudes();
  for (int j = n - 1; j >= 0; --j) {
    const StepEig& e = eig[static_cast<std::size_t>(j)];
    // divided differences of exp(-i lambda dt)
    CMatrix phi(d, d);
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) {
        const double dl = e.lambda(a) - e.lambda(b);
        if (std::abs(dl) * dt > 1e-8)
          phi(a, b) = (e.phase(a) - e.phase(b)) / (dl);
        else
          phi(a, b) = cplx(0, -dt) * e.phase(a);
      }
    std::vector<CVector> x(np), y(np);
    for (std::size_t p = 0; p < np; ++p) {
      x[p] = e.v.adjoint() * fwd[static_cast<std::size_t>(j)][p];
      y[p] = e.v.adjoint() * back[p];
    }
    for (std::size_t k = 0; k < nk; ++k) {
      const CMatrix m = kTwoPi * (e.v.adjoint() * problem.controls[k] * e.v).cwiseProduct(phi);
      double g = 0;
      for (std::size_t p = 0; p < np; ++p) g += 2.0 * (std::conj(z[p]) * y[p].dot(m * x[p])).real();
      out.gradient[k][static_cast<std::size_t>(j)] = g / static_cast<double>(np);
    }
    const CMatrix u = to_matrix(e);
    for (std::size_t p = 0; p < np; ++p) back[p] = u.adjoint() * back[p];
  }
  return out;
}

namespace {

using Vec = Eigen::VectorXd;

Vec flatten(const PulseSchedule& s) {
  const std::size_t n = s.amplitudes.empty() ? 0 : s.amplitudes[0].size();
  Vec v(static_cast<Eigen::Index>(s.amplitudes.size() * n));
  for (std::size_t k = 0; k < s.amplitudes.size(); ++k)
    for (std::size_t j = 0; j < n; ++j) v(static_cast<Eigen::Index>(k * n + j)) = s.amplitudes[k][j];
  return v;
}

void unflatten(const Vec& v, PulseSchedule& s) {
  const std::size_t n = s.amplitudes.empty() ? 0 : s.amplitudes[0].size();
  for (std::size_t k = 0; k < s.amplitudes.size(); ++k)
    for (std::size_t j = 0; j < n; ++j) s.amplitudes[k][j] = v(static_cast<Eigen::Index>(k * n + j));
}

Vec flatten(const std::vector<std::vector<double>>& g) {
  PulseSchedule s;
  s.amplitudes = g;
  return flatten(s);
}

OptimizeResult single_run(const ControlProblem& problem, const OptimizeOptions& opts, int restart) {
  const double bound = problem.amp_bound_mhz;
  PulseSchedule sched = PulseSchedule::zeros(problem);
  if (opts.init == InitKind::Random) {
    std::mt19937_64 rng(opts.seed + static_cast<std::uint64_t>(restart));
    std::uniform_real_distribution<double> dist(-0.5 * bound, 0.5 * bound);
    for (auto& a : sched.amplitudes)
      for (double& x : a) x = dist(rng);
  }
  auto clip = [bound](Vec v) { return v.cwiseMax(-bound).cwiseMin(bound); };
  auto eval = [&](const Vec& x, Vec& grad) {
    unflatten(x, sched);
    const FidelityGradient fg = fidelity_gradient(problem, sched);
    grad = flatten(fg.gradient);
    return fg.fidelity;
  };

  Vec x = flatten(sched), g;
  double f = eval(x, g);
  std::deque<std::pair<Vec, Vec>> mem;  // (s, y) for the ascent objective
  OptimizeResult res;
  res.restart = restart;
  res.message = "iteration limit reached below target";
  for (int it = 0; it < opts.iterations; ++it) {
    if (f >= opts.target_fidelity) {
      res.reached_target = true;
      res.message = "target reached";
      break;
    }
    // two-loop recursion on -F
    Vec q = -g;
    std::vector<double> alpha(mem.size());
    for (std::size_t i = mem.size(); i-- > 0;) {
      const auto& [s, y] = mem[i];
      alpha[i] = s.dot(q) / y.dot(s);
      q -= alpha[i] * y;
    }
    if (!mem.empty()) q *= mem.back().first.dot(mem.back().second) / mem.back().second.squaredNorm();
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const auto& [s, y] = mem[i];
      const double beta = y.dot(q) / y.dot(s);
      q += (alpha[i] - beta) * s;
    }
    Vec dir = -q;  // ascent direction
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1 || !(dir.dot(g) > 0)) {
        mem.clear();
        dir = g;
      }
      double step = 1.0;
      if (mem.empty()) {
        const double m = dir.size() ? dir.cwiseAbs().maxCoeff() : 0.0;
        if (!(m > 0)) break;
        step = 0.1 * bound / m;
      }
      for (int bt = 0; bt < 40; ++bt, step *= 0.5) {
        const Vec xn = clip(x + step * dir);
        Vec gn;
        const double fn = eval(xn, gn);
        if (fn > f + 1e-4 * g.dot(xn - x) && fn > f) {
          const Vec s = xn - x, y = g - gn;  // gradient of -F changes by -(gn - g)
          if (s.dot(y) > 1e-14) {
            mem.emplace_back(s, y);
            if (static_cast<int>(mem.size()) > opts.memory) mem.pop_front();
          }
          x = xn;
          g = gn;
          f = fn;
          accepted = true;
          break;
        }
      }
      if (mem.empty() && !accepted) break;
    }
    res.history.push_back(f);
    if (!accepted) {
      res.message = "stagnated: no ascent step found";
      break;
    }
  }
  if (f >= opts.target_fidelity) {
    res.reached_target = true;
    res.message = "target reached";
  }
  unflatten(x, sched);
  res.schedule = sched;
  res.fidelity = f;
  return res;
}

}  // namespace

OptimizeResult optimize(const ControlProblem& problem, const OptimizeOptions& opts) {
  problem.validate();
  if (opts.iterations < 1) throw ConfigError("optimize: iterations must be at least 1");
  if (opts.restarts < 1) throw ConfigError("optimize: restarts must be at least 1");
  if (opts.memory < 1) throw ConfigError("optimize: L-BFGS memory must be at least 1");
  std::vector<OptimizeResult> runs(static_cast<std::size_t>(opts.restarts));
  parallel_for(runs.size(), opts.threads,
               [&](std::size_t r) { runs[r] = single_run(problem, opts, static_cast<int>(r)); });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].fidelity > runs[best].fidelity) best = r;
  return runs[best];
}

ControlProblem qubit_flip_problem(int n_steps, double dt_ns, double amp_bound_mhz) {
  ControlProblem p;
  p.drift = CMatrix::Zero(2, 2);
  CMatrix sx(2, 2), sy(2, 2);
  sx << 0, 0.5, 0.5, 0;
  sy << 0, cplx(0, -0.5), cplx(0, 0.5), 0;
  p.controls = {sx, sy};
  p.initial = {PureState::basis({2}, {0})};
  p.target = {PureState::basis({2}, {1})};
  p.n_steps = n_steps;
  p.dt_ns = dt_ns;
  p.amp_bound_mhz = amp_bound_mhz;
  return p;
}

ControlProblem toy_reentangle_problem(double chi1_mhz, double chi2_mhz, int n_steps, double dt_ns,
                                      double amp_bound_mhz) {
  const Dims dims{2, 3, 2};
  const CMatrix e = number_op(2), nb = number_op(3), a = destroy(3);
  ControlProblem p;
  p.drift = chi1_mhz * embed(e, dims, {0}) * embed(nb, dims, {1}) + chi2_mhz * embed(e, dims, {2}) * embed(nb, dims, {1});
  CMatrix sx(2, 2), sy(2, 2);
  sx << 0, 0.5, 0.5, 0;
  sy << 0, cplx(0, -0.5), cplx(0, 0.5), 0;
  const CMatrix bx = 0.5 * (a + a.adjoint()), by = cplx(0, 0.5) * (a.adjoint() - a);
  p.controls = {embed(sx, dims, {0}), embed(sy, dims, {0}), embed(bx, dims, {1}),
                embed(by, dims, {1}), embed(sx, dims, {2}), embed(sy, dims, {2})};
  CVector t = CVector::Zero(12);
  t(1) = t(6) = 1.0 / std::sqrt(2.0);  // |g0e>, |e0g>
  p.initial = {PureState::basis(dims, {0, 0, 0})};
  p.target = {PureState(t, dims)};
  p.n_steps = n_steps;
  p.dt_ns = dt_ns;
  p.amp_bound_mhz = amp_bound_mhz;
  return p;
}

}  // namespace epsim
