#include <algorithm>
#include <cmath>
#include <limits>

#include "epsim/parallel.hpp"
#include "epsim/protocol.hpp"

namespace epsim {

ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size()) throw ConfigError("fit_exponential: t and y differ in length");
  std::vector<double> tp, yp;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (y[i] > 0) {
      tp.push_back(t[i]);
      yp.push_back(y[i]);
    }
  if (tp.size() < 2) throw NumericalError("fit_exponential: fewer than two positive points");
  const double n = static_cast<double>(tp.size());

  // log-linear start: ln y = ln N0 - k t
  double st = 0, sl = 0, stt = 0, stl = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    const double l = std::log(yp[i]);
    st += tp[i];
    sl += l;
    stt += tp[i] * tp[i];
    stl += tp[i] * l;
  }
  const double den = n * stt - st * st;
  if (!(den > 0)) throw NumericalError("fit_exponential: all points share one time");
  double k = -(n * stl - st * sl) / den;
  double n0 = std::exp((sl + k * st) / n);
  const double span = *std::max_element(tp.begin(), tp.end()) - *std::min_element(tp.begin(), tp.end());

  ExponentialFit fit;
  auto rms = [&](double a, double kk) {
    double s = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      const double r = a * std::exp(-kk * tp[i]) - yp[i];
      s += r * r;
    }
    return std::sqrt(s / n);
  };
  if (std::abs(k) * span < 1e-9) {
    fit.n0 = n0;
    fit.t_us = std::numeric_limits<double>::infinity();
    fit.infinite = true;
    fit.rms_residual = rms(n0, 0.0);
    return fit;
  }
  if (k < 0) throw NumericalError("fit_exponential: curve grows, no decay constant");

  // Gauss-Newton on the linear-scale residuals, step halving on failure.
  double cost = rms(n0, k);
  for (int it = 0; it < 100; ++it) {
    double jaa = 0, jak = 0, jkk = 0, ga = 0, gk = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      const double e = std::exp(-k * tp[i]);
      const double r = n0 * e - yp[i];
      const double da = e, dk = -n0 * tp[i] * e;
      jaa += da * da;
      jak += da * dk;
      jkk += dk * dk;
      ga += da * r;
      gk += dk * r;
    }
    const double det = jaa * jkk - jak * jak;
    if (!(std::abs(det) > 0)) break;
    double step_a = -(jkk * ga - jak * gk) / det;
    double step_k = -(jaa * gk - jak * ga) / det;
    bool improved = false;
    for (int h = 0; h < 30; ++h) {
      const double na = n0 + step_a, nk = k + step_k;
      const double c = rms(na, nk);
      if (nk > 0 && c < cost) {
        const double rel = (cost - c) / std::max(cost, 1e-300);
        n0 = na;
        k = nk;
        cost = c;
        improved = rel > 1e-14;
        break;
      }
      step_a *= 0.5;
      step_k *= 0.5;
    }
    if (!improved) break;
  }
  fit.n0 = n0;
  fit.t_us = 1.0 / k;
  fit.rms_residual = cost;
  return fit;
}

LifespanSweep sweep_lifespan(const ProtocolConfig& base, const std::vector<double>& tau2_grid_us,
                             const std::vector<Strategy>& strategies, int threads) {
  if (tau2_grid_us.empty()) throw ConfigError("sweep_lifespan: empty tau2 grid");
  for (std::size_t i = 0; i < tau2_grid_us.size(); ++i) {
    if (tau2_grid_us[i] < 0) throw ConfigError("sweep_lifespan: negative tau2");
    if (i > 0 && !(tau2_grid_us[i] > tau2_grid_us[i - 1])) throw ConfigError("sweep_lifespan: tau2 grid must ascend");
  }
  if (strategies.empty()) throw ConfigError("sweep_lifespan: no strategies");
  base.validate();

  std::unique_ptr<JointEchoedCip> gate;
  if (base.resolved_reentangle() == ReentangleModel::FullCip)
    gate = std::make_unique<JointEchoedCip>(protocol_cip_system(base), base.cip, base.integrator);

  const std::size_t ng = tau2_grid_us.size();
  std::vector<double> neg(strategies.size() * ng, 0.0);
  parallel_for(neg.size(), threads, [&](std::size_t idx) {
    ProtocolConfig cfg = base;
    cfg.strategy = strategies[idx / ng];
    cfg.tau2_us = tau2_grid_us[idx % ng];
    const ProtocolTrace tr = gate ? run_ep_logical(cfg, *gate) : run_ep_logical(cfg);
    neg[idx] = tr.final_negativity();
  });

  LifespanSweep out;
  out.tau2_us = tau2_grid_us;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    LifespanCurve c;
    c.strategy = strategies[s];
    c.negativity.assign(neg.begin() + static_cast<std::ptrdiff_t>(s * ng),
                        neg.begin() + static_cast<std::ptrdiff_t>((s + 1) * ng));
    c.fit = fit_exponential(tau2_grid_us, c.negativity);
    out.curves.push_back(std::move(c));
  }
  return out;
}

double damped_fock_bell_negativity(double t_us, double t1a_us, double t1b_us) {
  if (t_us < 0) throw ConfigError("damped_fock_bell_negativity: negative time");
  if (!(t1a_us > 0 && t1b_us > 0)) throw ConfigError("damped_fock_bell_negativity: T1 must be positive");
  const double ea = std::exp(-t_us / t1a_us), eb = std::exp(-t_us / t1b_us);
  // rho = p00 |00><00| + (ea/2)|10><10| + (eb/2)|01><01| + c (|10><01| + h.c.)
  const double p00 = (2.0 - ea - eb) / 2.0;
  const double c = std::sqrt(ea * eb) / 2.0;
  return (std::sqrt(p00 * p00 + 4.0 * c * c) - p00) / 2.0;
}

}  // namespace epsim
