#include "epsim/device.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "epsim/json_util.hpp"

namespace epsim {

double ModeSpec::pure_dephasing_rate() const { return 1.0 / t2_us - 1.0 / (2.0 * t1_us); }

void ModeSpec::validate() const {
  if (dimension < 2) throw ConfigError("mode " + label + ": dimension must be >= 2");
  if (!(t1_us > 0)) throw ConfigError("mode " + label + ": T1 must be positive");
  if (!(t2_us > 0)) throw ConfigError("mode " + label + ": T2 must be positive");
  if (!(n_th >= 0 && n_th < 1)) throw ConfigError("mode " + label + ": n_th must lie in [0, 1)");
  if (t2_us > 2.0 * t1_us * (1.0 + 1e-12))
    throw ConfigError("mode " + label + ": T2 exceeds 2*T1 (negative pure dephasing)");
}

DeviceGraph::DeviceGraph(std::vector<ModeSpec> modes, Eigen::MatrixXd chi_mhz)
    : modes_(std::move(modes)), chi_(std::move(chi_mhz)) {
  validate();
}

void DeviceGraph::validate() const {
  const auto n = static_cast<Eigen::Index>(modes_.size());
  if (chi_.rows() != n || chi_.cols() != n)
    throw ConfigError("cross-Kerr matrix side length must equal the number of modes");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (std::abs(chi_(i, j) - chi_(j, i)) > 1e-12) throw ConfigError("cross-Kerr matrix is not symmetric");
  for (const auto& m : modes_) m.validate();
  for (std::size_t i = 0; i < modes_.size(); ++i)
    for (std::size_t j = i + 1; j < modes_.size(); ++j)
      if (modes_[i].label == modes_[j].label) throw ConfigError("duplicate mode label " + modes_[i].label);
}

int DeviceGraph::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < modes_.size(); ++i)
    if (modes_[i].label == label) return static_cast<int>(i);
  throw ConfigError("device has no mode labelled '" + label + "'");
}

Dims DeviceGraph::dims_of(const ModeSet& modes) const {
  Dims d;
  for (int m : modes) d.push_back(mode(m).dimension);
  return d;
}

DeviceGraph DeviceGraph::with_dimension(const std::string& label, int dim) const {
  DeviceGraph g = *this;
  g.modes_.at(static_cast<std::size_t>(index_of(label))).dimension = dim;
  g.validate();
  return g;
}

DeviceGraph DeviceGraph::with_mode(const ModeSpec& spec) const {
  DeviceGraph g = *this;
  g.modes_.at(static_cast<std::size_t>(index_of(spec.label))) = spec;
  g.validate();
  return g;
}

DeviceGraph DeviceGraph::from_json_text(const std::string& text) {
  const json j = parse_json_text(text, "device file");
  try {
    std::vector<ModeSpec> modes;
    for (const auto& m : j.at("modes")) {
      ModeSpec s;
      s.label = m.at("label").get<std::string>();
      s.dimension = m.at("dim").get<int>();
      s.t1_us = m.at("T1_us").get<double>();
      s.t2_us = m.at("T2_us").get<double>();
      s.n_th = m.value("n_th", 0.0);
      s.self_kerr_mhz = m.value("self_kerr_MHz", 0.0);
      modes.push_back(s);
    }
    const auto& chi = j.at("chi_MHz");
    const auto n = static_cast<Eigen::Index>(modes.size());
    if (static_cast<Eigen::Index>(chi.size()) != n) throw ConfigError("chi_MHz must have one row per mode");
    Eigen::MatrixXd c(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(chi[i].size()) != n) throw ConfigError("chi_MHz rows must have one entry per mode");
      for (Eigen::Index k = 0; k < n; ++k) c(i, k) = chi[i][k].get<double>();
    }
    return DeviceGraph(std::move(modes), std::move(c));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("device file: ") + e.what());
  }
}

DeviceGraph DeviceGraph::load(const std::string& path) {
  return from_json_text(read_text_file(path, "device file"));
}

std::string DeviceGraph::to_json_text() const {
  json j;
  j["modes"] = json::array();
  for (const auto& m : modes_)
    j["modes"].push_back({{"label", m.label},
                          {"dim", m.dimension},
                          {"T1_us", m.t1_us},
                          {"T2_us", m.t2_us},
                          {"n_th", m.n_th},
                          {"self_kerr_MHz", m.self_kerr_mhz}});
  j["chi_MHz"] = json::array();
  for (Eigen::Index i = 0; i < chi_.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < chi_.cols(); ++k) row.push_back(chi_(i, k));
    j["chi_MHz"].push_back(row);
  }
  return j.dump(2);
}

std::string default_device_path() { return std::string(EPSIM_DATA_DIR) + "/device_default.json"; }

DeviceGraph default_device() { return DeviceGraph::load(default_device_path()); }

}  // namespace epsim
