#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epsim/qstate.hpp"

namespace epsim {

// Frequencies are stored as f where the angular value is 2*pi*f MHz
// (rad/us numerically); times in microseconds unless suffixed otherwise.
struct ModeSpec {
  std::string label;
  int dimension = 2;
  double t1_us = 1.0;
  double t2_us = 1.0;
  double n_th = 0.0;
  double self_kerr_mhz = 0.0;

  bool is_qubit() const { return dimension == 2; }
  // 1/T2 - 1/(2 T1), in 1/us.
  double pure_dephasing_rate() const;
  void validate() const;
};

class DeviceGraph {
 public:
  DeviceGraph() = default;
  DeviceGraph(std::vector<ModeSpec> modes, Eigen::MatrixXd chi_mhz);

  const std::vector<ModeSpec>& modes() const { return modes_; }
  const ModeSpec& mode(int i) const { return modes_.at(static_cast<std::size_t>(i)); }
  int size() const { return static_cast<int>(modes_.size()); }
  int index_of(const std::string& label) const;

  double chi_mhz(int i, int j) const { return chi_(i, j); }
  const Eigen::MatrixXd& chi_matrix() const { return chi_; }

  Dims dims_of(const ModeSet& modes) const;

  DeviceGraph with_dimension(const std::string& label, int dim) const;
  DeviceGraph with_mode(const ModeSpec& spec) const;

  static DeviceGraph from_json_text(const std::string& text);
  static DeviceGraph load(const std::string& path);
  std::string to_json_text() const;

  void validate() const;

 private:
  std::vector<ModeSpec> modes_;
  Eigen::MatrixXd chi_;
};

/// Path of the bundled device file (midpoints of the measured parameter ranges).
std::string default_device_path();
DeviceGraph default_device();

}  // namespace epsim
