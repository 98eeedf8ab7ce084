#pragma once

#include <random>

#include <unsupported/Eigen/KroneckerProduct>

#include "epsim/qstate.hpp"

namespace epsim::testing {

inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

inline DensityMatrix random_density(const Dims& dims, std::mt19937_64& rng) {
  const auto d = static_cast<Eigen::Index>(total_dimension(dims));
  const CMatrix g = random_complex(d, d, rng);
  CMatrix m = g * g.adjoint();
  m /= m.trace();
  return DensityMatrix(0.5 * (m + m.adjoint()), dims);
}

inline PureState random_pure(const Dims& dims, std::mt19937_64& rng) {
  const auto d = static_cast<Eigen::Index>(total_dimension(dims));
  CVector v = random_complex(d, 1, rng);
  return PureState(v / v.norm(), dims);
}

inline CMatrix random_unitary(Eigen::Index d, std::mt19937_64& rng) {
  Eigen::HouseholderQR<CMatrix> qr(random_complex(d, d, rng));
  return qr.householderQ();
}

inline double max_abs(const CMatrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace epsim::testing
