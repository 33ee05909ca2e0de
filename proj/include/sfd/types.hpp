#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace sfd {

using Real = double;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using CVecX = Eigen::VectorXcd;
using CMatX = Eigen::MatrixXcd;

inline constexpr Real kMachineEps = std::numeric_limits<Real>::epsilon();

/// Default relative step for first-order central differences,
/// cbrt(machine epsilon) ~ 6.06e-6.
inline const Real kFdStep = std::cbrt(kMachineEps);

inline Real inf_norm(const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

inline Real rel_diff(const VecX& a, const VecX& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + a.cwiseAbs().maxCoeff());
}

inline Real rel_diff(const MatX& a, const MatX& b) {
  return (a - b).cwiseAbs().maxCoeff() / (1.0 + a.cwiseAbs().maxCoeff());
}

/// State vector layout used throughout: (x, xdot, y, ydot) with s slow and
/// f fast degrees of freedom, total length 2(s+f).
struct StateParts {
  VecX x, v, y, w;
};

inline StateParts split_state(const VecX& z, int s, int f) {
  StateParts p;
  p.x = z.segment(0, s);
  p.v = z.segment(s, s);
  p.y = z.segment(2 * s, f);
  p.w = z.segment(2 * s + f, f);
  return p;
}

inline VecX join_state(const VecX& x, const VecX& v, const VecX& y, const VecX& w) {
  VecX z(x.size() + v.size() + y.size() + w.size());
  z << x, v, y, w;
  return z;
}

}  // namespace sfd
