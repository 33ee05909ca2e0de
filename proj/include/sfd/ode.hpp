#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sfd/errors.hpp"
#include "sfd/types.hpp"

namespace sfd::ode {

using Rhs = std::function<VecX(Real t, const VecX& y)>;

enum class Method {
  adaptive_explicit,  ///< embedded 4/5 pair with PI step control
  adaptive_implicit,  ///< L-stable implicit collocation with Newton inner iterations
  fixed_reference,    ///< fixed-step classical method for oracle comparisons
};

struct IntegrateOptions {
  Method method = Method::adaptive_explicit;
  Real rtol = 1e-8;
  Real atol = 1e-10;
  Real h0 = 0.0;           ///< initial step; 0 picks one from the span
  Real hmax = 0.0;         ///< 0 means no cap beyond the span itself
  Real fixed_step = 1e-3;  ///< used by fixed_reference only
  std::size_t max_steps = 2000000;
};

/// Accepted integration points plus the derivative at each, so the
/// trajectory can be resampled with cubic Hermite interpolation.
/// Times are strictly increasing even for backward runs (the arrays are
/// reversed before returning).
struct Trajectory {
  std::vector<Real> t;
  std::vector<VecX> y;
  std::vector<VecX> deriv;

  std::string method;
  Real rtol = 0.0, atol = 0.0;
  std::size_t n_accepted = 0, n_rejected = 0, n_rhs = 0;
  bool backward = false;

  /// Cubic Hermite interpolation at ti (clamped to the stored range).
  VecX sample(Real ti) const;
};

Trajectory integrate(const Rhs& f, const VecX& y0, Real t0, Real t1,
                     const IntegrateOptions& opts = {});

/// CSV with header `t,x1..xs,dx1..dxs[,y1..yf,dy1..dyf]` and 17 significant
/// digits per value.  State rows follow the (x, xdot, y, ydot) layout; pass
/// with_fast = false for reduced trajectories whose state is (x, xdot) only.
std::string trajectory_csv(const Trajectory& traj, int s, int f, bool with_fast);

}  // namespace sfd::ode
