#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "sfd/critical_manifold.hpp"
#include "sfd/decomposition.hpp"
#include "sfd/system.hpp"
#include "sfd/types.hpp"

namespace sfd {

/// Derivatives of the fast balance position with respect to the slow
/// coordinates, obtained from the implicit-function linear systems.
struct ImplicitJacobians {
  MatX d_x;  ///< f x s
  MatX d_v;  ///< f x s
  VecX d_t;  ///< f
};

ImplicitJacobians implicit_jacobians(const MechanicalSystem& sys, const CriticalPoint& cp);

/// Leading-order fast velocity: the along-flow derivative of the fast
/// balance position.
VecX eval_H0(const MechanicalSystem& sys, const CriticalPoint& cp);
VecX eval_H0(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t);

/// First-order correction to the fast balance position.
VecX eval_G1(const MechanicalSystem& sys, const CriticalPoint& cp);
VecX eval_G1(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t);

/// Along-flow derivative of the first-order position correction.
VecX eval_H1(const MechanicalSystem& sys, const CriticalPoint& cp);
VecX eval_H1(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t);

/// Local chart of the attracting slow manifold: fast position and velocity
/// as expansions y = eps*G0 + eps^2*G1, ydot = eps*H0 + eps^2*H1 over
/// (x, xdot, t), truncated at the chart order.
///
/// Queries are memoized on the rounded query point and reuse the previous
/// solution as a warm start; both are internal details with pure-function
/// semantics, safe under concurrent use.
class SlowManifoldChart {
 public:
  SlowManifoldChart(const MechanicalSystem& sys, int order, GuessFn guess = {});

  const MechanicalSystem& system() const { return *sys_; }
  int order() const { return order_; }
  Real eps() const { return eps_; }

  VecX G0(const VecX& x, const VecX& v, Real t) const;
  VecX H0(const VecX& x, const VecX& v, Real t) const;
  VecX G1(const VecX& x, const VecX& v, Real t) const;
  VecX H1(const VecX& x, const VecX& v, Real t) const;

  /// Full state (x, xdot, y, ydot) placed on the chart at the given slow
  /// coordinates.
  VecX lift(const VecX& x, const VecX& v, Real t) const;

 private:
  struct Entry {
    VecX eta;
    std::optional<VecX> h0, g1, h1;
  };

  const MechanicalSystem* sys_;
  int order_;
  Real eps_;
  GuessFn guess_;

  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, Entry> memo_;
  mutable VecX warm_;

  std::string key(const VecX& x, const VecX& v, Real t) const;
  Entry& locked_entry(const std::string& k, const VecX& x, const VecX& v, Real t,
                      std::unique_lock<std::mutex>& lock) const;
  VecX term(const VecX& x, const VecX& v, Real t, std::optional<VecX> Entry::*slot,
            VecX (*compute)(const MechanicalSystem&, const CriticalPoint&)) const;
};

/// Euclidean distance of a full state (x, xdot, y, ydot) from the chart
/// image over its own slow coordinates, measured in the fast components.
Real manifold_distance(const SlowManifoldChart& chart, const VecX& full_state, Real t);

}  // namespace sfd
