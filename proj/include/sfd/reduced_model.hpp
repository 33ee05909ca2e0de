#pragma once

#include <string>
#include <vector>

#include "sfd/critical_manifold.hpp"
#include "sfd/decomposition.hpp"
#include "sfd/ode.hpp"
#include "sfd/slow_manifold.hpp"
#include "sfd/system.hpp"
#include "sfd/types.hpp"

namespace sfd {

/// Evaluation route for the reduced acceleration: divide by the condensed
/// slow mass block (mass_normalized), or assemble the condensed mass and
/// force blocks at their eps = 0 limits and solve (mass_multiplied, which
/// never forms an inverse of the slow mass).
enum class ReducedForm { mass_normalized, mass_multiplied };

/// Slow-coordinate model xdd = rhs(x, xdot, t): the fast amplitude is
/// enslaved through the chart, at truncation order 0 (leading term) or 1
/// (adds the eps-weighted sensitivity of the slow forcing to the fast
/// position, velocity and the eps parameter itself).
class ReducedModel {
 public:
  const MechanicalSystem& system() const { return *sys_; }
  const SlowManifoldChart& chart() const { return *chart_; }
  int order() const { return order_; }
  ReducedForm form() const { return form_; }
  Real eps() const { return eps_; }

  /// Certified decay exponent of the fast transients over the chart domain;
  /// the synchronization rate bound is decay_lambda() / eps().
  Real decay_lambda() const { return lambda_; }

  VecX rhs(const VecX& x, const VecX& v, Real t) const;

  /// First-order form on the (x, xdot) state for the integrators.
  ode::Rhs first_order() const;

 private:
  friend ReducedModel build_reduced(const MechanicalSystem&, const SlowManifoldChart&, int,
                                    ReducedForm, const StabilityCertificate&);
  ReducedModel(const MechanicalSystem& sys, const SlowManifoldChart& chart, int order,
               ReducedForm form, Real lambda);

  VecX order_one_correction(const EvalPoint& p) const;

  const MechanicalSystem* sys_;
  const SlowManifoldChart* chart_;
  ForcingEval fe_;
  int order_;
  ReducedForm form_;
  Real eps_;
  Real lambda_;
};

/// Requires an actual certificate (positive lambda over at least one sample)
/// for the chart's system.  The mass_multiplied form additionally requires
/// the condensed slow mass block to extend smoothly to eps = 0, checked by
/// the same ladder-contraction criterion as the forcing extension; a failed
/// check throws M1NotSmooth.
ReducedModel build_reduced(const MechanicalSystem& sys, const SlowManifoldChart& chart, int order,
                           ReducedForm form, const StabilityCertificate& certificate);

/// Full state (x, xdot, y, ydot) on the chart over the given slow data.
VecX lift_initial(const SlowManifoldChart& chart, const VecX& x, const VecX& v, Real t);

/// Tolerances are tighter than the integrator defaults so that the error
/// series bottoms out near round-off instead of at tolerance level, which is
/// what makes the decay rate measurable over several decades.
struct SyncOptions {
  Real snap_tol = 1e-5;
  ode::IntegrateOptions full{ode::Method::adaptive_explicit, 1e-12, 1e-14};
  ode::IntegrateOptions reduced{ode::Method::adaptive_explicit, 1e-12, 1e-14};
};

/// Error history between a full trajectory and the reduced trajectory seeded
/// from its slow coordinates at the snap instant.  The fitted rate is the
/// least-squares slope of log e over the decay window; with oscillatory fast
/// transients the fit uses the local maxima of e (which share the ring phase,
/// so the envelope slope is recovered without phase bias) and falls back to
/// every sample in the window when too few maxima exist.
struct SyncReport {
  std::vector<Real> t;  ///< sample times (full-trajectory nodes)
  std::vector<Real> e;  ///< slow-coordinate error norms
  Real t_snap = 0.0;
  Real rate = 0.0;         ///< fitted exponential decay rate
  Real bound = 0.0;        ///< certified rate lambda / eps
  Real floor_level = 0.0;  ///< error level indistinguishable from round-off
  Real window_lo = 0.0, window_hi = 0.0;
  std::string verdict;  ///< "pass", "fail", or "inconclusive"

  std::string to_json() const;
};

/// Integrates the full system over [t0, t1], snaps to the first node whose
/// fast components are within snap_tol of the chart, seeds the reduced model
/// there and integrates it forward to t1 and backward to at most one slow
/// period before the snap.  Throws NoApproach when the trajectory never
/// comes within snap_tol.  Verdict "pass" needs rate >= 0.8 * bound, or an
/// error series that never rises above the round-off floor; a window too
/// short to fit is "inconclusive".
SyncReport synchronize(const MechanicalSystem& sys, const ReducedModel& reduced,
                       const VecX& full_initial, Real t0, Real t1, const SyncOptions& opts = {});

}  // namespace sfd
