#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sfd/errors.hpp"
#include "sfd/ode.hpp"
#include "sfd/types.hpp"
#include "sfd/util.hpp"

namespace sfd {

struct TimeDependence {
  enum class Kind { autonomous, periodic, quasiperiodic, aperiodic };
  Kind kind = Kind::autonomous;
  Real period = 0.0;               ///< periodic only
  std::vector<Real> frequencies;   ///< quasiperiodic only
  Real t_begin = 0.0, t_end = 0.0; ///< aperiodic only
};

/// Sampling bounds for the slow coordinates, the fast coordinates, and time.
struct DomainBox {
  VecX x_lo, x_hi, v_lo, v_hi;
  VecX y_lo, y_hi, w_lo, w_hi;
  Real t_lo = 0.0, t_hi = 0.0;

  static DomainBox standard(int s, int f, Real t_lo, Real t_hi);
};

/// One full-state sample (slow position/velocity, fast position/velocity, time).
struct DomainSample {
  VecX x, v, y, w;
  Real t = 0.0;
};

DomainSample random_sample(const DomainBox& box, Rng& rng);

/// Optional closed-form derivatives of the scaled force; any entry may be
/// left empty, in which case finite differences are used instead.
struct ForceDerivatives {
  using MatFn =
      std::function<MatX(const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t, Real eps)>;
  using VecFn =
      std::function<VecX(const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t, Real eps)>;
  MatFn d_x, d_v, d_eta, d_w;
  VecFn d_t, d_eps;
};

/// A second-order mechanical system M(q,t) q̈ = F(q,q̇,t) whose n degrees of
/// freedom split into s slow coordinates x and f fast coordinates y, together
/// with the eps-scaled block form of the same system in (x, η = y/eps).
///
/// The two evaluator families are written independently: the scaled one
/// places the eps factors where the slow-fast analysis needs them, and
/// consistency_check verifies that at η = y/eps (the system's own eps) the
/// two agree to roundoff.
struct MechanicalSystem {
  std::string name;
  std::string mode;  ///< pendulum3 sub-mode; empty otherwise
  int n = 0, s = 0, f = 0;
  Real eps = 1.0;
  bool has_sfd_scaling = true;  ///< false when eps is a literal parameter, not a scaling

  std::function<MatX(const VecX& q, Real t)> mass;
  std::function<VecX(const VecX& q, const VecX& qdot, Real t)> force;

  std::function<MatX(const VecX& x, const VecX& eta, Real t, Real eps)> scaled_mass;
  std::function<VecX(const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t,
                     Real eps)>
      scaled_force;

  ForceDerivatives analytic_derivatives;

  /// Closed-form eps → 0 limits of the mass-normalized forcings P1, P2,
  /// evaluated at (x, v, η, ẏ, t).  Empty means the limit is obtained by
  /// extrapolating the scaled pipeline in eps.
  using LimitFn =
      std::function<VecX(const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t)>;
  LimitFn limit_p1, limit_p2;

  TimeDependence time_dependence;
  DomainBox domain;
  VecX initial_state;  ///< (x, v, y, w) layout
  std::map<std::string, Real> params;
};

/// First-order right-hand side of the full system in the (x, v, y, w) state
/// layout, solving M(q,t) q̈ = F at each evaluation.
ode::Rhs full_rhs(const MechanicalSystem& sys);

struct ConsistencyReport {
  Real max_rel_mass = 0.0;
  Real max_rel_force = 0.0;
  DomainSample worst;
  int n_samples = 0;
  bool pass(Real tol = 1e-12) const { return std::max(max_rel_mass, max_rel_force) <= tol; }
};

/// Compares the unscaled evaluators against the scaled ones at η = y/eps
/// over the given samples.
ConsistencyReport consistency_check(const MechanicalSystem& sys,
                                    const std::vector<DomainSample>& samples);
ConsistencyReport consistency_check(const MechanicalSystem& sys, int n_samples, Rng& rng);

/// For aperiodic systems the simulation window must stay inside the declared
/// interval; throws otherwise.  No-op for the other time classes.
void check_time_span(const MechanicalSystem& sys, Real t0, Real t1);

}  // namespace sfd
