#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sfd/ode.hpp"
#include "sfd/system.hpp"

namespace sfd {

/// Quadratic Taylor data of the fast balance position about the slow origin:
/// eta(x) = gamma + phi x + (theta x) x, with theta[i] the symmetric
/// quadratic form of fast component i.
struct LocalExpansion {
  VecX gamma;               ///< f
  MatX phi;                 ///< f x s
  std::vector<MatX> theta;  ///< f entries, each s x s and symmetric
  Real t = 0.0;

  VecX eta(const VecX& x) const;
};

/// Requires the decoupled fast forcing to be independent of the slow
/// velocities (checked on samples) and the unforced slow origin to admit a
/// fast balance position (Newton from zero); violations throw
/// AssumptionViolated.  Systems without the stiffness scaling are expanded
/// at their own eps, scaled systems at the eps = 0 limit.
LocalExpansion local_expansion(const MechanicalSystem& sys, Real t);

/// Equilibrium-local reduced model on the slow block.  The validity radius
/// shrinks with the scale separation as eps^validity_exponent; hypothesis
/// violations found while building the model are recorded, never thrown.
struct LocalModel {
  std::function<VecX(const VecX& x, const VecX& v, Real t)> accel;
  Real validity_exponent = 0.0;
  std::vector<std::string> warnings;

  /// First-order form on the (x, xdot) state for the integrators.
  ode::Rhs first_order() const;
};

/// Freezes the fast position at the equilibrium offset: xdd = P1(x, xdot,
/// gamma, 0, t).
LocalModel static_condensation_model(const MechanicalSystem& sys, const LocalExpansion& ex);

/// Enslaves the fast position through the quadratic expansion: xdd =
/// P1(x, xdot, eta(x), 0, t).
LocalModel modal_derivatives_model(const MechanicalSystem& sys, const LocalExpansion& ex);

/// Coefficients of the oscillator pair
///   xdd + (c1 + mu1 x^2) xd + k1 x + a x y + b x^3 = 0,
///   ydd + c2 yd + k2 y + c x^2 = 0.
struct OscillatorPairParams {
  Real c1 = 0.05, c2 = 0.3, k1 = 1.0, k2 = 9.0;
  Real a = 1.0, b = 1.0, c = 1.0, mu1 = 0.1;
};

/// Reads the coefficients back from a system built with these parameter
/// names.
OscillatorPairParams oscillator_pair_params(const MechanicalSystem& sys);

/// Cubic reduced model of the oscillator pair on its slow spectral
/// submanifold y = alpha x^2 + beta x xd + gamma xd^2:
///   xdd + (c1 + damping_cubic x^2) xd + k1 x + velocity_sq x xd^2
///       + cubic x^3 = 0.
struct SSMCubicModel {
  OscillatorPairParams params;
  Real alpha = 0.0, beta = 0.0, gamma = 0.0;
  Real D = 0.0;              ///< common denominator, zero at the 2:1 resonance
  Real damping_cubic = 0.0;  ///< c1 correction: mu1 + a * beta
  Real velocity_sq = 0.0;    ///< a * gamma
  Real cubic = 0.0;          ///< b + a * alpha

  Real graph(Real x, Real v) const;  ///< manifold height y(x, xd)
  Real accel(Real x, Real v) const;
  ode::Rhs first_order() const;
};

/// Solves the order-two invariance equations of the manifold and
/// cross-checks the solution against the closed forms; throws NearResonance
/// when the common denominator is smaller than 1e-8.
SSMCubicModel ssm_cubic(const OscillatorPairParams& p);

/// Cubic coefficients of the three local reductions of the oscillator pair,
/// their trajectory divergence from the manifold-based model over a time
/// span, and the coefficient gap swept toward the 2:1 resonance.
struct ReductionComparison {
  Real sc = 0.0;   ///< static condensation cubic coefficient: b
  Real md = 0.0;   ///< modal derivatives cubic coefficient: b - a c / k2
  Real ssm = 0.0;  ///< manifold cubic coefficient: b + a alpha
  Real gap = 0.0;  ///< |ssm - md|
  Real sc_error = 0.0;  ///< sup slow-position gap to the manifold trajectory
  Real md_error = 0.0;
  std::vector<std::pair<Real, Real>> sweep;  ///< (k2, gap) toward k2 = 4 k1

  std::string to_json() const;
};

ReductionComparison compare_reductions(const OscillatorPairParams& p, Real x0, Real v0, Real t0,
                                       Real t1);

}  // namespace sfd
