#pragma once

#include <functional>
#include <string>
#include <utility>

#include "sfd/critical_manifold.hpp"

namespace sfd {

/// Parametrized curve through the slow configuration space, defined on [0, 1].
using SlowPath = std::function<SlowBase(Real)>;

/// Point where the critical-manifold graph folds: the fast force-balance
/// equation stops being solvable for the fast positions past this point.
struct FoldPoint {
  SlowBase point;
  VecX eta;
  Real s = 0.0;
  Real det = 0.0;
  int rank = 0;
  Real nondegeneracy = 0.0;
  VecX kernel;
  std::string plus_branch, minus_branch;
  SlowPath path;

  std::string to_json() const;
};

/// Scaled determinant of the fast stiffness dP2/deta at the solved point.
/// The determinant is divided by the product of the row norms with the
/// smallest row left out, which keeps the value sign-stable and leaves the
/// single-fast-coordinate case unscaled.
Real fold_indicator(const MechanicalSystem& sys, const CriticalPoint& cp);

/// Walks the path by continuation from the branch guess until the indicator
/// changes sign or the force-balance solve fails, brackets the event by
/// bisection on the path parameter, and polishes (s, eta) on the combined
/// system {P2 = 0, det dP2/deta = 0}.  The adjacent branches are classified
/// just inside the solvable side; "plus" is the branch offset along the
/// kernel direction.
FoldPoint locate_fold(const MechanicalSystem& sys, const SlowPath& path, const VecX& branch_guess);

/// Solves both graph branches a small path offset inside the solvable domain
/// and returns them with their stability verdicts (plus branch first).
/// Checks that exactly one eigenvalue of the fast stiffness crosses zero
/// between the branches.
std::pair<CriticalPoint, CriticalPoint> classify_branches(const MechanicalSystem& sys,
                                                          const FoldPoint& fold);

}  // namespace sfd
