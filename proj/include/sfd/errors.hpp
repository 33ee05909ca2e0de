#pragma once

#include <stdexcept>
#include <string>

#include "sfd/types.hpp"

namespace sfd {

/// Base class for every failure this library can diagnose.  Callers that
/// only need a verdict can catch this; the derived types carry the data
/// needed to report or recover.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
  int line = 0;
  ConfigError(const std::string& msg, int line_no = 0)
      : Error(line_no > 0 ? "config line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
};

/// A diagonal block of the mass matrix was numerically singular during
/// inertial decoupling.
struct SingularBlock : Error {
  std::string block;
  Real rcond;
  SingularBlock(const std::string& which, Real rc)
      : Error("singular mass block " + which + " (rcond " + std::to_string(rc) + ")"),
        block(which),
        rcond(rc) {}
};

struct NoConvergence : Error {
  VecX best;
  Real residual;
  int iterations;
  NoConvergence(VecX best_iterate, Real res, int iters)
      : Error("Newton iteration did not converge (residual " + std::to_string(res) + " after " +
              std::to_string(iters) + " iterations)"),
        best(std::move(best_iterate)),
        residual(res),
        iterations(iters) {}
};

struct SingularJacobian : Error {
  Real rcond;
  explicit SingularJacobian(Real rc)
      : Error("singular Newton Jacobian (rcond " + std::to_string(rc) +
              "); point may lie near the fold boundary"),
        rcond(rc) {}
};

struct UnstableSample : Error {
  VecX x, v;
  Real t;
  Real max_real_part;
  UnstableSample(VecX xs, VecX vs, Real ts, Real max_re)
      : Error("sampled point fails formal stability (max Re lambda = " + std::to_string(max_re) + ")"),
        x(std::move(xs)),
        v(std::move(vs)),
        t(ts),
        max_real_part(max_re) {}
};

struct M1NotSmooth : Error {
  M1NotSmooth() : Error("slow mass block does not extend smoothly to eps = 0; "
                        "only the mass-normalized reduced form is available") {}
};

struct NearResonance : Error {
  Real discriminant;
  explicit NearResonance(Real d)
      : Error("cubic-manifold linear system is near-singular (D = " + std::to_string(d) + ")"),
        discriminant(d) {}
};

struct NoSignChange : Error {
  NoSignChange() : Error("fold indicator does not change sign along the path") {}
};

struct DegenerateFold : Error {
  Real value;
  explicit DegenerateFold(Real v)
      : Error("fold fails the nondegeneracy check (directional derivative " + std::to_string(v) + ")"),
        value(v) {}
};

struct NoApproach : Error {
  Real min_distance;
  explicit NoApproach(Real d)
      : Error("trajectory never approaches the slow manifold (min distance " + std::to_string(d) + ")"),
        min_distance(d) {}
};

struct StepSizeUnderflow : Error {
  Real t;
  VecX last_state;
  bool stiffness_suspected;
  StepSizeUnderflow(Real time, VecX state, bool stiff)
      : Error(std::string("step size underflow at t = ") + std::to_string(time) +
              (stiff ? " (stiffness suspected; try the implicit method)" : "")),
        t(time),
        last_state(std::move(state)),
        stiffness_suspected(stiff) {}
};

struct RhsFailure : Error {
  Real t;
  explicit RhsFailure(Real time, const std::string& what)
      : Error("right-hand side failed at t = " + std::to_string(time) + ": " + what), t(time) {}
};

struct AssumptionViolated : Error {
  std::string assumption;
  AssumptionViolated(std::string which, const std::string& detail)
      : Error("assumption " + which + " violated: " + detail), assumption(std::move(which)) {}
};

}  // namespace sfd
