#pragma once

#include <string>
#include <vector>

#include "sfd/system.hpp"

namespace sfd {

/// Point in the partitioned phase space: slow position and velocity, the
/// rescaled fast amplitude eta, the fast velocity w, and time.
struct EvalPoint {
  VecX x, v, eta, w;
  Real t = 0.0;
};

/// Reads a domain sample as an evaluation point, taking the raw fast value
/// as eta so that sampled eta ranges stay order-one.
EvalPoint to_eval_point(const DomainSample& s);

std::vector<EvalPoint> sample_points(const MechanicalSystem& sys, int n, Rng& rng);

/// Effective block dynamics after eliminating the inertial cross coupling:
/// M1 xdd = Q1 and M2 ydd = Q2 reproduce the accelerations of the full
/// system at the same point.
struct DecoupledForm {
  MatX M1, M2;
  VecX Q1, Q2;
};

/// Requires the diagonal mass blocks to be invertible at the point; the
/// factorizations stay internal and no inverse is formed.
DecoupledForm inertial_decouple(const MechanicalSystem& sys, const EvalPoint& p, Real eps);

/// Mass-normalized forcings P1 = M1^{-1} Q1 and P2 = eps * M2^{-1} Q2.
struct NormalizedForcing {
  VecX P1, P2;
};

/// For eps > 0 this decouples and solves directly.  At eps = 0 the system's
/// closed-form limits are used when present; otherwise the value is
/// extrapolated from a geometric ladder of positive eps evaluations.
NormalizedForcing normalized_forcing(const MechanicalSystem& sys, const EvalPoint& p, Real eps);

enum class PComp { p1, p2 };
enum class PArg { x, v, eta, w };

/// Derivative-equipped view of the normalized forcings.  Derivatives are
/// central finite differences with per-coordinate step
/// h = cbrt(machine eps) * max(1, |coordinate|); the eps-derivative at zero
/// uses a one-sided five-point rule whose step shrinks with the domain's
/// fast-amplitude scale so that eps * eta stays inside the declared box.
class ForcingEval {
 public:
  explicit ForcingEval(const MechanicalSystem& sys);

  VecX value(PComp c, const EvalPoint& p, Real eps) const;
  MatX jacobian(PComp c, PArg arg, const EvalPoint& p, Real eps) const;
  VecX time_derivative(PComp c, const EvalPoint& p, Real eps) const;

  /// d/d eps at eps = 0 (one-sided; uses the limit value as the base point).
  VecX eps_derivative(PComp c, const EvalPoint& p) const;

  const MechanicalSystem& system() const { return *sys_; }

 private:
  const MechanicalSystem* sys_;
  Real y_scale_ = 1.0;
};

/// Outcome of evaluating the normalized forcings along a decreasing
/// geometric eps ladder: each sampled point is classified by how the
/// successive differences contract, certifying a smooth extension to
/// eps = 0 or flagging divergence.
struct A1Report {
  enum class Verdict { extends, diverges, inconclusive };
  struct Sample {
    EvalPoint point;
    std::vector<Real> p1_norms, p2_norms;  ///< sup norms along the ladder
    std::vector<Real> diffs;               ///< stacked successive-difference norms
    std::vector<Real> ratios;              ///< contraction factor between adjacent diffs
    VecX p1_limit, p2_limit;               ///< ladder extrapolation to eps = 0
    Verdict verdict = Verdict::inconclusive;
  };
  Verdict verdict = Verdict::inconclusive;
  std::vector<Sample> samples;

  std::string to_json() const;
};

const char* to_string(A1Report::Verdict v);

/// {1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3}
std::vector<Real> default_eps_ladder();

/// A sample extends when every successive difference contracts by at least
/// 1.8 per halving; it diverges when either forcing norm grows tenfold along
/// the ladder.  The report verdict is "diverges" if any sample diverges,
/// "extends" if every sample extends, and "inconclusive" otherwise.
A1Report check_A1(const MechanicalSystem& sys, const std::vector<EvalPoint>& samples,
                  const std::vector<Real>& eps_ladder = default_eps_ladder());

}  // namespace sfd
