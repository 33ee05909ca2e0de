#include "sfd/fold_boundary.hpp"

#include <json.hpp>

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

namespace sfd {
namespace {

constexpr Real kFoldTol = 1e-8;
constexpr int kScanSteps = 64;

EvalPoint frozen(const SlowBase& base, const VecX& eta) {
  return EvalPoint{base.x, base.v, eta, VecX::Zero(eta.size()), base.t};
}

MatX fast_stiffness(const ForcingEval& fe, const SlowBase& base, const VecX& eta) {
  return fe.jacobian(PComp::p2, PArg::eta, frozen(base, eta), 0.0);
}

Real scaled_det(const MatX& J) {
  const Real raw = J.determinant();
  if (J.rows() <= 1) return raw;
  VecX norms(J.rows());
  for (Eigen::Index i = 0; i < J.rows(); ++i) norms[i] = J.row(i).norm();
  Eigen::Index drop = 0;
  norms.minCoeff(&drop);
  const Real theta = 1e-8 * (1.0 + norms.maxCoeff());
  Real scale = 1.0;
  for (Eigen::Index i = 0; i < J.rows(); ++i)
    if (i != drop) scale *= std::max(norms[i], theta);
  return raw / scale;
}

struct PathSample {
  Real s = 0.0;
  CriticalPoint cp;
  Real ind = 0.0;
};

std::optional<PathSample> try_solve(const MechanicalSystem& sys, const SlowPath& path, Real s,
                                    const VecX& guess) {
  try {
    PathSample smp;
    smp.s = s;
    smp.cp = solve_critical_point(sys, path(s), guess);
    smp.ind = fold_indicator(sys, smp.cp);
    return smp;
  } catch (const NoConvergence&) {
    return std::nullopt;
  } catch (const SingularJacobian&) {
    return std::nullopt;
  }
}

VecX combined_residual(const ForcingEval& fe, const SlowPath& path, Real s, const VecX& eta) {
  const SlowBase base = path(s);
  VecX F(eta.size() + 1);
  F.head(eta.size()) = fe.value(PComp::p2, frozen(base, eta), 0.0);
  F[eta.size()] = fast_stiffness(fe, base, eta).determinant();
  return F;
}

/// Newton on {P2 = 0, det dP2/deta = 0} in the combined unknown (s, eta);
/// the bordered Jacobian is regular at a generic fold even though dP2/deta
/// itself is singular there.  Best-effort: keeps the incoming point on any
/// failure.
void polish_fold(const ForcingEval& fe, const SlowPath& path, Real& s, VecX& eta) {
  const Eigen::Index f = eta.size();
  VecX F = combined_residual(fe, path, s, eta);
  Real fnorm = F.lpNorm<Eigen::Infinity>();
  const Real target = 1e-12 * (1.0 + fnorm);
  for (int it = 0; it < 40 && fnorm > target; ++it) {
    MatX G(f + 1, f + 1);
    const Real hs = 1e-6 * (1.0 + std::abs(s));
    G.col(0) = (combined_residual(fe, path, s + hs, eta) -
                combined_residual(fe, path, s - hs, eta)) /
               (2.0 * hs);
    const SlowBase base = path(s);
    G.block(0, 1, f, f) = fast_stiffness(fe, base, eta);
    const Real he = 1e-6 * (1.0 + eta.lpNorm<Eigen::Infinity>());
    for (Eigen::Index j = 0; j < f; ++j) {
      VecX up = eta, dn = eta;
      up[j] += he;
      dn[j] -= he;
      G(f, 1 + j) = (fast_stiffness(fe, base, up).determinant() -
                     fast_stiffness(fe, base, dn).determinant()) /
                    (2.0 * he);
    }
    Eigen::FullPivLU<MatX> lu(G);
    if (!lu.isInvertible()) return;
    const VecX step = lu.solve(F);
    bool improved = false;
    Real damp = 1.0;
    for (int bt = 0; bt < 25; ++bt, damp *= 0.5) {
      const Real cs = s - damp * step[0];
      if (cs < 0.0 || cs > 1.0) continue;
      const VecX ce = eta - damp * step.tail(f);
      const VecX cf = combined_residual(fe, path, cs, ce);
      if (cf.lpNorm<Eigen::Infinity>() < fnorm) {
        s = cs;
        eta = ce;
        F = cf;
        fnorm = cf.lpNorm<Eigen::Infinity>();
        improved = true;
        break;
      }
    }
    if (!improved) return;
  }
}

int negative_eigenvalues(const MatX& B) {
  const Eigen::VectorXcd ev = B.eigenvalues();
  int n = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev[i].real() < 0.0) ++n;
  return n;
}

}  // namespace

Real fold_indicator(const MechanicalSystem& sys, const CriticalPoint& cp) {
  ForcingEval fe(sys);
  return scaled_det(fast_stiffness(fe, cp.base, cp.eta));
}

FoldPoint locate_fold(const MechanicalSystem& sys, const SlowPath& path,
                      const VecX& branch_guess) {
  if (!path) throw Error("locate_fold: empty path");
  ForcingEval fe(sys);

  std::optional<PathSample> start = try_solve(sys, path, 0.0, branch_guess);
  if (!start) throw Error("locate_fold: the path start is not in the solvable domain");

  PathSample prev = *start;
  std::optional<PathSample> sign_hi;
  Real fail_hi = 0.0;
  bool have_event = false;
  for (int k = 1; k <= kScanSteps && !have_event; ++k) {
    const Real s = Real(k) / kScanSteps;
    std::optional<PathSample> cur = try_solve(sys, path, s, prev.cp.eta);
    if (!cur) {
      fail_hi = s;
      have_event = true;
    } else if (std::signbit(cur->ind) != std::signbit(prev.ind)) {
      sign_hi = cur;
      have_event = true;
    } else {
      prev = *cur;
    }
  }
  if (!have_event) throw NoSignChange();

  auto bisect_failure = [&](PathSample lo, Real hi) {
    while (hi - lo.s > 1e-13 * (1.0 + hi)) {
      const Real mid = 0.5 * (lo.s + hi);
      if (std::optional<PathSample> m = try_solve(sys, path, mid, lo.cp.eta))
        lo = *m;
      else
        hi = mid;
    }
    return lo;
  };

  PathSample best = prev;
  if (!sign_hi) {
    best = bisect_failure(prev, fail_hi);
  } else {
    PathSample a = prev, b = *sign_hi;
    bool pinched = false;
    while (b.s - a.s > 1e-13 * (1.0 + b.s) && std::abs(a.ind) > kFoldTol) {
      const Real mid = 0.5 * (a.s + b.s);
      std::optional<PathSample> m = try_solve(sys, path, mid, a.cp.eta);
      if (!m) {
        best = bisect_failure(a, mid);
        pinched = true;
        break;
      }
      if (std::signbit(m->ind) == std::signbit(a.ind))
        a = *m;
      else
        b = *m;
    }
    if (!pinched) best = std::abs(a.ind) <= std::abs(b.ind) ? a : b;
  }

  Real s = best.s;
  VecX eta = best.cp.eta;
  polish_fold(fe, path, s, eta);

  const SlowBase base = path(s);
  const MatX J = fast_stiffness(fe, base, eta);
  const Real ind = scaled_det(J);
  if (!(std::abs(ind) <= kFoldTol)) throw NoConvergence(eta, std::abs(ind), kScanSteps);

  Eigen::JacobiSVD<MatX> svd(J, Eigen::ComputeFullV);
  const VecX sigma = svd.singularValues();
  const Real sigma_tol = 1e-8 * (1.0 + sigma[0]);
  int rank = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma[i] > sigma_tol) ++rank;
  VecX kernel = svd.matrixV().col(J.cols() - 1);
  Eigen::Index imax = 0;
  kernel.cwiseAbs().maxCoeff(&imax);
  if (kernel[imax] < 0.0) kernel = -kernel;

  const Real h = 1e-6 * (1.0 + eta.lpNorm<Eigen::Infinity>());
  const Real nd = (fast_stiffness(fe, base, eta + h * kernel).determinant() -
                   fast_stiffness(fe, base, eta - h * kernel).determinant()) /
                  (2.0 * h);

  FoldPoint fp;
  fp.point = base;
  fp.eta = eta;
  fp.s = s;
  fp.det = ind;
  fp.rank = rank;
  fp.nondegeneracy = nd;
  fp.kernel = kernel;
  fp.path = path;
  if (std::abs(nd) < 1e-8) throw DegenerateFold(nd);

  const auto [up, dn] = classify_branches(sys, fp);
  fp.plus_branch = up.stable ? "stable" : "unstable";
  fp.minus_branch = dn.stable ? "stable" : "unstable";
  return fp;
}

std::pair<CriticalPoint, CriticalPoint> classify_branches(const MechanicalSystem& sys,
                                                          const FoldPoint& fold) {
  if (!fold.path) throw Error("classify_branches: fold point carries no path");
  Real offset = 1e-3;
  for (int attempt = 0; attempt < 12; ++attempt, offset *= 0.5) {
    const Real s_in = fold.s - offset;
    if (s_in < 0.0) continue;
    const SlowBase base = fold.path(s_in);
    Real delta = 1e-2 * (1.0 + fold.eta.lpNorm<Eigen::Infinity>());
    for (int widen = 0; widen < 6; ++widen, delta *= 4.0) {
      std::optional<CriticalPoint> up, dn;
      try {
        up = solve_critical_point(sys, base, fold.eta + delta * fold.kernel);
        dn = solve_critical_point(sys, base, fold.eta - delta * fold.kernel);
      } catch (const NoConvergence&) {
        break;
      } catch (const SingularJacobian&) {
        break;
      }
      if ((up->eta - dn->eta).lpNorm<Eigen::Infinity>() <=
          1e-8 * (1.0 + up->eta.lpNorm<Eigen::Infinity>()))
        continue;
      if (fold.kernel.dot(up->eta - dn->eta) < 0.0) std::swap(up, dn);
      const int crossings = std::abs(negative_eigenvalues(up->B) - negative_eigenvalues(dn->B));
      if (crossings != 1)
        throw AssumptionViolated(
            "single zero crossing",
            std::to_string(crossings) + " fast-stiffness eigenvalues change sign at the fold");
      return {*up, *dn};
    }
  }
  throw Error("classify_branches: could not separate the two branches near the fold");
}

std::string FoldPoint::to_json() const {
  nlohmann::json j;
  j["point"]["x"] = std::vector<Real>(point.x.begin(), point.x.end());
  j["point"]["v"] = std::vector<Real>(point.v.begin(), point.v.end());
  j["point"]["t"] = point.t;
  j["eta"] = std::vector<Real>(eta.begin(), eta.end());
  j["det"] = det;
  j["rank"] = rank;
  j["nondegeneracy"] = nondegeneracy;
  j["branches"]["plus"] = plus_branch;
  j["branches"]["minus"] = minus_branch;
  return j.dump(2) + "\n";
}

}  // namespace sfd
