#include "sfd/decomposition.hpp"

#include <json.hpp>

#include <Eigen/LU>
#include <cmath>

#include "sfd/errors.hpp"

namespace sfd {
namespace {

constexpr Real kRcondFloor = 1e-13;

Eigen::PartialPivLU<MatX> checked_lu(const MatX& m, const char* which) {
  Eigen::PartialPivLU<MatX> lu(m);
  Real rc = lu.rcond();
  if (!(rc > kRcondFloor)) throw SingularBlock(which, rc);
  return lu;
}

/// Polynomial extrapolation of vector samples (eps_k, val_k) to eps = 0.
VecX neville_to_zero(const std::vector<Real>& eps, const std::vector<VecX>& val) {
  std::vector<VecX> row = val;
  const int n = int(eps.size());
  for (int level = 1; level < n; ++level)
    for (int j = n - 1; j >= level; --j)
      row[j] = row[j] + (row[j] - row[j - 1]) * (eps[j] / (eps[j - level] - eps[j]));
  return row[n - 1];
}

std::vector<Real> fallback_ladder() {
  std::vector<Real> ladder;
  Real e = 5e-2;
  for (int k = 0; k < 6; ++k, e *= 0.5) ladder.push_back(e);
  return ladder;
}

nlohmann::json vec_json(const VecX& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

EvalPoint to_eval_point(const DomainSample& s) { return {s.x, s.v, s.y, s.w, s.t}; }

std::vector<EvalPoint> sample_points(const MechanicalSystem& sys, int n, Rng& rng) {
  std::vector<EvalPoint> pts;
  pts.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) pts.push_back(to_eval_point(random_sample(sys.domain, rng)));
  return pts;
}

DecoupledForm inertial_decouple(const MechanicalSystem& sys, const EvalPoint& p, Real eps) {
  const int s = sys.s, f = sys.f;
  MatX M = sys.scaled_mass(p.x, p.eta, p.t, eps);
  VecX F = sys.scaled_force(p.x, p.v, p.eta, p.w, p.t, eps);

  MatX M11 = M.topLeftCorner(s, s), M12 = M.topRightCorner(s, f);
  MatX M21 = M.bottomLeftCorner(f, s), M22 = M.bottomRightCorner(f, f);
  VecX F1 = F.head(s), F2 = F.tail(f);

  auto lu11 = checked_lu(M11, "M11");
  auto lu22 = checked_lu(M22, "M22");

  DecoupledForm out;
  out.M1 = M11 - M12 * lu22.solve(M21);
  out.Q1 = F1 - M12 * lu22.solve(F2);
  out.M2 = M22 - M21 * lu11.solve(M12);
  out.Q2 = F2 - M21 * lu11.solve(F1);
  return out;
}

NormalizedForcing normalized_forcing(const MechanicalSystem& sys, const EvalPoint& p, Real eps) {
  if (eps > 0.0) {
    DecoupledForm d = inertial_decouple(sys, p, eps);
    NormalizedForcing nf;
    nf.P1 = checked_lu(d.M1, "M1").solve(d.Q1);
    nf.P2 = eps * checked_lu(d.M2, "M2").solve(d.Q2);
    return nf;
  }
  if (sys.limit_p1 && sys.limit_p2)
    return {sys.limit_p1(p.x, p.v, p.eta, p.w, p.t), sys.limit_p2(p.x, p.v, p.eta, p.w, p.t)};

  std::vector<Real> ladder = fallback_ladder();
  std::vector<VecX> p1s, p2s;
  for (Real e : ladder) {
    NormalizedForcing nf = normalized_forcing(sys, p, e);
    p1s.push_back(nf.P1);
    p2s.push_back(nf.P2);
  }
  return {neville_to_zero(ladder, p1s), neville_to_zero(ladder, p2s)};
}

ForcingEval::ForcingEval(const MechanicalSystem& sys) : sys_(&sys) {
  Real lo = sys.domain.y_lo.size() ? sys.domain.y_lo.cwiseAbs().maxCoeff() : 0.0;
  Real hi = sys.domain.y_hi.size() ? sys.domain.y_hi.cwiseAbs().maxCoeff() : 0.0;
  y_scale_ = std::max(lo, hi);
  if (!(y_scale_ > 0.0)) y_scale_ = 1.0;
}

VecX ForcingEval::value(PComp c, const EvalPoint& p, Real eps) const {
  NormalizedForcing nf = normalized_forcing(*sys_, p, eps);
  return c == PComp::p1 ? nf.P1 : nf.P2;
}

MatX ForcingEval::jacobian(PComp c, PArg arg, const EvalPoint& p, Real eps) const {
  const VecX& base = arg == PArg::x   ? p.x
                     : arg == PArg::v ? p.v
                     : arg == PArg::eta ? p.eta
                                        : p.w;
  const int cols = int(base.size());
  MatX jac;
  for (int j = 0; j < cols; ++j) {
    Real h = kFdStep * std::max(Real(1), std::abs(base[j]));
    EvalPoint lo = p, hi = p;
    VecX& lo_arg = arg == PArg::x ? lo.x : arg == PArg::v ? lo.v : arg == PArg::eta ? lo.eta : lo.w;
    VecX& hi_arg = arg == PArg::x ? hi.x : arg == PArg::v ? hi.v : arg == PArg::eta ? hi.eta : hi.w;
    lo_arg[j] -= h;
    hi_arg[j] += h;
    VecX diff = (value(c, hi, eps) - value(c, lo, eps)) / (2.0 * h);
    if (jac.size() == 0) jac.resize(diff.size(), cols);
    jac.col(j) = diff;
  }
  return jac;
}

VecX ForcingEval::time_derivative(PComp c, const EvalPoint& p, Real eps) const {
  Real h = kFdStep * std::max(Real(1), std::abs(p.t));
  EvalPoint lo = p, hi = p;
  lo.t -= h;
  hi.t += h;
  return (value(c, hi, eps) - value(c, lo, eps)) / (2.0 * h);
}

VecX ForcingEval::eps_derivative(PComp c, const EvalPoint& p) const {
  Real eta_mag = p.eta.size() ? p.eta.cwiseAbs().maxCoeff() : 0.0;
  Real h = 1e-2 * std::min(Real(1), y_scale_ / (1.0 + eta_mag));
  VecX f0 = value(c, p, 0.0);
  VecX f1 = value(c, p, h), f2 = value(c, p, 2 * h);
  VecX f3 = value(c, p, 3 * h), f4 = value(c, p, 4 * h);
  return (-25.0 * f0 + 48.0 * f1 - 36.0 * f2 + 16.0 * f3 - 3.0 * f4) / (12.0 * h);
}

const char* to_string(A1Report::Verdict v) {
  switch (v) {
    case A1Report::Verdict::extends: return "extends";
    case A1Report::Verdict::diverges: return "diverges";
    default: return "inconclusive";
  }
}

std::vector<Real> default_eps_ladder() { return {1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3}; }

A1Report check_A1(const MechanicalSystem& sys, const std::vector<EvalPoint>& samples,
                  const std::vector<Real>& ladder) {
  if (ladder.size() < 4) throw Error("eps ladder needs at least 4 terms");
  for (std::size_t k = 0; k + 1 < ladder.size(); ++k)
    if (!(ladder[k] > ladder[k + 1] && ladder[k + 1] > 0.0))
      throw Error("eps ladder must be strictly decreasing and positive");

  A1Report report;
  bool all_extend = true, any_diverges = false;
  for (const EvalPoint& p : samples) {
    A1Report::Sample smp;
    smp.point = p;
    std::vector<VecX> p1s, p2s, stacked;
    for (Real e : ladder) {
      NormalizedForcing nf = normalized_forcing(sys, p, e);
      p1s.push_back(nf.P1);
      p2s.push_back(nf.P2);
      VecX st(nf.P1.size() + nf.P2.size());
      st << nf.P1, nf.P2;
      stacked.push_back(st);
      smp.p1_norms.push_back(nf.P1.lpNorm<Eigen::Infinity>());
      smp.p2_norms.push_back(nf.P2.lpNorm<Eigen::Infinity>());
    }
    for (std::size_t k = 0; k + 1 < stacked.size(); ++k)
      smp.diffs.push_back((stacked[k] - stacked[k + 1]).lpNorm<Eigen::Infinity>());

    Real scale = 1.0;
    for (Real nrm : smp.p1_norms) scale = std::max(scale, nrm);
    for (Real nrm : smp.p2_norms) scale = std::max(scale, nrm);
    bool contracts = true;
    for (std::size_t k = 0; k + 1 < smp.diffs.size(); ++k) {
      Real next = smp.diffs[k + 1];
      if (next <= 1e-13 * scale) {
        smp.ratios.push_back(std::numeric_limits<Real>::infinity());
        continue;
      }
      Real r = smp.diffs[k] / next;
      smp.ratios.push_back(r);
      if (r < 1.8) contracts = false;
    }

    auto grows = [](const std::vector<Real>& norms) {
      Real peak = 0.0;
      for (Real nrm : norms) peak = std::max(peak, nrm);
      return peak > 1e-9 && peak >= 10.0 * (norms.front() + 1e-12);
    };
    // A contracting difference sequence is Cauchy, so apparent growth can
    // only be a near-zero first rung; test growth on the rest.
    bool divergent = !contracts && (grows(smp.p1_norms) || grows(smp.p2_norms));

    smp.p1_limit = neville_to_zero(ladder, p1s);
    smp.p2_limit = neville_to_zero(ladder, p2s);
    smp.verdict = divergent ? A1Report::Verdict::diverges
                : contracts ? A1Report::Verdict::extends
                            : A1Report::Verdict::inconclusive;
    any_diverges = any_diverges || divergent;
    all_extend = all_extend && smp.verdict == A1Report::Verdict::extends;
    report.samples.push_back(std::move(smp));
  }
  report.verdict = any_diverges  ? A1Report::Verdict::diverges
                   : all_extend && !report.samples.empty() ? A1Report::Verdict::extends
                                                           : A1Report::Verdict::inconclusive;
  return report;
}

std::string A1Report::to_json() const {
  nlohmann::json j;
  j["verdict"] = sfd::to_string(verdict);
  nlohmann::json arr = nlohmann::json::array();
  for (const Sample& s : samples) {
    nlohmann::json js;
    js["point"] = {{"x", vec_json(s.point.x)},
                   {"v", vec_json(s.point.v)},
                   {"eta", vec_json(s.point.eta)},
                   {"w", vec_json(s.point.w)},
                   {"t", s.point.t}};
    js["p1_norms"] = s.p1_norms;
    js["p2_norms"] = s.p2_norms;
    js["diffs"] = s.diffs;
    nlohmann::json ratios = nlohmann::json::array();
    for (Real r : s.ratios)
      ratios.push_back(std::isfinite(r) ? nlohmann::json(r) : nlohmann::json("contracted-out"));
    js["ratios"] = ratios;
    js["p1_limit"] = vec_json(s.p1_limit);
    js["p2_limit"] = vec_json(s.p2_limit);
    js["verdict"] = sfd::to_string(s.verdict);
    arr.push_back(js);
  }
  j["samples"] = arr;
  return j.dump(2) + "\n";
}

}  // namespace sfd
