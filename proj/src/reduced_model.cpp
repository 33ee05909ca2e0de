#include "sfd/reduced_model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>

#include "sfd/util.hpp"

namespace sfd {
namespace {

template <typename T>
T neville_to_zero(const std::vector<Real>& eps, std::vector<T> rows) {
  const std::size_t n = rows.size();
  for (std::size_t level = 1; level < n; ++level)
    for (std::size_t i = 0; i + level < n; ++i) {
      const Real a = eps[i], b = eps[i + level];
      rows[i] = (rows[i + 1] * a - rows[i] * b) / (a - b);
    }
  return rows[0];
}

/// Same contraction criterion as the forcing-extension check, applied to the
/// condensed slow mass block along the eps ladder.
void check_m1_extension(const MechanicalSystem& sys) {
  Rng rng(0x1d3a5u);
  const std::vector<EvalPoint> pts = sample_points(sys, 8, rng);
  const std::vector<Real> ladder = default_eps_ladder();
  for (const EvalPoint& p : pts) {
    std::vector<MatX> m1s;
    for (Real e : ladder) {
      try {
        m1s.push_back(inertial_decouple(sys, p, e).M1);
      } catch (const SingularBlock&) {
        throw M1NotSmooth();
      }
    }
    Real scale = 1.0;
    for (const MatX& m : m1s) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    std::vector<Real> diffs;
    for (std::size_t k = 0; k + 1 < m1s.size(); ++k)
      diffs.push_back((m1s[k] - m1s[k + 1]).cwiseAbs().maxCoeff());
    for (std::size_t k = 0; k + 1 < diffs.size(); ++k) {
      if (diffs[k + 1] <= 1e-13 * scale) continue;
      if (diffs[k] / diffs[k + 1] < 1.8) throw M1NotSmooth();
    }
  }
}

Real slow_period(const MechanicalSystem& sys) {
  if (sys.time_dependence.kind == TimeDependence::Kind::periodic &&
      sys.time_dependence.period > 0.0)
    return sys.time_dependence.period;
  return 2.0 * std::numbers::pi;
}

Real fit_slope(const std::vector<Real>& ts, const std::vector<Real>& ys) {
  const Real n = Real(ts.size());
  Real mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    my += ys[i];
  }
  mt /= n;
  my /= n;
  Real num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    num += (ts[i] - mt) * (ys[i] - my);
    den += (ts[i] - mt) * (ts[i] - mt);
  }
  return num / den;
}

}  // namespace

ReducedModel::ReducedModel(const MechanicalSystem& sys, const SlowManifoldChart& chart, int order,
                           ReducedForm form, Real lambda)
    : sys_(&sys), chart_(&chart), fe_(sys), order_(order), form_(form), eps_(sys.eps),
      lambda_(lambda) {}

VecX ReducedModel::order_one_correction(const EvalPoint& p) const {
  const VecX g1 = chart_->G1(p.x, p.v, p.t);
  const VecX h0 = chart_->H0(p.x, p.v, p.t);
  return fe_.jacobian(PComp::p1, PArg::eta, p, 0.0) * g1 +
         fe_.jacobian(PComp::p1, PArg::w, p, 0.0) * h0 + fe_.eps_derivative(PComp::p1, p);
}

VecX ReducedModel::rhs(const VecX& x, const VecX& v, Real t) const {
  if (x.size() != sys_->s || v.size() != sys_->s)
    throw Error("reduced state must carry one value per slow coordinate");
  EvalPoint p{x, v, chart_->G0(x, v, t), VecX::Zero(sys_->f), t};
  VecX acc;
  if (form_ == ReducedForm::mass_normalized) {
    acc = fe_.value(PComp::p1, p, 0.0);
  } else {
    const std::vector<Real> ladder = default_eps_ladder();
    std::vector<MatX> m1s;
    std::vector<VecX> q1s;
    for (Real e : ladder) {
      DecoupledForm d = inertial_decouple(*sys_, p, e);
      m1s.push_back(std::move(d.M1));
      q1s.push_back(std::move(d.Q1));
    }
    const MatX m1 = neville_to_zero(ladder, std::move(m1s));
    const VecX q1 = neville_to_zero(ladder, std::move(q1s));
    Eigen::FullPivLU<MatX> lu(m1);
    if (!lu.isInvertible()) throw SingularBlock("M1 at eps = 0", 0.0);
    acc = lu.solve(q1);
  }
  if (order_ == 1) acc += eps_ * order_one_correction(p);
  return acc;
}

ode::Rhs ReducedModel::first_order() const {
  const int s = sys_->s;
  return [this, s](Real t, const VecX& z) {
    if (z.size() != 2 * s) throw Error("reduced state must be (x, xdot)");
    VecX out(2 * s);
    out.head(s) = z.segment(s, s);
    out.tail(s) = rhs(z.head(s), z.segment(s, s), t);
    return out;
  };
}

ReducedModel build_reduced(const MechanicalSystem& sys, const SlowManifoldChart& chart, int order,
                           ReducedForm form, const StabilityCertificate& certificate) {
  if (&chart.system() != &sys) throw Error("chart was built for a different system");
  if (order != 0 && order != 1) throw Error("reduced model order must be 0 or 1");
  if (certificate.n_samples <= 0 || !(certificate.lambda > 0.0))
    throw Error("reduced model requires a stability certificate with positive decay");
  if (form == ReducedForm::mass_multiplied) check_m1_extension(sys);
  return ReducedModel(sys, chart, order, form, certificate.lambda);
}

VecX lift_initial(const SlowManifoldChart& chart, const VecX& x, const VecX& v, Real t) {
  return chart.lift(x, v, t);
}

SyncReport synchronize(const MechanicalSystem& sys, const ReducedModel& reduced,
                       const VecX& full_initial, Real t0, Real t1, const SyncOptions& opts) {
  if (&reduced.system() != &sys) throw Error("reduced model was built for a different system");
  if (!(t1 > t0)) throw Error("time span must be increasing");
  check_time_span(sys, t0, t1);
  if (full_initial.size() != 2 * (sys.s + sys.f))
    throw Error("full state must be (x, xdot, y, ydot)");

  const int s = sys.s;
  const SlowManifoldChart& chart = reduced.chart();
  const ode::Trajectory full = ode::integrate(full_rhs(sys), full_initial, t0, t1, opts.full);

  Real min_d = std::numeric_limits<Real>::infinity();
  std::size_t snap = full.t.size();
  for (std::size_t i = 0; i < full.t.size(); ++i) {
    const Real d = manifold_distance(chart, full.y[i], full.t[i]);
    min_d = std::min(min_d, d);
    if (d < opts.snap_tol) {
      snap = i;
      break;
    }
  }
  if (snap == full.t.size()) throw NoApproach(min_d);

  SyncReport rep;
  rep.t_snap = full.t[snap];
  rep.bound = reduced.decay_lambda() / reduced.eps();

  const VecX seed = full.y[snap].head(2 * s);
  const Real t_back = std::max(t0, rep.t_snap - slow_period(sys));
  const ode::Rhs rrhs = reduced.first_order();
  std::optional<ode::Trajectory> fwd, bwd;
  if (rep.t_snap < t1) fwd = ode::integrate(rrhs, seed, rep.t_snap, t1, opts.reduced);
  if (t_back < rep.t_snap) bwd = ode::integrate(rrhs, seed, rep.t_snap, t_back, opts.reduced);

  Real scale = 1.0;
  std::size_t snap_sample = 0;
  for (std::size_t i = 0; i < full.t.size(); ++i) {
    const Real ti = full.t[i];
    if (ti < t_back) continue;
    const std::optional<ode::Trajectory>& seg = ti <= rep.t_snap ? bwd : fwd;
    const VecX red = seg ? seg->sample(ti) : seed;
    if (ti <= rep.t_snap) snap_sample = rep.t.size();
    rep.t.push_back(ti);
    rep.e.push_back((full.y[i].head(2 * s) - red).norm());
    scale = std::max(scale, full.y[i].head(2 * s).template lpNorm<Eigen::Infinity>());
  }

  const Real tol = std::max({kMachineEps, opts.full.rtol, opts.reduced.rtol});
  rep.floor_level = 1e2 * (tol * scale + std::max(opts.full.atol, opts.reduced.atol));

  if (*std::max_element(rep.e.begin(), rep.e.end()) <= rep.floor_level) {
    rep.verdict = "pass";
    rep.window_lo = rep.t.front();
    rep.window_hi = rep.t.back();
    return rep;
  }

  // The measurable decay lives on the approach segment: before the snap the
  // full trajectory still carries the fast transient, while the reduced one
  // (pinned to it at the snap instant) does not, so their gap shrinks toward
  // the snap at the fast decay rate.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 <= snap_sample; ++i)
    if (rep.e[i] > rep.floor_level && rep.e[i] >= rep.e[i - 1] && rep.e[i] >= rep.e[i + 1])
      candidates.push_back(i);
  if (candidates.size() < 3) {
    candidates.clear();
    for (std::size_t i = 0; i <= snap_sample; ++i)
      if (rep.e[i] > rep.floor_level) candidates.push_back(i);
  }

  std::size_t best_lo = 0, best_len = 0, run_lo = 0;
  for (std::size_t k = 1; k <= candidates.size(); ++k) {
    if (k == candidates.size() || !(rep.e[candidates[k]] < rep.e[candidates[k - 1]])) {
      if (k - run_lo > best_len) {
        best_lo = run_lo;
        best_len = k - run_lo;
      }
      run_lo = k;
    }
  }

  rep.rate = 0.0;
  rep.verdict = "inconclusive";
  if (best_len < 3) return rep;

  rep.window_lo = rep.t[candidates[best_lo]];
  rep.window_hi = rep.t[candidates[best_lo + best_len - 1]];
  const Real trim = 0.1 * (rep.window_hi - rep.window_lo);
  std::vector<Real> ft, fl;
  for (std::size_t k = best_lo; k < best_lo + best_len; ++k) {
    const Real ti = rep.t[candidates[k]];
    if (ti < rep.window_lo + trim || ti > rep.window_hi - trim) continue;
    ft.push_back(ti);
    fl.push_back(std::log(rep.e[candidates[k]]));
  }
  if (ft.size() < 3) return rep;

  rep.rate = -fit_slope(ft, fl);
  rep.verdict = rep.rate >= 0.8 * rep.bound ? "pass" : "fail";
  return rep;
}

std::string SyncReport::to_json() const {
  nlohmann::json j;
  j["rate"] = rate;
  j["bound"] = bound;
  j["verdict"] = verdict;
  j["window"] = {window_lo, window_hi};
  return j.dump(2) + "\n";
}

}  // namespace sfd
