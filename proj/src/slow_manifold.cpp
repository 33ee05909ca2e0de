#include "sfd/slow_manifold.hpp"

#include <cmath>
#include <cstdio>

#include <Eigen/LU>

namespace sfd {

namespace {

const Real kRcondFloor = 1e-13;
const Real kChartFdStep = 1e-5;

Eigen::PartialPivLU<MatX> checked_jacobian_lu(const MatX& J) {
  Eigen::PartialPivLU<MatX> lu(J);
  Real rc = lu.rcond();
  if (!(rc > kRcondFloor)) throw SingularJacobian(rc);
  return lu;
}

EvalPoint frozen(const CriticalPoint& cp, int f) {
  return {cp.base.x, cp.base.v, cp.eta, VecX::Zero(f), cp.base.t};
}

VecX slow_forcing_limit(const MechanicalSystem& sys, const CriticalPoint& cp) {
  ForcingEval fe(sys);
  return fe.value(PComp::p1, frozen(cp, sys.f), 0.0);
}

/// Central difference of a vector-valued function of one coordinate, with
/// one Richardson extrapolation.
template <typename Fn>
VecX extrapolated_derivative(const Fn& eval_at, Real center) {
  Real h = kChartFdStep * (1.0 + std::abs(center));
  VecX d_h = (eval_at(center + h) - eval_at(center - h)) / (2.0 * h);
  VecX d_h2 = (eval_at(center + h / 2) - eval_at(center - h / 2)) / h;
  return (4.0 * d_h2 - d_h) / 3.0;
}

VecX g1_near(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t,
             const VecX& guess) {
  return eval_G1(sys, solve_critical_point(sys, SlowBase{x, v, t}, guess));
}

}  // namespace

ImplicitJacobians implicit_jacobians(const MechanicalSystem& sys, const CriticalPoint& cp) {
  ForcingEval fe(sys);
  EvalPoint pt = frozen(cp, sys.f);
  auto lu = checked_jacobian_lu(fe.jacobian(PComp::p2, PArg::eta, pt, 0.0));
  ImplicitJacobians ij;
  ij.d_x = -lu.solve(fe.jacobian(PComp::p2, PArg::x, pt, 0.0));
  ij.d_v = -lu.solve(fe.jacobian(PComp::p2, PArg::v, pt, 0.0));
  ij.d_t = -lu.solve(fe.time_derivative(PComp::p2, pt, 0.0));
  return ij;
}

VecX eval_H0(const MechanicalSystem& sys, const CriticalPoint& cp) {
  ImplicitJacobians ij = implicit_jacobians(sys, cp);
  return ij.d_x * cp.base.v + ij.d_v * slow_forcing_limit(sys, cp) + ij.d_t;
}

VecX eval_H0(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t) {
  return eval_H0(sys, solve_critical_point(sys, SlowBase{x, v, t}, VecX::Zero(sys.f)));
}

VecX eval_G1(const MechanicalSystem& sys, const CriticalPoint& cp) {
  ForcingEval fe(sys);
  EvalPoint pt = frozen(cp, sys.f);
  auto lu = checked_jacobian_lu(fe.jacobian(PComp::p2, PArg::eta, pt, 0.0));
  VecX rhs = fe.jacobian(PComp::p2, PArg::w, pt, 0.0) * eval_H0(sys, cp) +
             fe.eps_derivative(PComp::p2, pt);
  return -lu.solve(rhs);
}

VecX eval_G1(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t) {
  return eval_G1(sys, solve_critical_point(sys, SlowBase{x, v, t}, VecX::Zero(sys.f)));
}

VecX eval_H1(const MechanicalSystem& sys, const CriticalPoint& cp) {
  const VecX& x = cp.base.x;
  const VecX& v = cp.base.v;
  const Real t = cp.base.t;

  MatX d_x(sys.f, sys.s), d_v(sys.f, sys.s);
  for (int j = 0; j < sys.s; ++j) {
    d_x.col(j) = extrapolated_derivative(
        [&](Real c) {
          VecX xs = x;
          xs[j] = c;
          return g1_near(sys, xs, v, t, cp.eta);
        },
        x[j]);
    d_v.col(j) = extrapolated_derivative(
        [&](Real c) {
          VecX vs = v;
          vs[j] = c;
          return g1_near(sys, x, vs, t, cp.eta);
        },
        v[j]);
  }
  VecX d_t = extrapolated_derivative(
      [&](Real c) { return g1_near(sys, x, v, c, cp.eta); }, t);

  return d_x * v + d_v * slow_forcing_limit(sys, cp) + d_t;
}

VecX eval_H1(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t) {
  return eval_H1(sys, solve_critical_point(sys, SlowBase{x, v, t}, VecX::Zero(sys.f)));
}

SlowManifoldChart::SlowManifoldChart(const MechanicalSystem& sys, int order, GuessFn guess)
    : sys_(&sys), order_(order), eps_(sys.eps), guess_(std::move(guess)) {
  if (order_ != 0 && order_ != 1) throw Error("chart order must be 0 or 1");
}

std::string SlowManifoldChart::key(const VecX& x, const VecX& v, Real t) const {
  char buf[32];
  std::string k;
  k.reserve(std::size_t(x.size() + v.size() + 1) * 20);
  auto put = [&](Real val) {
    std::snprintf(buf, sizeof buf, "%.12e,", val);
    k += buf;
  };
  for (int i = 0; i < x.size(); ++i) put(x[i]);
  for (int i = 0; i < v.size(); ++i) put(v[i]);
  put(t);
  return k;
}

SlowManifoldChart::Entry& SlowManifoldChart::locked_entry(
    const std::string& k, const VecX& x, const VecX& v, Real t,
    std::unique_lock<std::mutex>& lock) const {
  auto it = memo_.find(k);
  if (it != memo_.end()) return it->second;

  VecX guess;
  if (guess_)
    guess = guess_(SlowBase{x, v, t});
  else if (warm_.size() == sys_->f)
    guess = warm_;
  else
    guess = VecX::Zero(sys_->f);

  lock.unlock();
  CriticalPoint cp = solve_critical_point(*sys_, SlowBase{x, v, t}, guess);
  lock.lock();
  warm_ = cp.eta;
  return memo_.try_emplace(k, Entry{cp.eta, {}, {}, {}}).first->second;
}

VecX SlowManifoldChart::term(const VecX& x, const VecX& v, Real t,
                             std::optional<VecX> Entry::*slot,
                             VecX (*compute)(const MechanicalSystem&, const CriticalPoint&)) const {
  const std::string k = key(x, v, t);
  std::unique_lock<std::mutex> lock(mu_);
  Entry& e = locked_entry(k, x, v, t, lock);
  if (e.*slot) return *(e.*slot);
  CriticalPoint cp;
  cp.base = SlowBase{x, v, t};
  cp.eta = e.eta;
  lock.unlock();
  VecX val = compute(*sys_, cp);
  lock.lock();
  e.*slot = val;
  return val;
}

VecX SlowManifoldChart::G0(const VecX& x, const VecX& v, Real t) const {
  const std::string k = key(x, v, t);
  std::unique_lock<std::mutex> lock(mu_);
  VecX eta = locked_entry(k, x, v, t, lock).eta;
  return eta;
}

VecX SlowManifoldChart::H0(const VecX& x, const VecX& v, Real t) const {
  return term(x, v, t, &Entry::h0,
              +[](const MechanicalSystem& s, const CriticalPoint& c) { return eval_H0(s, c); });
}

VecX SlowManifoldChart::G1(const VecX& x, const VecX& v, Real t) const {
  return term(x, v, t, &Entry::g1,
              +[](const MechanicalSystem& s, const CriticalPoint& c) { return eval_G1(s, c); });
}

VecX SlowManifoldChart::H1(const VecX& x, const VecX& v, Real t) const {
  return term(x, v, t, &Entry::h1,
              +[](const MechanicalSystem& s, const CriticalPoint& c) { return eval_H1(s, c); });
}

VecX SlowManifoldChart::lift(const VecX& x, const VecX& v, Real t) const {
  const int s = sys_->s, f = sys_->f;
  VecX y = eps_ * G0(x, v, t);
  VecX w = eps_ * H0(x, v, t);
  if (order_ >= 1) {
    y += eps_ * eps_ * G1(x, v, t);
    w += eps_ * eps_ * H1(x, v, t);
  }
  VecX state(2 * (s + f));
  state.segment(0, s) = x;
  state.segment(s, s) = v;
  state.segment(2 * s, f) = y;
  state.segment(2 * s + f, f) = w;
  return state;
}

Real manifold_distance(const SlowManifoldChart& chart, const VecX& full_state, Real t) {
  const MechanicalSystem& sys = chart.system();
  if (full_state.size() != 2 * (sys.s + sys.f))
    throw Error("full state has wrong dimension for this system");
  VecX on = chart.lift(full_state.segment(0, sys.s), full_state.segment(sys.s, sys.s), t);
  return (full_state.tail(2 * sys.f) - on.tail(2 * sys.f)).norm();
}

}  // namespace sfd
