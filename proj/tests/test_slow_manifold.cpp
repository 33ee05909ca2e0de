#include "sfd/slow_manifold.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "sfd/presets.hpp"

using namespace sfd;

namespace {

VecX one(Real a) {
  VecX v(1);
  v << a;
  return v;
}

CriticalPoint solved(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t,
                     Real guess = 0.0) {
  return solve_critical_point(sys, SlowBase{x, v, t}, VecX::Constant(sys.f, guess));
}

/// Symmetric probe along the leading-order flow direction (xdot, P1 at the
/// balance point, 1), used to compare H-terms against plain differencing.
template <typename Fn>
VecX along_flow_difference(const MechanicalSystem& sys, const VecX& x, const VecX& v, Real t,
                           Real delta, const Fn& field) {
  CriticalPoint cp = solved(sys, x, v, t);
  VecX p1 = sys.limit_p1(x, v, cp.eta, VecX::Zero(sys.f), t);
  VecX fwd = field(x + delta * v, v + delta * p1, t + delta);
  VecX bwd = field(x - delta * v, v - delta * p1, t - delta);
  return (fwd - bwd) / (2.0 * delta);
}

VecX family_eta(ForcingEval& fe, const VecX& x, const VecX& v, Real t, const VecX& h0, Real eps,
                VecX eta) {
  const MechanicalSystem& sys = fe.system();
  for (int it = 0; it < 30; ++it) {
    EvalPoint pt{x, v, eta, eps * h0, t};
    VecX r = fe.value(PComp::p2, pt, eps);
    if (r.norm() <= 1e-13 * (1.0 + eta.norm())) break;
    MatX J = fe.jacobian(PComp::p2, PArg::eta, pt, eps);
    eta -= J.partialPivLu().solve(r);
  }
  (void)sys;
  return eta;
}

}  // namespace

TEST_CASE("implicit jacobians match the hand-solved linear system") {
  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  const auto& p = sys.params;
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    VecX x = one(rng.uniform(-2.0, 2.0)), v = one(rng.uniform(-2.0, 2.0));
    Real t = rng.uniform(0.0, 6.0);
    ImplicitJacobians ij = implicit_jacobians(sys, solved(sys, x, v, t));
    CHECK(ij.d_x(0, 0) == doctest::Approx(-2.0 * p.at("a2") * x[0] / p.at("k2")).epsilon(1e-7));
    CHECK(std::abs(ij.d_v(0, 0)) <= 1e-9);
    CHECK(ij.d_t[0] ==
          doctest::Approx(p.at("f20") * p.at("om2") * std::cos(p.at("om2") * t) / p.at("k2"))
              .epsilon(1e-7));
  }

  MechanicalSystem fold = load_preset(PresetId::fold_demo);
  ImplicitJacobians at_origin = implicit_jacobians(fold, solved(fold, one(0.0), one(0.0), 0.0));
  CHECK(std::abs(at_origin.d_x(0, 0)) <= 1e-9);

  MechanicalSystem tet = load_preset(PresetId::tet_demo);
  CriticalPoint degenerate;
  degenerate.base = SlowBase{one(0.1), one(0.0), 0.0};
  degenerate.eta = VecX::Zero(1);
  CHECK_THROWS_AS((void)implicit_jacobians(tet, degenerate), SingularJacobian);
}

TEST_CASE("implicit derivatives agree with differenced balance solutions") {
  for (PresetId id : {PresetId::linear_coupled, PresetId::fold_demo}) {
    MechanicalSystem sys = load_preset(id);
    Rng rng(23);
    for (int i = 0; i < 25; ++i) {
      DomainSample smp = random_sample(sys.domain, rng);
      CriticalPoint cp = solved(sys, smp.x, smp.v, smp.t);
      ImplicitJacobians ij = implicit_jacobians(sys, cp);

      auto eta_at = [&](const VecX& x, const VecX& v, Real t) {
        return solve_critical_point(sys, SlowBase{x, v, t}, cp.eta).eta;
      };
      Real hx = 1e-5 * (1.0 + std::abs(smp.x[0]));
      VecX fd_x = (eta_at(one(smp.x[0] + hx), smp.v, smp.t) -
                   eta_at(one(smp.x[0] - hx), smp.v, smp.t)) /
                  (2.0 * hx);
      Real ht = 1e-5 * (1.0 + std::abs(smp.t));
      VecX fd_t = (eta_at(smp.x, smp.v, smp.t + ht) - eta_at(smp.x, smp.v, smp.t - ht)) /
                  (2.0 * ht);
      CHECK(std::abs(fd_x[0] - ij.d_x(0, 0)) <= 1e-6 * (1.0 + std::abs(ij.d_x(0, 0))));
      CHECK(std::abs(fd_t[0] - ij.d_t[0]) <= 1e-6 * (1.0 + std::abs(ij.d_t[0])));
    }
  }
}

TEST_CASE("the leading fast velocity matches the linear closed form") {
  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  const auto& p = sys.params;
  Rng rng(31);
  for (int i = 0; i < 20; ++i) {
    VecX x = one(rng.uniform(-2.0, 2.0)), v = one(rng.uniform(-2.0, 2.0));
    Real t = rng.uniform(0.0, 6.0);
    Real want = (p.at("f20") * p.at("om2") * std::cos(p.at("om2") * t) -
                 2.0 * p.at("a2") * x[0] * v[0]) /
                p.at("k2");
    CHECK(eval_H0(sys, x, v, t)[0] == doctest::Approx(want).epsilon(1e-7));
  }
}

TEST_CASE("the leading fast velocity is the along-flow derivative") {
  for (PresetId id : {PresetId::linear_coupled, PresetId::fold_demo}) {
    MechanicalSystem sys = load_preset(id);
    VecX x = one(0.2), v = one(-0.3);
    Real t = 0.7;
    VecX h0 = eval_H0(sys, x, v, t);

    auto g0_field = [&](const VecX& xs, const VecX& vs, Real ts) {
      return solve_critical_point(sys, SlowBase{xs, vs, ts}, VecX::Zero(sys.f)).eta;
    };
    std::vector<Real> errs;
    for (Real delta : {4e-2, 2e-2, 1e-2})
      errs.push_back((along_flow_difference(sys, x, v, t, delta, g0_field) - h0).norm());
    for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
      Real ratio = errs[k] / errs[k + 1];
      CHECK(ratio >= 3.0);
      CHECK(ratio <= 5.5);
    }
  }
}

TEST_CASE("the first-order correction matches the hand-substituted forms") {
  MechanicalSystem lin = load_preset(PresetId::linear_coupled);
  const auto& p = lin.params;
  Rng rng(37);
  for (int i = 0; i < 20; ++i) {
    VecX x = one(rng.uniform(-2.0, 2.0)), v = one(rng.uniform(-2.0, 2.0));
    Real t = rng.uniform(0.0, 6.0);
    CriticalPoint cp = solved(lin, x, v, t);
    Real h0 = eval_H0(lin, cp)[0];
    Real want = -(p.at("c2") * h0 + p.at("b2") * x[0] * cp.eta[0]) / p.at("k2");
    CHECK(eval_G1(lin, cp)[0] == doctest::Approx(want).epsilon(1e-6));
  }

  MechanicalSystem fold = load_preset(PresetId::fold_demo);
  const auto& q = fold.params;
  for (int i = 0; i < 20; ++i) {
    VecX x = one(rng.uniform(-0.5, 0.5)), v = one(rng.uniform(-1.0, 1.0));
    Real t = rng.uniform(0.0, std::numbers::pi);
    CriticalPoint cp = solved(fold, x, v, t);
    Real h0 = eval_H0(fold, cp)[0];
    Real want = -q.at("c2") * h0 / (q.at("k2") + 2.0 * q.at("s2eta") * cp.eta[0]);
    CHECK(eval_G1(fold, cp)[0] == doctest::Approx(want).epsilon(1e-6));
  }
  CHECK(eval_G1(fold, one(0.0), one(0.0), 0.0)[0] == doctest::Approx(-1.0 / 16.0).epsilon(1e-6));
}

TEST_CASE("the first-order correction differentiates the balance family") {
  for (PresetId id : {PresetId::linear_coupled, PresetId::fold_demo}) {
    MechanicalSystem sys = load_preset(id);
    ForcingEval fe(sys);
    Rng rng(41);
    for (int i = 0; i < 5; ++i) {
      DomainSample smp = random_sample(sys.domain, rng);
      CriticalPoint cp = solved(sys, smp.x, smp.v, smp.t);
      VecX h0 = eval_H0(sys, cp);
      const Real h = 1e-4;
      VecX at_zero = family_eta(fe, smp.x, smp.v, smp.t, h0, 0.0, cp.eta);
      VecX at_h = family_eta(fe, smp.x, smp.v, smp.t, h0, h, cp.eta);
      VecX at_2h = family_eta(fe, smp.x, smp.v, smp.t, h0, 2.0 * h, cp.eta);
      VecX fd = (-3.0 * at_zero + 4.0 * at_h - at_2h) / (2.0 * h);
      VecX g1 = eval_G1(sys, cp);
      CHECK((fd - g1).norm() <= 1e-6 * (1.0 + g1.norm()));
    }
  }
}

TEST_CASE("a coupling-free fast block has no first-order correction") {
  MechanicalSystem sys =
      load_preset(PresetId::linear_coupled, "", {{"c2", 0.0}, {"b2", 0.0}});
  VecX x = one(0.7), v = one(-0.4);
  CHECK(eval_G1(sys, x, v, 1.3).norm() <= 1e-9);
  CHECK(eval_H1(sys, x, v, 1.3).norm() <= 1e-8);
}

TEST_CASE("the first-order velocity is the along-flow derivative of the correction") {
  for (PresetId id : {PresetId::linear_coupled, PresetId::fold_demo}) {
    MechanicalSystem sys = load_preset(id);
    VecX x = one(0.3), v = one(0.4);
    Real t = 0.9;
    VecX h1 = eval_H1(sys, x, v, t);

    auto g1_field = [&](const VecX& xs, const VecX& vs, Real ts) {
      return eval_G1(sys, xs, vs, ts);
    };
    std::vector<Real> errs;
    for (Real delta : {4e-2, 2e-2, 1e-2})
      errs.push_back((along_flow_difference(sys, x, v, t, delta, g1_field) - h1).norm());
    for (std::size_t k = 0; k + 1 < errs.size(); ++k) {
      Real ratio = errs[k] / errs[k + 1];
      CHECK(ratio >= 3.0);
      CHECK(ratio <= 5.5);
    }
  }
}

TEST_CASE("chart queries are memoized with pure semantics") {
  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  SlowManifoldChart chart(sys, 1);

  VecX x = one(0.5), v = one(-0.2);
  Real t = 1.1;
  CriticalPoint cp = solved(sys, x, v, t);
  CHECK(chart.G0(x, v, t)[0] == doctest::Approx(cp.eta[0]).epsilon(1e-12));
  CHECK(chart.H0(x, v, t)[0] == doctest::Approx(eval_H0(sys, cp)[0]).epsilon(1e-12));
  CHECK(chart.G1(x, v, t)[0] == doctest::Approx(eval_G1(sys, cp)[0]).epsilon(1e-12));
  CHECK(chart.H1(x, v, t)[0] == doctest::Approx(eval_H1(sys, cp)[0]).epsilon(1e-12));

  VecX first = chart.H1(x, v, t);
  CHECK(chart.H1(x, v, t) == first);

  std::vector<SlowBase> grid;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      grid.push_back(SlowBase{one(-1.0 + 0.5 * i), one(-1.0 + 0.5 * j), 0.3 * i + 0.1 * j});

  std::vector<VecX> serial;
  for (const auto& b : grid) serial.push_back(chart.G1(b.x, b.v, b.t));

  SlowManifoldChart fresh(sys, 1);
  std::vector<VecX> threaded(grid.size());
  std::vector<std::thread> pool;
  for (int w = 0; w < 4; ++w)
    pool.emplace_back([&, w]() {
      for (std::size_t i = std::size_t(w); i < grid.size(); i += 4)
        threaded[i] = fresh.G1(grid[i].x, grid[i].v, grid[i].t);
    });
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK((threaded[i] - serial[i]).norm() <= 1e-9 * (1.0 + serial[i].norm()));
}

TEST_CASE("a branch-selecting guess pins chart queries to that branch") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo);
  SlowManifoldChart plus(sys, 0);
  SlowManifoldChart minus(sys, 0, [](const SlowBase&) { return one(-1.0); });
  Rng rng(43);
  for (int i = 0; i < 10; ++i) {
    Real x = rng.uniform(-0.5, 0.5), t = rng.uniform(0.0, std::numbers::pi);
    Real disc = std::sqrt(1.0 - (x * x - std::sin(t)));
    CHECK(plus.G0(one(x), one(0.0), t)[0] ==
          doctest::Approx((-1.0 + disc) / 2.0).epsilon(1e-8));
    CHECK(minus.G0(one(x), one(0.0), t)[0] ==
          doctest::Approx((-1.0 - disc) / 2.0).epsilon(1e-8));
  }
}

TEST_CASE("lifted states sit on the chart and perturbations are measured") {
  for (PresetId id : {PresetId::linear_coupled, PresetId::fold_demo}) {
    MechanicalSystem sys = load_preset(id);
    for (int order : {0, 1}) {
      SlowManifoldChart chart(sys, order);
      VecX x = one(0.25), v = one(0.1);
      Real t = 0.6;
      VecX z = chart.lift(x, v, t);
      CHECK(manifold_distance(chart, z, t) <= 1e-13 * (1.0 + z.norm()));

      VecX zp = z;
      zp[2] += 3e-3;
      zp[3] -= 2e-3;
      Real want = std::sqrt(3e-3 * 3e-3 + 2e-3 * 2e-3);
      CHECK(manifold_distance(chart, zp, t) == doctest::Approx(want).epsilon(1e-12));
    }
  }

  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  SlowManifoldChart chart(sys, 0);
  CHECK_THROWS_AS((void)manifold_distance(chart, VecX::Zero(3), 0.0), Error);
  CHECK_THROWS_AS(SlowManifoldChart(sys, 2), Error);
}

namespace {

/// Supremum of the chart distance along a full trajectory launched from the
/// chart, taken after the entry layer has relaxed onto the manifold: the
/// off-manifold approach carries a velocity transient one order below the
/// chart error, so the pre-relaxation window would measure the approach,
/// not the chart.
Real sup_off_chart_distance(PresetId id, Real eps, int order) {
  MechanicalSystem sys = load_preset(id, "", {{"eps", eps}});
  SlowManifoldChart chart(sys, order);
  VecX z0 = chart.lift(one(0.3), one(-0.2), 0.0);
  ode::IntegrateOptions opts;
  opts.rtol = 1e-12;
  opts.atol = 1e-14;
  ode::Trajectory traj = ode::integrate(full_rhs(sys), z0, 0.0, 1.0, opts);
  Real sup = 0.0;
  for (std::size_t i = 0; i < traj.t.size(); ++i)
    if (traj.t[i] >= 0.25)
      sup = std::max(sup, manifold_distance(chart, traj.y[i], traj.t[i]));
  return sup;
}

}  // namespace

TEST_CASE("full trajectories stay within the expansion order of the chart") {
  std::vector<Real> eps{1e-2, 5e-3, 2.5e-3};

  for (PresetId id : {PresetId::linear_coupled, PresetId::fold_demo}) {
    std::vector<Real> sup1, sup0;
    for (Real e : eps) {
      sup1.push_back(sup_off_chart_distance(id, e, 1));
      sup0.push_back(sup_off_chart_distance(id, e, 0));
    }
    for (std::size_t k = 0; k + 1 < eps.size(); ++k) {
      Real r1 = sup1[k] / sup1[k + 1];
      CHECK(r1 >= 5.0);
      CHECK(r1 <= 11.0);
      Real r0 = sup0[k] / sup0[k + 1];
      CHECK(r0 >= 2.8);
      CHECK(r0 <= 5.5);
    }
  }
}
