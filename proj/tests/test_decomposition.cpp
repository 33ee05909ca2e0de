#include "sfd/decomposition.hpp"

#include <doctest.h>

#include <Eigen/LU>
#include <cmath>

#include "sfd/presets.hpp"

using namespace sfd;

namespace {

/// A constant-coefficient system wrapping one random mass matrix and force
/// vector, for comparing the decoupled accelerations against a direct solve.
MechanicalSystem constant_system(const MatX& M, const VecX& F, int s) {
  MechanicalSystem sys;
  sys.name = "constant";
  sys.n = int(M.rows());
  sys.s = s;
  sys.f = sys.n - s;
  sys.eps = 1.0;
  sys.mass = [M](const VecX&, Real) { return M; };
  sys.force = [F](const VecX&, const VecX&, Real) { return F; };
  sys.scaled_mass = [M](const VecX&, const VecX&, Real, Real) { return M; };
  sys.scaled_force = [F](const VecX&, const VecX&, const VecX&, const VecX&, Real, Real) {
    return F;
  };
  sys.domain = DomainBox::standard(sys.s, sys.f, 0.0, 1.0);
  return sys;
}

EvalPoint origin_point(int s, int f) {
  return {VecX::Zero(s), VecX::Zero(s), VecX::Zero(f), VecX::Zero(f), 0.0};
}

}  // namespace

TEST_CASE("decoupled accelerations match direct block solves") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 2 + int(rng.next_u64() % 7);
    int s = 1 + int(rng.next_u64() % std::uint64_t(n - 1));
    MatX A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = rng.uniform(-1.0, 1.0);
    MatX M = A * A.transpose() + Real(n) * MatX::Identity(n, n);
    VecX F(n);
    for (int i = 0; i < n; ++i) F[i] = rng.uniform(-2.0, 2.0);

    MechanicalSystem sys = constant_system(M, F, s);
    DecoupledForm d = inertial_decouple(sys, origin_point(s, n - s), 1.0);

    VecX direct = M.partialPivLu().solve(F);
    VecX slow = d.M1.partialPivLu().solve(d.Q1);
    VecX fast = d.M2.partialPivLu().solve(d.Q2);
    Real scale = std::max(Real(1), direct.lpNorm<Eigen::Infinity>());
    CHECK((slow - direct.head(s)).lpNorm<Eigen::Infinity>() / scale <= 1e-10);
    CHECK((fast - direct.tail(n - s)).lpNorm<Eigen::Infinity>() / scale <= 1e-10);
  }
}

TEST_CASE("block-diagonal masses pass through the elimination unchanged") {
  MatX M = MatX::Zero(4, 4);
  M.topLeftCorner(2, 2) << 2.0, 0.3, 0.3, 1.5;
  M.bottomRightCorner(2, 2) << 0.7, -0.1, -0.1, 0.9;
  VecX F(4);
  F << 1.0, -2.0, 0.5, 0.25;

  MechanicalSystem sys = constant_system(M, F, 2);
  DecoupledForm d = inertial_decouple(sys, origin_point(2, 2), 1.0);
  CHECK((d.M1 - M.topLeftCorner(2, 2)).norm() == 0.0);
  CHECK((d.M2 - M.bottomRightCorner(2, 2)).norm() == 0.0);
  CHECK((d.Q1 - F.head(2)).norm() == 0.0);
  CHECK((d.Q2 - F.tail(2)).norm() == 0.0);
}

TEST_CASE("a singular diagonal block is reported by name") {
  MatX M = MatX::Zero(2, 2);
  M(0, 0) = 1.0;
  MechanicalSystem sys = constant_system(M, VecX::Ones(2), 1);
  CHECK_THROWS_AS((void)inertial_decouple(sys, origin_point(1, 1), 1.0), SingularBlock);
  try {
    (void)inertial_decouple(sys, origin_point(1, 1), 1.0);
  } catch (const SingularBlock& e) {
    CHECK(e.block == "M22");
  }
}

TEST_CASE("the pendulum fast inertia reduces to the published scalar") {
  MechanicalSystem sys = load_preset(PresetId::pendulum3, "soft-soft-stiff");
  Real beta = sys.params.at("m") / sys.params.at("M");

  EvalPoint p = origin_point(2, 1);
  p.x << M_PI / 2.0, 0.1;
  DecoupledForm at_quarter = inertial_decouple(sys, p, sys.eps);
  CHECK(at_quarter.M2(0, 0) == doctest::Approx((1.0 + beta) / (1.0 + beta)).epsilon(1e-12));

  p.x << 0.0, 0.1;
  DecoupledForm upright = inertial_decouple(sys, p, sys.eps);
  CHECK(upright.M2(0, 0) == doctest::Approx(1.0 + beta).epsilon(1e-12));
}

TEST_CASE("the fast forcing scales linearly out of the block solve") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo);
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    EvalPoint p = to_eval_point(random_sample(sys.domain, rng));
    Real eps = 0.1;
    DecoupledForm d = inertial_decouple(sys, p, eps);
    NormalizedForcing nf = normalized_forcing(sys, p, eps);
    VecX direct = d.M2.partialPivLu().solve(d.Q2);
    CHECK((nf.P2 / eps - direct).lpNorm<Eigen::Infinity>() <=
          1e-12 * std::max(Real(1), direct.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("the zero-eps forcing follows the closed-form limit") {
  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  const auto& p = sys.params;
  Rng rng(11);
  for (int i = 0; i < 25; ++i) {
    EvalPoint pt = to_eval_point(random_sample(sys.domain, rng));
    NormalizedForcing nf = normalized_forcing(sys, pt, 0.0);
    Real want = (p.at("f20") * std::sin(p.at("om2") * pt.t) - p.at("c2") * pt.w[0] -
                 p.at("k2") * pt.eta[0] - p.at("a2") * pt.x[0] * pt.x[0]) /
                p.at("m2");
    CHECK(nf.P2[0] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("systems without closed-form limits fall back to ladder extrapolation") {
  const Real m2 = 2.0, k2 = 3.0, c2 = 0.4, a2 = 0.7, q2 = 0.5;
  MechanicalSystem sys;
  sys.name = "synthetic";
  sys.n = 2;
  sys.s = 1;
  sys.f = 1;
  sys.eps = 1e-2;
  sys.scaled_mass = [m2](const VecX&, const VecX&, Real, Real eps) {
    MatX m = MatX::Identity(2, 2);
    m(1, 1) = eps * m2;
    return m;
  };
  sys.scaled_force = [=](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real,
                         Real eps) {
    VecX out(2);
    out << -x[0] - 0.2 * v[0],
        -k2 * eta[0] - c2 * w[0] - a2 * x[0] * x[0] + eps * q2 * eta[0] * eta[0];
    return out;
  };
  sys.domain = DomainBox::standard(1, 1, 0.0, 1.0);

  EvalPoint pt = origin_point(1, 1);
  pt.x << 0.6;
  pt.eta << -0.3;
  pt.w << 0.2;
  NormalizedForcing nf = normalized_forcing(sys, pt, 0.0);
  Real want = (-k2 * pt.eta[0] - c2 * pt.w[0] - a2 * pt.x[0] * pt.x[0]) / m2;
  CHECK(nf.P2[0] == doctest::Approx(want).epsilon(1e-11));
  CHECK(nf.P1[0] == doctest::Approx(-pt.x[0] - 0.2 * pt.v[0]).epsilon(1e-11));
}

TEST_CASE("finite-difference jacobians recover the analytic coefficients") {
  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  const auto& p = sys.params;
  ForcingEval fe(sys);
  EvalPoint pt = origin_point(1, 1);
  pt.x << 0.5;
  pt.v << -0.2;
  pt.eta << 0.3;
  pt.w << 0.1;
  pt.t = 0.7;

  CHECK(fe.jacobian(PComp::p2, PArg::eta, pt, 0.0)(0, 0) ==
        doctest::Approx(-p.at("k2") / p.at("m2")).epsilon(1e-9));
  CHECK(fe.jacobian(PComp::p2, PArg::w, pt, 0.0)(0, 0) ==
        doctest::Approx(-p.at("c2") / p.at("m2")).epsilon(1e-9));
  CHECK(fe.jacobian(PComp::p2, PArg::x, pt, 0.0)(0, 0) ==
        doctest::Approx(-2.0 * p.at("a2") * pt.x[0] / p.at("m2")).epsilon(1e-8));
  CHECK(fe.jacobian(PComp::p1, PArg::eta, pt, 0.0)(0, 0) ==
        doctest::Approx(-p.at("a1") * pt.x[0] / p.at("m1")).epsilon(1e-9));
  CHECK(fe.jacobian(PComp::p1, PArg::v, pt, 0.0)(0, 0) ==
        doctest::Approx(-p.at("c1") / p.at("m1")).epsilon(1e-9));
  CHECK(fe.time_derivative(PComp::p2, pt, 0.0)[0] ==
        doctest::Approx(p.at("f20") * p.at("om2") * std::cos(p.at("om2") * pt.t) / p.at("m2"))
            .epsilon(1e-8));

  MechanicalSystem fold = load_preset(PresetId::fold_demo);
  ForcingEval ffe(fold);
  EvalPoint fp = origin_point(1, 1);
  fp.x << 0.2;
  fp.eta << -0.25;
  CHECK(ffe.jacobian(PComp::p2, PArg::eta, fp, 0.0)(0, 0) ==
        doctest::Approx(-(fold.params.at("k2") + 2.0 * fold.params.at("s2eta") * fp.eta[0]) /
                        fold.params.at("m2"))
            .epsilon(1e-9));
}

TEST_CASE("the eps-derivative at zero matches the mixed-coupling coefficient") {
  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  const auto& p = sys.params;
  ForcingEval fe(sys);
  EvalPoint pt = origin_point(1, 1);
  pt.x << 0.4;
  pt.eta << -0.6;
  pt.t = 0.3;

  VecX d2 = fe.eps_derivative(PComp::p2, pt);
  CHECK(d2[0] == doctest::Approx(-p.at("b2") * pt.x[0] * pt.eta[0] / p.at("m2")).epsilon(1e-8));
  VecX d1 = fe.eps_derivative(PComp::p1, pt);
  CHECK(d1[0] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("the extension check classifies the scaling families") {
  Rng rng(42);

  MechanicalSystem good = load_preset(PresetId::linear_coupled);
  A1Report ok = check_A1(good, sample_points(good, 10, rng));
  CHECK(ok.verdict == A1Report::Verdict::extends);

  MechanicalSystem tet = load_preset(PresetId::tet_demo);
  A1Report tet_report = check_A1(tet, sample_points(tet, 10, rng));
  CHECK(tet_report.verdict == A1Report::Verdict::extends);

  MechanicalSystem soft = load_preset(PresetId::linear_coupled, "", {{"eps_mass_power", 0.0}});
  A1Report soft_report = check_A1(soft, sample_points(soft, 10, rng));
  CHECK(soft_report.verdict == A1Report::Verdict::extends);
  for (const auto& smp : soft_report.samples)
    CHECK(smp.p2_limit.lpNorm<Eigen::Infinity>() <= 1e-9);

  MechanicalSystem bad = load_preset(PresetId::linear_coupled, "", {{"eps_mass_power", 2.0}});
  A1Report bad_report = check_A1(bad, sample_points(bad, 10, rng));
  CHECK(bad_report.verdict == A1Report::Verdict::diverges);
}

TEST_CASE("the extension report serializes with verdict and ratios") {
  Rng rng(1);
  MechanicalSystem sys = load_preset(PresetId::linear_coupled);
  A1Report rep = check_A1(sys, sample_points(sys, 2, rng));
  std::string json = rep.to_json();
  CHECK(json.find("\"verdict\": \"extends\"") != std::string::npos);
  CHECK(json.find("\"ratios\"") != std::string::npos);
  CHECK(json.find("\"p2_limit\"") != std::string::npos);

  CHECK_THROWS_AS((void)check_A1(sys, {}, {1e-1, 5e-2}), Error);
  CHECK_THROWS_AS((void)check_A1(sys, {}, {1e-1, 2e-1, 5e-2, 2e-2}), Error);
}
