#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <string>

#include "sfd/fold_boundary.hpp"
#include "sfd/presets.hpp"
#include "sfd/util.hpp"

using namespace sfd;

namespace {

SlowPath x_ray(Real x_end, Real t0, Real t_slope = 0.0) {
  return [=](Real s) {
    SlowBase b;
    b.x = VecX::Constant(1, x_end * s);
    b.v = VecX::Zero(1);
    b.t = t0 + t_slope * s;
    return b;
  };
}

SlowBase base_at(Real x, Real t) {
  SlowBase b;
  b.x = VecX::Constant(1, x);
  b.v = VecX::Zero(1);
  b.t = t;
  return b;
}

/// One slow coordinate driving two fast ones; only the first fast equation
/// is quadratic, so the graph folds in that coordinate alone.
MechanicalSystem two_fast_fold() {
  MechanicalSystem sys;
  sys.name = "two-fast-fold";
  sys.n = 3;
  sys.s = 1;
  sys.f = 2;
  sys.eps = 1e-2;
  sys.limit_p1 = [](const VecX&, const VecX&, const VecX&, const VecX&, Real) {
    return VecX::Zero(1).eval();
  };
  sys.limit_p2 = [](const VecX& x, const VecX&, const VecX& eta, const VecX& w, Real t) {
    VecX out(2);
    out[0] = -(4.0 * eta[0] + x[0] * x[0] + 4.0 * eta[0] * eta[0] - std::sin(t)) - w[0];
    out[1] = -3.0 * eta[1] - w[1];
    return out;
  };
  return sys;
}

/// Fast stiffness linear in the slow coordinate: K2 + x Pi with
/// K2 = diag(4,3), Pi = diag(2,1).  The balance position blows up where
/// -x hits an eigenvalue of Pi^-1 K2 instead of folding back.
MechanicalSystem bilinear_coupling() {
  MechanicalSystem sys;
  sys.name = "bilinear-coupling";
  sys.n = 3;
  sys.s = 1;
  sys.f = 2;
  sys.eps = 1e-2;
  sys.limit_p1 = [](const VecX&, const VecX&, const VecX&, const VecX&, Real) {
    return VecX::Zero(1).eval();
  };
  sys.limit_p2 = [](const VecX& x, const VecX&, const VecX& eta, const VecX& w, Real) {
    VecX out(2);
    out[0] = -((4.0 + 2.0 * x[0]) * eta[0] - 1.0) - w[0];
    out[1] = -((3.0 + x[0]) * eta[1] - 1.0) - w[1];
    return out;
  };
  return sys;
}

}  // namespace

TEST_CASE("fold located where the balance graph stops being solvable") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo, "", {});
  FoldPoint fp = locate_fold(sys, x_ray(2.0, 0.0), VecX::Zero(1));
  CHECK(fp.point.x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fp.eta[0] == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(std::abs(fp.det) <= 1e-8);
  CHECK(fp.rank == sys.f - 1);
  CHECK(std::abs(fp.nondegeneracy) == doctest::Approx(8.0).epsilon(1e-4));
  CHECK(fp.plus_branch == "stable");
  CHECK(fp.minus_branch == "unstable");

  const auto [up, dn] = classify_branches(sys, fp);
  CHECK(up.eta[0] > fp.eta[0]);
  CHECK(dn.eta[0] < fp.eta[0]);
  CHECK(up.stable);
  CHECK(!dn.stable);

  const std::string js = fp.to_json();
  for (const char* key : {"\"point\"", "\"eta\"", "\"det\"", "\"rank\"", "\"nondegeneracy\"",
                          "\"plus\"", "\"minus\""})
    CHECK(js.find(key) != std::string::npos);
}

TEST_CASE("fold along the time axis sits on the closed-form boundary") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo, "", {});
  const Real pi = std::numbers::pi;
  SlowPath ray = [pi](Real s) { return base_at(1.2, 0.5 * pi * (1.0 - s)); };
  FoldPoint fp = locate_fold(sys, ray, VecX::Zero(1));
  CHECK(std::sin(fp.point.t) == doctest::Approx(0.44).epsilon(1e-9));
  CHECK(fp.eta[0] == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("a globally linear fast block never folds") {
  MechanicalSystem sys = load_preset(PresetId::linear_coupled, "", {});
  for (Real x : {-0.4, 0.0, 0.3})
    for (Real t : {0.0, 0.7, 2.0}) {
      CriticalPoint cp = solve_critical_point(sys, base_at(x, t), VecX::Zero(1));
      CHECK(fold_indicator(sys, cp) == doctest::Approx(-1.0).epsilon(1e-9));
    }
  CHECK_THROWS_AS(locate_fold(sys, x_ray(2.0, 0.0), VecX::Zero(1)), NoSignChange);
}

TEST_CASE("located boundary matches the closed form along random rays") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo, "", {});
  Rng rng(2024);
  for (int k = 0; k < 20; ++k) {
    const Real t0 = rng.uniform(0.0, std::numbers::pi);
    const Real slope = rng.uniform(-0.5, 0.5);
    FoldPoint fp = locate_fold(sys, x_ray(2.0, t0, slope), VecX::Zero(1));
    CHECK(std::abs(fp.point.x[0] * fp.point.x[0] - 1.0 - std::sin(fp.point.t)) <= 1e-6);
  }
}

TEST_CASE("classification does not depend on the approach direction") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo, "", {});
  FoldPoint fwd = locate_fold(sys, x_ray(2.0, 0.0), VecX::Zero(1));
  FoldPoint bwd = locate_fold(sys, x_ray(-2.0, 0.0), VecX::Zero(1));
  CHECK(bwd.point.x[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(bwd.plus_branch == fwd.plus_branch);
  CHECK(bwd.minus_branch == fwd.minus_branch);
}

TEST_CASE("multidimensional fast block: single direction degenerates") {
  MechanicalSystem sys = two_fast_fold();
  FoldPoint fp = locate_fold(sys, x_ray(2.0, 0.0), VecX::Zero(2));
  CHECK(fp.point.x[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fp.eta[0] == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(std::abs(fp.eta[1]) <= 1e-9);
  CHECK(fp.rank == sys.f - 1);
  CHECK(fp.kernel[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(fp.kernel[1]) <= 1e-6);
  CHECK(std::abs(fp.nondegeneracy) == doctest::Approx(24.0).epsilon(1e-4));
  CHECK(fp.plus_branch == "stable");
  CHECK(fp.minus_branch == "unstable");

  const auto [A, B] = tangent_matrices(sys, fp.point, fp.eta);
  Eigen::JacobiSVD<MatX> svd(B);
  const VecX sigma = svd.singularValues();
  CHECK(sigma[0] >= 1e3 * sigma[1]);
}

TEST_CASE("fast stiffness linear in the slow coordinate: eigenvalue poles") {
  MechanicalSystem sys = bilinear_coupling();
  auto ind_at = [&](Real x, const VecX& guess) {
    return fold_indicator(sys, solve_critical_point(sys, base_at(x, 0.0), guess));
  };
  VecX g(2);
  g << 0.25, 1.0 / 3.0;
  CHECK(ind_at(0.0, g) == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(ind_at(-1.9, VecX::Constant(2, 3.0)) == doctest::Approx(0.2).epsilon(1e-6));
  CHECK(ind_at(-2.1, VecX::Constant(2, -3.0)) == doctest::Approx(-0.2).epsilon(1e-6));

  SlowPath ray = [](Real s) { return base_at(-4.0 * s, 0.0); };
  CHECK_THROWS_AS(locate_fold(sys, ray, g), DegenerateFold);
}

TEST_CASE("indicator keeps its sign along a continued branch") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo, "", {});
  VecX guess = VecX::Zero(1);
  Real prev = 0.0;
  for (int k = 0; k <= 200; ++k) {
    CriticalPoint cp = solve_critical_point(sys, base_at(0.98 * k / 200.0, 0.0), guess);
    const Real ind = fold_indicator(sys, cp);
    if (k > 0) CHECK(std::signbit(ind) == std::signbit(prev));
    prev = ind;
    guess = cp.eta;
  }
  CriticalPoint origin = solve_critical_point(sys, base_at(0.0, 0.0), VecX::Zero(1));
  CHECK(fold_indicator(sys, origin) == doctest::Approx(-4.0).epsilon(1e-9));
}

TEST_CASE("fold search validates its path") {
  MechanicalSystem sys = load_preset(PresetId::fold_demo, "", {});
  CHECK_THROWS_AS(locate_fold(sys, SlowPath{}, VecX::Zero(1)), Error);
  SlowPath outside = [](Real s) { return base_at(2.0 + s, 0.0); };
  CHECK_THROWS_AS(locate_fold(sys, outside, VecX::Zero(1)), Error);
}
