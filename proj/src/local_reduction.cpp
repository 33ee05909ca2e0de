#include "sfd/local_reduction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <Eigen/LU>
#include <json.hpp>

#include "sfd/decomposition.hpp"
#include "sfd/errors.hpp"

namespace sfd {

namespace {

const Real kRcondFloor = 1e-13;
const Real kSecondDiffStep = 1e-4;
const Real kNewtonTol = 1e-12;
const Real kHypothesisTol = 1e-7;
const Real kResonanceTol = 1e-8;

Real expansion_eps(const MechanicalSystem& sys) { return sys.has_sfd_scaling ? 0.0 : sys.eps; }

Eigen::PartialPivLU<MatX> checked_lu(const MatX& J) {
  Eigen::PartialPivLU<MatX> lu(J);
  Real rc = lu.rcond();
  if (!(rc > kRcondFloor)) throw SingularJacobian(rc);
  return lu;
}

std::string magnitude(Real v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

void check_slow_velocity_independence(const MechanicalSystem& sys) {
  Rng rng(7);
  for (const EvalPoint& p : sample_points(sys, 8, rng)) {
    Real scale = 1.0 + inertial_decouple(sys, p, sys.eps).Q2.lpNorm<Eigen::Infinity>();
    for (int j = 0; j < sys.s; ++j) {
      Real h = 1e-5 * (1.0 + std::abs(p.v[j]));
      EvalPoint up = p, dn = p;
      up.v[j] += h;
      dn.v[j] -= h;
      Real dq = (inertial_decouple(sys, up, sys.eps).Q2 - inertial_decouple(sys, dn, sys.eps).Q2)
                    .lpNorm<Eigen::Infinity>() /
                (2.0 * h);
      if (dq > kHypothesisTol * scale)
        throw AssumptionViolated(
            "fast forcing independent of the slow velocities",
            "|dQ2/dxdot| = " + magnitude(dq) + " at a domain sample of '" + sys.name + "'");
    }
  }
}

EvalPoint origin_point(const MechanicalSystem& sys, const VecX& eta, Real t) {
  return {VecX::Zero(sys.s), VecX::Zero(sys.s), eta, VecX::Zero(sys.f), t};
}

VecX solve_gamma(const MechanicalSystem& sys, const ForcingEval& fe, Real t, Real e) {
  VecX eta = VecX::Zero(sys.f);
  VecX r = fe.value(PComp::p2, origin_point(sys, eta, t), e);
  for (int it = 0; it < 40; ++it) {
    if (r.lpNorm<Eigen::Infinity>() <= kNewtonTol * (1.0 + eta.lpNorm<Eigen::Infinity>()))
      return eta;
    MatX J = fe.jacobian(PComp::p2, PArg::eta, origin_point(sys, eta, t), e);
    VecX step = -checked_lu(J).solve(r);
    Real damp = 1.0;
    for (int half = 0; half < 25; ++half) {
      VecX trial = eta + damp * step;
      VecX rt = fe.value(PComp::p2, origin_point(sys, trial, t), e);
      if (rt.lpNorm<Eigen::Infinity>() < r.lpNorm<Eigen::Infinity>() || damp < 1e-7) {
        eta = trial;
        r = rt;
        break;
      }
      damp *= 0.5;
    }
  }
  throw AssumptionViolated("unforced origin lies on the critical manifold",
                           "Newton residual " + magnitude(r.lpNorm<Eigen::Infinity>()) +
                               " for '" + sys.name + "' after 40 iterations");
}

std::vector<std::string> hypothesis_warnings(const MechanicalSystem& sys,
                                             const LocalExpansion& ex) {
  ForcingEval fe(sys);
  const Real e = expansion_eps(sys);
  const EvalPoint q0 = origin_point(sys, ex.gamma, ex.t);
  const Real scale = 1.0 + fe.jacobian(PComp::p2, PArg::eta, q0, e).lpNorm<Eigen::Infinity>();
  std::vector<std::string> out;
  auto flag = [&](Real v, const char* msg) {
    if (v > kHypothesisTol * scale)
      out.push_back(std::string(msg) + " (magnitude " + magnitude(v) + ")");
  };
  flag(ex.gamma.size() ? ex.gamma.lpNorm<Eigen::Infinity>() : 0.0,
       "fast equilibrium sits away from zero at the origin");
  flag(fe.time_derivative(PComp::p2, q0, e).lpNorm<Eigen::Infinity>(),
       "fast forcing is time-dependent at the origin");
  flag(fe.jacobian(PComp::p2, PArg::x, q0, e).lpNorm<Eigen::Infinity>(),
       "fast forcing has a linear slow-position term at the origin");
  flag(fe.jacobian(PComp::p1, PArg::eta, q0, e).lpNorm<Eigen::Infinity>(),
       "slow forcing has a linear fast-position term at the origin");
  return out;
}

LocalModel build_local(const MechanicalSystem& sys, const LocalExpansion& ex, bool quadratic) {
  const int s = sys.s, f = sys.f;
  if (ex.gamma.size() != f || ex.phi.rows() != f || ex.phi.cols() != s ||
      int(ex.theta.size()) != f)
    throw Error("expansion shape does not match the system's block sizes");
  LocalModel m;
  m.validity_exponent = quadratic ? 0.25 : 1.0 / 3.0;
  m.warnings = hypothesis_warnings(sys, ex);
  auto fe = std::make_shared<ForcingEval>(sys);
  const Real e = expansion_eps(sys);
  std::vector<MatX> theta = ex.theta;
  m.accel = [fe, e, s, f, theta, quadratic](const VecX& x, const VecX& v, Real t) {
    if (x.size() != s || v.size() != s) throw Error("local model state must be (x, xdot)");
    VecX eta = VecX::Zero(f);
    if (quadratic)
      for (int i = 0; i < f; ++i) eta[i] = x.dot(theta[std::size_t(i)] * x);
    return fe->value(PComp::p1, {x, v, eta, VecX::Zero(f), t}, e);
  };
  return m;
}

}  // namespace

VecX LocalExpansion::eta(const VecX& x) const {
  VecX out = gamma + phi * x;
  for (std::size_t i = 0; i < theta.size(); ++i) out[Eigen::Index(i)] += x.dot(theta[i] * x);
  return out;
}

LocalExpansion local_expansion(const MechanicalSystem& sys, Real t) {
  check_slow_velocity_independence(sys);
  ForcingEval fe(sys);
  const Real e = expansion_eps(sys);
  const int s = sys.s, f = sys.f;

  LocalExpansion ex;
  ex.t = t;
  ex.gamma = solve_gamma(sys, fe, t, e);

  const EvalPoint q0 = origin_point(sys, ex.gamma, t);
  auto lu = checked_lu(fe.jacobian(PComp::p2, PArg::eta, q0, e));
  ex.phi = -lu.solve(fe.jacobian(PComp::p2, PArg::x, q0, e));

  auto p2_at = [&](const VecX& dx, const VecX& de) {
    EvalPoint q = q0;
    q.x += dx;
    q.eta += de;
    return fe.value(PComp::p2, q, e);
  };
  const VecX p0 = fe.value(PComp::p2, q0, e);
  VecX hx = VecX::Constant(s, kSecondDiffStep);
  VecX he(f);
  for (int m = 0; m < f; ++m) he[m] = kSecondDiffStep * (1.0 + std::abs(ex.gamma[m]));
  auto ex_unit = [](int n, int i, Real h) { return (h * VecX::Unit(n, i)).eval(); };
  const VecX zx = VecX::Zero(s), ze = VecX::Zero(f);

  std::vector<std::vector<VecX>> dxx(s, std::vector<VecX>(s));
  for (int j = 0; j < s; ++j) {
    for (int k = j; k < s; ++k) {
      if (j == k) {
        dxx[j][j] = (p2_at(ex_unit(s, j, hx[j]), ze) - 2.0 * p0 +
                     p2_at(ex_unit(s, j, -hx[j]), ze)) /
                    (hx[j] * hx[j]);
      } else {
        VecX aj = ex_unit(s, j, hx[j]), ak = ex_unit(s, k, hx[k]);
        dxx[j][k] = (p2_at(aj + ak, ze) - p2_at(aj - ak, ze) - p2_at(-aj + ak, ze) +
                     p2_at(-aj - ak, ze)) /
                    (4.0 * hx[j] * hx[k]);
        dxx[k][j] = dxx[j][k];
      }
    }
  }
  std::vector<std::vector<VecX>> dxe(s, std::vector<VecX>(f));
  for (int j = 0; j < s; ++j) {
    VecX aj = ex_unit(s, j, hx[j]);
    for (int m = 0; m < f; ++m) {
      VecX bm = ex_unit(f, m, he[m]);
      dxe[j][m] =
          (p2_at(aj, bm) - p2_at(aj, -bm) - p2_at(-aj, bm) + p2_at(-aj, -bm)) /
          (4.0 * hx[j] * he[m]);
    }
  }
  std::vector<std::vector<VecX>> dee(f, std::vector<VecX>(f));
  for (int m = 0; m < f; ++m) {
    for (int n = m; n < f; ++n) {
      if (m == n) {
        dee[m][m] = (p2_at(zx, ex_unit(f, m, he[m])) - 2.0 * p0 +
                     p2_at(zx, ex_unit(f, m, -he[m]))) /
                    (he[m] * he[m]);
      } else {
        VecX bm = ex_unit(f, m, he[m]), bn = ex_unit(f, n, he[n]);
        dee[m][n] = (p2_at(zx, bm + bn) - p2_at(zx, bm - bn) - p2_at(zx, -bm + bn) +
                     p2_at(zx, -bm - bn)) /
                    (4.0 * he[m] * he[n]);
        dee[n][m] = dee[m][n];
      }
    }
  }

  ex.theta.assign(std::size_t(f), MatX::Zero(s, s));
  for (int j = 0; j < s; ++j) {
    for (int k = 0; k < s; ++k) {
      VecX tjk = dxx[j][k];
      for (int m = 0; m < f; ++m) tjk += 2.0 * dxe[j][m] * ex.phi(m, k);
      for (int m = 0; m < f; ++m)
        for (int n = 0; n < f; ++n) tjk += dee[m][n] * ex.phi(m, j) * ex.phi(n, k);
      VecX u = -0.5 * lu.solve(tjk);
      for (int i = 0; i < f; ++i) ex.theta[std::size_t(i)](j, k) = u[i];
    }
  }
  for (MatX& th : ex.theta) th = (0.5 * (th + th.transpose())).eval();
  return ex;
}

ode::Rhs LocalModel::first_order() const {
  auto a = accel;
  return [a](Real t, const VecX& z) {
    if (z.size() == 0 || z.size() % 2 != 0) throw Error("local model state must be (x, xdot)");
    const int s = int(z.size()) / 2;
    VecX out(2 * s);
    out.head(s) = z.tail(s);
    out.tail(s) = a(z.head(s), z.tail(s), t);
    return out;
  };
}

LocalModel static_condensation_model(const MechanicalSystem& sys, const LocalExpansion& ex) {
  return build_local(sys, ex, false);
}

LocalModel modal_derivatives_model(const MechanicalSystem& sys, const LocalExpansion& ex) {
  return build_local(sys, ex, true);
}

OscillatorPairParams oscillator_pair_params(const MechanicalSystem& sys) {
  auto get = [&](const char* name) {
    auto it = sys.params.find(name);
    if (it == sys.params.end())
      throw Error("system '" + sys.name + "' has no parameter '" + std::string(name) + "'");
    return it->second;
  };
  OscillatorPairParams p;
  p.c1 = get("c1");
  p.c2 = get("c2");
  p.k1 = get("k1");
  p.k2 = get("k2");
  p.a = get("a");
  p.b = get("b");
  p.c = get("c");
  p.mu1 = get("mu1");
  return p;
}

Real SSMCubicModel::graph(Real x, Real v) const {
  return alpha * x * x + beta * x * v + gamma * v * v;
}

Real SSMCubicModel::accel(Real x, Real v) const {
  return -(params.c1 + damping_cubic * x * x) * v - params.k1 * x - velocity_sq * x * v * v -
         cubic * x * x * x;
}

ode::Rhs SSMCubicModel::first_order() const {
  SSMCubicModel m = *this;
  return [m](Real, const VecX& z) {
    if (z.size() != 2) throw Error("oscillator-pair state must be (x, xdot)");
    VecX out(2);
    out << z[1], m.accel(z[0], z[1]);
    return out;
  };
}

SSMCubicModel ssm_cubic(const OscillatorPairParams& p) {
  const Real c1 = p.c1, c2 = p.c2, k1 = p.k1, k2 = p.k2;
  SSMCubicModel m;
  m.params = p;
  m.D = (c1 * c1 - c1 * c2 + k2) *
        (4 * c1 * c1 * k2 - 8 * c1 * c2 * k1 - 2 * c1 * c2 * k2 + 4 * c2 * c2 * k1 +
         16 * k1 * k1 - 8 * k1 * k2 + k2 * k2);
  if (!(std::abs(m.D) > kResonanceTol)) throw NearResonance(m.D);

  MatX M(3, 3);
  M << k2 - 2 * k1, k1 * (c1 - c2), 2 * k1 * k1,
      2 * (c2 - c1), k2 - 4 * k1 + c1 * c1 - c1 * c2, 2 * k1 * (3 * c1 - c2),
      2.0, c2 - 3 * c1, k2 - 2 * k1 + 4 * c1 * c1 - 2 * c1 * c2;
  VecX rhs(3);
  rhs << -p.c, 0.0, 0.0;
  VecX sol = checked_lu(M).solve(rhs);

  const Real alpha_closed =
      -(p.c / m.D) *
      (4 * std::pow(c1, 4) - 6 * std::pow(c1, 3) * c2 + 2 * c1 * c1 * c2 * c2 +
       5 * c1 * c1 * k2 - c1 * c2 * (2 * k1 + 3 * k2) + 2 * c2 * c2 * k1 + 8 * k1 * k1 -
       6 * k1 * k2 + k2 * k2);
  const Real beta_closed = -(2 * p.c / m.D) * (4 * c1 * k1 + k2 * (c1 - c2) + 2 * c1 * c2 * c2 -
                                               6 * c1 * c1 * c2 + 4 * std::pow(c1, 3));
  const Real gamma_closed = -(2 * p.c / m.D) * (2 * c1 * c1 - 3 * c1 * c2 + c2 * c2 + 4 * k1 - k2);
  const Real scale =
      1.0 + std::max({std::abs(alpha_closed), std::abs(beta_closed), std::abs(gamma_closed)});
  if (std::abs(sol[0] - alpha_closed) > 1e-8 * scale ||
      std::abs(sol[1] - beta_closed) > 1e-8 * scale ||
      std::abs(sol[2] - gamma_closed) > 1e-8 * scale)
    throw Error("manifold coefficients disagree between the linear solve and the closed forms");

  m.alpha = sol[0];
  m.beta = sol[1];
  m.gamma = sol[2];
  m.damping_cubic = p.mu1 + p.a * m.beta;
  m.velocity_sq = p.a * m.gamma;
  m.cubic = p.b + p.a * m.alpha;
  return m;
}

ReductionComparison compare_reductions(const OscillatorPairParams& p, Real x0, Real v0, Real t0,
                                       Real t1) {
  SSMCubicModel model = ssm_cubic(p);
  ReductionComparison r;
  r.sc = p.b;
  r.md = p.b - p.a * p.c / p.k2;
  r.ssm = model.cubic;
  r.gap = std::abs(r.ssm - r.md);

  auto cubic_rhs = [&](Real coeff) {
    const Real c1 = p.c1, k1 = p.k1, mu1 = p.mu1;
    return ode::Rhs([c1, k1, mu1, coeff](Real, const VecX& z) {
      VecX out(2);
      out << z[1],
          -(c1 + mu1 * z[0] * z[0]) * z[1] - k1 * z[0] - coeff * z[0] * z[0] * z[0];
      return out;
    });
  };
  ode::IntegrateOptions opts;
  opts.rtol = 1e-10;
  opts.atol = 1e-12;
  VecX z0(2);
  z0 << x0, v0;
  ode::Trajectory ref = ode::integrate(model.first_order(), z0, t0, t1, opts);
  ode::Trajectory sc_t = ode::integrate(cubic_rhs(r.sc), z0, t0, t1, opts);
  ode::Trajectory md_t = ode::integrate(cubic_rhs(r.md), z0, t0, t1, opts);
  const int n = 200;
  for (int i = 0; i <= n; ++i) {
    Real ti = t0 + (t1 - t0) * Real(i) / n;
    Real xr = ref.sample(ti)[0];
    r.sc_error = std::max(r.sc_error, std::abs(sc_t.sample(ti)[0] - xr));
    r.md_error = std::max(r.md_error, std::abs(md_t.sample(ti)[0] - xr));
  }

  const int sweep_n = 8;
  for (int i = 0; i < sweep_n; ++i) {
    Real delta = std::pow(0.1, Real(i) / (sweep_n - 1));
    OscillatorPairParams q = p;
    q.k2 = 4.0 * p.k1 * (1.0 + delta);
    try {
      SSMCubicModel mi = ssm_cubic(q);
      r.sweep.emplace_back(q.k2, std::abs(mi.cubic - (q.b - q.a * q.c / q.k2)));
    } catch (const NearResonance&) {
    }
  }
  return r;
}

std::string ReductionComparison::to_json() const {
  nlohmann::json j;
  j["coeffs"] = {{"sc", sc}, {"md", md}, {"ssm", ssm}};
  j["gap"] = gap;
  j["trajectory_error"] = {{"sc", sc_error}, {"md", md_error}};
  j["sweep"] = nlohmann::json::array();
  for (const auto& kv : sweep) j["sweep"].push_back({{"k2", kv.first}, {"gap", kv.second}});
  return j.dump(2) + "\n";
}

}  // namespace sfd
