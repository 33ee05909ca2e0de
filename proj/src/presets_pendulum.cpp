#include "sfd/presets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sfd::detail {
namespace {

using ParamMap = std::map<std::string, Real>;

constexpr Real kTwoPi = 2.0 * std::numbers::pi;

/// Dimensionless groups of the spring--spring--pendulum assembly, resolved
/// once from the physical parameters.  Time-dependent forcings take the
/// scaled time and convert back to seconds internally.
struct Groups {
  Real beta = 0.0;   ///< m / M
  Real Delta = 0.0;  ///< l / L
  Real rho = 0.0;    ///< D / L
  Real pi_p = 0.0, pi_h = 0.0, pi_d = 0.0;
  Real q_h = 0.0, q_d = 0.0, a_h = 0.0;
  Real wp = 0.0;  ///< pendulum frequency sqrt(g/l), rad/s
  Real Mg = 0.0, mg = 0.0;
  Real fp_amp = 0.0, fp_om = 0.0;
  Real fhd_amp_h = 0.0, fhd_amp_d = 0.0, fhd_om = 0.0;
  Real eps0 = 0.0;

  Real Fp(Real t) const { return fp_amp * std::sin(fp_om * t / wp) / Mg; }
  Real Gp(Real t) const { return fp_amp * std::sin(fp_om * t / wp) / mg; }
  Real Fh(Real t) const { return fhd_amp_h * std::sin(fhd_om * t / wp) / Mg; }
  Real Fd(Real t) const { return fhd_amp_d * std::sin(fhd_om * t / wp) / Mg; }
};

/// Groups as seen by the eps-family.  Scaling by r = eps0/eps keeps the
/// family exactly equal to the physical system at eps = eps0 (r = 1).
struct Eff {
  Real Delta = 0.0, rho = 0.0;
  Real pi_p = 0.0, pi_h = 0.0, pi_d = 0.0;
  Real q_h = 0.0, q_d = 0.0, a_h = 0.0;
};

Groups resolve(const ParamMap& p) {
  Groups g;
  const Real M = p.at("M"), m = p.at("m"), l = p.at("l"), L = p.at("L");
  g.wp = std::sqrt(p.at("g") / l);
  g.beta = m / M;
  g.Delta = l / L;
  g.rho = p.at("D") / L;
  g.pi_p = p.at("cp_over_wp_m_l2");
  g.pi_h = p.at("ch_over_wp_m");
  g.pi_d = p.at("cd_over_wp_m");
  g.q_h = (p.at("K_h") / M) / (g.wp * g.wp);
  g.q_d = (p.at("K_d") / M) / (g.wp * g.wp);
  g.a_h = p.at("Gamma_h") * L * L / (M * g.wp * g.wp);
  g.Mg = M * p.at("g");
  g.mg = m * p.at("g");
  g.fp_amp = p.at("fp_amp");
  g.fp_om = p.at("fp_omega") > 0.0 ? p.at("fp_omega") : g.wp;
  g.fhd_amp_h = p.at("fh_amp");
  g.fhd_amp_d = p.at("fd_amp");
  g.fhd_om = p.at("fhd_omega") > 0.0 ? p.at("fhd_omega") : g.wp;
  g.eps0 = p.at("eps");
  return g;
}

TimeDependence forcing_time_dependence(const Groups& g) {
  std::vector<Real> nu;
  auto push = [&nu](Real f) {
    for (Real seen : nu)
      if (std::abs(seen - f) <= 1e-12 * f) return;
    nu.push_back(f);
  };
  if (g.fp_amp != 0.0) push(g.fp_om / g.wp);
  if (g.fhd_amp_h != 0.0 || g.fhd_amp_d != 0.0) push(g.fhd_om / g.wp);
  std::sort(nu.begin(), nu.end());

  TimeDependence td;
  if (nu.empty()) return td;
  for (int k = 1; k <= 64; ++k) {
    bool commensurate = true;
    for (Real f : nu) {
      const Real cycles = f * k / nu.front();
      if (std::abs(cycles - std::round(cycles)) > 1e-9 * cycles) commensurate = false;
    }
    if (commensurate) {
      td.kind = TimeDependence::Kind::periodic;
      td.period = kTwoPi * k / nu.front();
      return td;
    }
  }
  td.kind = TimeDependence::Kind::quasiperiodic;
  td.frequencies = nu;
  return td;
}

VecX vec2(Real a, Real b) {
  VecX out(2);
  out << a, b;
  return out;
}

/// Horizontal-spring relative stretch factor; d is measured in units of the
/// spring's rest length, so the spring inverts at d = -1.
Real stretch(Real d, Real h_over_rest) {
  return 1.0 - 1.0 / std::sqrt((1.0 + d) * (1.0 + d) + h_over_rest * h_over_rest);
}

// --- soft-soft-stiff partition: q = (gamma, d, h), slow (gamma, d) ---------

MatX soft_mass(const Groups& g, const Eff& e, Real xg) {
  const Real s = std::sin(xg), c = std::cos(xg);
  MatX M(3, 3);
  M << e.Delta * e.Delta, e.rho * e.Delta * c, -e.Delta * s,  //
      g.beta * (g.Delta / g.rho) * c, 1.0 + g.beta, 0.0,      //
      -g.beta * e.Delta * s, 0.0, 1.0 + g.beta;
  return M;
}

VecX soft_force(const Groups& g, const Eff& e, Real xg, Real xd, Real h, Real vg, Real vd,
                Real vh, Real t) {
  const Real s = std::sin(xg), c = std::cos(xg);
  const Real dr = g.Delta / g.rho;
  const Real Q = stretch(xd, h / e.rho);
  const Real Fp = g.Fp(t), Gp = g.Gp(t), Fh = g.Fh(t), Fd = g.Fd(t);
  VecX F(3);
  F(0) = -e.pi_p * vg - e.Delta * e.Delta * s + e.Delta * e.Delta * Gp;
  F(1) = g.beta * dr * s * vg * vg - e.pi_d * vd - e.q_d * (1.0 + xd) * Q + dr * Fd + dr * Fp * c;
  F(2) = g.beta * e.Delta * c * vg * vg - e.pi_h * vh - e.q_h * h - e.q_d * h * Q -
         e.a_h * h * h * h + (1.0 + g.beta) * e.Delta + e.Delta * Fh - e.Delta * Fp * s;
  return F;
}

Eff soft_eff(const Groups& g, Real eps) {
  const Real r = g.eps0 / eps;
  return {g.Delta * r, g.rho * r,     g.pi_p * r * r, g.pi_h * r,
          g.pi_d,      g.q_h * r * r, g.q_d,          g.a_h * r * r * r * r};
}

/// Limit forcings written with every eps-power cancelled analytically: the
/// fast amplitude enters only through the physical displacement eps0*eta, so
/// all intermediates stay O(1).
struct SoftLimitTerms {
  Real s, c, a, Hbr, Dbr;
};

SoftLimitTerms soft_limit_terms(const Groups& g, const VecX& x, const VecX& v, const VecX& eta,
                                const VecX& w, Real t) {
  SoftLimitTerms lt;
  lt.s = std::sin(x(0));
  lt.c = std::cos(x(0));
  const Real yh = g.eps0 * eta(0);
  const Real dr = g.Delta / g.rho;
  const Real Fp = g.Fp(t), Gp = g.Gp(t), Fh = g.Fh(t), Fd = g.Fd(t);
  lt.a = -(g.pi_p / (g.Delta * g.Delta)) * v(0) - lt.s + Gp;
  lt.Hbr = g.beta * lt.c * v(0) * v(0) - (g.pi_h / g.Delta) * w(0) - (g.q_h / g.Delta) * yh -
           (g.a_h / g.Delta) * yh * yh * yh + (1.0 + g.beta) + Fh - Fp * lt.s;
  lt.Dbr = g.beta * dr * lt.s * v(0) * v(0) - g.pi_d * v(1) -
           g.q_d * (1.0 + x(1)) * (1.0 - 1.0 / (1.0 + x(1))) + dr * Fd + dr * Fp * lt.c;
  return lt;
}

VecX soft_limit_p1(const Groups& g, const VecX& x, const VecX& v, const VecX& eta, const VecX& w,
                   Real t) {
  const SoftLimitTerms lt = soft_limit_terms(g, x, v, eta, w, t);
  const Real b = g.beta, rd = g.rho / g.Delta;
  VecX P1(2);
  P1(0) = (1.0 + b) * lt.a + lt.s * lt.Hbr - rd * lt.c * lt.Dbr;
  P1(1) = -b * (g.Delta / g.rho) * (lt.c * lt.a + lt.s * lt.c * lt.Hbr / (1.0 + b)) +
          ((1.0 + b * lt.c * lt.c) / (1.0 + b)) * lt.Dbr;
  return P1;
}

VecX soft_limit_p2(const Groups& g, const VecX& x, const VecX& v, const VecX& eta, const VecX& w,
                   Real t) {
  const SoftLimitTerms lt = soft_limit_terms(g, x, v, eta, w, t);
  const Real b = g.beta;
  const Real delta = g.Delta * g.eps0;
  VecX P2(1);
  P2(0) = delta * (((1.0 + b * lt.s * lt.s) / (1.0 + b)) * lt.Hbr + b * lt.s * lt.a -
                   (b * (g.rho / g.Delta) * lt.s * lt.c / (1.0 + b)) * lt.Dbr);
  return P2;
}

// --- stiff-stiff-soft partition: q = (gamma, h, d), slow gamma -------------

MatX stiff_mass(const Groups& g, const Eff& e, Real xg) {
  const Real s = std::sin(xg), c = std::cos(xg);
  MatX M(3, 3);
  M << e.Delta * e.Delta, -e.Delta * s, e.Delta * c,  //
      -g.beta * e.Delta * s, 1.0 + g.beta, 0.0,       //
      g.beta * e.Delta * c, 0.0, 1.0 + g.beta;
  return M;
}

VecX stiff_force(const Groups& g, const Eff& e, Real xg, Real h, Real d, Real vg, Real vh,
                 Real vd, Real t) {
  const Real s = std::sin(xg), c = std::cos(xg);
  const Real Q = stretch(d, h);
  const Real Fp = g.Fp(t), Gp = g.Gp(t), Fh = g.Fh(t), Fd = g.Fd(t);
  VecX F(3);
  F(0) = -e.pi_p * vg - e.Delta * e.Delta * s + e.Delta * e.Delta * Gp;
  F(1) = g.beta * e.Delta * c * vg * vg - e.pi_h * vh - e.q_h * h - e.q_d * h * Q -
         e.a_h * h * h * h + (1.0 + g.beta) * e.Delta + e.Delta * Fh - e.Delta * Fp * s;
  F(2) = g.beta * e.Delta * s * vg * vg - e.pi_d * vd - e.q_d * (1.0 + d) * Q + e.Delta * Fd +
         e.Delta * Fp * c;
  return F;
}

Eff stiff_eff(const Groups& g, Real eps) {
  const Real r = g.eps0 / eps;
  return {g.Delta * r, g.rho,         g.pi_p * r * r, g.pi_h * r,
          g.pi_d * r,  g.q_h * r * r, g.q_d * r * r,  g.a_h * r * r * r * r};
}

struct StiffLimitTerms {
  Real s, c, a, Hbr, Dbr, Gp;
};

StiffLimitTerms stiff_limit_terms(const Groups& g, const VecX& x, const VecX& v, const VecX& eta,
                                  const VecX& w, Real t) {
  StiffLimitTerms lt;
  lt.s = std::sin(x(0));
  lt.c = std::cos(x(0));
  const Real yh = g.eps0 * eta(0);
  const Real yd = g.eps0 * eta(1);
  const Real Fp = g.Fp(t), Fh = g.Fh(t), Fd = g.Fd(t);
  lt.Gp = g.Gp(t);
  lt.a = -(g.pi_p / (g.Delta * g.Delta)) * v(0) - lt.s + lt.Gp;
  lt.Hbr = g.beta * lt.c * v(0) * v(0) - (g.pi_h / g.Delta) * w(0) - (g.q_h / g.Delta) * yh -
           (g.a_h / g.Delta) * yh * yh * yh + (1.0 + g.beta) + Fh - Fp * lt.s;
  lt.Dbr = g.beta * lt.s * v(0) * v(0) - (g.pi_d / g.Delta) * w(1) - (g.q_d / g.Delta) * yd + Fd +
           Fp * lt.c;
  return lt;
}

VecX stiff_limit_p1(const Groups& g, const VecX& x, const VecX& v, const VecX& eta, const VecX& w,
                    Real t) {
  const StiffLimitTerms lt = stiff_limit_terms(g, x, v, eta, w, t);
  VecX P1(1);
  P1(0) = (1.0 + g.beta) * lt.a + lt.s * lt.Hbr - lt.c * lt.Dbr;
  return P1;
}

VecX stiff_limit_p2(const Groups& g, const VecX& x, const VecX& v, const VecX& eta, const VecX& w,
                    Real t) {
  const StiffLimitTerms lt = stiff_limit_terms(g, x, v, eta, w, t);
  const Real b = g.beta;
  const Real coupling = b * (g.pi_p / (g.Delta * g.Delta)) * v(0);
  const Real Rh = lt.Hbr - coupling * lt.s - b * lt.s * lt.s + b * lt.s * lt.Gp;
  const Real Rd = lt.Dbr + coupling * lt.c + b * lt.s * lt.c - b * lt.c * lt.Gp;
  const Real delta = g.Delta * g.eps0;
  VecX P2(2);
  P2(0) = (delta / (1.0 + b)) * ((1.0 + b * lt.s * lt.s) * Rh - b * lt.s * lt.c * Rd);
  P2(1) = (delta / (1.0 + b)) * (-b * lt.s * lt.c * Rh + (1.0 + b * lt.c * lt.c) * Rd);
  return P2;
}

ParamMap merge(ParamMap defaults, const ParamMap& overrides) {
  for (const auto& [key, value] : overrides) {
    auto it = defaults.find(key);
    if (it == defaults.end())
      throw Error("unknown parameter '" + key + "' for preset 'pendulum3'");
    it->second = value;
  }
  return defaults;
}

void require_positive(const ParamMap& p, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (p.at(k) <= 0.0) throw Error(std::string("parameter '") + k + "' must be positive");
}

}  // namespace

/// Spring--spring--pendulum assembly: a pendulum of length l hangs from a
/// block of mass M suspended on a vertical spring (displacement h, rest
/// length L) and a horizontal spring (displacement d, rest length D).  The
/// soft-soft-stiff mode treats (gamma, d) as slow and the vertical spring as
/// stiff; the stiff-stiff-soft mode (which requires D = L) keeps only the
/// pendulum angle slow.  States are dimensionless: h is measured in units of
/// L, d in units of the horizontal rest length, and time runs at the
/// pendulum frequency, t_seconds = t / sqrt(g/l).
MechanicalSystem make_pendulum3(const std::string& mode,
                                const std::map<std::string, Real>& overrides) {
  const bool soft = mode == "soft-soft-stiff";
  if (!soft && mode != "stiff-stiff-soft")
    throw Error("pendulum3 mode must be 'soft-soft-stiff' or 'stiff-stiff-soft'");

  ParamMap defaults = soft ? ParamMap{{"l", 6.0},
                                      {"L", 1.0},
                                      {"D", 6.0},
                                      {"M", 1.0},
                                      {"m", 1.0},
                                      {"K_h", 600.0},
                                      {"K_d", 2.0},
                                      {"Gamma_h", 0.5},
                                      {"cd_over_wp_m", 0.33},
                                      {"ch_over_wp_m", 3.0},
                                      {"cp_over_wp_m_l2", 0.33},
                                      {"g", 9.81},
                                      {"fp_amp", 0.5},
                                      {"fp_omega", 1.0},
                                      {"fh_amp", 0.5},
                                      {"fd_amp", 0.5},
                                      {"fhd_omega", 3.0},
                                      {"t_sync", 15.6},
                                      {"eps", 1e-8}}
                           : ParamMap{{"l", 6.0},
                                      {"L", 3.0},
                                      {"D", 3.0},
                                      {"M", 0.25},
                                      {"m", 0.5},
                                      {"K_h", 2000.0},
                                      {"K_d", 280.0},
                                      {"Gamma_h", 0.5},
                                      {"cd_over_wp_m", 3.0},
                                      {"ch_over_wp_m", 3.0},
                                      {"cp_over_wp_m_l2", 1.0},
                                      {"g", 9.81},
                                      {"fp_amp", 0.6},
                                      {"fp_omega", 0.0},
                                      {"fh_amp", 0.0},
                                      {"fd_amp", 0.0},
                                      {"fhd_omega", 0.0},
                                      {"t_sync", 15.6},
                                      {"eps", 1e-8}};
  ParamMap p = merge(std::move(defaults), overrides);
  require_positive(p, {"l", "L", "D", "M", "m", "K_h", "K_d", "g", "eps", "t_sync"});
  if (!soft && p.at("D") != p.at("L"))
    throw Error("stiff-stiff-soft mode measures d in units of L and requires D = L");

  Groups g = resolve(p);
  p["fp_omega"] = g.fp_om;
  p["fhd_omega"] = g.fhd_om;

  MechanicalSystem sys;
  sys.name = "pendulum3";
  sys.mode = mode;
  sys.n = 3;
  sys.s = soft ? 2 : 1;
  sys.f = soft ? 1 : 2;
  sys.eps = g.eps0;
  sys.has_sfd_scaling = true;
  sys.params = p;
  sys.time_dependence = forcing_time_dependence(g);

  if (soft) {
    sys.mass = [g](const VecX& q, Real t) {
      (void)t;
      return soft_mass(g, soft_eff(g, g.eps0), q(0));
    };
    sys.force = [g](const VecX& q, const VecX& qd, Real t) {
      return soft_force(g, soft_eff(g, g.eps0), q(0), q(1), q(2), qd(0), qd(1), qd(2), t);
    };
    sys.scaled_mass = [g](const VecX& x, const VecX& eta, Real t, Real eps) {
      (void)eta;
      (void)t;
      return soft_mass(g, soft_eff(g, eps), x(0));
    };
    sys.scaled_force = [g](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t,
                           Real eps) {
      return soft_force(g, soft_eff(g, eps), x(0), x(1), eps * eta(0), v(0), v(1), w(0), t);
    };
    sys.limit_p1 = [g](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t) {
      return soft_limit_p1(g, x, v, eta, w, t);
    };
    sys.limit_p2 = [g](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t) {
      return soft_limit_p2(g, x, v, eta, w, t);
    };
  } else {
    sys.mass = [g](const VecX& q, Real t) {
      (void)t;
      return stiff_mass(g, stiff_eff(g, g.eps0), q(0));
    };
    sys.force = [g](const VecX& q, const VecX& qd, Real t) {
      return stiff_force(g, stiff_eff(g, g.eps0), q(0), q(1), q(2), qd(0), qd(1), qd(2), t);
    };
    sys.scaled_mass = [g](const VecX& x, const VecX& eta, Real t, Real eps) {
      (void)eta;
      (void)t;
      return stiff_mass(g, stiff_eff(g, eps), x(0));
    };
    sys.scaled_force = [g](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t,
                           Real eps) {
      return stiff_force(g, stiff_eff(g, eps), x(0), eps * eta(0), eps * eta(1), v(0), w(0), w(1),
                         t);
    };
    sys.limit_p1 = [g](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t) {
      return stiff_limit_p1(g, x, v, eta, w, t);
    };
    sys.limit_p2 = [g](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t) {
      return stiff_limit_p2(g, x, v, eta, w, t);
    };
  }

  const Real t_hi = sys.time_dependence.kind == TimeDependence::Kind::periodic
                        ? sys.time_dependence.period
                        : kTwoPi;
  DomainBox box;
  if (soft) {
    box.x_lo = vec2(-1.6, -0.9);
    box.x_hi = vec2(1.6, 1.6);
    box.v_lo = vec2(-2.0, -2.0);
    box.v_hi = vec2(2.0, 2.0);
    box.y_lo = VecX::Constant(1, -0.6);
    box.y_hi = VecX::Constant(1, 0.6);
    box.w_lo = VecX::Constant(1, -1.0);
    box.w_hi = VecX::Constant(1, 1.0);
  } else {
    box.x_lo = VecX::Constant(1, -1.6);
    box.x_hi = VecX::Constant(1, 1.6);
    box.v_lo = VecX::Constant(1, -2.0);
    box.v_hi = VecX::Constant(1, 2.0);
    box.y_lo = vec2(-0.6, -0.9);
    box.y_hi = vec2(0.6, 1.6);
    box.w_lo = vec2(-1.0, -1.0);
    box.w_hi = vec2(1.0, 1.0);
  }
  box.t_lo = 0.0;
  box.t_hi = t_hi;
  sys.domain = box;

  sys.initial_state = VecX(6);
  if (soft)
    sys.initial_state << 1.0, 1.2, 0.0, 0.0, 0.08182, 0.005301;
  else
    sys.initial_state << 1.0, 0.0, 0.002842, 0.02296, 0.0005551, -0.002546;
  return sys;
}

}  // namespace sfd::detail
