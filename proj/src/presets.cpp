#include "sfd/presets.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>

namespace sfd {
namespace {

constexpr Real kTwoPi = 2.0 * std::numbers::pi;

using ParamMap = std::map<std::string, Real>;

ParamMap merge(const char* preset, ParamMap defaults, const ParamMap& overrides) {
  for (const auto& [key, value] : overrides) {
    auto it = defaults.find(key);
    if (it == defaults.end())
      throw Error("unknown parameter '" + key + "' for preset '" + preset + "'");
    it->second = value;
  }
  return defaults;
}

void require_positive(const ParamMap& p, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (p.at(k) <= 0.0) throw Error(std::string("parameter '") + k + "' must be positive");
}

VecX scalar_vec(Real v) {
  VecX out(1);
  out << v;
  return out;
}

/// Coupled slow/stiff pair: the stiff coordinate has small inertia eps*m2 and
/// large stiffness k2/eps, and the slow equation is coupled through the
/// rescaled fast amplitude y/eps.  The eps_mass_power parameter switches the
/// stiff-inertia exponent: 1 is the well-posed scaling; 0 removes all
/// stiffness scaling (the fast normalized forcing collapses to zero); 2 makes
/// the normalized forcing diverge as eps -> 0.
MechanicalSystem make_linear_coupled(const ParamMap& overrides) {
  ParamMap p = merge(
      "linear-coupled",
      {
          {"m1", 1.0},
          {"c1", 0.4},
          {"k1", 1.0},
          {"a1", 0.5},
          {"f10", 0.3},
          {"om1", 1.0},
          {"m2", 1.0},
          {"c2", 1.0},
          {"k2", 1.0},
          {"a2", 0.4},
          {"b2", 0.3},
          {"f20", 0.5},
          {"om2", 1.0},
          {"eps", 1e-2},
          {"eps_mass_power", 1.0},
      },
      overrides);
  require_positive(p, {"m1", "m2", "k1", "k2", "eps"});

  const Real m1 = p.at("m1"), c1 = p.at("c1"), k1 = p.at("k1"), a1 = p.at("a1");
  const Real f10 = p.at("f10"), om1 = p.at("om1");
  const Real m2 = p.at("m2"), c2 = p.at("c2"), k2 = p.at("k2");
  const Real a2 = p.at("a2"), b2 = p.at("b2"), f20 = p.at("f20"), om2 = p.at("om2");
  const Real eps0 = p.at("eps");
  const int power = int(std::lround(p.at("eps_mass_power")));
  if (power < 0 || power > 2) throw Error("eps_mass_power must be 0, 1 or 2");

  auto f1 = [f10, om1](Real t) { return f10 * std::sin(om1 * t); };
  auto f2 = [f20, om2](Real t) { return f20 * std::sin(om2 * t); };
  auto s2 = [a2, b2](Real x, Real y) { return a2 * x * x + b2 * x * y; };

  MechanicalSystem sys;
  sys.name = "linear-coupled";
  sys.n = 2;
  sys.s = 1;
  sys.f = 1;
  sys.eps = eps0;
  sys.params = p;

  sys.mass = [m1, m2, eps0, power](const VecX&, Real) {
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = m1;
    m(1, 1) = std::pow(eps0, power) * m2;
    return m;
  };
  sys.force = [=](const VecX& q, const VecX& qdot, Real t) {
    Real x = q[0], y = q[1], v = qdot[0], w = qdot[1];
    Real slow_coupling = (power == 1) ? a1 * x * (y / eps0) : a1 * x * y;
    Real fast_stiffness = (power == 0) ? k2 * y : (k2 / eps0) * y;
    VecX out(2);
    out << f1(t) - c1 * v - k1 * x - slow_coupling,
        f2(t) - c2 * w - fast_stiffness - s2(x, y);
    return out;
  };

  sys.scaled_mass = [m1, m2, power](const VecX&, const VecX&, Real, Real eps) {
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = m1;
    m(1, 1) = std::pow(eps, power) * m2;
    return m;
  };
  sys.scaled_force = [=](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t,
                         Real eps) {
    Real slow_coupling = (power == 1) ? a1 * x[0] * eta[0] : a1 * x[0] * (eps * eta[0]);
    Real fast_stiffness = (power == 0) ? k2 * (eps * eta[0]) : k2 * eta[0];
    VecX out(2);
    out << f1(t) - c1 * v[0] - k1 * x[0] - slow_coupling,
        f2(t) - c2 * w[0] - fast_stiffness - s2(x[0], eps * eta[0]);
    return out;
  };

  if (power == 1) {
    sys.limit_p1 = [=](const VecX& x, const VecX& v, const VecX& eta, const VecX&, Real t) {
      return scalar_vec((f1(t) - c1 * v[0] - k1 * x[0] - a1 * x[0] * eta[0]) / m1);
    };
    sys.limit_p2 = [=](const VecX& x, const VecX&, const VecX& eta, const VecX& w, Real t) {
      return scalar_vec((f2(t) - c2 * w[0] - k2 * eta[0] - s2(x[0], 0.0)) / m2);
    };
  } else if (power == 0) {
    sys.limit_p1 = [=](const VecX& x, const VecX& v, const VecX&, const VecX&, Real t) {
      return scalar_vec((f1(t) - c1 * v[0] - k1 * x[0]) / m1);
    };
    sys.limit_p2 = [](const VecX&, const VecX&, const VecX&, const VecX&, Real) {
      return scalar_vec(0.0);
    };
  }
  // power == 2: no finite limit exists; the extension check reports divergence.

  sys.time_dependence.kind = TimeDependence::Kind::periodic;
  sys.time_dependence.period = kTwoPi / std::min(om1, om2);
  sys.domain = DomainBox::standard(1, 1, 0.0, sys.time_dependence.period);

  Real g0 = (f20 * std::sin(0.0) - a2 * 0.4 * 0.4) / k2;
  sys.initial_state = join_state(scalar_vec(0.4), scalar_vec(0.0),
                                 scalar_vec(eps0 * (g0 + 1.0)), scalar_vec(0.0));
  return sys;
}

/// Essentially nonlinear attachment: the fast coordinate has no linear
/// stiffness, so the zero-acceleration set exists only degenerately and the
/// frozen linearization has a vanishing stiffness matrix everywhere.
MechanicalSystem make_tet_demo(const ParamMap& overrides) {
  ParamMap p = merge(
      "tet-demo",
      {
          {"m1", 1.0},
          {"c1", 0.05},
          {"k1", 1.0},
          {"a1", 0.5},
          {"m2", 1.0},
          {"c2", 0.3},
          {"ct", 2.0},
          {"eps", 1e-2},
      },
      overrides);
  require_positive(p, {"m1", "m2", "k1", "eps"});

  const Real m1 = p.at("m1"), c1 = p.at("c1"), k1 = p.at("k1"), a1 = p.at("a1");
  const Real m2 = p.at("m2"), c2 = p.at("c2"), ct = p.at("ct");
  const Real eps0 = p.at("eps");

  MechanicalSystem sys;
  sys.name = "tet-demo";
  sys.n = 2;
  sys.s = 1;
  sys.f = 1;
  sys.eps = eps0;
  sys.params = p;

  sys.mass = [m1, m2, eps0](const VecX&, Real) {
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = m1;
    m(1, 1) = eps0 * m2;
    return m;
  };
  sys.force = [=](const VecX& q, const VecX& qdot, Real) {
    VecX out(2);
    out << -c1 * qdot[0] - k1 * q[0] - a1 * q[0] * q[1], -c2 * qdot[1] - ct * q[0] * q[1];
    return out;
  };

  sys.scaled_mass = [m1, m2](const VecX&, const VecX&, Real, Real eps) {
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = m1;
    m(1, 1) = eps * m2;
    return m;
  };
  sys.scaled_force = [=](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real,
                         Real eps) {
    VecX out(2);
    out << -c1 * v[0] - k1 * x[0] - a1 * x[0] * (eps * eta[0]),
        -c2 * w[0] - ct * x[0] * (eps * eta[0]);
    return out;
  };

  sys.limit_p1 = [=](const VecX& x, const VecX& v, const VecX&, const VecX&, Real) {
    return scalar_vec((-c1 * v[0] - k1 * x[0]) / m1);
  };
  sys.limit_p2 = [=](const VecX&, const VecX&, const VecX&, const VecX& w, Real) {
    return scalar_vec(-c2 * w[0] / m2);
  };

  sys.time_dependence.kind = TimeDependence::Kind::autonomous;
  sys.domain = DomainBox::standard(1, 1, 0.0, 0.0);
  sys.initial_state =
      join_state(scalar_vec(1.0), scalar_vec(0.0), scalar_vec(0.1), scalar_vec(0.0));
  return sys;
}

/// Scalar stiff coordinate with a quadratic self-coupling, so the critical
/// manifold is a parabola in eta that folds where its two branches meet.
MechanicalSystem make_fold_demo(const ParamMap& overrides) {
  ParamMap p = merge(
      "fold-demo",
      {
          {"m1", 1.0},
          {"c1", 0.5},
          {"k1", 1.0},
          {"s1", 0.4},
          {"m2", 1.0},
          {"c2", 1.0},
          {"k2", 4.0},
          {"s2x", 1.0},
          {"s2eta", 4.0},
          {"f2a", 1.0},
          {"eps", 1e-2},
      },
      overrides);
  require_positive(p, {"m1", "m2", "k1", "k2", "eps"});

  const Real m1 = p.at("m1"), c1 = p.at("c1"), k1 = p.at("k1"), s1 = p.at("s1");
  const Real m2 = p.at("m2"), c2 = p.at("c2"), k2 = p.at("k2");
  const Real s2x = p.at("s2x"), s2eta = p.at("s2eta"), f2a = p.at("f2a");
  const Real eps0 = p.at("eps");

  auto s2 = [s2x, s2eta](Real x, Real eta) { return s2x * x * x + s2eta * eta * eta; };

  MechanicalSystem sys;
  sys.name = "fold-demo";
  sys.n = 2;
  sys.s = 1;
  sys.f = 1;
  sys.eps = eps0;
  sys.params = p;

  sys.mass = [m1, m2, eps0](const VecX&, Real) {
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = m1;
    m(1, 1) = eps0 * m2;
    return m;
  };
  sys.force = [=](const VecX& q, const VecX& qdot, Real t) {
    Real x = q[0], y = q[1], v = qdot[0], w = qdot[1];
    VecX out(2);
    out << -c1 * v - k1 * x - s1 * x * (y / eps0),
        f2a * std::sin(t) - c2 * w - (k2 / eps0) * y - s2(x, y / eps0);
    return out;
  };

  sys.scaled_mass = [m1, m2](const VecX&, const VecX&, Real, Real eps) {
    MatX m = MatX::Zero(2, 2);
    m(0, 0) = m1;
    m(1, 1) = eps * m2;
    return m;
  };
  sys.scaled_force = [=](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real t,
                         Real) {
    VecX out(2);
    out << -c1 * v[0] - k1 * x[0] - s1 * x[0] * eta[0],
        f2a * std::sin(t) - c2 * w[0] - k2 * eta[0] - s2(x[0], eta[0]);
    return out;
  };

  sys.limit_p1 = [=](const VecX& x, const VecX& v, const VecX& eta, const VecX&, Real) {
    return scalar_vec((-c1 * v[0] - k1 * x[0] - s1 * x[0] * eta[0]) / m1);
  };
  sys.limit_p2 = [=](const VecX& x, const VecX&, const VecX& eta, const VecX& w, Real t) {
    return scalar_vec((f2a * std::sin(t) - c2 * w[0] - k2 * eta[0] - s2(x[0], eta[0])) / m2);
  };

  sys.time_dependence.kind = TimeDependence::Kind::periodic;
  sys.time_dependence.period = kTwoPi;
  sys.domain = DomainBox::standard(1, 1, 0.0, std::numbers::pi);
  sys.domain.x_lo = scalar_vec(-0.5);
  sys.domain.x_hi = scalar_vec(0.5);
  sys.domain.v_lo = scalar_vec(-1.0);
  sys.domain.v_hi = scalar_vec(1.0);

  Real g0_plus = (-1.0 + std::sqrt(1.0 - (0.2 * 0.2 - 0.0))) / 2.0;
  sys.initial_state = join_state(scalar_vec(0.2), scalar_vec(0.0),
                                 scalar_vec(eps0 * (g0_plus + 0.3)), scalar_vec(0.0));
  return sys;
}

/// Two modal oscillators with quadratic cross-coupling; eps is a literal
/// parameter here (no stiffness scaling), the configuration used to compare
/// local reduction methods against the exact invariant-manifold expansion.
MechanicalSystem make_twodof_ssm(const ParamMap& overrides) {
  ParamMap p = merge(
      "twodof-ssm",
      {
          {"c1", 0.05},
          {"c2", 0.3},
          {"k1", 1.0},
          {"k2", 9.0},
          {"a", 1.0},
          {"b", 1.0},
          {"c", 1.0},
          {"mu1", 0.1},
          {"eps", 1.0},
      },
      overrides);
  require_positive(p, {"k1", "k2", "eps"});

  const Real c1 = p.at("c1"), c2 = p.at("c2"), k1 = p.at("k1"), k2 = p.at("k2");
  const Real a = p.at("a"), b = p.at("b"), c = p.at("c"), mu1 = p.at("mu1");
  const Real eps0 = p.at("eps");

  MechanicalSystem sys;
  sys.name = "twodof-ssm";
  sys.n = 2;
  sys.s = 1;
  sys.f = 1;
  sys.eps = eps0;
  sys.has_sfd_scaling = false;
  sys.params = p;

  sys.mass = [](const VecX&, Real) { return MatX::Identity(2, 2); };
  sys.force = [=](const VecX& q, const VecX& qdot, Real) {
    Real x = q[0], y = q[1], v = qdot[0], w = qdot[1];
    VecX out(2);
    out << -(c1 + mu1 * x * x) * v - k1 * x - a * x * y - b * x * x * x,
        -c2 * w - k2 * y - c * x * x;
    return out;
  };

  sys.scaled_mass = [](const VecX&, const VecX&, Real, Real) { return MatX::Identity(2, 2); };
  sys.scaled_force = [=](const VecX& x, const VecX& v, const VecX& eta, const VecX& w, Real,
                         Real eps) {
    VecX out(2);
    out << -(c1 + mu1 * x[0] * x[0]) * v[0] - k1 * x[0] - a * x[0] * (eps * eta[0]) -
               b * x[0] * x[0] * x[0],
        -c2 * w[0] - k2 * (eps * eta[0]) - c * x[0] * x[0];
    return out;
  };

  sys.limit_p1 = [=](const VecX& x, const VecX& v, const VecX&, const VecX&, Real) {
    return scalar_vec(-(c1 + mu1 * x[0] * x[0]) * v[0] - k1 * x[0] - b * x[0] * x[0] * x[0]);
  };
  sys.limit_p2 = [](const VecX&, const VecX&, const VecX&, const VecX&, Real) {
    return scalar_vec(0.0);
  };

  sys.time_dependence.kind = TimeDependence::Kind::autonomous;
  sys.domain = DomainBox::standard(1, 1, 0.0, 0.0);
  sys.initial_state =
      join_state(scalar_vec(0.3), scalar_vec(0.0), scalar_vec(0.0), scalar_vec(0.0));
  return sys;
}

}  // namespace

namespace detail {
MechanicalSystem make_pendulum3(const std::string& mode,
                                const std::map<std::string, Real>& overrides);
}

PresetId preset_from_string(const std::string& name) {
  if (name == "linear-coupled") return PresetId::linear_coupled;
  if (name == "tet-demo") return PresetId::tet_demo;
  if (name == "fold-demo") return PresetId::fold_demo;
  if (name == "twodof-ssm") return PresetId::twodof_ssm;
  if (name == "pendulum3") return PresetId::pendulum3;
  throw Error("unknown preset '" + name + "'");
}

std::string to_string(PresetId id) {
  switch (id) {
    case PresetId::linear_coupled: return "linear-coupled";
    case PresetId::tet_demo: return "tet-demo";
    case PresetId::fold_demo: return "fold-demo";
    case PresetId::twodof_ssm: return "twodof-ssm";
    case PresetId::pendulum3: return "pendulum3";
  }
  throw Error("invalid preset id");
}

MechanicalSystem load_preset(PresetId id, const std::string& mode, const ParamMap& overrides) {
  if (id != PresetId::pendulum3 && !mode.empty())
    throw Error("preset '" + to_string(id) + "' has no modes");
  switch (id) {
    case PresetId::linear_coupled: return make_linear_coupled(overrides);
    case PresetId::tet_demo: return make_tet_demo(overrides);
    case PresetId::fold_demo: return make_fold_demo(overrides);
    case PresetId::twodof_ssm: return make_twodof_ssm(overrides);
    case PresetId::pendulum3:
      return detail::make_pendulum3(mode.empty() ? "soft-soft-stiff" : mode, overrides);
  }
  throw Error("invalid preset id");
}

std::string parameter_report(const MechanicalSystem& sys) {
  nlohmann::json j;
  j["system"] = sys.name;
  j["mode"] = sys.mode;
  j["eps"] = sys.eps;
  nlohmann::json params;
  for (const auto& [key, value] : sys.params) params[key] = value;
  j["parameters"] = params;
  return j.dump(2) + "\n";
}

}  // namespace sfd
