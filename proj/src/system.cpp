#include "sfd/system.hpp"

#include <Eigen/Dense>

namespace sfd {

DomainBox DomainBox::standard(int s, int f, Real t_lo, Real t_hi) {
  DomainBox box;
  box.x_lo = VecX::Constant(s, -2.0);
  box.x_hi = VecX::Constant(s, 2.0);
  box.v_lo = VecX::Constant(s, -2.0);
  box.v_hi = VecX::Constant(s, 2.0);
  box.y_lo = VecX::Constant(f, -1.0);
  box.y_hi = VecX::Constant(f, 1.0);
  box.w_lo = VecX::Constant(f, -1.0);
  box.w_hi = VecX::Constant(f, 1.0);
  box.t_lo = t_lo;
  box.t_hi = t_hi;
  return box;
}

DomainSample random_sample(const DomainBox& box, Rng& rng) {
  DomainSample s;
  s.x = rng.uniform_vec(box.x_lo, box.x_hi);
  s.v = rng.uniform_vec(box.v_lo, box.v_hi);
  s.y = rng.uniform_vec(box.y_lo, box.y_hi);
  s.w = rng.uniform_vec(box.w_lo, box.w_hi);
  s.t = rng.uniform(box.t_lo, box.t_hi);
  return s;
}

ode::Rhs full_rhs(const MechanicalSystem& sys) {
  const int s = sys.s, f = sys.f, n = sys.n;
  return [&sys, s, f, n](Real t, const VecX& z) {
    StateParts p = split_state(z, s, f);
    VecX q(n), qdot(n);
    q << p.x, p.y;
    qdot << p.v, p.w;
    MatX M = sys.mass(q, t);
    Eigen::FullPivLU<MatX> lu(M);
    if (!lu.isInvertible()) {
      Real rc = lu.rcond();
      throw SingularBlock("M", rc);
    }
    VecX acc = lu.solve(sys.force(q, qdot, t));
    VecX dz(2 * n);
    dz << p.v, acc.head(s), p.w, acc.tail(f);
    return dz;
  };
}

namespace {

Real rel_gap_mat(const MatX& a, const MatX& b) {
  Real scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

Real rel_gap_vec(const VecX& a, const VecX& b) {
  Real scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

ConsistencyReport consistency_check(const MechanicalSystem& sys,
                                    const std::vector<DomainSample>& samples) {
  ConsistencyReport rep;
  rep.n_samples = int(samples.size());
  for (const auto& sm : samples) {
    VecX q(sys.n), qdot(sys.n);
    q << sm.x, sm.y;
    qdot << sm.v, sm.w;
    VecX eta = sm.y / sys.eps;

    MatX mu = sys.mass(q, sm.t);
    MatX ms = sys.scaled_mass(sm.x, eta, sm.t, sys.eps);
    VecX fu = sys.force(q, qdot, sm.t);
    VecX fs = sys.scaled_force(sm.x, sm.v, eta, sm.w, sm.t, sys.eps);

    Real gm = rel_gap_mat(mu, ms);
    Real gf = rel_gap_vec(fu, fs);
    if (gm > rep.max_rel_mass) rep.max_rel_mass = gm;
    if (gf > rep.max_rel_force) {
      rep.max_rel_force = gf;
      rep.worst = sm;
    }
  }
  return rep;
}

ConsistencyReport consistency_check(const MechanicalSystem& sys, int n_samples, Rng& rng) {
  std::vector<DomainSample> samples;
  samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) samples.push_back(random_sample(sys.domain, rng));
  return consistency_check(sys, samples);
}

void check_time_span(const MechanicalSystem& sys, Real t0, Real t1) {
  if (sys.time_dependence.kind != TimeDependence::Kind::aperiodic) return;
  Real lo = std::min(t0, t1), hi = std::max(t0, t1);
  if (lo < sys.time_dependence.t_begin || hi > sys.time_dependence.t_end)
    throw Error("requested time span [" + std::to_string(lo) + ", " + std::to_string(hi) +
                "] leaves the declared aperiodic interval");
}

}  // namespace sfd
