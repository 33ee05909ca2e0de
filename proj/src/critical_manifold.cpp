#include "sfd/critical_manifold.hpp"

#include <json.hpp>

#include <Eigen/LU>
#include <cmath>
#include <exception>
#include <optional>

#include "sfd/errors.hpp"

namespace sfd {
namespace {

constexpr int kMaxNewton = 50;
constexpr int kMaxBacktrack = 30;
constexpr Real kRcondFloor = 1e-13;

EvalPoint frozen_point(const SlowBase& base, const VecX& eta) {
  return {base.x, base.v, eta, VecX::Zero(eta.size()), base.t};
}

std::vector<Real> axis_values(Real lo, Real hi, int count) {
  if (!(hi > lo)) return {lo};
  std::vector<Real> vals;
  vals.reserve(std::size_t(count));
  for (int i = 0; i < count; ++i) vals.push_back(lo + (hi - lo) * Real(i) / Real(count - 1));
  return vals;
}

nlohmann::json vec_json(const VecX& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

FormalStability check_formal_stability(const MatX& A, const MatX& B) {
  const int f = int(A.rows());
  MatX companion = MatX::Zero(2 * f, 2 * f);
  companion.topRightCorner(f, f) = MatX::Identity(f, f);
  companion.bottomLeftCorner(f, f) = -B;
  companion.bottomRightCorner(f, f) = -A;

  Eigen::EigenSolver<MatX> es(companion);
  if (es.info() != Eigen::Success) throw Error("companion eigenvalue solve failed");

  FormalStability out;
  out.spectrum = es.eigenvalues();
  out.max_real = out.spectrum.real().maxCoeff();
  out.threshold = -1e-12 * (1.0 + A.norm() + B.norm());
  out.stable = out.max_real < out.threshold;
  return out;
}

std::pair<MatX, MatX> tangent_matrices(const MechanicalSystem& sys, const SlowBase& base,
                                       const VecX& eta) {
  ForcingEval fe(sys);
  EvalPoint p = frozen_point(base, eta);
  MatX A = -fe.jacobian(PComp::p2, PArg::w, p, 0.0);
  MatX B = -fe.jacobian(PComp::p2, PArg::eta, p, 0.0);
  return {A, B};
}

CriticalPoint solve_critical_point(const MechanicalSystem& sys, const SlowBase& base,
                                   const VecX& eta_guess) {
  ForcingEval fe(sys);
  VecX eta = eta_guess;
  VecX r = fe.value(PComp::p2, frozen_point(base, eta), 0.0);
  Real rnorm = r.lpNorm<Eigen::Infinity>();
  const Real tol = 1e-10 * (1.0 + rnorm);

  VecX best_eta = eta;
  Real best_norm = rnorm;
  int iter = 0;
  while (rnorm > tol) {
    if (iter++ >= kMaxNewton) throw NoConvergence(best_eta, best_norm, kMaxNewton);
    MatX J = fe.jacobian(PComp::p2, PArg::eta, frozen_point(base, eta), 0.0);
    Eigen::PartialPivLU<MatX> lu(J);
    Real rc = lu.rcond();
    if (!(rc > kRcondFloor)) throw SingularJacobian(rc);
    VecX step = -lu.solve(r);

    Real alpha = 1.0;
    VecX next_eta;
    VecX next_r;
    Real next_norm = rnorm;
    for (int k = 0; k < kMaxBacktrack; ++k, alpha *= 0.5) {
      next_eta = eta + alpha * step;
      next_r = fe.value(PComp::p2, frozen_point(base, next_eta), 0.0);
      next_norm = next_r.lpNorm<Eigen::Infinity>();
      if (next_norm < rnorm) break;
    }
    if (!(next_norm < rnorm)) throw NoConvergence(best_eta, best_norm, iter);
    eta = next_eta;
    r = next_r;
    rnorm = next_norm;
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best_eta = eta;
    }
  }

  // The residual test alone leaves eta loosely determined when the Jacobian
  // is nearly degenerate in scale, so polish to the round-off floor with full
  // steps as long as they strictly improve.
  for (int k = 0; k < 3 && rnorm > 0.0; ++k) {
    MatX J = fe.jacobian(PComp::p2, PArg::eta, frozen_point(base, eta), 0.0);
    Eigen::PartialPivLU<MatX> lu(J);
    if (!(lu.rcond() > kRcondFloor)) break;
    VecX cand = eta - lu.solve(r);
    VecX cand_r = fe.value(PComp::p2, frozen_point(base, cand), 0.0);
    const Real cand_norm = cand_r.lpNorm<Eigen::Infinity>();
    if (!(cand_norm < rnorm)) break;
    eta = cand;
    r = cand_r;
    rnorm = cand_norm;
  }

  CriticalPoint cp;
  cp.base = base;
  cp.eta = eta;
  cp.residual = rnorm;
  std::tie(cp.A, cp.B) = tangent_matrices(sys, base, eta);
  FormalStability fs = check_formal_stability(cp.A, cp.B);
  cp.spectrum = fs.spectrum;
  cp.stable = fs.stable;
  return cp;
}

std::vector<SlowBase> stability_sample_bases(const MechanicalSystem& sys, Rng& rng) {
  const DomainBox& box = sys.domain;
  const int s = sys.s;
  const int dims = 2 * s + 1;
  const int per_axis = dims <= 4 ? 9 : 5;

  std::vector<std::vector<Real>> axes;
  for (int i = 0; i < s; ++i) axes.push_back(axis_values(box.x_lo[i], box.x_hi[i], per_axis));
  for (int i = 0; i < s; ++i) axes.push_back(axis_values(box.v_lo[i], box.v_hi[i], per_axis));
  axes.push_back(axis_values(box.t_lo, box.t_hi, per_axis));

  std::vector<SlowBase> bases;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    SlowBase b;
    b.x.resize(s);
    b.v.resize(s);
    for (int i = 0; i < s; ++i) b.x[i] = axes[std::size_t(i)][idx[std::size_t(i)]];
    for (int i = 0; i < s; ++i) b.v[i] = axes[std::size_t(s + i)][idx[std::size_t(s + i)]];
    b.t = axes.back()[idx.back()];
    bases.push_back(std::move(b));

    int d = int(axes.size()) - 1;
    for (; d >= 0; --d) {
      if (++idx[std::size_t(d)] < axes[std::size_t(d)].size()) break;
      idx[std::size_t(d)] = 0;
    }
    if (d < 0) break;
  }

  for (int k = 0; k < 100; ++k) {
    DomainSample smp = random_sample(box, rng);
    bases.push_back({smp.x, smp.v, smp.t});
  }
  return bases;
}

StabilityCertificate spectral_gap(const MechanicalSystem& sys, const std::vector<SlowBase>& bases,
                                  const GuessFn& guess, int jobs) {
  if (bases.empty()) throw Error("spectral gap needs at least one sample");
  const int n = int(bases.size());
  const std::size_t count = bases.size();
  std::vector<std::optional<CriticalPoint>> points(count);
  std::vector<std::exception_ptr> failures(count);

  parallel_for(n, jobs <= 0 ? int(std::thread::hardware_concurrency()) : jobs, [&](int i) {
    try {
      const SlowBase& b = bases[std::size_t(i)];
      VecX g = guess ? guess(b) : VecX::Zero(sys.f);
      points[std::size_t(i)] = solve_critical_point(sys, b, g);
    } catch (...) {
      failures[std::size_t(i)] = std::current_exception();
    }
  });

  for (int i = 0; i < n; ++i)
    if (failures[std::size_t(i)]) std::rethrow_exception(failures[std::size_t(i)]);

  StabilityCertificate cert;
  cert.n_samples = n;
  cert.max_real = -std::numeric_limits<Real>::infinity();
  for (int i = 0; i < n; ++i) {
    const CriticalPoint& cp = *points[std::size_t(i)];
    Real re = cp.spectrum.real().maxCoeff();
    if (!cp.stable) throw UnstableSample(cp.base.x, cp.base.v, cp.base.t, re);
    if (re > cert.max_real) {
      cert.max_real = re;
      cert.worst = cp.base;
    }
  }
  cert.lambda = 0.95 * std::abs(cert.max_real);
  cert.margin = std::abs(cert.max_real) - cert.lambda;
  return cert;
}

std::string StabilityCertificate::to_json() const {
  nlohmann::json j;
  j["lambda"] = lambda;
  j["margin"] = margin;
  j["max_real"] = max_real;
  j["n_samples"] = n_samples;
  j["worst_point"] = {{"x", vec_json(worst.x)}, {"v", vec_json(worst.v)}, {"t", worst.t}};
  return j.dump(2) + "\n";
}

}  // namespace sfd
