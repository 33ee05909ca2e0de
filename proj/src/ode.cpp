#include "sfd/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sfd/util.hpp"

namespace sfd::ode {
namespace {

bool finite(const VecX& v) { return v.allFinite(); }

Real error_norm(const VecX& err, const VecX& y0, const VecX& y1, Real atol, Real rtol) {
  Real acc = 0.0;
  for (int i = 0; i < err.size(); ++i) {
    Real sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    Real e = err[i] / sc;
    acc += e * e;
  }
  return std::sqrt(acc / std::max<int>(1, err.size()));
}

struct Collector {
  Trajectory traj;
  void push(Real t, const VecX& y, const VecX& f) {
    traj.t.push_back(t);
    traj.y.push_back(y);
    traj.deriv.push_back(f);
  }
};

// ---------------------------------------------------------------------------
// Dormand–Prince 5(4)

struct Dopri {
  static constexpr int kStages = 7;
  Real a[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  Real c[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
  // difference between the 5th and embedded 4th order weights
  Real e[7] = {35.0 / 384 - 5179.0 / 57600, 0.0,           500.0 / 1113 - 7571.0 / 16695,
               125.0 / 192 - 393.0 / 640,   -2187.0 / 6784 + 92097.0 / 339200,
               11.0 / 84 - 187.0 / 2100,    -1.0 / 40};
};

Trajectory run_dopri(const Rhs& f, VecX y, Real t0, Real t1, const IntegrateOptions& opts) {
  static const Dopri tab;
  const Real dir = (t1 >= t0) ? 1.0 : -1.0;
  const Real span = std::abs(t1 - t0);
  const Real hmax = (opts.hmax > 0 ? opts.hmax : span);
  const Real hmin = 1e-14 * std::max({std::abs(t0), std::abs(t1), 1.0});

  Collector out;
  out.traj.method = "adaptive-explicit";
  out.traj.rtol = opts.rtol;
  out.traj.atol = opts.atol;

  Real t = t0;
  VecX f0 = f(t, y);
  ++out.traj.n_rhs;
  if (!finite(f0)) throw RhsFailure(t, "nonfinite derivative at the initial state");
  out.push(t, y, f0);

  Real h = (opts.h0 > 0 ? opts.h0 : std::min(1e-2 * span + 1e-12, hmax));
  Real err_prev = 1.0;
  std::vector<VecX> k(Dopri::kStages);

  for (std::size_t step = 0; step < opts.max_steps; ++step) {
    if (dir * (t1 - t) <= 0) return out.traj;
    h = std::min(h, hmax);
    if (h < hmin) throw StepSizeUnderflow(t, y, /*stiffness_suspected=*/true);
    if (h > dir * (t1 - t)) h = dir * (t1 - t);

    k[0] = f0;
    bool bad = false;
    for (int i = 1; i < Dopri::kStages; ++i) {
      VecX yi = y;
      for (int j = 0; j < i; ++j)
        if (tab.a[i][j] != 0.0) yi += dir * h * tab.a[i][j] * k[j];
      k[i] = f(t + dir * h * tab.c[i], yi);
      ++out.traj.n_rhs;
      if (!finite(k[i])) {
        bad = true;
        break;
      }
    }
    if (bad) {
      h *= 0.25;
      ++out.traj.n_rejected;
      continue;
    }

    VecX y1 = y;
    for (int j = 0; j < Dopri::kStages - 1; ++j)
      if (tab.a[6][j] != 0.0) y1 += dir * h * tab.a[6][j] * k[j];
    VecX err = VecX::Zero(y.size());
    for (int j = 0; j < Dopri::kStages; ++j)
      if (tab.e[j] != 0.0) err += (dir * h * tab.e[j]) * k[j];

    Real errn = error_norm(err, y, y1, opts.atol, opts.rtol);
    if (!std::isfinite(errn)) errn = 1e10;

    if (errn <= 1.0) {
      t += dir * h;
      y = y1;
      f0 = k[6];  // FSAL
      out.push(t, y, f0);
      ++out.traj.n_accepted;
      // PI controller (0.7/0.4 over order 5)
      Real fac = std::pow(std::max(errn, 1e-10), -0.7 / 5.0) *
                 std::pow(std::max(err_prev, 1e-10), 0.4 / 5.0);
      h *= std::clamp(0.9 * fac, 0.2, 5.0);
      err_prev = std::max(errn, 1e-10);
    } else {
      ++out.traj.n_rejected;
      h *= std::clamp(0.9 * std::pow(errn, -1.0 / 5.0), 0.1, 0.9);
    }
  }
  throw Error("step budget exhausted before reaching the end of the span");
}

// ---------------------------------------------------------------------------
// Radau IIA, three stages (order 5), stiffly accurate.  The tableau is built
// from the collocation conditions at startup instead of hard-coded decimals.

struct Radau {
  Real c[3];
  Real a[3][3];
  Radau() {
    const Real s6 = std::sqrt(6.0);
    c[0] = (4.0 - s6) / 10.0;
    c[1] = (4.0 + s6) / 10.0;
    c[2] = 1.0;
    // Row i solves sum_j a_ij c_j^{k-1} = c_i^k / k for k = 1..3.
    Eigen::Matrix3d T;
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) T(k, j) = std::pow(c[j], k);
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d r;
      for (int k = 0; k < 3; ++k) r[k] = std::pow(c[i], k + 1) / (k + 1);
      Eigen::Vector3d ai = T.fullPivLu().solve(r);
      for (int j = 0; j < 3; ++j) a[i][j] = ai[j];
    }
  }
};

const Radau& radau_tableau() {
  static const Radau tab;
  return tab;
}

MatX numeric_jacobian(const Rhs& f, Real t, const VecX& y, const VecX& f0, std::size_t& n_rhs) {
  const int n = int(y.size());
  MatX J(n, n);
  for (int j = 0; j < n; ++j) {
    Real h = std::sqrt(kMachineEps) * std::max(1.0, std::abs(y[j]));
    VecX yp = y;
    yp[j] += h;
    VecX fp = f(t, yp);
    ++n_rhs;
    J.col(j) = (fp - f0) / h;
  }
  return J;
}

/// One Radau step of size h (signed).  Returns false when the stage Newton
/// iteration fails to converge, in which case the caller shrinks h.
bool radau_step(const Rhs& f, Real t, const VecX& y, Real h, const MatX& J, VecX& y_out,
                std::size_t& n_rhs, Real newton_tol) {
  const Radau& tab = radau_tableau();
  const int n = int(y.size());

  // Unknowns are the stage states Y_i; G(Y) = Y_i - y - h sum_j a_ij f(Y_j).
  MatX M = MatX::Identity(3 * n, 3 * n);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) M.block(i * n, j * n, n, n) -= h * tab.a[i][j] * J;
  Eigen::PartialPivLU<MatX> lu(M);

  VecX f0 = f(t, y);
  ++n_rhs;
  std::vector<VecX> Y(3);
  for (int i = 0; i < 3; ++i) Y[i] = y + (h * tab.c[i]) * f0;

  std::vector<VecX> F(3);
  for (int iter = 0; iter < 12; ++iter) {
    VecX G(3 * n);
    for (int i = 0; i < 3; ++i) {
      F[i] = f(t + h * tab.c[i], Y[i]);
      ++n_rhs;
      if (!finite(F[i])) return false;
    }
    for (int i = 0; i < 3; ++i) {
      VecX gi = Y[i] - y;
      for (int j = 0; j < 3; ++j) gi -= h * tab.a[i][j] * F[j];
      G.segment(i * n, n) = gi;
    }
    VecX d = lu.solve(G);
    for (int i = 0; i < 3; ++i) Y[i] -= d.segment(i * n, n);
    Real dn = 0.0;
    for (int i = 0; i < 3; ++i)
      dn = std::max(dn, d.segment(i * n, n).cwiseAbs().maxCoeff() /
                            (1.0 + Y[i].cwiseAbs().maxCoeff()));
    if (dn < newton_tol) {
      y_out = Y[2];  // c3 = 1: stiffly accurate
      return finite(y_out);
    }
  }
  return false;
}

Trajectory run_radau(const Rhs& f, VecX y, Real t0, Real t1, const IntegrateOptions& opts) {
  const Real dir = (t1 >= t0) ? 1.0 : -1.0;
  const Real span = std::abs(t1 - t0);
  const Real hmax = (opts.hmax > 0 ? opts.hmax : span);
  const Real hmin = 1e-14 * std::max({std::abs(t0), std::abs(t1), 1.0});
  const Real newton_tol = 1e-3 * std::min(opts.rtol, 1.0);

  Collector out;
  out.traj.method = "adaptive-implicit";
  out.traj.rtol = opts.rtol;
  out.traj.atol = opts.atol;

  Real t = t0;
  VecX f0 = f(t, y);
  ++out.traj.n_rhs;
  if (!finite(f0)) throw RhsFailure(t, "nonfinite derivative at the initial state");
  out.push(t, y, f0);

  Real h = (opts.h0 > 0 ? opts.h0 : std::min(1e-3 * span + 1e-12, hmax));

  for (std::size_t step = 0; step < opts.max_steps; ++step) {
    if (dir * (t1 - t) <= 0) return out.traj;
    h = std::min(h, hmax);
    if (h < hmin) throw StepSizeUnderflow(t, y, /*stiffness_suspected=*/false);
    if (h > dir * (t1 - t)) h = dir * (t1 - t);

    MatX J = numeric_jacobian(f, t, y, f0, out.traj.n_rhs);

    // Error control by step doubling: one step of h against two of h/2,
    // Richardson-extrapolated (the method is order 5).
    VecX y_big, y_h1, y_h2;
    bool ok = radau_step(f, t, y, dir * h, J, y_big, out.traj.n_rhs, newton_tol) &&
              radau_step(f, t, y, dir * h / 2, J, y_h1, out.traj.n_rhs, newton_tol) &&
              radau_step(f, t + dir * h / 2, y_h1, dir * h / 2, J, y_h2, out.traj.n_rhs,
                         newton_tol);
    if (!ok) {
      h *= 0.25;
      ++out.traj.n_rejected;
      continue;
    }

    VecX diff = y_h2 - y_big;
    Real errn = error_norm(diff / 31.0, y, y_h2, opts.atol, opts.rtol);
    if (!std::isfinite(errn)) errn = 1e10;

    if (errn <= 1.0) {
      t += dir * h;
      y = y_h2 + diff / 31.0;
      f0 = f(t, y);
      ++out.traj.n_rhs;
      if (!finite(f0)) throw RhsFailure(t, "nonfinite derivative");
      out.push(t, y, f0);
      ++out.traj.n_accepted;
      h *= std::clamp(0.9 * std::pow(std::max(errn, 1e-12), -1.0 / 6.0), 0.3, 4.0);
    } else {
      ++out.traj.n_rejected;
      h *= std::clamp(0.9 * std::pow(errn, -1.0 / 6.0), 0.1, 0.9);
    }
  }
  throw Error("step budget exhausted before reaching the end of the span");
}

// ---------------------------------------------------------------------------
// Classical RK4 with a fixed step, for reference solutions.

Trajectory run_rk4(const Rhs& f, VecX y, Real t0, Real t1, const IntegrateOptions& opts) {
  Collector out;
  out.traj.method = "fixed-reference";

  const Real span = t1 - t0;
  const long n = std::max(1L, long(std::ceil(std::abs(span) / opts.fixed_step)));
  const Real h = span / Real(n);

  Real t = t0;
  VecX f0 = f(t, y);
  ++out.traj.n_rhs;
  out.push(t, y, f0);
  for (long i = 0; i < n; ++i) {
    VecX k1 = f0;
    VecX k2 = f(t + h / 2, y + (h / 2) * k1);
    VecX k3 = f(t + h / 2, y + (h / 2) * k2);
    VecX k4 = f(t + h, y + h * k3);
    out.traj.n_rhs += 3;
    y += (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4);
    t = t0 + (i + 1) * h;
    if (!finite(y)) throw RhsFailure(t, "state became nonfinite");
    f0 = f(t, y);
    ++out.traj.n_rhs;
    out.push(t, y, f0);
    ++out.traj.n_accepted;
  }
  return out.traj;
}

}  // namespace

Trajectory integrate(const Rhs& f, const VecX& y0, Real t0, Real t1,
                     const IntegrateOptions& opts) {
  if (!finite(y0)) throw RhsFailure(t0, "nonfinite initial state");
  const bool backward = t1 < t0;
  auto oriented = [&](Trajectory tr) {
    tr.backward = backward;
    if (backward) {
      std::reverse(tr.t.begin(), tr.t.end());
      std::reverse(tr.y.begin(), tr.y.end());
      std::reverse(tr.deriv.begin(), tr.deriv.end());
    }
    return tr;
  };
  switch (opts.method) {
    case Method::adaptive_explicit:
      return oriented(run_dopri(f, y0, t0, t1, opts));
    case Method::adaptive_implicit:
      return oriented(run_radau(f, y0, t0, t1, opts));
    case Method::fixed_reference:
      return oriented(run_rk4(f, y0, t0, t1, opts));
  }
  throw Error("unknown integration method");
}

VecX Trajectory::sample(Real ti) const {
  if (t.empty()) throw Error("cannot sample an empty trajectory");
  if (ti <= t.front()) return y.front();
  if (ti >= t.back()) return y.back();
  auto it = std::upper_bound(t.begin(), t.end(), ti);
  std::size_t k = std::size_t(it - t.begin()) - 1;
  Real h = t[k + 1] - t[k];
  Real s = (ti - t[k]) / h;
  Real s2 = s * s, s3 = s2 * s;
  // cubic Hermite basis
  Real h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  Real h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * y[k] + (h10 * h) * deriv[k] + h01 * y[k + 1] + (h11 * h) * deriv[k + 1];
}

std::string trajectory_csv(const Trajectory& traj, int s, int f, bool with_fast) {
  std::ostringstream os;
  os << "t";
  for (int i = 1; i <= s; ++i) os << ",x" << i;
  for (int i = 1; i <= s; ++i) os << ",dx" << i;
  if (with_fast) {
    for (int i = 1; i <= f; ++i) os << ",y" << i;
    for (int i = 1; i <= f; ++i) os << ",dy" << i;
  }
  os << "\n";
  const int cols = with_fast ? 2 * (s + f) : 2 * s;
  for (std::size_t r = 0; r < traj.t.size(); ++r) {
    os << format_sig17(traj.t[r]);
    for (int c = 0; c < cols; ++c) os << "," << format_sig17(traj.y[r][c]);
    os << "\n";
  }
  return os.str();
}

}  // namespace sfd::ode
