#pragma once

#include <Eigen/Eigenvalues>
#include <functional>
#include <utility>
#include <vector>

#include "sfd/decomposition.hpp"

namespace sfd {

/// Slow-state base point: the fast coordinates are determined from these.
struct SlowBase {
  VecX x, v;
  Real t = 0.0;
};

/// Spectrum of the frozen fast oscillator eta'' + A eta' + B eta = 0,
/// obtained from its first-order companion matrix.  Stability requires every
/// real part to clear a margin of 1e-12 * (1 + |A| + |B|) below zero, so
/// marginal spectra classify as unstable.
struct FormalStability {
  Eigen::VectorXcd spectrum;
  Real max_real = 0.0;
  Real threshold = 0.0;
  bool stable = false;
};

FormalStability check_formal_stability(const MatX& A, const MatX& B);

/// A zero of the fast forcing at frozen slow state, together with the local
/// linearization and its stability verdict.
struct CriticalPoint {
  SlowBase base;
  VecX eta;
  Real residual = 0.0;
  MatX A, B;
  Eigen::VectorXcd spectrum;
  bool stable = false;
};

/// Damped Newton solve of P2(x, xdot, eta, 0, t; 0) = 0 from the given
/// guess.  Branch selection is guess-driven; no root is picked implicitly.
/// Residual target 1e-10 * (1 + initial residual), at most 50 iterations.
CriticalPoint solve_critical_point(const MechanicalSystem& sys, const SlowBase& base,
                                   const VecX& eta_guess);

/// A = -dP2/d(ydot) and B = -dP2/d(eta) at (x, xdot, eta, 0, t; 0).
std::pair<MatX, MatX> tangent_matrices(const MechanicalSystem& sys, const SlowBase& base,
                                       const VecX& eta);

using GuessFn = std::function<VecX(const SlowBase&)>;

/// Default sample set for stability certification: an inclusive tensor grid
/// over (x, xdot, t) — 9 points per axis up to 4 axes, 5 per axis beyond —
/// plus 100 uniform random interior points.
std::vector<SlowBase> stability_sample_bases(const MechanicalSystem& sys, Rng& rng);

/// Uniform decay-rate certificate over a sample of the slow domain:
/// every sampled real part lies below -lambda, with lambda set to 0.95 of
/// the least-stable sampled real part.
struct StabilityCertificate {
  Real lambda = 0.0;
  Real margin = 0.0;
  Real max_real = 0.0;
  SlowBase worst;
  int n_samples = 0;

  std::string to_json() const;
};

/// Solves every base point (zero eta guess unless one is supplied) and
/// certifies the spectral gap.  Throws UnstableSample at the first base, in
/// input order, whose frozen spectrum is not asymptotically stable.
StabilityCertificate spectral_gap(const MechanicalSystem& sys, const std::vector<SlowBase>& bases,
                                  const GuessFn& guess = {}, int jobs = 1);

}  // namespace sfd
