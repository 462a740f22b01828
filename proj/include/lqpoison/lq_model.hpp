#pragma once

#include "lqpoison/linalg.hpp"

namespace lqpoison {

/// Continuous-time plant x' = A x + B u with running cost x'Qx + u'Ru,
/// sampled every dt time units starting from x0.
struct LQSystem {
  Mat A;
  Mat B;
  Mat Q;
  Mat R;
  Vec x0;
  double dt = 0.0;

  long n() const { return A.rows(); }
  long m() const { return B.cols(); }
};

/**
 * Checks shapes, Q symmetric PSD, R symmetric PD, dt > 0 and the sampling
 * condition spectral_radius(A) * dt < 1 (LearnabilityError otherwise).
 * Stabilizability is not checked here; care_solve certifies it.
 */
void validate(const LQSystem& sys);

struct RiccatiSolution {
  Mat P;  // stabilizing solution of A'P + PA - PBR^{-1}B'P + Q = 0
  Mat K;  // u = K x, K = -R^{-1} B' P
  double residual = 0.0;  // ||CARE(P)||_F
  int iterations = 0;
};

struct CareOptions {
  double rel_tol = 1e-10;
  int max_iter = 100;
};

/// ||A'P + PA - PBR^{-1}B'P + Q||_F.
double care_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                     const Mat& p);

/**
 * Stabilizing solution of the continuous algebraic Riccati equation by
 * Newton-Kleinman iteration.
 *
 * The first gain is K = 0 when A is already Hurwitz, and otherwise comes from
 * Bass's shift: with beta large enough that A + beta I is anti-stable, the
 * Gramian Z of (A + beta I) Z + Z (A + beta I)' = 2 B B' gives the stabilizing
 * gain -B' Z^{-1}. Every Newton step then solves one Lyapunov equation.
 *
 * Throws StabilityError if no stabilizing start exists or the final
 * closed loop is not Hurwitz, ConvergenceError if the relative residual
 * ||CARE(P)||_F / (1 + ||P||_F) stays above `rel_tol` after `max_iter` steps.
 */
RiccatiSolution care_solve(const Mat& a, const Mat& b, const Mat& q,
                           const Mat& r, const CareOptions& opts = {});

/// K = -R^{-1} B' P. Throws ValidationError for a non-PD R.
Mat lqr_gain(const Mat& p, const Mat& b, const Mat& r);

/// True iff A + B K is Hurwitz.
bool is_stabilizing(const Mat& a, const Mat& b, const Mat& k);

/// x' P x.
double optimal_value(const Mat& p, const Vec& x);

}  // namespace lqpoison
