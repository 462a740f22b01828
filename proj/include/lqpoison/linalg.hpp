#pragma once

#include <Eigen/Dense>

namespace lqpoison {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct SymEig {
  Vec eigenvalues;   // ascending
  Mat eigenvectors;  // orthonormal columns
};

/**
 * Matrix exponential e^{M * scale}.
 *
 * Scaling and squaring: the argument is halved until its 1-norm is at most
 * 0.5, a 20-term Taylor polynomial is evaluated, and the result is squared
 * back up.
 */
Mat expm(const Mat& m, double scale = 1.0);

/// Zero-order-hold pair (F, G) of (A, B) at sampling interval dt.
struct ZohPair {
  Mat F;
  Mat G;
};

/**
 * F = e^{A dt} and G = (int_0^dt e^{A tau} dtau) B, both read off the
 * exponential of the block matrix [[A, B], [0, 0]] * dt.
 */
ZohPair zoh_pair(const Mat& a, const Mat& b, double dt);

/**
 * Least-squares solution argmin_X ||A X - B||_F by column-pivoted Householder
 * QR. Throws RankDeficiencyError when the numerical rank (pivots below
 * `rel_tol * |r_00|`) is less than cols(A).
 */
Mat lstsq(const Mat& a, const Mat& b, double rel_tol = 1e-10);

/// Numerical rank of A under the same pivot rule as lstsq.
long numerical_rank(const Mat& a, double rel_tol = 1e-10);

/// Symmetric eigendecomposition. The input is symmetrized first; an
/// asymmetry above 1e-8 * (1 + ||M||_F) is rejected with ValidationError.
SymEig sym_eig(const Mat& m);

/// Nearest (Frobenius) positive semidefinite matrix: negative eigenvalues are
/// clipped to zero.
Mat psd_project(const Mat& m);

/// Max real part over the eigenvalues of a square matrix.
double spectral_abscissa(const Mat& m);

/// Max modulus over the eigenvalues of a square matrix.
double spectral_radius(const Mat& m);

double frobenius(const Mat& m);

/// Symmetric part (M + M^T) / 2.
Mat symmetrize(const Mat& m);

/// Throws DimensionError unless m is rows x cols.
void require_shape(const Mat& m, long rows, long cols, const char* what);

void require_square(const Mat& m, const char* what);

/// Solves A^T X + X A = -S for X through the vectorized n^2 x n^2 system
/// (I kron A^T + A^T kron I) vec(X) = -vec(S). The result is symmetrized.
Mat lyapunov_solve(const Mat& a, const Mat& s);

}  // namespace lqpoison
