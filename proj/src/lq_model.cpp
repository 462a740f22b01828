#include "lqpoison/lq_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqpoison/errors.hpp"

namespace lqpoison {

namespace {

constexpr double kSymmetryTol = 1e-8;

void require_symmetric(const Mat& m, const char* what) {
  if ((m - m.transpose()).norm() > kSymmetryTol * (1.0 + m.norm())) {
    throw ValidationError(std::string(what) + " must be symmetric");
  }
}

Eigen::LLT<Mat> factor_pd(const Mat& r) {
  require_square(r, "R");
  require_symmetric(r, "R");
  Eigen::LLT<Mat> llt(symmetrize(r));
  if (llt.info() != Eigen::Success) {
    throw ValidationError("R must be positive definite");
  }
  return llt;
}

// Bass's construction. Returns an empty matrix when the shifted Gramian is
// singular (uncontrollable modes).
Mat bass_gain(const Mat& a, const Mat& b) {
  const long n = a.rows();
  Eigen::EigenSolver<Mat> es(a, false);
  const double min_re = es.eigenvalues().real().minCoeff();
  const double beta = std::max(0.0, -min_re) + 1.0;
  const Mat shifted = a + beta * Mat::Identity(n, n);
  // lyapunov_solve handles X' X + X X = -S forms: shifted Z + Z shifted' =
  // 2BB' is the same equation with A := shifted', S := -2BB'.
  const Mat z = lyapunov_solve(shifted.transpose(), -2.0 * b * b.transpose());
  Eigen::LLT<Mat> llt(z);
  if (llt.info() != Eigen::Success) return {};
  return -b.transpose() * llt.solve(Mat::Identity(n, n));
}

}  // namespace

void validate(const LQSystem& sys) {
  require_square(sys.A, "A");
  const long n = sys.A.rows();
  if (n == 0) throw DimensionError("A must be non-empty");
  if (sys.B.rows() != n || sys.B.cols() == 0) {
    throw DimensionError("B must have " + std::to_string(n) +
                         " rows and at least one column");
  }
  require_shape(sys.Q, n, n, "Q");
  require_shape(sys.R, sys.B.cols(), sys.B.cols(), "R");
  if (sys.x0.size() != n) {
    throw DimensionError("x0 must have " + std::to_string(n) + " entries");
  }
  if (!sys.A.allFinite() || !sys.B.allFinite() || !sys.Q.allFinite() ||
      !sys.R.allFinite() || !sys.x0.allFinite()) {
    throw ValidationError("system matrices must be finite");
  }
  if (!(sys.dt > 0.0) || !std::isfinite(sys.dt)) {
    throw ValidationError("dt must be positive");
  }
  require_symmetric(sys.Q, "Q");
  if (sym_eig(sys.Q).eigenvalues.minCoeff() < -1e-12 * (1.0 + sys.Q.norm())) {
    throw ValidationError("Q must be positive semidefinite");
  }
  factor_pd(sys.R);
  const double rho = spectral_radius(sys.A);
  if (rho * sys.dt >= 1.0) {
    throw LearnabilityError("spectral_radius(A) * dt = " +
                            std::to_string(rho * sys.dt) +
                            " >= 1; choose a smaller sampling interval");
  }
}

double care_residual(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                     const Mat& p) {
  const Mat rinv_bt_p = r.llt().solve(b.transpose() * p);
  return (a.transpose() * p + p * a - p * b * rinv_bt_p + q).norm();
}

Mat lqr_gain(const Mat& p, const Mat& b, const Mat& r) {
  require_square(p, "P");
  if (b.rows() != p.rows()) throw DimensionError("lqr_gain: B rows != P order");
  require_shape(r, b.cols(), b.cols(), "R");
  return -factor_pd(r).solve(b.transpose() * p);
}

bool is_stabilizing(const Mat& a, const Mat& b, const Mat& k) {
  require_square(a, "A");
  require_shape(b, a.rows(), b.cols(), "B");
  require_shape(k, b.cols(), a.rows(), "K");
  return spectral_abscissa(a + b * k) < 0.0;
}

double optimal_value(const Mat& p, const Vec& x) {
  require_shape(p, x.size(), x.size(), "P");
  return x.dot(p * x);
}

RiccatiSolution care_solve(const Mat& a, const Mat& b, const Mat& q,
                           const Mat& r, const CareOptions& opts) {
  require_square(a, "A");
  const long n = a.rows();
  if (b.rows() != n) throw DimensionError("care_solve: B rows != A order");
  require_shape(q, n, n, "Q");
  require_shape(r, b.cols(), b.cols(), "R");
  require_symmetric(q, "Q");
  const Eigen::LLT<Mat> r_llt = factor_pd(r);
  const Mat qs = symmetrize(q);
  const Mat rs = symmetrize(r);

  Mat k = Mat::Zero(b.cols(), n);
  if (spectral_abscissa(a) >= 0.0) {
    k = bass_gain(a, b);
    if (k.size() == 0 || spectral_abscissa(a + b * k) >= 0.0) {
      throw StabilityError(
          "care_solve: no stabilizing initial gain; (A, B) appears not "
          "stabilizable");
    }
  }

  RiccatiSolution sol;
  Mat p;
  double rel = INFINITY;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const Mat acl = a + b * k;
    p = lyapunov_solve(acl, qs + k.transpose() * rs * k);
    k = -r_llt.solve(b.transpose() * p);
    rel = care_residual(a, b, qs, rs, p) / (1.0 + p.norm());
    if (rel <= opts.rel_tol) {
      ++it;
      break;
    }
  }
  if (!(rel <= opts.rel_tol)) {
    throw ConvergenceError("care_solve: Newton-Kleinman stalled at relative "
                           "residual " + std::to_string(rel),
                           rel);
  }
  if (spectral_abscissa(a + b * k) >= 0.0) {
    throw StabilityError("care_solve: closed loop A + BK is not Hurwitz");
  }
  sol.P = p;
  sol.K = k;
  sol.residual = care_residual(a, b, qs, rs, p);
  sol.iterations = it;
  return sol;
}

}  // namespace lqpoison
