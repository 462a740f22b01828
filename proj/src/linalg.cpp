#include "lqpoison/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqpoison/errors.hpp"

namespace lqpoison {

namespace {

constexpr int kTaylorTerms = 20;
constexpr double kScaledNormBound = 0.5;
constexpr double kSymmetryTol = 1e-8;

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

void require_shape(const Mat& m, long rows, long cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " +
                         std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + shape_str(m));
  }
}

void require_square(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         shape_str(m));
  }
}

double frobenius(const Mat& m) { return m.norm(); }

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

Mat expm(const Mat& m, double scale) {
  require_square(m, "expm");
  const long n = m.rows();
  if (n == 0) return Mat(0, 0);
  if (!m.allFinite() || !std::isfinite(scale)) {
    throw ValidationError("expm: non-finite input");
  }

  Mat x = m * scale;
  // 1-norm: max absolute column sum.
  const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > kScaledNormBound) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kScaledNormBound)));
    x /= std::ldexp(1.0, squarings);
  }

  // Horner form of sum_{k=0}^{K} x^k / k!.
  const Mat id = Mat::Identity(n, n);
  Mat result = id;
  for (int k = kTaylorTerms; k >= 1; --k) {
    result = id + (x * result) / static_cast<double>(k);
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

ZohPair zoh_pair(const Mat& a, const Mat& b, double dt) {
  require_square(a, "zoh_pair A");
  if (b.rows() != a.rows()) {
    throw DimensionError("zoh_pair: B has " + std::to_string(b.rows()) +
                         " rows, A is " + shape_str(a));
  }
  if (!(dt > 0.0)) throw ValidationError("zoh_pair: dt must be positive");

  const long n = a.rows();
  const long m = b.cols();
  Mat aug = Mat::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = a;
  aug.topRightCorner(n, m) = b;
  const Mat phi = expm(aug, dt);
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, m)};
}

long numerical_rank(const Mat& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  const long k = std::min(a.rows(), a.cols());
  const auto r = qr.matrixQR();
  const double lead = std::abs(r(0, 0));
  if (lead == 0.0 || !std::isfinite(lead)) return 0;
  long rank = 0;
  for (long i = 0; i < k; ++i) {
    if (std::abs(r(i, i)) > rel_tol * lead) ++rank;
  }
  return rank;
}

Mat lstsq(const Mat& a, const Mat& b, double rel_tol) {
  if (a.rows() != b.rows()) {
    throw DimensionError("lstsq: A is " + shape_str(a) + ", b is " +
                         shape_str(b));
  }
  if (a.rows() < a.cols()) {
    throw DimensionError("lstsq: underdetermined system " + shape_str(a));
  }
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  const long rank = numerical_rank(a, rel_tol);
  if (rank < a.cols()) {
    throw RankDeficiencyError("lstsq: rank " + std::to_string(rank) + " < " +
                                  std::to_string(a.cols()) + " columns",
                              rank, a.cols());
  }
  return qr.solve(b);
}

SymEig sym_eig(const Mat& m) {
  require_square(m, "sym_eig");
  const double asym = (m - m.transpose()).norm();
  if (!(asym <= kSymmetryTol * (1.0 + m.norm()))) {
    throw ValidationError("sym_eig: matrix is not symmetric (||M - M^T||_F = " +
                          std::to_string(asym) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
  return {es.eigenvalues(), es.eigenvectors()};
}

Mat psd_project(const Mat& m) {
  const SymEig eig = sym_eig(m);
  const Vec clipped = eig.eigenvalues.cwiseMax(0.0);
  return symmetrize(eig.eigenvectors * clipped.asDiagonal() *
                    eig.eigenvectors.transpose());
}

double spectral_abscissa(const Mat& m) {
  require_square(m, "spectral_abscissa");
  if (m.size() == 0) return -INFINITY;
  Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

double spectral_radius(const Mat& m) {
  require_square(m, "spectral_radius");
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Mat lyapunov_solve(const Mat& a, const Mat& s) {
  require_square(a, "lyapunov_solve A");
  require_shape(s, a.rows(), a.cols(), "lyapunov_solve S");
  const long n = a.rows();
  const Mat id = Mat::Identity(n, n);
  const Mat at = a.transpose();
  // Column-major vec: vec(A^T X) = (I kron A^T) vec(X),
  // vec(X A) = (A^T kron I) vec(X).
  Mat op = Mat::Zero(n * n, n * n);
  for (long j = 0; j < n; ++j) {
    for (long i = 0; i < n; ++i) {
      op.block(j * n, i * n, n, n) += at(j, i) * id;
      if (i == j) op.block(j * n, i * n, n, n) += at;
    }
  }
  Eigen::FullPivLU<Mat> lu(op);
  if (!lu.isInvertible()) {
    throw ValidationError(
        "lyapunov_solve: operator is singular (A has eigenvalues summing to "
        "zero)");
  }
  const Vec rhs = -Eigen::Map<const Vec>(s.data(), n * n);
  const Vec x = lu.solve(rhs);
  return symmetrize(Eigen::Map<const Mat>(x.data(), n, n));
}

}  // namespace lqpoison
