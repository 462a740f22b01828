#pragma once

#include <filesystem>
#include <optional>

#include "lqpoison/batch_data.hpp"
#include "lqpoison/linalg.hpp"

namespace lqpoison {

/// Discrete-time model x_{k+1} = F x_k + G u_k fitted to a dataset.
struct DiscreteModel {
  Mat F;
  Mat G;
  double residual = 0.0;  // mean squared one-step prediction error
};

struct SysIdEstimate {
  Mat Ahat;
  Mat Bhat;
  std::optional<Mat> Qhat;
  std::optional<Mat> Rhat;
  int series_terms = 0;
  double dt = 0.0;
};

/// Progress of the matrix-log series: `accum` approximates
/// log(I + L) L^{-1} = I - L/2 + L^2/3 - ...
struct LogSeriesState {
  Mat L;      // F - I
  Mat term;   // latest series term M_i
  Mat accum;  // partial sum
  int iter = 0;
};

/// Default stopping threshold of the log series.
inline constexpr double kDefaultLogEps = 0.01;
inline constexpr int kDefaultLogMaxIter = 1000;

/**
 * Least-squares fit of [F G] over the N - 1 transitions of `d`, solved by QR
 * on the stacked regressor Z (rows z_k' = [x_k' u_k']). Throws
 * IdentifiabilityError when Z loses column rank; its directions() are the
 * right singular vectors of Z spanning the unexcited subspace.
 */
DiscreteModel estimate_fg(const BatchDataset& d);

/**
 * One step of the series: M_{i+1} = -((i+1)/(i+2)) L M_i, accum += M_{i+1}.
 */
void log_series_step(LogSeriesState& s);

/// Continuous model recovered from (F, G) through the truncated series.
struct ContinuousModel {
  Mat Ahat;
  Mat Bhat;
  int series_terms = 0;
};

/**
 * Indirect discrete-to-continuous conversion. The series for
 * log(I + L) L^{-1}, L = F - I, is summed until the Frobenius norm of the
 * increment drops to `eps` or `max_iter` terms were added; then
 * Ahat = accum L / dt and Bhat = accum G / dt.
 *
 * Throws ValidationError (divergence) when spectral_radius(L) >= 1.
 */
ContinuousModel log_indirect(const Mat& f, const Mat& g, double dt,
                             double eps = kDefaultLogEps,
                             int max_iter = kDefaultLogMaxIter);

struct CostEstimate {
  Mat Qhat;
  Mat Rhat;
};

/**
 * Cost-matrix regression c_k ~ x_k'Q x_k + u_k'R u_k over the symmetric
 * parameters of Q and R (off-diagonal features carry weight 2). Qhat is
 * projected onto the PSD cone; a non-PD Rhat is an EstimationError and a
 * rank-deficient feature matrix an IdentifiabilityError.
 */
CostEstimate estimate_qr(const BatchDataset& d);

/// estimate_fg followed by log_indirect, plus estimate_qr when requested.
SysIdEstimate identify(const BatchDataset& d, double eps = kDefaultLogEps,
                       bool with_qr = false,
                       int max_iter = kDefaultLogMaxIter);

void model_write(const SysIdEstimate& est, const std::filesystem::path& path);
SysIdEstimate model_read(const std::filesystem::path& path);

}  // namespace lqpoison
