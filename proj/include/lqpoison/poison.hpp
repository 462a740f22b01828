#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "lqpoison/batch_data.hpp"
#include "lqpoison/linalg.hpp"

namespace lqpoison {

/// Attacker's inputs: the estimated model and costs, and the gain K_target
/// the learner should end up with.
struct AttackSpec {
  Mat Ahat;
  Mat Bhat;
  Mat Qhat;
  Mat Rhat;
  Mat Ktarget;  // m x n
};

void validate(const AttackSpec& spec);

struct AdmmConfig {
  double mu = 10.0;
  int n_iter = 500;
  double primal_tol = 1e-6;
  double inner_tol = 1e-8;
  int inner_max_iter = 5000;
  double divergence_threshold = 1e6;
};

struct AdmmState {
  Mat Atilde;
  Mat P;
  Mat Z1;  // n x n, dual of the Riccati block
  Mat Z2;  // m x n, dual of the gain block
  int iter = 0;
  double primal_residual = 0.0;  // ||W(Atilde, P)||_F
  double objective = 0.0;        // ||Atilde - Ahat||_F^2
  bool converged = false;
  std::vector<double> residual_history;
};

/// The two constraint blocks
///   W1 = Atilde'P + P(Atilde + Bhat K) + Qhat,  W2 = Rhat K + Bhat'P.
struct ConstraintResidual {
  Mat W1;
  Mat W2;
  double norm() const { return std::sqrt(W1.squaredNorm() + W2.squaredNorm()); }
};

ConstraintResidual constraint_residual(const AttackSpec& spec, const Mat& atilde,
                                       const Mat& p);

/// Atilde_0 = Ahat, Z = 0, P_0 the stabilizing CARE solution of
/// (Ahat, Bhat, Qhat, Rhat) or the identity when that solve fails.
AdmmState initial_state(const AttackSpec& spec);

/// Objective of the A-step at `atilde`:
///   ||atilde - Ahat||_F^2 + (mu/2) ||atilde'P + P atilde + C||_F^2,
///   C = P Bhat K + Qhat + Z1/mu.
double a_step_objective(const AdmmState& state, const AttackSpec& spec,
                        const AdmmConfig& cfg, const Mat& atilde);

/// Gradient of a_step_objective.
Mat a_step_gradient(const AdmmState& state, const AttackSpec& spec,
                    const AdmmConfig& cfg, const Mat& atilde);

/**
 * Exact minimizer of a_step_objective. With M the matrix of
 * X -> X'P + PX on column-major vec, the normal equations
 * (2I + mu M'M) vec(A) = 2 vec(Ahat) - mu M' vec(C) are positive definite and
 * solved by Cholesky.
 */
Mat a_step(const AdmmState& state, const AttackSpec& spec, const AdmmConfig& cfg);

/// ||Atilde'P + P(Atilde + Bhat K) + Qhat + Z1/mu||^2 +
/// ||Rhat K + Bhat'P + Z2/mu||^2 at the given P (Atilde from `state`).
double p_step_objective(const AdmmState& state, const AttackSpec& spec,
                        const AdmmConfig& cfg, const Mat& p);

/**
 * Minimizes p_step_objective over symmetric PSD P.
 *
 * The unconstrained least-squares minimizer over the symmetric parameters is
 * computed first and returned when it is already PSD. Otherwise accelerated
 * projected gradient runs from its PSD projection, with step 1/L for the
 * exact Lipschitz constant L and restart whenever the objective increases,
 * until the gradient-mapping norm is at most
 * inner_tol * (1 + ||grad at start||). Throws ConvergenceError after
 * inner_max_iter iterations.
 */
Mat p_step(const AdmmState& state, const AttackSpec& spec, const AdmmConfig& cfg);

/// Dual ascent Z <- Z + mu W(Atilde, P) at the state's current iterates.
std::pair<Mat, Mat> z_step(const AdmmState& state, const AttackSpec& spec,
                           const AdmmConfig& cfg);

/**
 * Alternates a_step, p_step and z_step until ||W||_F <= primal_tol or n_iter
 * iterations. Not reaching the tolerance is reported through
 * `converged = false`. Throws DivergenceError when the residual exceeds
 * cfg.divergence_threshold.
 */
AdmmState admm_solve(const AttackSpec& spec, const AdmmConfig& cfg);

/// Gain the learner derives from P: -Rhat^{-1} Bhat' P.
Mat induced_gain(const AttackSpec& spec, const Mat& p);

/**
 * Replays the recorded inputs through the exact zero-order-hold sampling of
 * (atilde, bhat) at d.dt from the original x_0. Inputs, costs, indices and
 * metadata are copied from `d` unchanged.
 */
BatchDataset generate_poisoned(const Mat& atilde, const Mat& bhat,
                               const BatchDataset& d);

struct AttackCost {
  double total = 0.0;
  std::vector<double> per_step;    // ||x'_k - x_k||^2
  std::vector<double> cumulative;  // running sum of per_step
};

/// Sum over k of ||poisoned x_k - original x_k||^2, with per-step and
/// cumulative series. Throws DimensionError when the datasets' N, n or dt
/// differ.
AttackCost attack_cost(const BatchDataset& original, const BatchDataset& poisoned);

struct AttackResult {
  Mat Atilde;
  Mat P;
  Mat Kinduced;       // -Rhat^{-1} Bhat' P
  double gain_error;  // ||Kinduced - Ktarget||_F
  BatchDataset poisoned;
  AttackCost cost;
  double attack_cost = 0.0;
  bool converged = false;
  std::vector<double> residual_history;
  AttackSpec spec;
};

}  // namespace lqpoison
