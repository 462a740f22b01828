#include "lqpoison/poison.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "lqpoison/errors.hpp"
#include "lqpoison/lq_model.hpp"

namespace lqpoison {

namespace {

Vec vec(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

Mat unvec(const Vec& v, long rows, long cols) {
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

// Orthonormal basis of symmetric n x n matrices: E_ii and (E_ij + E_ji)/sqrt2.
std::vector<Mat> sym_basis(long n) {
  std::vector<Mat> basis;
  const double s = 1.0 / std::sqrt(2.0);
  for (long i = 0; i < n; ++i) {
    for (long j = i; j < n; ++j) {
      Mat e = Mat::Zero(n, n);
      if (i == j) {
        e(i, i) = 1.0;
      } else {
        e(i, j) = e(j, i) = s;
      }
      basis.push_back(std::move(e));
    }
  }
  return basis;
}

Vec sym_coords(const Mat& p, const std::vector<Mat>& basis) {
  Vec c(static_cast<long>(basis.size()));
  for (size_t i = 0; i < basis.size(); ++i) {
    c(static_cast<long>(i)) = (basis[i].array() * p.array()).sum();
  }
  return c;
}

Mat from_sym_coords(const Vec& c, const std::vector<Mat>& basis, long n) {
  Mat p = Mat::Zero(n, n);
  for (size_t i = 0; i < basis.size(); ++i) p += c(static_cast<long>(i)) * basis[i];
  return p;
}

// Least-squares data of the P-step: objective ||N c + d||^2 over symmetric
// coordinates c.
struct PStepSystem {
  std::vector<Mat> basis;
  Mat N;
  Vec d;
};

PStepSystem p_step_system(const AdmmState& state, const AttackSpec& spec,
                          const AdmmConfig& cfg) {
  const long n = spec.Ahat.rows();
  const long m = spec.Bhat.cols();
  const Mat& at = state.Atilde;
  const Mat acl = at + spec.Bhat * spec.Ktarget;

  PStepSystem sys;
  sys.basis = sym_basis(n);
  sys.N.resize(n * n + m * n, static_cast<long>(sys.basis.size()));
  for (size_t i = 0; i < sys.basis.size(); ++i) {
    const Mat& e = sys.basis[i];
    const long col = static_cast<long>(i);
    sys.N.col(col).head(n * n) = vec(at.transpose() * e + e * acl);
    sys.N.col(col).tail(m * n) = vec(spec.Bhat.transpose() * e);
  }
  sys.d.resize(n * n + m * n);
  sys.d.head(n * n) = vec(spec.Qhat + state.Z1 / cfg.mu);
  sys.d.tail(m * n) = vec(spec.Rhat * spec.Ktarget + state.Z2 / cfg.mu);
  return sys;
}

}  // namespace

void validate(const AttackSpec& spec) {
  require_square(spec.Ahat, "Ahat");
  const long n = spec.Ahat.rows();
  if (spec.Bhat.rows() != n || spec.Bhat.cols() == 0) {
    throw DimensionError("Bhat must have " + std::to_string(n) + " rows");
  }
  const long m = spec.Bhat.cols();
  require_shape(spec.Qhat, n, n, "Qhat");
  require_shape(spec.Rhat, m, m, "Rhat");
  require_shape(spec.Ktarget, m, n, "Ktarget");
  if (sym_eig(spec.Qhat).eigenvalues.minCoeff() < -1e-10 * (1.0 + spec.Qhat.norm())) {
    throw ValidationError("Qhat must be positive semidefinite");
  }
  if (sym_eig(spec.Rhat).eigenvalues.minCoeff() <= 0.0) {
    throw ValidationError("Rhat must be positive definite");
  }
}

ConstraintResidual constraint_residual(const AttackSpec& spec, const Mat& atilde,
                                       const Mat& p) {
  return {atilde.transpose() * p + p * (atilde + spec.Bhat * spec.Ktarget) + spec.Qhat,
          spec.Rhat * spec.Ktarget + spec.Bhat.transpose() * p};
}

AdmmState initial_state(const AttackSpec& spec) {
  const long n = spec.Ahat.rows();
  const long m = spec.Bhat.cols();
  AdmmState s;
  s.Atilde = spec.Ahat;
  try {
    s.P = care_solve(spec.Ahat, spec.Bhat, spec.Qhat, spec.Rhat).P;
  } catch (const Error&) {
    s.P = Mat::Identity(n, n);
  }
  s.Z1 = Mat::Zero(n, n);
  s.Z2 = Mat::Zero(m, n);
  s.primal_residual = constraint_residual(spec, s.Atilde, s.P).norm();
  return s;
}

double a_step_objective(const AdmmState& state, const AttackSpec& spec,
                        const AdmmConfig& cfg, const Mat& atilde) {
  const Mat& p = state.P;
  const Mat c = p * spec.Bhat * spec.Ktarget + spec.Qhat + state.Z1 / cfg.mu;
  return (atilde - spec.Ahat).squaredNorm() +
         0.5 * cfg.mu * (atilde.transpose() * p + p * atilde + c).squaredNorm();
}

Mat a_step_gradient(const AdmmState& state, const AttackSpec& spec,
                    const AdmmConfig& cfg, const Mat& atilde) {
  const Mat& p = state.P;
  const Mat c = p * spec.Bhat * spec.Ktarget + spec.Qhat + state.Z1 / cfg.mu;
  const Mat y = atilde.transpose() * p + p * atilde + c;
  // Adjoint of X -> X'P + PX is Y -> P Y' + P' Y.
  return 2.0 * (atilde - spec.Ahat) +
         cfg.mu * (p * y.transpose() + p.transpose() * y);
}

Mat a_step(const AdmmState& state, const AttackSpec& spec, const AdmmConfig& cfg) {
  const long n = spec.Ahat.rows();
  const Mat& p = state.P;
  Mat op(n * n, n * n);
  for (long j = 0; j < n; ++j) {
    for (long i = 0; i < n; ++i) {
      Mat e = Mat::Zero(n, n);
      e(i, j) = 1.0;
      op.col(j * n + i) = vec(e.transpose() * p + p * e);
    }
  }
  const Mat c = p * spec.Bhat * spec.Ktarget + spec.Qhat + state.Z1 / cfg.mu;
  const Mat lhs = 2.0 * Mat::Identity(n * n, n * n) + cfg.mu * op.transpose() * op;
  const Vec rhs = 2.0 * vec(spec.Ahat) - cfg.mu * op.transpose() * vec(c);
  Eigen::LLT<Mat> llt(lhs);
  return unvec(llt.solve(rhs), n, n);
}

double p_step_objective(const AdmmState& state, const AttackSpec& spec,
                        const AdmmConfig& cfg, const Mat& p) {
  const ConstraintResidual w = constraint_residual(spec, state.Atilde, p);
  return (w.W1 + state.Z1 / cfg.mu).squaredNorm() +
         (w.W2 + state.Z2 / cfg.mu).squaredNorm();
}

Mat p_step(const AdmmState& state, const AttackSpec& spec, const AdmmConfig& cfg) {
  const long n = spec.Ahat.rows();
  const PStepSystem sys = p_step_system(state, spec, cfg);

  Eigen::CompleteOrthogonalDecomposition<Mat> cod(sys.N);
  const Vec c_free = cod.solve(-sys.d);
  const Mat p_free = symmetrize(from_sym_coords(c_free, sys.basis, n));
  if (sym_eig(p_free).eigenvalues.minCoeff() >= 0.0) return p_free;

  // Objective f(c) = ||N c + d||^2, gradient 2 N'(N c + d), Hessian 2 N'N.
  const Mat h = 2.0 * sys.N.transpose() * sys.N;
  const Vec lin = 2.0 * sys.N.transpose() * sys.d;
  const double lip = Eigen::SelfAdjointEigenSolver<Mat>(h).eigenvalues().maxCoeff();
  if (!(lip > 0.0)) return psd_project(p_free);
  const double step = 1.0 / lip;

  auto objective = [&](const Vec& c) { return (sys.N * c + sys.d).squaredNorm(); };
  auto grad = [&](const Vec& c) -> Vec { return h * c + lin; };
  auto project = [&](const Vec& c) -> Vec {
    return sym_coords(psd_project(from_sym_coords(c, sys.basis, n)), sys.basis);
  };

  Vec x = project(c_free);
  Vec y = x;
  double t = 1.0;
  double fx = objective(x);
  const double tol = cfg.inner_tol * (1.0 + grad(x).norm());
  double stationarity = INFINITY;
  for (int it = 0; it < cfg.inner_max_iter; ++it) {
    const Vec gx = grad(x);
    stationarity = (x - project(x - step * gx)).norm() / step;
    if (stationarity <= tol) return symmetrize(from_sym_coords(x, sys.basis, n));

    const Vec x_next = project(y - step * grad(y));
    const double f_next = objective(x_next);
    if (f_next > fx) {
      // Momentum overshot: restart from a plain projected-gradient step.
      t = 1.0;
      y = x;
      const Vec x_pg = project(x - step * gx);
      fx = objective(x_pg);
      x = x_pg;
      y = x;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x_next + ((t - 1.0) / t_next) * (x_next - x);
    x = x_next;
    fx = f_next;
    t = t_next;
  }
  throw ConvergenceError("p_step: projected gradient hit " +
                             std::to_string(cfg.inner_max_iter) +
                             " iterations at stationarity " +
                             std::to_string(stationarity),
                         stationarity);
}

std::pair<Mat, Mat> z_step(const AdmmState& state, const AttackSpec& spec,
                           const AdmmConfig& cfg) {
  const ConstraintResidual w = constraint_residual(spec, state.Atilde, state.P);
  return {state.Z1 + cfg.mu * w.W1, state.Z2 + cfg.mu * w.W2};
}

AdmmState admm_solve(const AttackSpec& spec, const AdmmConfig& cfg) {
  validate(spec);
  if (!(cfg.mu > 0.0)) throw ValidationError("ADMM penalty mu must be positive");
  if (cfg.n_iter < 1) throw ValidationError("ADMM needs at least one iteration");

  AdmmState s = initial_state(spec);
  for (int i = 0; i < cfg.n_iter; ++i) {
    s.Atilde = a_step(s, spec, cfg);
    s.P = p_step(s, spec, cfg);
    std::tie(s.Z1, s.Z2) = z_step(s, spec, cfg);
    s.iter = i + 1;
    s.primal_residual = constraint_residual(spec, s.Atilde, s.P).norm();
    s.objective = (s.Atilde - spec.Ahat).squaredNorm();
    s.residual_history.push_back(s.primal_residual);
    if (!std::isfinite(s.primal_residual) ||
        s.primal_residual > cfg.divergence_threshold) {
      throw DivergenceError("ADMM diverged at iteration " + std::to_string(s.iter) +
                                " (residual " + std::to_string(s.primal_residual) +
                                "); increase the penalty mu",
                            s.primal_residual);
    }
    if (s.primal_residual <= cfg.primal_tol) {
      s.converged = true;
      break;
    }
  }
  return s;
}

Mat induced_gain(const AttackSpec& spec, const Mat& p) {
  return lqr_gain(p, spec.Bhat, spec.Rhat);
}

BatchDataset generate_poisoned(const Mat& atilde, const Mat& bhat,
                               const BatchDataset& d) {
  check_consistent(d);
  require_shape(atilde, d.n, d.n, "Atilde");
  require_shape(bhat, d.n, d.m, "Bhat");
  const ZohPair fg = zoh_pair(atilde, bhat, d.dt);

  BatchDataset out = d;
  if (out.samples.empty()) return out;
  Vec x = d.samples.front().x;
  for (SamplePoint& s : out.samples) {
    const Vec next = fg.F * x + fg.G * s.u;
    s.x = x;
    x = next;
  }
  return out;
}

AttackCost attack_cost(const BatchDataset& original, const BatchDataset& poisoned) {
  if (original.size() != poisoned.size() || original.n != poisoned.n ||
      original.dt != poisoned.dt) {
    throw DimensionError("attack_cost: datasets differ in N, n or dt");
  }
  AttackCost out;
  out.per_step.reserve(static_cast<size_t>(original.size()));
  out.cumulative.reserve(static_cast<size_t>(original.size()));
  for (long k = 0; k < original.size(); ++k) {
    if (original.samples[k].x.size() != poisoned.samples[k].x.size()) {
      throw DimensionError("attack_cost: state sizes differ at sample " +
                           std::to_string(k));
    }
    const double step = (poisoned.samples[k].x - original.samples[k].x).squaredNorm();
    out.total += step;
    out.per_step.push_back(step);
    out.cumulative.push_back(out.total);
  }
  return out;
}

}  // namespace lqpoison
