#include "lqpoison/poison.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lqpoison/case_studies.hpp"
#include "lqpoison/errors.hpp"
#include "lqpoison/lq_model.hpp"
#include "lqpoison/pipeline.hpp"
#include "lqpoison/sysid.hpp"
#include "test_support.hpp"

namespace lqpoison {
namespace {

using testing::random_mat;
using testing::random_spd;
using testing::random_vec;

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

AttackSpec scalar_spec(double a, double b, double q, double r, double k) {
  return {scalar(a), scalar(b), scalar(q), scalar(r), scalar(k)};
}

AdmmState state_with(const AttackSpec& spec, const Mat& atilde, const Mat& p) {
  AdmmState s;
  s.Atilde = atilde;
  s.P = p;
  s.Z1 = Mat::Zero(spec.Ahat.rows(), spec.Ahat.rows());
  s.Z2 = Mat::Zero(spec.Bhat.cols(), spec.Ahat.rows());
  return s;
}

AttackSpec random_spec(Rng& rng, long n, long m) {
  AttackSpec spec;
  spec.Ahat = random_mat(rng, n, n);
  spec.Bhat = random_mat(rng, n, m);
  spec.Qhat = random_spd(rng, n);
  spec.Rhat = random_spd(rng, m);
  spec.Ktarget = random_mat(rng, m, n);
  return spec;
}

TEST(ConstraintResidual, VanishesAtRiccatiSolution) {
  const Scenario s = case2_scenario();
  const auto sol = care_solve(s.system.A, s.system.B, s.system.Q, s.system.R);
  const AttackSpec spec{s.system.A, s.system.B, s.system.Q, s.system.R, sol.K};
  EXPECT_LE(constraint_residual(spec, spec.Ahat, sol.P).norm(), 1e-8 * sol.P.norm());
}

TEST(AStep, ZeroPReturnsEstimate) {
  Rng rng(1);
  const AttackSpec spec = random_spec(rng, 3, 2);
  AdmmState st = state_with(spec, spec.Ahat, Mat::Zero(3, 3));
  st.Z1 = random_mat(rng, 3, 3);
  EXPECT_LE((a_step(st, spec, AdmmConfig{}) - spec.Ahat).norm(), 1e-12);
}

TEST(AStep, VanishingPenaltyReturnsEstimate) {
  Rng rng(2);
  const AttackSpec spec = random_spec(rng, 3, 1);
  AdmmConfig cfg;
  cfg.mu = 1e-12;
  const AdmmState st = state_with(spec, spec.Ahat, random_spd(rng, 3));
  EXPECT_LE((a_step(st, spec, cfg) - spec.Ahat).norm(), 1e-9);
}

TEST(AStep, ScalarClosedForm) {
  // (a - ahat)^2 + mu/2 (2 p a + c)^2 is minimized at
  // a = (ahat - mu p c) / (1 + 2 mu p^2).
  const AttackSpec spec = scalar_spec(0.5, 2.0, 1.0, 0.3, -1.5);
  AdmmConfig cfg;
  cfg.mu = 4.0;
  AdmmState st = state_with(spec, spec.Ahat, scalar(0.7));
  st.Z1 = scalar(0.2);
  const double p = 0.7;
  const double c = p * 2.0 * -1.5 + 1.0 + 0.2 / 4.0;
  const double want = (0.5 - 4.0 * p * c) / (1.0 + 2.0 * 4.0 * p * p);
  EXPECT_NEAR(a_step(st, spec, cfg)(0, 0), want, 1e-14);
}

TEST(AStep, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const AttackSpec spec = random_spec(rng, 3, 2);
    AdmmConfig cfg;
    cfg.mu = 2.5;
    AdmmState st = state_with(spec, spec.Ahat, random_mat(rng, 3, 3));
    st.Z1 = random_mat(rng, 3, 3);
    const Mat at = random_mat(rng, 3, 3);
    const Mat g = a_step_gradient(st, spec, cfg, at);
    const double h = 1e-6;
    for (long j = 0; j < 3; ++j) {
      for (long i = 0; i < 3; ++i) {
        Mat up = at, dn = at;
        up(i, j) += h;
        dn(i, j) -= h;
        const double fd = (a_step_objective(st, spec, cfg, up) -
                           a_step_objective(st, spec, cfg, dn)) / (2.0 * h);
        EXPECT_NEAR(g(i, j), fd, 1e-6 * (1.0 + std::abs(fd)));
      }
    }
  }
}

TEST(AStep, ResultIsStationaryAndBeatsPerturbations) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const AttackSpec spec = random_spec(rng, 4, 2);
    AdmmConfig cfg;
    cfg.mu = rng.uniform(0.1, 50.0);
    AdmmState st = state_with(spec, spec.Ahat, random_spd(rng, 4));
    st.Z1 = random_mat(rng, 4, 4);
    const Mat a = a_step(st, spec, cfg);
    const double fa = a_step_objective(st, spec, cfg, a);
    EXPECT_LE(a_step_gradient(st, spec, cfg, a).norm(), 1e-8 * (1.0 + fa));
    for (int k = 0; k < 5; ++k) {
      EXPECT_LE(fa, a_step_objective(st, spec, cfg, a + 1e-3 * random_mat(rng, 4, 4)));
    }
  }
}

TEST(PStep, RiccatiSolutionIsFixedPoint) {
  const Scenario s = case1_scenario();
  const auto sol = care_solve(s.system.A, s.system.B, s.system.Q, s.system.R);
  const AttackSpec spec{s.system.A, s.system.B, s.system.Q, s.system.R, sol.K};
  const AdmmState st = state_with(spec, spec.Ahat, Mat::Identity(4, 4));
  EXPECT_LE((p_step(st, spec, AdmmConfig{}) - sol.P).norm(), 1e-7 * sol.P.norm());
}

TEST(PStep, ScalarExample) {
  // W1 = 1.5p - 2p + 1, W2 = -2 + p: both vanish at p = 2.
  const AttackSpec spec = scalar_spec(0.0, 1.0, 1.0, 1.0, -2.0);
  const AdmmState st = state_with(spec, scalar(0.75), scalar(0.0));
  EXPECT_NEAR(p_step(st, spec, AdmmConfig{})(0, 0), 2.0, 1e-12);
}

TEST(PStep, ActiveConeConstraintSatisfiesVariationalInequality) {
  Rng rng(5);
  const AttackSpec spec = random_spec(rng, 2, 1);
  AdmmConfig cfg;
  AdmmState st = state_with(spec, random_mat(rng, 2, 2), Mat::Zero(2, 2));
  // Place the unconstrained minimizer at diag(1, -1) by zeroing the residual
  // there through the duals.
  Mat p_bad = Mat::Zero(2, 2);
  p_bad(0, 0) = 1.0;
  p_bad(1, 1) = -1.0;
  const ConstraintResidual w = constraint_residual(spec, st.Atilde, p_bad);
  st.Z1 = -cfg.mu * w.W1;
  st.Z2 = -cfg.mu * w.W2;
  ASSERT_NEAR(p_step_objective(st, spec, cfg, p_bad), 0.0, 1e-20);

  const Mat p = p_step(st, spec, cfg);
  EXPECT_EQ(p, p.transpose());
  EXPECT_GE(sym_eig(p).eigenvalues.minCoeff(), -1e-12);
  const double fp = p_step_objective(st, spec, cfg, p);
  EXPECT_GT(fp, 0.0);
  // Directional derivative toward any PSD matrix is non-negative.
  for (int k = 0; k < 50; ++k) {
    const Mat q = random_spd(rng, 2, 0.0) * rng.uniform(0.0, 3.0);
    const double h = 1e-7;
    const double slope =
        (p_step_objective(st, spec, cfg, p + h * (q - p)) - fp) / h;
    EXPECT_GE(slope, -1e-5) << "direction " << k;
    EXPECT_LE(fp, p_step_objective(st, spec, cfg, q) + 1e-12);
  }
}

TEST(ZStep, AddsScaledResidual) {
  Rng rng(6);
  const AttackSpec spec = random_spec(rng, 3, 2);
  AdmmConfig cfg;
  cfg.mu = 3.0;
  AdmmState st = state_with(spec, random_mat(rng, 3, 3), random_spd(rng, 3));
  st.Z1 = random_mat(rng, 3, 3);
  st.Z2 = random_mat(rng, 2, 3);
  const auto [z1, z2] = z_step(st, spec, cfg);
  const Mat w1 = st.Atilde.transpose() * st.P +
                 st.P * (st.Atilde + spec.Bhat * spec.Ktarget) + spec.Qhat;
  const Mat w2 = spec.Rhat * spec.Ktarget + spec.Bhat.transpose() * st.P;
  EXPECT_LE((z1 - st.Z1 - 3.0 * w1).norm(), 1e-12 * (1.0 + z1.norm()));
  EXPECT_LE((z2 - st.Z2 - 3.0 * w2).norm(), 1e-12 * (1.0 + z2.norm()));
}

TEST(ZStep, FeasiblePointLeavesDualsUnchanged) {
  const AttackSpec spec = scalar_spec(0.0, 1.0, 1.0, 1.0, -2.0);
  AdmmState st = state_with(spec, scalar(0.75), scalar(2.0));
  st.Z1 = scalar(0.4);
  st.Z2 = scalar(-0.1);
  const auto [z1, z2] = z_step(st, spec, AdmmConfig{});
  EXPECT_DOUBLE_EQ(z1(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(z2(0, 0), -0.1);
}

TEST(Admm, ZeroAttackIsFixedPoint) {
  const Scenario s = case1_scenario();
  const auto sol = care_solve(s.system.A, s.system.B, s.system.Q, s.system.R);
  const AttackSpec spec{s.system.A, s.system.B, s.system.Q, s.system.R, sol.K};
  const AdmmState st = admm_solve(spec, AdmmConfig{});
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.iter, 1);
  EXPECT_LE((st.Atilde - spec.Ahat).norm(), 1e-8);
  EXPECT_LE((induced_gain(spec, st.P) - sol.K).norm(), 1e-8);
}

TEST(Admm, ReachesFeasibleSingleInputTarget) {
  const Scenario s = case2_scenario();
  const AttackSpec spec{s.system.A, s.system.B, s.system.Q, s.system.R, s.Ktarget};
  AdmmConfig cfg = s.admm;
  cfg.n_iter = 5000;
  const AdmmState st = admm_solve(spec, cfg);
  EXPECT_TRUE(st.converged);
  EXPECT_LT(st.iter, cfg.n_iter);
  EXPECT_LE(st.primal_residual, cfg.primal_tol);
  EXPECT_LE(st.residual_history.back(), cfg.primal_tol);
  EXPECT_EQ(static_cast<int>(st.residual_history.size()), st.iter);
  const Mat k = induced_gain(spec, st.P);
  EXPECT_LE((k - s.Ktarget).norm(), 1e-5 * (1.0 + s.Ktarget.norm()));
}

TEST(Admm, DivergenceThresholdRaises) {
  const Scenario s = case2_scenario();
  const AttackSpec spec{s.system.A, s.system.B, s.system.Q, s.system.R, s.Ktarget};
  AdmmConfig cfg = s.admm;
  cfg.divergence_threshold = 1e-30;
  EXPECT_THROW(admm_solve(spec, cfg), DivergenceError);
}

TEST(Admm, RejectsBadConfigAndSpec) {
  const AttackSpec spec = scalar_spec(0.0, 1.0, 1.0, 1.0, -2.0);
  AdmmConfig cfg;
  cfg.mu = 0.0;
  EXPECT_THROW(admm_solve(spec, cfg), ValidationError);
  AttackSpec bad = spec;
  bad.Rhat = scalar(0.0);
  EXPECT_THROW(admm_solve(bad, AdmmConfig{}), ValidationError);
  bad = spec;
  bad.Ktarget = Mat::Zero(2, 1);
  EXPECT_THROW(admm_solve(bad, AdmmConfig{}), DimensionError);
}

TEST(InducedGain, Example) {
  const AttackSpec spec = scalar_spec(0.0, 2.0, 1.0, 4.0, 0.0);
  EXPECT_DOUBLE_EQ(induced_gain(spec, scalar(3.0))(0, 0), -1.5);
}

TEST(GeneratePoisoned, TruePlantReproducesData) {
  const Scenario s = case1_scenario();
  const BatchDataset d = simulate_zoh(s.system, s.excitation, 300);
  const BatchDataset same = generate_poisoned(s.system.A, s.system.B, d);
  EXPECT_LE((same.states() - d.states()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(same.inputs(), d.inputs());
  EXPECT_EQ(same.costs(), d.costs());
  EXPECT_LE(attack_cost(d, same).total, 1e-20);
}

TEST(GeneratePoisoned, ScalarReplay) {
  BatchDataset d;
  d.dt = 0.1;
  d.n = 1;
  d.m = 1;
  const double u[] = {1.0, -1.0, 0.5};
  for (long k = 0; k < 3; ++k) {
    d.samples.push_back({k, Vec::Constant(1, 9.0 * k), Vec::Constant(1, u[k]), 0.0});
  }
  d.samples[0].x(0) = 2.0;
  const double a = -1.0, b = 3.0;
  const double f = std::exp(a * 0.1), g = testing::scalar_zoh_g(a, b, 0.1);
  const BatchDataset p = generate_poisoned(scalar(a), scalar(b), d);
  const double x1 = f * 2.0 + g * 1.0;
  const double x2 = f * x1 - g;
  EXPECT_DOUBLE_EQ(p.samples[0].x(0), 2.0);
  EXPECT_NEAR(p.samples[1].x(0), x1, 1e-14);
  EXPECT_NEAR(p.samples[2].x(0), x2, 1e-14);

  const AttackCost c = attack_cost(d, p);
  ASSERT_EQ(c.per_step.size(), 3u);
  EXPECT_DOUBLE_EQ(c.per_step[0], 0.0);
  EXPECT_NEAR(c.per_step[1], (x1 - 9.0) * (x1 - 9.0), 1e-12);
  EXPECT_NEAR(c.per_step[2], (x2 - 18.0) * (x2 - 18.0), 1e-12);
  EXPECT_DOUBLE_EQ(c.cumulative.back(), c.total);
  EXPECT_NEAR(c.total, c.per_step[1] + c.per_step[2], 1e-12);
}

TEST(AttackCost, MismatchedDatasetsThrow) {
  const Scenario s = case2_scenario();
  const BatchDataset a = simulate_zoh(s.system, s.excitation, 20);
  const BatchDataset b = simulate_zoh(s.system, s.excitation, 21);
  EXPECT_THROW(attack_cost(a, b), DimensionError);
}

TEST(Admm, PoisonedDataTeachesTheInducedGain) {
  // Re-learning from the poisoned record recovers Atilde, so the learner's
  // certainty-equivalent gain is the ADMM-induced one up to the ADMM residual.
  Rng rng(8);
  int checked = 0;
  for (int trial = 0; trial < 8; ++trial) {
    LQSystem sys;
    sys.A = random_mat(rng, 3, 3, -2.0, 2.0);
    sys.B = random_mat(rng, 3, 1);
    sys.Q = random_spd(rng, 3);
    sys.R = random_spd(rng, 1);
    sys.x0 = random_vec(rng, 3);
    sys.dt = 0.01;
    const Mat kstar = care_solve(sys.A, sys.B, sys.Q, sys.R).K;
    const AttackSpec spec{sys.A, sys.B, sys.Q, sys.R, kstar + 0.1 * random_mat(rng, 1, 3)};
    AdmmConfig cfg;
    cfg.n_iter = 2000;
    const AdmmState st = admm_solve(spec, cfg);
    if (!st.converged) continue;
    ++checked;
    ExcitationPolicy pol;
    pol.seed = 100 + trial;
    const BatchDataset d = simulate_zoh(sys, pol, 200);
    const BatchDataset poisoned = generate_poisoned(st.Atilde, spec.Bhat, d);
    const SysIdEstimate est = identify(poisoned, 1e-13);
    EXPECT_LE((est.Ahat - st.Atilde).cwiseAbs().maxCoeff(), 1e-5) << trial;
    EXPECT_LE((est.Bhat - spec.Bhat).cwiseAbs().maxCoeff(), 1e-5) << trial;
    const Mat khat = care_solve(est.Ahat, est.Bhat, sys.Q, sys.R).K;
    EXPECT_LE((khat - induced_gain(spec, st.P)).cwiseAbs().maxCoeff(), 1e-3) << trial;
  }
  EXPECT_GE(checked, 4);
}

}  // namespace
}  // namespace lqpoison
