#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lqpoison/batch_data.hpp"
#include "lqpoison/json_io.hpp"
#include "lqpoison/lq_model.hpp"
#include "lqpoison/poison.hpp"
#include "lqpoison/sysid.hpp"

namespace lqpoison {

/// Parameters of the quarter-car active suspension
/// (body mass, wheel mass, damper, spring, tire stiffness).
struct SuspensionParams {
  double m_b = 300.0;
  double m_w = 60.0;
  double b_s = 1000.0;
  double k_s = 16000.0;
  double k_t = 190000.0;
};

/// State (x_b, x_b', x_w, x_w'), input f_s in kN.
Mat suspension_a(const SuspensionParams& p);
Mat suspension_b(const SuspensionParams& p);

/// Optional physical cross-check of the target gain: rebuild A with the
/// attacker's spring constant and solve the CARE.
struct TargetCrossCheck {
  SuspensionParams params;
  double attack_k_s = 2000.0;
  double tolerance = 0.05;
};

struct Scenario {
  std::string name;
  LQSystem system;
  ExcitationPolicy excitation;
  long n_samples = 500;
  Mat Ktarget;
  AdmmConfig admm;
  long horizon = 1000;
  double log_eps = kDefaultLogEps;
  std::optional<TargetCrossCheck> crosscheck;
};

/// Throws ValidationError (naming the field) or LearnabilityError.
void validate(const Scenario& s);

struct LearnerResult {
  SysIdEstimate estimate;
  RiccatiSolution solution;
};

/// The victim: identify (Ahat, Bhat) from `d`, then solve the CARE with the
/// true cost weights it already knows.
LearnerResult run_learner(const BatchDataset& d, const Mat& q, const Mat& r,
                          double log_eps = kDefaultLogEps);

/// Attacker chain: identification, cost regression, ADMM, trajectory replay.
/// A non-converged ADMM run is returned with converged = false.
AttackResult run_attack(const BatchDataset& d, const Mat& ktarget,
                        const AdmmConfig& cfg, double log_eps = kDefaultLogEps);

struct ClosedLoop {
  Mat states;  // (steps + 1) x n, row k is x_k
  double cost = 0.0;
  bool diverged = false;
  long steps = 0;
};

inline constexpr double kDivergenceNorm = 1e9;

/**
 * Simulates the true plant under u = K x with zero-order hold for `horizon`
 * steps. The cost is the Riemann sum of (x'Qx + u'Ru) dt. A trajectory whose
 * norm exceeds 1e9 is truncated there and flagged.
 */
ClosedLoop evaluate_closed_loop(const LQSystem& sys, const Mat& k, long horizon);

/// First step after which ||x_j|| < fraction * ||x_0|| for every remaining
/// sample; empty when the trajectory never settles within its horizon.
std::optional<long> settling_step(const ClosedLoop& cl, double fraction = 0.05);

struct ScenarioReport {
  std::string scenario;
  Mat Kstar;
  Mat Ahat_clean;
  Mat Khat_clean;
  Mat Atilde;
  Mat Kinduced;
  Mat Khat_poisoned;
  Mat Ktarget;
  double gain_error_to_target = 0.0;
  double attack_cost = 0.0;
  bool converged = false;
  std::vector<double> admm_residuals;
  AttackCost attack_cost_series;
  std::optional<ClosedLoop> clean_trajectory;
  std::optional<ClosedLoop> poisoned_trajectory;
  std::optional<Mat> Ktarget_rebuilt;
  std::optional<bool> crosscheck_ok;
  double dt = 0.0;
  std::optional<BatchDataset> clean_data;
  std::optional<BatchDataset> poisoned_data;
  std::map<std::string, double> timings_s;
  std::map<std::string, std::string> errors;  // stage -> message

  bool ok() const { return errors.empty(); }
};

/**
 * simulate -> learner on clean data -> attack -> learner on poisoned data ->
 * closed-loop evaluation of both learned gains on the true plant. A failing
 * stage is recorded in `errors` and the stages depending on it are skipped.
 */
ScenarioReport run_scenario(const Scenario& s);

/// Report document. Timings vary run to run, so they are only filled in when
/// `include_timings` is set (the key is always present).
Json report_to_json(const ScenarioReport& r, bool include_timings);

/**
 * Writes report.json, the clean and poisoned datasets,
 * trajectory_{clean,poisoned}.csv (step,t,x0..), attack_cost.csv
 * (step,cumulative_cost) and attack_cost_per_step.csv (step,step_cost) into
 * `dir`, creating it if needed.
 */
void write_report_bundle(const ScenarioReport& r, const std::filesystem::path& dir,
                         bool include_timings);

void write_trajectory_csv(const ClosedLoop& cl, double dt,
                          const std::filesystem::path& path);

/// Scenario config document (all matrices as arrays of rows).
Json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const Json& j);

}  // namespace lqpoison
