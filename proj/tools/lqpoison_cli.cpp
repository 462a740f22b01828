// Command-line front end: scenario configs in, datasets, models, reports and
// plot-ready CSVs out.
//
// Exit codes: 0 ok, 1 internal failure, 2 usage/config, 3 learnability gate,
// 4 identifiability, 5 ADMM non-convergence, 6 reproduction check failure.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "lqpoison/batch_data.hpp"
#include "lqpoison/case_studies.hpp"
#include "lqpoison/errors.hpp"
#include "lqpoison/json_io.hpp"
#include "lqpoison/pipeline.hpp"
#include "lqpoison/sysid.hpp"

#ifndef LQPOISON_VERSION
#define LQPOISON_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace lqpoison;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kLearnability = 3,
  kIdentifiability = 4,
  kNotConverged = 5,
  kCheckFailed = 6,
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> mu;
  std::optional<int> iters;
  std::optional<double> tol;
};

void apply(const Overrides& o, Scenario& s) {
  if (o.seed) s.excitation.seed = *o.seed;
  if (o.mu) s.admm.mu = *o.mu;
  if (o.iters) s.admm.n_iter = *o.iters;
  if (o.tol) s.admm.primal_tol = *o.tol;
}

void apply(const Overrides& o, AdmmConfig& c) {
  if (o.mu) c.mu = *o.mu;
  if (o.iters) c.n_iter = *o.iters;
  if (o.tol) c.primal_tol = *o.tol;
}

Scenario load_scenario(const fs::path& path) {
  return scenario_from_json(read_json_file(path));
}

int cmd_simulate(const fs::path& config, const fs::path& out, const Overrides& o) {
  Scenario s = load_scenario(config);
  apply(o, s);
  validate(s);
  const BatchDataset d = simulate_zoh(s.system, s.excitation, s.n_samples);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  dataset_write(d, out);
  std::cout << "wrote " << d.size() << " samples to " << out.string() << "\n";
  return kOk;
}

int cmd_sysid(const fs::path& data, const fs::path& out, bool with_qr, double eps) {
  const BatchDataset d = dataset_read(data);
  const SysIdEstimate est = identify(d, eps, with_qr);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  model_write(est, out);
  std::cout << "wrote model (" << est.series_terms << " series terms) to "
            << out.string() << "\n";
  return kOk;
}

int cmd_attack(const std::optional<fs::path>& config, const fs::path& data,
               const fs::path& target, const fs::path& out, const Overrides& o,
               std::optional<double> eps_flag) {
  const BatchDataset d = dataset_read(data);
  const Json tj = read_json_file(target);
  const Mat ktarget = mat_from_json(tj, "Ktarget", d.m, d.n);

  AdmmConfig cfg;
  double eps = kDefaultLogEps;
  std::optional<Scenario> scenario;
  if (config) {
    scenario = load_scenario(*config);
    cfg = scenario->admm;
    eps = scenario->log_eps;
  }
  apply(o, cfg);
  if (eps_flag) eps = *eps_flag;

  const AttackResult res = run_attack(d, ktarget, cfg, eps);
  // Re-learn as the victim would: true weights when a config supplies them,
  // otherwise the attacker's estimates.
  const Mat q = scenario ? scenario->system.Q : res.spec.Qhat;
  const Mat r = scenario ? scenario->system.R : res.spec.Rhat;
  const LearnerResult relearned = run_learner(res.poisoned, q, r, eps);

  fs::create_directories(out);
  dataset_write(res.poisoned, out / "poisoned_dataset.csv");
  Json rep;
  rep["Ahat"] = mat_to_json(res.spec.Ahat);
  rep["Bhat"] = mat_to_json(res.spec.Bhat);
  rep["Qhat"] = mat_to_json(res.spec.Qhat);
  rep["Rhat"] = mat_to_json(res.spec.Rhat);
  rep["Ktarget"] = mat_to_json(ktarget);
  rep["Atilde"] = mat_to_json(res.Atilde);
  rep["P"] = mat_to_json(res.P);
  rep["Kinduced"] = mat_to_json(res.Kinduced);
  rep["Khat_poisoned"] = mat_to_json(relearned.solution.K);
  rep["gain_error_to_target"] = (relearned.solution.K - ktarget).norm();
  rep["induced_gain_error"] = res.gain_error;
  rep["attack_cost"] = res.attack_cost;
  rep["converged"] = res.converged;
  rep["admm_residuals"] = res.residual_history;
  write_text_atomic(out / "attack_report.json", rep.dump(2) + "\n");

  std::cout << "attack cost " << format_double(res.attack_cost)
            << ", gain error to target "
            << format_double((relearned.solution.K - ktarget).norm())
            << (res.converged ? "" : " (ADMM did not reach primal tolerance)") << "\n";
  return res.converged ? kOk : kNotConverged;
}

int cmd_evaluate(const fs::path& config, const fs::path& gain, const std::string& key,
                 std::optional<long> horizon, const std::optional<fs::path>& out) {
  const Scenario s = load_scenario(config);
  validate(s.system);
  const Mat k = mat_from_json(read_json_file(gain), key, s.system.m(), s.system.n());
  const ClosedLoop cl = evaluate_closed_loop(s.system, k, horizon.value_or(s.horizon));
  if (out) {
    if (out->has_parent_path()) fs::create_directories(out->parent_path());
    write_trajectory_csv(cl, s.system.dt, *out);
  }
  Json summary;
  summary["steps"] = cl.steps;
  summary["cost"] = cl.cost;
  summary["diverged"] = cl.diverged;
  const auto settle = settling_step(cl);
  summary["settling_step"] = settle ? Json(*settle) : Json(nullptr);
  summary["stabilizing"] = is_stabilizing(s.system.A, s.system.B, k);
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

int cmd_reproduce(const std::string& name, const fs::path& out, const Overrides& o,
                  bool timings) {
  Scenario s = case_scenario(name);
  apply(o, s);
  const ScenarioReport r = run_scenario(s);
  write_report_bundle(r, out, timings);

  for (const auto& [stage, msg] : r.errors) {
    std::cerr << "stage " << stage << " failed: " << msg << "\n";
  }
  const auto rows = reproduction_checks(name, r);
  bool ok = true;
  std::cout << std::left << std::setw(52) << "check" << std::setw(14) << "measured"
            << std::setw(12) << "threshold" << "result\n";
  for (const CheckRow& row : rows) {
    const char* verdict = row.pass ? "PASS" : (row.gating ? "FAIL" : "info");
    std::ostringstream measured, threshold;
    measured << std::setprecision(6) << row.measured;
    threshold << std::setprecision(6) << row.threshold;
    std::cout << std::left << std::setw(52) << row.name << std::setw(14) << measured.str()
              << std::setw(12) << threshold.str() << verdict << "\n";
    if (row.gating && !row.pass) ok = false;
  }
  std::cout << "report written to " << (out / "report.json").string() << "\n";
  return ok ? kOk : kCheckFailed;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const LearnabilityError*>(&e)) return kLearnability;
  if (dynamic_cast<const IdentifiabilityError*>(&e) ||
      dynamic_cast<const RankDeficiencyError*>(&e) ||
      dynamic_cast<const EstimationError*>(&e)) {
    return kIdentifiability;
  }
  if (dynamic_cast<const DivergenceError*>(&e)) return kNotConverged;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const ParseError*>(&e)) {
    return kUsage;
  }
  return kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy poisoning of batch-learned LQ controllers"};
  app.set_version_flag("--version", std::string("lqpoison ") + LQPOISON_VERSION);
  app.require_subcommand(1);

  Overrides ov;
  std::string config;
  std::string out;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", ov.seed, "PRNG seed (overrides config)");
    sub->add_option("--mu", ov.mu, "ADMM penalty parameter")->check(CLI::PositiveNumber);
    sub->add_option("--iters", ov.iters, "ADMM iterations")->check(CLI::PositiveNumber);
    sub->add_option("--tol", ov.tol, "ADMM primal residual tolerance")
        ->check(CLI::PositiveNumber);
  };

  auto* sim = app.add_subcommand("simulate", "Sample a batch dataset from a scenario");
  sim->add_option("--config", config, "Scenario config JSON")->required();
  sim->add_option("--out", out, "Output CSV path")->required();
  add_common(sim);

  std::string data;
  bool with_qr = false;
  double eps = kDefaultLogEps;
  auto* sid = app.add_subcommand("sysid", "Identify a continuous model from a dataset");
  sid->add_option("--data", data, "Dataset CSV")->required();
  sid->add_option("--out", out, "Output model JSON")->required();
  sid->add_flag("--with-qr", with_qr, "Also estimate Q and R from the costs");
  sid->add_option("--eps", eps, "Log-series stopping threshold")
      ->check(CLI::PositiveNumber);

  std::string target;
  auto* att = app.add_subcommand("attack", "Synthesize a poisoned dataset");
  att->add_option("--config", config, "Scenario config JSON (ADMM settings, true Q/R)");
  att->add_option("--data", data, "Clean dataset CSV")->required();
  att->add_option("--target", target, "Target gain JSON {\"Ktarget\": [[...]]}")->required();
  att->add_option("--out", out, "Output directory")->required();
  std::optional<double> attack_eps;
  att->add_option("--eps", attack_eps, "Log-series stopping threshold (overrides config)")
      ->check(CLI::PositiveNumber);
  add_common(att);

  std::string gain;
  std::string gain_key = "K";
  std::optional<long> horizon;
  auto* ev = app.add_subcommand("evaluate", "Closed-loop rollout of a gain on the true plant");
  ev->add_option("--config", config, "Scenario config JSON")->required();
  ev->add_option("--gain", gain, "Gain JSON")->required();
  ev->add_option("--key", gain_key, "Field holding the gain matrix");
  ev->add_option("--horizon", horizon, "Number of steps")->check(CLI::PositiveNumber);
  ev->add_option("--out", out, "Trajectory CSV");

  std::string case_name;
  bool timings = false;
  auto* rep = app.add_subcommand("reproduce", "Run a bundled case study end to end");
  rep->add_option("case", case_name, "case1 or case2")->required();
  rep->add_option("--out", out, "Output directory")->required();
  rep->add_flag("--timings", timings, "Record per-stage wall-clock times in the report");
  add_common(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config, out, ov);
    if (sid->parsed()) return cmd_sysid(data, out, with_qr, eps);
    if (att->parsed()) {
      std::optional<fs::path> cfg;
      if (!config.empty()) cfg = config;
      return cmd_attack(cfg, data, target, out, ov, attack_eps);
    }
    if (ev->parsed()) {
      std::optional<fs::path> o;
      if (!out.empty()) o = out;
      return cmd_evaluate(config, gain, gain_key, horizon, o);
    }
    if (rep->parsed()) return cmd_reproduce(case_name, out, ov, timings);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}
