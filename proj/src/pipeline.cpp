#include "lqpoison/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "lqpoison/errors.hpp"

namespace lqpoison {

namespace {

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Runs one stage, recording its duration and any error. Returns false when the
// stage failed.
bool run_stage(ScenarioReport& r, const std::string& name,
               const std::function<void()>& body) {
  StageTimer timer;
  try {
    body();
  } catch (const std::exception& e) {
    r.errors[name] = e.what();
    r.timings_s[name] = timer.seconds();
    return false;
  }
  r.timings_s[name] = timer.seconds();
  return true;
}

}  // namespace

Mat suspension_a(const SuspensionParams& p) {
  Mat a(4, 4);
  a << 0.0, 1.0, 0.0, 0.0,
      -p.k_s / p.m_b, -p.b_s / p.m_b, p.k_s / p.m_b, p.b_s / p.m_b,
      0.0, 0.0, 0.0, 1.0,
      p.k_s / p.m_w, p.b_s / p.m_w, (-p.k_s - p.k_t) / p.m_w, -p.b_s / p.m_w;
  return a;
}

Mat suspension_b(const SuspensionParams& p) {
  Mat b(4, 1);
  b << 0.0, 1e3 / p.m_b, 0.0, -1e3 / p.m_w;
  return b;
}

void validate(const Scenario& s) {
  validate(s.system);
  const long n = s.system.n();
  const long m = s.system.m();
  if (s.n_samples < n + m + 1) {
    throw ValidationError("N must be at least n + m + 1 = " + std::to_string(n + m + 1));
  }
  if (s.Ktarget.rows() != m || s.Ktarget.cols() != n) {
    throw ValidationError("Ktarget must be " + std::to_string(m) + "x" + std::to_string(n));
  }
  if (!(s.admm.mu > 0.0)) throw ValidationError("admm.mu must be positive");
  if (s.admm.n_iter < 1) throw ValidationError("admm.n_iter must be >= 1");
  if (!(s.admm.primal_tol > 0.0)) throw ValidationError("admm.primal_tol must be positive");
  if (!(s.admm.inner_tol > 0.0)) throw ValidationError("admm.inner_tol must be positive");
  if (s.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (!(s.log_eps > 0.0)) throw ValidationError("log_eps must be positive");
  if (!(s.excitation.amplitude > 0.0)) {
    throw ValidationError("excitation.amplitude must be positive");
  }
  if (s.excitation.kind == ExcitationKind::kGainPlusDither) {
    if (!s.excitation.gain || s.excitation.gain->rows() != m ||
        s.excitation.gain->cols() != n) {
      throw ValidationError("excitation.gain must be " + std::to_string(m) + "x" +
                            std::to_string(n));
    }
  }
}

LearnerResult run_learner(const BatchDataset& d, const Mat& q, const Mat& r,
                          double log_eps) {
  LearnerResult out;
  out.estimate = identify(d, log_eps, /*with_qr=*/false);
  out.solution = care_solve(out.estimate.Ahat, out.estimate.Bhat, q, r);
  return out;
}

AttackResult run_attack(const BatchDataset& d, const Mat& ktarget,
                        const AdmmConfig& cfg, double log_eps) {
  const SysIdEstimate est = identify(d, log_eps, /*with_qr=*/true);
  AttackSpec spec{est.Ahat, est.Bhat, *est.Qhat, *est.Rhat, ktarget};
  validate(spec);

  const AdmmState st = admm_solve(spec, cfg);
  AttackResult out;
  out.Atilde = st.Atilde;
  out.P = st.P;
  out.Kinduced = induced_gain(spec, st.P);
  out.gain_error = (out.Kinduced - ktarget).norm();
  out.poisoned = generate_poisoned(st.Atilde, est.Bhat, d);
  out.cost = attack_cost(d, out.poisoned);
  out.attack_cost = out.cost.total;
  out.converged = st.converged;
  out.residual_history = st.residual_history;
  out.spec = std::move(spec);
  return out;
}

ClosedLoop evaluate_closed_loop(const LQSystem& sys, const Mat& k, long horizon) {
  const long n = sys.n();
  require_shape(k, sys.m(), n, "K");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  const ZohPair fg = zoh_pair(sys.A, sys.B, sys.dt);
  const Mat phi = fg.F + fg.G * k;

  ClosedLoop out;
  out.states.resize(horizon + 1, n);
  Vec x = sys.x0;
  out.states.row(0) = x.transpose();
  long k_step = 0;
  for (; k_step < horizon; ++k_step) {
    const Vec u = k * x;
    out.cost += (x.dot(sys.Q * x) + u.dot(sys.R * u)) * sys.dt;
    x = phi * x;
    out.states.row(k_step + 1) = x.transpose();
    if (!x.allFinite() || x.norm() > kDivergenceNorm) {
      out.diverged = true;
      ++k_step;
      break;
    }
  }
  out.steps = k_step;
  out.states.conservativeResize(k_step + 1, n);
  return out;
}

std::optional<long> settling_step(const ClosedLoop& cl, double fraction) {
  if (cl.diverged || cl.states.rows() == 0) return std::nullopt;
  const double bound = fraction * cl.states.row(0).norm();
  long last_outside = -1;
  for (long k = 0; k < cl.states.rows(); ++k) {
    if (!(cl.states.row(k).norm() < bound)) last_outside = k;
  }
  if (last_outside == cl.states.rows() - 1) return std::nullopt;
  return last_outside + 1;
}

ScenarioReport run_scenario(const Scenario& s) {
  ScenarioReport r;
  r.scenario = s.name;
  r.Ktarget = s.Ktarget;
  r.dt = s.system.dt;

  if (!run_stage(r, "validate", [&] { validate(s); })) return r;

  run_stage(r, "optimal_gain", [&] {
    r.Kstar = care_solve(s.system.A, s.system.B, s.system.Q, s.system.R).K;
  });

  if (s.crosscheck) {
    run_stage(r, "target_crosscheck", [&] {
      SuspensionParams p = s.crosscheck->params;
      p.k_s = s.crosscheck->attack_k_s;
      const Mat k = care_solve(suspension_a(p), suspension_b(p), s.system.Q,
                               s.system.R)
                        .K;
      r.Ktarget_rebuilt = k;
      r.crosscheck_ok = (k - s.Ktarget).cwiseAbs().maxCoeff() <= s.crosscheck->tolerance;
    });
  }

  BatchDataset clean;
  if (!run_stage(r, "simulate", [&] {
        clean = simulate_zoh(s.system, s.excitation, s.n_samples);
      })) {
    return r;
  }
  r.clean_data = clean;

  const bool learned = run_stage(r, "learn_clean", [&] {
    const LearnerResult lr = run_learner(clean, s.system.Q, s.system.R, s.log_eps);
    r.Ahat_clean = lr.estimate.Ahat;
    r.Khat_clean = lr.solution.K;
  });

  AttackResult attack;
  const bool attacked = run_stage(r, "attack", [&] {
    attack = run_attack(clean, s.Ktarget, s.admm, s.log_eps);
  });
  if (attacked) {
    r.Atilde = attack.Atilde;
    r.Kinduced = attack.Kinduced;
    r.converged = attack.converged;
    r.admm_residuals = attack.residual_history;
    r.attack_cost_series = attack.cost;
    r.attack_cost = attack.attack_cost;
    r.poisoned_data = attack.poisoned;

    run_stage(r, "learn_poisoned", [&] {
      const LearnerResult lr =
          run_learner(attack.poisoned, s.system.Q, s.system.R, s.log_eps);
      r.Khat_poisoned = lr.solution.K;
      r.gain_error_to_target = (r.Khat_poisoned - s.Ktarget).norm();
    });
  }

  run_stage(r, "evaluate", [&] {
    if (learned) r.clean_trajectory = evaluate_closed_loop(s.system, r.Khat_clean, s.horizon);
    if (r.Khat_poisoned.size() > 0) {
      r.poisoned_trajectory = evaluate_closed_loop(s.system, r.Khat_poisoned, s.horizon);
    }
  });
  return r;
}

namespace {

Json optional_mat(const Mat& m) { return m.size() ? mat_to_json(m) : Json(nullptr); }

Json closed_loop_summary(const std::optional<ClosedLoop>& cl) {
  if (!cl) return Json(nullptr);
  Json j;
  j["steps"] = cl->steps;
  j["cost"] = cl->cost;
  j["diverged"] = cl->diverged;
  const auto settle = settling_step(*cl);
  j["settling_step"] = settle ? Json(*settle) : Json(nullptr);
  j["final_state_norm"] = cl->states.row(cl->states.rows() - 1).norm();
  return j;
}

}  // namespace

Json report_to_json(const ScenarioReport& r, bool include_timings) {
  Json j;
  j["scenario"] = r.scenario;
  j["Kstar"] = optional_mat(r.Kstar);
  j["Khat_clean"] = optional_mat(r.Khat_clean);
  j["Atilde"] = optional_mat(r.Atilde);
  j["Khat_poisoned"] = optional_mat(r.Khat_poisoned);
  j["Ktarget"] = optional_mat(r.Ktarget);
  j["gain_error_to_target"] = r.gain_error_to_target;
  j["attack_cost"] = r.attack_cost;
  j["converged"] = r.converged;
  j["admm_residuals"] = r.admm_residuals;
  Json timings = Json::object();
  if (include_timings) {
    for (const auto& [stage, secs] : r.timings_s) timings[stage] = secs;
  }
  j["timings_s"] = timings;
  j["Ahat_clean"] = optional_mat(r.Ahat_clean);
  j["Kinduced"] = optional_mat(r.Kinduced);
  j["Ktarget_rebuilt"] = r.Ktarget_rebuilt ? mat_to_json(*r.Ktarget_rebuilt) : Json(nullptr);
  j["Ktarget_crosscheck_ok"] = r.crosscheck_ok ? Json(*r.crosscheck_ok) : Json(nullptr);
  j["closed_loop_clean"] = closed_loop_summary(r.clean_trajectory);
  j["closed_loop_poisoned"] = closed_loop_summary(r.poisoned_trajectory);
  Json errors = Json::object();
  for (const auto& [stage, msg] : r.errors) errors[stage] = msg;
  j["errors"] = errors;
  return j;
}

void write_trajectory_csv(const ClosedLoop& cl, double dt,
                          const std::filesystem::path& path) {
  std::ostringstream out;
  out << "step,t";
  for (long i = 0; i < cl.states.cols(); ++i) out << ",x" << i;
  out << '\n';
  for (long k = 0; k < cl.states.rows(); ++k) {
    out << k << ',' << format_double(static_cast<double>(k) * dt);
    for (long i = 0; i < cl.states.cols(); ++i) out << ',' << format_double(cl.states(k, i));
    out << '\n';
  }
  write_text_atomic(path, out.str());
}

void write_report_bundle(const ScenarioReport& r, const std::filesystem::path& dir,
                         bool include_timings) {
  std::filesystem::create_directories(dir);
  write_text_atomic(dir / "report.json", report_to_json(r, include_timings).dump(2) + "\n");
  if (r.clean_data) dataset_write(*r.clean_data, dir / "clean_dataset.csv");
  if (r.poisoned_data) dataset_write(*r.poisoned_data, dir / "poisoned_dataset.csv");
  if (r.clean_trajectory) write_trajectory_csv(*r.clean_trajectory, r.dt, dir / "trajectory_clean.csv");
  if (r.poisoned_trajectory) {
    write_trajectory_csv(*r.poisoned_trajectory, r.dt, dir / "trajectory_poisoned.csv");
  }
  if (!r.attack_cost_series.cumulative.empty()) {
    std::ostringstream cum;
    std::ostringstream step;
    cum << "step,cumulative_cost\n";
    step << "step,step_cost\n";
    for (size_t k = 0; k < r.attack_cost_series.cumulative.size(); ++k) {
      cum << k << ',' << format_double(r.attack_cost_series.cumulative[k]) << '\n';
      step << k << ',' << format_double(r.attack_cost_series.per_step[k]) << '\n';
    }
    write_text_atomic(dir / "attack_cost.csv", cum.str());
    write_text_atomic(dir / "attack_cost_per_step.csv", step.str());
  }
}

Json scenario_to_json(const Scenario& s) {
  Json j;
  j["name"] = s.name;
  j["n"] = s.system.n();
  j["m"] = s.system.m();
  j["A"] = mat_to_json(s.system.A);
  j["B"] = mat_to_json(s.system.B);
  j["Q"] = mat_to_json(s.system.Q);
  j["R"] = mat_to_json(s.system.R);
  j["x0"] = vec_to_json(s.system.x0);
  j["dt"] = s.system.dt;
  j["N"] = s.n_samples;
  j["seed"] = s.excitation.seed;
  Json ex;
  ex["kind"] = to_string(s.excitation.kind);
  ex["amplitude"] = s.excitation.amplitude;
  ex["gain"] = s.excitation.gain ? mat_to_json(*s.excitation.gain) : Json(nullptr);
  j["excitation"] = ex;
  j["Ktarget"] = mat_to_json(s.Ktarget);
  Json admm;
  admm["mu"] = s.admm.mu;
  admm["n_iter"] = s.admm.n_iter;
  admm["primal_tol"] = s.admm.primal_tol;
  admm["inner_tol"] = s.admm.inner_tol;
  j["admm"] = admm;
  j["log_eps"] = s.log_eps;
  j["horizon"] = s.horizon;
  if (s.crosscheck) {
    Json c;
    c["m_b"] = s.crosscheck->params.m_b;
    c["m_w"] = s.crosscheck->params.m_w;
    c["b_s"] = s.crosscheck->params.b_s;
    c["k_s"] = s.crosscheck->params.k_s;
    c["k_t"] = s.crosscheck->params.k_t;
    c["attack_k_s"] = s.crosscheck->attack_k_s;
    c["tolerance"] = s.crosscheck->tolerance;
    j["suspension_crosscheck"] = c;
  }
  return j;
}

namespace {

template <typename T>
T field(const Json& j, const std::string& key) {
  if (!j.contains(key)) throw ValidationError("missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("field '" + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return field<T>(j, key);
}

}  // namespace

Scenario scenario_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("scenario config must be a JSON object");
  Scenario s;
  s.name = field_or<std::string>(j, "name", "scenario");
  const long n = field<long>(j, "n");
  const long m = field<long>(j, "m");
  if (n <= 0) throw ValidationError("field 'n' must be positive");
  if (m <= 0) throw ValidationError("field 'm' must be positive");
  s.system.A = mat_from_json(j, "A", n, n);
  s.system.B = mat_from_json(j, "B", n, m);
  s.system.Q = mat_from_json(j, "Q", n, n);
  s.system.R = mat_from_json(j, "R", m, m);
  s.system.x0 = vec_from_json(j, "x0", n);
  s.system.dt = field<double>(j, "dt");
  if (!(s.system.dt > 0.0)) throw ValidationError("field 'dt' must be positive");
  s.n_samples = field_or<long>(j, "N", 500);
  s.excitation.seed = field_or<std::uint64_t>(j, "seed", 42);
  if (j.contains("excitation") && !j.at("excitation").is_null()) {
    const Json& ex = j.at("excitation");
    if (!ex.is_object()) throw ValidationError("field 'excitation' must be an object");
    s.excitation.kind =
        excitation_kind_from_string(field_or<std::string>(ex, "kind", "iid-uniform"));
    s.excitation.amplitude = field_or<double>(ex, "amplitude", 1.0);
    if (!(s.excitation.amplitude > 0.0)) {
      throw ValidationError("field 'excitation.amplitude' must be positive");
    }
    if (ex.contains("gain") && !ex.at("gain").is_null()) {
      s.excitation.gain = mat_from_json(ex, "gain", m, n);
    }
  }
  s.Ktarget = mat_from_json(j, "Ktarget", m, n);
  if (j.contains("admm") && !j.at("admm").is_null()) {
    const Json& a = j.at("admm");
    s.admm.mu = field_or<double>(a, "mu", s.admm.mu);
    s.admm.n_iter = field_or<int>(a, "n_iter", s.admm.n_iter);
    s.admm.primal_tol = field_or<double>(a, "primal_tol", s.admm.primal_tol);
    s.admm.inner_tol = field_or<double>(a, "inner_tol", s.admm.inner_tol);
  }
  s.log_eps = field_or<double>(j, "log_eps", kDefaultLogEps);
  s.horizon = field_or<long>(j, "horizon", 1000);
  if (j.contains("suspension_crosscheck") && !j.at("suspension_crosscheck").is_null()) {
    const Json& c = j.at("suspension_crosscheck");
    TargetCrossCheck cc;
    cc.params.m_b = field<double>(c, "m_b");
    cc.params.m_w = field<double>(c, "m_w");
    cc.params.b_s = field<double>(c, "b_s");
    cc.params.k_s = field<double>(c, "k_s");
    cc.params.k_t = field<double>(c, "k_t");
    cc.attack_k_s = field<double>(c, "attack_k_s");
    cc.tolerance = field_or<double>(c, "tolerance", 0.05);
    s.crosscheck = cc;
  }
  return s;
}

}  // namespace lqpoison
