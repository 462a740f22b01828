#include "lqpoison/case_studies.hpp"

#include <cmath>
#include <limits>

#include "lqpoison/errors.hpp"

namespace lqpoison {

Scenario case1_scenario() {
  Scenario s;
  s.name = "case1";
  s.system.A.resize(4, 4);
  s.system.A << 0.59, 0.13, 0.33, 0.76,
                0.63, -0.33, 0.32, -0.05,
                -0.03, 0.14, 0.05, 0.49,
                0.26, 0.04, 0.15, 0.11;
  s.system.B.resize(4, 2);
  s.system.B << 1.49, -0.21,
                0.31, -0.85,
                -2.55, 0.65,
                0.86, -0.74;
  s.system.Q = Mat::Identity(4, 4);
  s.system.R = 0.5 * Mat::Identity(2, 2);
  s.system.x0.resize(4);
  s.system.x0 << 0.5, -0.5, 0.5, -0.5;
  s.system.dt = 0.01;
  s.Ktarget.resize(2, 4);
  s.Ktarget << -0.11, 0.99, 0.5, -5.55,
               0.53, 0.26, 2.07, 9.36;
  s.n_samples = 500;
  s.horizon = 1000;
  return s;
}

Scenario case2_scenario() {
  Scenario s;
  s.name = "case2";
  s.system.A.resize(4, 4);
  s.system.A << 0.0, 1.0, 0.0, 0.0,
                -53.33, -3.33, 53.33, 3.33,
                0.0, 0.0, 0.0, 1.0,
                266.67, 16.67, -3433.33, -16.67;
  const SuspensionParams params;
  s.system.B = suspension_b(params);
  s.system.Q = Mat::Identity(4, 4);
  s.system.R = 0.1 * Mat::Identity(1, 1);
  s.system.x0.resize(4);
  s.system.x0 << 1.0, -10.0, 0.3, 10.0;
  s.system.dt = 0.00005;
  s.Ktarget.resize(1, 4);
  s.Ktarget << -1.74, -2.53, 32.1, 2.26;
  s.n_samples = 500;
  s.horizon = 40000;
  s.crosscheck = TargetCrossCheck{params, 2000.0, 0.05};
  return s;
}

Scenario case_scenario(const std::string& name) {
  if (name == "case1") return case1_scenario();
  if (name == "case2") return case2_scenario();
  throw ValidationError("unknown case '" + name + "' (expected case1 or case2)");
}

Mat case1_published_kstar() {
  Mat k(2, 4);
  k << -2.87, -0.38, -0.34, -1.24,
       4.32, 1.14, 3.63, 4.71;
  return k;
}

Mat case2_published_kstar() {
  Mat k(1, 4);
  k << -0.31, -2.57, 30.6, 2.22;
  return k;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.size() == 0) {
    return std::numeric_limits<double>::infinity();
  }
  return (a - b).cwiseAbs().maxCoeff();
}

double max_rel_diff(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.size() == 0) {
    return std::numeric_limits<double>::infinity();
  }
  return ((a - b).array().abs() / b.array().abs()).maxCoeff();
}

std::vector<CheckRow> reproduction_checks(const std::string& case_name,
                                          const ScenarioReport& r) {
  std::vector<CheckRow> rows;
  auto add = [&](std::string name, double measured, double threshold, bool gating) {
    rows.push_back({std::move(name), measured, threshold, measured <= threshold, gating});
  };

  if (!r.errors.empty()) {
    rows.push_back({"all stages succeeded", static_cast<double>(r.errors.size()), 0.0,
                    false, true});
  }
  if (case_name == "case1") {
    add("Kstar vs published K* (max abs)", max_abs_diff(r.Kstar, case1_published_kstar()),
        0.02, true);
    add("Khat_poisoned vs Ktarget (max abs)", max_abs_diff(r.Khat_poisoned, r.Ktarget),
        0.2, true);
    // Settling: the poisoned loop must settle strictly later than the clean one.
    double margin = std::numeric_limits<double>::infinity();
    if (r.clean_trajectory && r.poisoned_trajectory) {
      const auto clean = settling_step(*r.clean_trajectory);
      const auto pois = settling_step(*r.poisoned_trajectory);
      if (clean) {
        const double p = pois ? static_cast<double>(*pois)
                              : std::numeric_limits<double>::infinity();
        margin = static_cast<double>(*clean) - p;  // negative when poisoned is slower
      }
    }
    add("settling(clean) - settling(poisoned) [steps]", margin, -1.0, true);
  } else if (case_name == "case2") {
    add("Kstar vs published K* (max abs)", max_abs_diff(r.Kstar, case2_published_kstar()),
        0.05, true);
    add("rebuilt Ktarget (k_s = 2000) vs published (max abs)",
        r.Ktarget_rebuilt ? max_abs_diff(*r.Ktarget_rebuilt, r.Ktarget)
                          : std::numeric_limits<double>::infinity(),
        0.05, true);
    add("Khat_poisoned vs Ktarget (max rel)", max_rel_diff(r.Khat_poisoned, r.Ktarget),
        0.05, true);
  } else {
    throw ValidationError("unknown case '" + case_name + "'");
  }
  if (r.clean_trajectory && r.poisoned_trajectory) {
    add("cost(clean) - cost(poisoned)",
        r.clean_trajectory->cost - r.poisoned_trajectory->cost, 0.0, false);
  }
  return rows;
}

}  // namespace lqpoison
