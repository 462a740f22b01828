#pragma once

#include <string>
#include <vector>

#include "lqpoison/pipeline.hpp"

namespace lqpoison {

/// 4-state, 2-input plant with Q = I, R = 0.5 I, x0 = (0.5, -0.5, 0.5, -0.5),
/// dt = 0.01 and its published target gain.
Scenario case1_scenario();

/// Quarter-car active suspension, Q = I, R = 0.1, dt = 5e-5, target gain of the
/// k_s = 2000 N/m design.
Scenario case2_scenario();

/// Scenario by name ("case1", "case2"); ValidationError otherwise.
Scenario case_scenario(const std::string& name);

/// Published optimal gains, to two decimals.
Mat case1_published_kstar();
Mat case2_published_kstar();

struct CheckRow {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool gating = true;  // non-gating rows are reported but never fail a run
};

/// Reproduction checks for a finished case report.
std::vector<CheckRow> reproduction_checks(const std::string& case_name,
                                          const ScenarioReport& r);

double max_abs_diff(const Mat& a, const Mat& b);
/// max_ij |a_ij - b_ij| / |b_ij|.
double max_rel_diff(const Mat& a, const Mat& b);

}  // namespace lqpoison
