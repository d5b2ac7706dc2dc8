#pragma once
// Oracle comparison suites. The acceptance binary runs all of them with its
// pinned limits; `hri bench-oracle` runs the geometric ones.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hri::suites {

struct SuiteResult {
  std::string name;
  bool passed = false;
  double seconds = 0.0;
  double time_limit_s = 0.0;
  std::string detail;
};

struct DistanceLimits {
  int cases = 1000;
  double oracle_tol = 1e-3;
  double invariance_tol = 1e-9;
  double time_limit_s = 5.0;
};
SuiteResult distance_kernel(const DistanceLimits& limits, std::uint64_t seed);

struct SummaryLimits {
  int boxes = 100;
  int transforms = 100;
  double exact_tol = 1e-9;
  double equivariance_tol = 1e-9;
  double translation_tol = 1e-12;
  double time_limit_s = 5.0;
};
SuiteResult structural_summary(const SummaryLimits& limits, std::uint64_t seed);

struct SelectionLimits {
  int scenes = 1000;
  int min_objects = 2;
  int max_objects = 9;
  double tie_fraction = 0.2;
  double time_limit_s = 10.0;
};
SuiteResult target_selection(const SelectionLimits& limits, std::uint64_t seed);

struct SweptLimits {
  int cases = 10000;
  double sample_step = 1e-3;
  double boundary_band = 1e-6;
  double time_limit_s = 60.0;
};
SuiteResult swept_checker(const SweptLimits& limits, std::uint64_t seed);

struct ClosedLoopLimits {
  int scenes_per_q = 100;
  int max_retries = 3;
  double time_limit_s = 60.0;
};
SuiteResult closed_loop(const ClosedLoopLimits& limits, std::uint64_t seed);

struct PlannerLimits {
  int scenes = 500;
  double time_limit_s = 30.0;
};
SuiteResult deterministic_planner(const PlannerLimits& limits, std::uint64_t seed);

struct GrammarLimits {
  int max_length = 6;
  double time_limit_s = 10.0;
};
SuiteResult grammar_fsm(const GrammarLimits& limits);

struct ReplayLimits {
  double time_limit_s = 30.0;
};
SuiteResult end_to_end_replay(const ReplayLimits& limits, const std::filesystem::path& scenario_dir);

struct PerceptionLimits {
  int worlds = 100;
  double centroid_tol = 0.01;
  double extent_tol = 0.02;
  double time_limit_s = 30.0;
};
SuiteResult perception_round_trip(const PerceptionLimits& limits, std::uint64_t seed);

/// "PASS name (1.23 s / 5 s): detail"
std::string format(const SuiteResult& r);

}  // namespace hri::suites
