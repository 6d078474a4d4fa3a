#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "switchctl/hjb_limits.hpp"
#include "switchctl/npds_solver.hpp"
#include "switchctl/problem.hpp"
#include "switchctl/simulate.hpp"

namespace switchctl {

/// Everything one experiment needs. Regime indices are zero-based here and
/// one-based in the file.
struct ExperimentConfig {
  explicit ExperimentConfig(ProblemSpec problem) : spec(std::move(problem)) {}

  ProblemSpec spec;
  std::vector<int> nodes;
  SolveParams solver;
  ContinuationParams continuation;
  /// Defaults to continuation.region_tolerance().
  double region_tolerance = 0.0;
  SimParams simulation;
  Vec x0;
  int regime0 = 0;
  /// Crosscheck passes when |MC - PDE| <= max(se_multiplier * SE, absolute).
  double crosscheck_absolute = 2e-2;
  double crosscheck_se_multiplier = 3.0;
  int validation_samples = 64;
  std::string output = "out";
};

/// Parses a config document. Unknown keys, wrong types and malformed JSON
/// throw ConfigError naming the source, the JSON pointer of the key and, for
/// syntax errors, the line.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON of a problem (echoed into artifacts).
nlohmann::json problem_to_json(const ProblemSpec& spec);

}  // namespace switchctl
