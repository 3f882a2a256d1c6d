#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screenaudit/model.hpp"
#include "screenaudit/trainer.hpp"

namespace screenaudit {
namespace scenarios {

using Json = nlohmann::ordered_json;

// Every generator plants one discrimination mechanism with fully disclosed
// parameters, so tests can assert the direction the construction forces.
//
//   biased_ratings       manager ratings informative for the advantaged group,
//                        floored for the disadvantaged one
//   false_arrests        equal underlying crime, arrest counts inflated for
//                        the disadvantaged group
//   structural_admissions  group mean-shift plus group-specific slopes, so a
//                        group-blind model mis-ranks
//   homogeneous_control  structural_admissions with identical slopes (paired
//                        rows share the same draws)
//   selective_labels     a gatekeeper admits the disadvantaged group only on
//                        below-threshold interviews; outcomes censored for the
//                        non-admitted
//   judge_release        bail-style data with true risk, realized
//                        failure-to-appear, and a noisy severity-inflating
//                        judge score
//   data_entry_outcomes  two outcome columns (volume, hours) where a
//                        group-correlated home constraint enters hours only
struct ScenarioSpec {
  std::string name;
  std::size_t n = 20000;
  std::uint64_t seed = 0;
  double disadvantaged_share = 0.5;
  // Overrides of the scenario's named defaults; unknown names are errors.
  std::map<std::string, double> params;
};

std::vector<std::string> scenario_names();
// Defaults for one scenario; ParameterError on unknown scenario.
std::map<std::string, double> default_params(const std::string& name);
// Spec with defaults applied and everything validated.
ScenarioSpec resolve(const ScenarioSpec& spec);

struct ScenarioOutput {
  Dataset data;
  // Analytic ground truth for the all-categorical scenarios.
  std::optional<DiscreteWorld> world;
  // Planted parameters, formulas, and the directional guarantees they force.
  Json notes;
};

// Deterministic under (name, n, seed, share, params); growing n extends the
// sample without changing earlier rows.
ScenarioOutput generate(const ScenarioSpec& spec);

// The noiseless planted judge rule for a judge_release spec: true-risk formula
// with the severity weight inflated by `severity_inflation`. The per-defendant
// noisy version is the dataset's judge_score outcome column.
ScoreFunction judge_policy(const ScenarioSpec& spec);

struct GroupReleaseStats {
  std::size_t defendants = 0;
  std::size_t judge_detained = 0;
  std::size_t machine_detained = 0;
  double judge_detention_rate = 0.0;
  double machine_detention_rate = 0.0;
  // (judge detained - machine detained) / total judge detained; the two
  // groups' contributions sum to the total reduction.
  double reduction_contribution = 0.0;
};

struct ReleaseReport {
  std::size_t defendants = 0;
  std::size_t judge_detained = 0;
  std::size_t machine_detained = 0;
  double judge_detention_rate = 0.0;
  double machine_detention_rate = 0.0;
  // Expected failure-to-appear rate among the released, from the ground-truth
  // risk column.
  double judge_released_fta = 0.0;
  double machine_released_fta = 0.0;
  double reduction = 0.0;  // 1 - machine detained / judge detained
  GroupReleaseStats advantaged;
  GroupReleaseStats disadvantaged;

  Json to_json() const;
};

// Holds the released-set expected FTA at or below the judge's while detaining
// as few defendants as possible: detains top-k by machine score, scanning all
// k. Requires the ground-truth risk column; ties in either ranking break by
// row order.
ReleaseReport release_experiment(const Dataset& data, std::span<const double> machine_scores,
                                 double judge_detention_share,
                                 const std::string& judge_column = "judge_score",
                                 const std::string& risk_column = "fta_risk");
ReleaseReport release_experiment(const Dataset& data,
                                 const trainer::TrainedScreener& screener,
                                 double judge_detention_share,
                                 const std::string& judge_column = "judge_score",
                                 const std::string& risk_column = "fta_risk");

}  // namespace scenarios
}  // namespace screenaudit
