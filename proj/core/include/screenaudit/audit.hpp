#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "screenaudit/model.hpp"
#include "screenaudit/trainer.hpp"

namespace screenaudit {
namespace audit {

using Json = nlohmann::ordered_json;

enum class AuditKind { under_optimization, outcome_choice, sample_drift, simulated_probe };
enum class Verdict { pass, flag };

std::string to_string(AuditKind kind);
std::string to_string(Verdict verdict);

// One audit's outcome: named statistics, the thresholds they were judged
// against, and a narrative. A finding is statistical evidence, never a legal
// conclusion, and a flag always carries its statistic, threshold, and input
// digests.
struct AuditFinding {
  AuditKind kind = AuditKind::under_optimization;
  Verdict verdict = Verdict::pass;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> statistics;
  std::vector<std::pair<std::string, double>> thresholds;
  std::vector<std::pair<std::string, std::string>> input_digests;
  Json details;  // kind-specific tables
  std::string narrative;

  double statistic(const std::string& name) const;  // ParameterError if absent
  std::string file_name() const;  // "<kind>_seed<seed>.json"
  Json to_json() const;
  void save(const std::filesystem::path& directory) const;
};

// Retrains from the disclosed inputs with the auditor's own config, then
// compares the submitted and auditor screeners on the auditor's holdout rows.
// Flags when the submitted screener's loss exceeds the auditor's by more than
// the relative margin, or when the submitted metadata's declared holdout loss
// cannot be reproduced from the disclosed data.
AuditFinding retrain_audit(const trainer::TrainedScreener& submitted, const Dataset& disclosed,
                           const std::string& outcome, const Representation& r,
                           const trainer::TrainConfig& cfg, double margin = 0.05);

// Trains one screener per candidate outcome column under one config and seed,
// simulates a top-share selection with each, and tabulates the group
// acceptance-rate gap (advantaged minus disadvantaged) and the mean of the
// trained outcome among the selected. Flags the declared outcome only if its
// gap exceeds every alternative's by more than the slack. Training failures
// become per-outcome error entries and the audit continues.
AuditFinding outcome_choice_audit(const Dataset& data, const std::vector<std::string>& outcomes,
                                  const std::string& declared_outcome, const Representation& r,
                                  double k_share, const trainer::TrainConfig& cfg,
                                  double slack = 0.0);

struct DriftThresholds {
  // Standardized mean difference for real features; absolute frequency
  // difference for categorical levels and for the group share.
  double feature = 0.1;
  double group_share = 0.1;
};

// Compares a training sample against the larger universe it was drawn from:
// per-feature differences (pooled and within each group) plus the difference
// in the disadvantaged group's share. Every statistic is listed regardless of
// verdict; any one crossing its threshold flags.
AuditFinding sample_drift_audit(const Dataset& training, const Dataset& universe,
                                const DriftThresholds& thresholds = {});

// The training procedure under audit: everything the firm does between
// receiving data and producing a screener.
using TrainerUnderAudit = std::function<trainer::TrainedScreener(
    const Dataset& data, const std::string& outcome, const Representation& r,
    const trainer::TrainConfig& cfg)>;

struct ProbeConfig {
  std::size_t n = 20000;
  double disadvantaged_share = 0.5;
  double k_share = 0.25;
  std::uint64_t seed = 0;
  trainer::TrainConfig train;
};

// Feeds seeded data from a probe world — one where the disadvantaged group is
// at least as strong on the true outcome — through the trainer under audit and
// simulates a top-share selection. Flags when the advantaged acceptance rate
// exceeds the disadvantaged one by more than 3 standard errors of the rate
// difference.
AuditFinding simulated_probe(const TrainerUnderAudit& train_fn, const DiscreteWorld& probe,
                             const Representation& r, const ProbeConfig& config);

// Skill-only probe world with D(f) = -5/12: the disadvantaged group's skill
// distribution strictly dominates the advantaged group's.
DiscreteWorld default_probe_world();

}  // namespace audit
}  // namespace screenaudit
