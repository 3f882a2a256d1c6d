#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "screenaudit/io.hpp"
#include "screenaudit/model.hpp"
#include "screenaudit/trainer.hpp"

namespace screenaudit {
namespace screen {

struct Candidate {
  std::string id;
  FeatureVector features;
  std::optional<double> true_outcome;
};

// A roster of unique-id candidates conforming to one schema.
class Roster {
 public:
  Roster() = default;
  Roster(FeatureSchema schema, std::vector<Candidate> candidates);

  const FeatureSchema& schema() const { return schema_; }
  std::size_t size() const { return candidates_.size(); }
  const Candidate& candidate(std::size_t i) const { return candidates_.at(i); }
  const std::vector<Candidate>& candidates() const { return candidates_; }
  int group_of(std::size_t i) const;

  std::uint64_t schema_digest() const { return schema_.digest(); }
  // Content digest over schema, ids, features, and outcomes.
  std::uint64_t digest() const;

 private:
  FeatureSchema schema_;
  std::vector<Candidate> candidates_;
};

// Dataset rows become candidates with zero-padded positional ids ("r00042"),
// so lexicographic id order equals input order. `outcome_column` fills
// true_outcome (censored rows get none).
Roster roster_from_dataset(const Dataset& data,
                           const std::optional<std::string>& outcome_column);

Roster read_roster_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                       const std::optional<std::string>& outcome_column);
void write_roster_csv(const Roster& roster,
                      const std::optional<std::string>& outcome_column,
                      const std::filesystem::path& path);

// Roster scored in input order.
struct ScoredRoster {
  const Roster* roster = nullptr;  // non-owning; must outlive the scored view
  std::vector<double> scores;
};

// Scores every candidate; schema digests must match.
ScoredRoster score_roster(const trainer::TrainedScreener& screener, const Roster& roster);
// Score with an arbitrary function (oracle comparisons, judge rules).
ScoredRoster score_roster(const ScoreFunction& score, const Roster& roster);

enum class TieRule { by_id, stable_input_order };
std::string to_string(TieRule rule);
TieRule tie_rule_from_string(const std::string& s);

// Every tie at a selection boundary is recorded, never silently broken.
struct TieLogEntry {
  double score = 0.0;
  std::vector<std::string> selected_ids;
  std::vector<std::string> rejected_ids;
  std::string rule;
};

struct SelectionResult {
  std::vector<std::string> selected_ids;  // descending score, ties per rule
  double threshold = 0.0;                 // lowest selected score
  // Per-group accounting.
  std::size_t selected_advantaged = 0;
  std::size_t selected_disadvantaged = 0;
  std::size_t roster_advantaged = 0;
  std::size_t roster_disadvantaged = 0;
  double acceptance_rate_advantaged = 0.0;
  double acceptance_rate_disadvantaged = 0.0;
  // Mean true outcome among selected when every selected candidate carries
  // one; otherwise mean score. `efficiency_metric` says which.
  double efficiency = 0.0;
  std::string efficiency_metric;
  std::vector<TieLogEntry> tie_log;
  // Present for group-target selections: per-list thresholds and the quota.
  std::optional<double> threshold_advantaged;
  std::optional<double> threshold_disadvantaged;
  std::optional<std::size_t> disadvantaged_quota;

  Json to_json() const;
};

// Top k by score, ties broken per rule. k must lie in [1, roster size].
SelectionResult select_top_k(const ScoredRoster& scored, std::size_t k,
                             TieRule rule = TieRule::by_id);

// Exact-quota variant: selects ceil(target_share * k) disadvantaged candidates
// (their top scorers) and fills the rest with the top advantaged candidates.
// Throws InfeasibleError when either group cannot fill its quota.
SelectionResult select_with_group_target(const ScoredRoster& scored, std::size_t k,
                                         double target_share, TieRule rule = TieRule::by_id);

// What-if query for one candidate: re-score after feature changes and compare
// against the bar set by the rest of the roster (the k-th best score with the
// candidate removed; ties at the bar do not count as crossing).
struct CounterfactualResult {
  std::string id;
  double old_score = 0.0;
  double new_score = 0.0;
  double bar = 0.0;  // k-th score of the roster without the candidate
  bool old_selected = false;
  bool new_selected = false;
  bool flipped = false;

  Json to_json() const;
};

CounterfactualResult counterfactual(const trainer::TrainedScreener& screener,
                                    const Roster& roster, const std::string& candidate_id,
                                    const std::vector<std::pair<std::string, double>>& deltas,
                                    std::size_t k);

// Acceptance rates over roster slices. Group slices are always included;
// empty slices report no rate rather than a fabricated zero.
struct Slice {
  std::string label;
  std::function<bool(const Candidate&)> predicate;
};

struct SliceRate {
  std::string label;
  std::size_t members = 0;
  std::size_t selected = 0;
  std::optional<double> rate;  // none when the slice is empty
};

std::vector<SliceRate> acceptance_rates(const SelectionResult& selection, const Roster& roster,
                                        const std::vector<Slice>& slices);

}  // namespace screen
}  // namespace screenaudit
