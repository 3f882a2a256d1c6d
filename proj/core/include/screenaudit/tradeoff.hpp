#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screenaudit/screen.hpp"
#include "screenaudit/trainer.hpp"

namespace screenaudit {
namespace tradeoff {

using Json = nlohmann::ordered_json;

// How a selected set's quality is measured. Either way the stored efficiency
// is oriented so that larger is better; in cut mode the complementary
// below-cut share is reported alongside each point for plotting.
struct EfficiencySpec {
  enum class Mode { mean_outcome, share_at_or_above_cut };
  Mode mode = Mode::mean_outcome;
  double cut = 0.0;  // only read in cut mode

  std::string describe() const;
};

struct TradeoffPoint {
  double target = 0.0;
  bool feasible = false;
  double achieved_share = 0.0;  // disadvantaged among selected / k
  double efficiency = 0.0;      // higher is better
  std::optional<double> below_cut_share;
  std::optional<double> threshold_advantaged;
  std::optional<double> threshold_disadvantaged;
  std::string error;  // set when infeasible
};

struct TradeoffCurve {
  std::string variant;
  std::size_t k = 0;
  std::uint64_t roster_digest = 0;
  std::string efficiency_definition;
  std::vector<TradeoffPoint> points;  // sorted by target, one per grid value

  std::size_t feasible_count() const;
  const TradeoffPoint* point_at(double target) const;
  Json to_json() const;
};

// Default sweep grid: 0 to 0.5 in steps of 0.01.
std::vector<double> default_targets();

// Disadvantaged share of the unconstrained top-k selection.
double unconstrained_share(const screen::ScoredRoster& scored, std::size_t k,
                           screen::TieRule rule = screen::TieRule::by_id);

// One constrained selection per target; infeasible targets are kept as marked
// points rather than dropped. Roster must carry a true outcome for every
// candidate.
TradeoffCurve tradeoff_curve(const std::string& variant_tag, const screen::ScoredRoster& scored,
                             std::size_t k, std::span<const double> targets,
                             const EfficiencySpec& spec = {});
TradeoffCurve tradeoff_curve(const trainer::TrainedScreener& screener,
                             const screen::Roster& roster, std::size_t k,
                             std::span<const double> targets, const EfficiencySpec& spec = {});

// Curves for the blind / aware / orthogonalized variants on a shared roster.
std::vector<TradeoffCurve> tradeoff_curves(const trainer::VariantSet& variants,
                                           const screen::Roster& roster, std::size_t k,
                                           std::span<const double> targets,
                                           const EfficiencySpec& spec = {});

struct DominanceResult {
  std::string curve_a;
  std::string curve_b;
  double tolerance = 0.0;
  // A weakly dominates B: at every target feasible on both curves, A's
  // efficiency is at least B's minus the tolerance.
  bool weakly_dominates = false;
  std::vector<double> strict_targets;  // where A beats B by more than the tolerance
  bool incomparable = false;           // neither direction weakly dominates
  std::size_t shared_feasible = 0;

  Json to_json() const;
};

DominanceResult dominance_check(const TradeoffCurve& a, const TradeoffCurve& b,
                                double tolerance = 1e-6);

// Counts of a subpopulation's members by (rank-decile under A, rank-decile
// under B). Deciles are by ascending score with ties broken by candidate id,
// so decile 9 holds the highest scores.
struct DecileMatrix {
  std::array<std::array<std::size_t, 10>, 10> counts{};
  std::size_t members = 0;
  double off_diagonal_mass = 0.0;
  std::string subpopulation;
  std::string screener_a;
  std::string screener_b;

  Json to_json() const;
};

DecileMatrix decile_matrix(const screen::ScoredRoster& a, const screen::ScoredRoster& b,
                           const screen::Slice& subpopulation, const std::string& tag_a,
                           const std::string& tag_b);
DecileMatrix decile_matrix(const trainer::TrainedScreener& a, const trainer::TrainedScreener& b,
                           const screen::Roster& roster, const screen::Slice& subpopulation);

// One CSV row per grid point / matrix cell; comment lines are written first,
// each prefixed with '#'.
void write_curve_csv(const TradeoffCurve& curve, const std::filesystem::path& path,
                     const std::vector<std::string>& comments = {});
void write_matrix_csv(const DecileMatrix& matrix, const std::filesystem::path& path,
                      const std::vector<std::string>& comments = {});

}  // namespace tradeoff
}  // namespace screenaudit
