#include "screenaudit/tradeoff.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "screenaudit/errors.hpp"
#include "screenaudit/io.hpp"
#include "screenaudit/numeric.hpp"

namespace screenaudit {
namespace tradeoff {

namespace {

// Mean or at-or-above-cut share of true outcomes over the selected ids.
void fill_efficiency(const screen::Roster& roster,
                     const std::map<std::string, std::size_t>& by_id,
                     const std::vector<std::string>& selected_ids, const EfficiencySpec& spec,
                     TradeoffPoint& pt) {
  KahanSum sum;
  std::size_t below = 0;
  for (const auto& id : selected_ids) {
    const auto& c = roster.candidate(by_id.at(id));
    const double y = *c.true_outcome;
    sum.add(y);
    if (y < spec.cut) ++below;
  }
  const double n = static_cast<double>(selected_ids.size());
  if (spec.mode == EfficiencySpec::Mode::mean_outcome) {
    pt.efficiency = sum.value() / n;
  } else {
    const double below_share = static_cast<double>(below) / n;
    pt.below_cut_share = below_share;
    pt.efficiency = 1.0 - below_share;
  }
}

bool weak_direction(const TradeoffCurve& a, const TradeoffCurve& b, double tolerance,
                    std::vector<double>* strict, std::size_t* shared_feasible) {
  bool weak = true;
  std::size_t shared = 0;
  for (const auto& pa : a.points) {
    const TradeoffPoint* pb = b.point_at(pa.target);
    if (pb == nullptr) continue;
    if (!pa.feasible || !pb->feasible) continue;
    ++shared;
    if (pa.efficiency < pb->efficiency - tolerance) weak = false;
    if (strict != nullptr && pa.efficiency > pb->efficiency + tolerance) {
      strict->push_back(pa.target);
    }
  }
  if (shared_feasible != nullptr) *shared_feasible = shared;
  if (shared == 0) {
    throw ParameterError("dominance check: curves share no feasible targets");
  }
  return weak;
}

}  // namespace

std::string EfficiencySpec::describe() const {
  if (mode == Mode::mean_outcome) {
    return "mean true outcome among selected (higher is better)";
  }
  std::ostringstream s;
  s << "share of selected with true outcome at or above " << format_double(cut)
    << " (higher is better); complementary below-cut share reported per point";
  return s.str();
}

std::size_t TradeoffCurve::feasible_count() const {
  std::size_t n = 0;
  for (const auto& p : points) {
    if (p.feasible) ++n;
  }
  return n;
}

const TradeoffPoint* TradeoffCurve::point_at(double target) const {
  for (const auto& p : points) {
    if (p.target == target) return &p;
  }
  return nullptr;
}

Json TradeoffCurve::to_json() const {
  Json j;
  j["format"] = "screenaudit.tradeoff_curve/1";
  j["variant"] = variant;
  j["k"] = k;
  j["roster_digest"] = format_digest(roster_digest);
  j["efficiency_definition"] = efficiency_definition;
  j["grid"]["size"] = points.size();
  j["grid"]["feasible"] = feasible_count();
  Json pts = Json::array();
  for (const auto& p : points) {
    Json e;
    e["target"] = p.target;
    e["feasible"] = p.feasible;
    if (p.feasible) {
      e["achieved_share"] = p.achieved_share;
      e["efficiency"] = p.efficiency;
      if (p.below_cut_share.has_value()) e["below_cut_share"] = *p.below_cut_share;
      if (p.threshold_advantaged.has_value()) {
        e["threshold_advantaged"] = *p.threshold_advantaged;
      }
      if (p.threshold_disadvantaged.has_value()) {
        e["threshold_disadvantaged"] = *p.threshold_disadvantaged;
      }
    } else {
      e["error"] = p.error;
    }
    pts.push_back(std::move(e));
  }
  j["points"] = std::move(pts);
  return j;
}

std::vector<double> default_targets() {
  std::vector<double> targets;
  targets.reserve(51);
  for (int i = 0; i <= 50; ++i) targets.push_back(static_cast<double>(i) / 100.0);
  return targets;
}

double unconstrained_share(const screen::ScoredRoster& scored, std::size_t k,
                           screen::TieRule rule) {
  const auto sel = screen::select_top_k(scored, k, rule);
  return static_cast<double>(sel.selected_disadvantaged) / static_cast<double>(k);
}

TradeoffCurve tradeoff_curve(const std::string& variant_tag, const screen::ScoredRoster& scored,
                             std::size_t k, std::span<const double> targets,
                             const EfficiencySpec& spec) {
  if (scored.roster == nullptr) throw ParameterError("tradeoff curve: unscored roster");
  const auto& roster = *scored.roster;
  if (targets.empty()) throw ParameterError("tradeoff curve: empty target grid");
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (!roster.candidate(i).true_outcome.has_value()) {
      throw ValidationError("tradeoff curve: candidate '" + roster.candidate(i).id +
                            "' has no true outcome");
    }
    by_id.emplace(roster.candidate(i).id, i);
  }

  std::vector<double> grid(targets.begin(), targets.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (double t : grid) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw ParameterError("tradeoff curve: target outside [0, 1]");
    }
  }

  TradeoffCurve curve;
  curve.variant = variant_tag;
  curve.k = k;
  curve.roster_digest = roster.digest();
  curve.efficiency_definition = spec.describe();
  for (double t : grid) {
    TradeoffPoint pt;
    pt.target = t;
    try {
      const auto sel = screen::select_with_group_target(scored, k, t);
      pt.feasible = true;
      pt.achieved_share =
          static_cast<double>(sel.selected_disadvantaged) / static_cast<double>(k);
      pt.threshold_advantaged = sel.threshold_advantaged;
      pt.threshold_disadvantaged = sel.threshold_disadvantaged;
      fill_efficiency(roster, by_id, sel.selected_ids, spec, pt);
    } catch (const InfeasibleError& e) {
      pt.feasible = false;
      pt.error = e.what();
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

TradeoffCurve tradeoff_curve(const trainer::TrainedScreener& screener,
                             const screen::Roster& roster, std::size_t k,
                             std::span<const double> targets, const EfficiencySpec& spec) {
  const auto scored = screen::score_roster(screener, roster);
  return tradeoff_curve(trainer::to_string(screener.variant()), scored, k, targets, spec);
}

std::vector<TradeoffCurve> tradeoff_curves(const trainer::VariantSet& variants,
                                           const screen::Roster& roster, std::size_t k,
                                           std::span<const double> targets,
                                           const EfficiencySpec& spec) {
  std::vector<TradeoffCurve> out;
  out.push_back(tradeoff_curve(variants.blind, roster, k, targets, spec));
  out.push_back(tradeoff_curve(variants.aware, roster, k, targets, spec));
  out.push_back(tradeoff_curve(variants.orthogonalized, roster, k, targets, spec));
  return out;
}

Json DominanceResult::to_json() const {
  Json j;
  j["format"] = "screenaudit.dominance/1";
  j["curve_a"] = curve_a;
  j["curve_b"] = curve_b;
  j["tolerance"] = tolerance;
  j["weakly_dominates"] = weakly_dominates;
  j["strict_targets"] = strict_targets;
  j["incomparable"] = incomparable;
  j["shared_feasible_targets"] = shared_feasible;
  return j;
}

DominanceResult dominance_check(const TradeoffCurve& a, const TradeoffCurve& b,
                                double tolerance) {
  if (!(tolerance >= 0.0)) throw ParameterError("dominance check: negative tolerance");
  DominanceResult out;
  out.curve_a = a.variant;
  out.curve_b = b.variant;
  out.tolerance = tolerance;
  out.weakly_dominates =
      weak_direction(a, b, tolerance, &out.strict_targets, &out.shared_feasible);
  const bool reverse = weak_direction(b, a, tolerance, nullptr, nullptr);
  out.incomparable = !out.weakly_dominates && !reverse;
  return out;
}

Json DecileMatrix::to_json() const {
  Json j;
  j["format"] = "screenaudit.decile_matrix/1";
  j["screener_a"] = screener_a;
  j["screener_b"] = screener_b;
  j["subpopulation"] = subpopulation;
  j["members"] = members;
  j["off_diagonal_mass"] = off_diagonal_mass;
  Json rows = Json::array();
  for (const auto& row : counts) {
    rows.push_back(std::vector<std::size_t>(row.begin(), row.end()));
  }
  j["counts"] = std::move(rows);
  return j;
}

DecileMatrix decile_matrix(const screen::ScoredRoster& a, const screen::ScoredRoster& b,
                           const screen::Slice& subpopulation, const std::string& tag_a,
                           const std::string& tag_b) {
  if (a.roster == nullptr || b.roster == nullptr || a.roster != b.roster) {
    throw ParameterError("decile matrix: both scorings must cover one roster");
  }
  const auto& roster = *a.roster;
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (subpopulation.predicate(roster.candidate(i))) members.push_back(i);
  }
  if (members.size() < 10) {
    throw InsufficientDataError("decile matrix: subpopulation '" + subpopulation.label +
                                "' has " + std::to_string(members.size()) +
                                " members; deciles need at least 10");
  }

  // Rank-decile of each member under one scoring: ascending score, ties by id.
  const auto deciles = [&](const std::vector<double>& scores) {
    std::vector<std::size_t> order = members;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (scores[x] != scores[y]) return scores[x] < scores[y];
      return roster.candidate(x).id < roster.candidate(y).id;
    });
    std::map<std::size_t, std::size_t> decile_of;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      decile_of[order[pos]] = pos * 10 / order.size();
    }
    return decile_of;
  };
  const auto dec_a = deciles(a.scores);
  const auto dec_b = deciles(b.scores);

  DecileMatrix m;
  m.subpopulation = subpopulation.label;
  m.screener_a = tag_a;
  m.screener_b = tag_b;
  m.members = members.size();
  std::size_t diagonal = 0;
  for (std::size_t i : members) {
    const std::size_t da = dec_a.at(i);
    const std::size_t db = dec_b.at(i);
    ++m.counts[da][db];
    if (da == db) ++diagonal;
  }
  m.off_diagonal_mass =
      1.0 - static_cast<double>(diagonal) / static_cast<double>(members.size());
  return m;
}

DecileMatrix decile_matrix(const trainer::TrainedScreener& a, const trainer::TrainedScreener& b,
                           const screen::Roster& roster, const screen::Slice& subpopulation) {
  const auto sa = screen::score_roster(a, roster);
  const auto sb = screen::score_roster(b, roster);
  return decile_matrix(sa, sb, subpopulation, trainer::to_string(a.variant()),
                       trainer::to_string(b.variant()));
}

void write_curve_csv(const TradeoffCurve& curve, const std::filesystem::path& path,
                     const std::vector<std::string>& comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "target,feasible,achieved_share,efficiency,below_cut_share,"
         "threshold_advantaged,threshold_disadvantaged\n";
  for (const auto& p : curve.points) {
    out << format_double(p.target) << ',' << (p.feasible ? 1 : 0) << ',';
    if (p.feasible) {
      out << format_double(p.achieved_share) << ',' << format_double(p.efficiency) << ',';
      out << (p.below_cut_share.has_value() ? format_double(*p.below_cut_share) : "NA") << ',';
      out << (p.threshold_advantaged.has_value() ? format_double(*p.threshold_advantaged)
                                                 : "NA")
          << ',';
      out << (p.threshold_disadvantaged.has_value()
                  ? format_double(*p.threshold_disadvantaged)
                  : "NA");
    } else {
      out << "NA,NA,NA,NA,NA";
    }
    out << "\n";
  }
  write_text_file(path, out.str());
}

void write_matrix_csv(const DecileMatrix& matrix, const std::filesystem::path& path,
                      const std::vector<std::string>& comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "decile_" << matrix.screener_a << ",decile_" << matrix.screener_b << ",count\n";
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) {
      out << i << ',' << j << ',' << matrix.counts[i][j] << "\n";
    }
  }
  write_text_file(path, out.str());
}

}  // namespace tradeoff
}  // namespace screenaudit
