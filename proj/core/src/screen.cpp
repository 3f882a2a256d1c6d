#include "screenaudit/screen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <sstream>

#include "screenaudit/numeric.hpp"

namespace screenaudit {
namespace screen {

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ull;
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  void real(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
};

// Order candidate indices by descending score, ties per rule.
std::vector<std::size_t> ranking(const ScoredRoster& scored,
                                 const std::vector<std::size_t>& pool, TieRule rule) {
  std::vector<std::size_t> order = pool;
  const auto& roster = *scored.roster;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored.scores[a] != scored.scores[b]) return scored.scores[a] > scored.scores[b];
    if (rule == TieRule::by_id) return roster.candidate(a).id < roster.candidate(b).id;
    return a < b;  // stable_input_order
  });
  return order;
}

// Tie entries at the selection boundary: candidates sharing the boundary
// score, split into kept and cut.
void log_boundary_ties(const ScoredRoster& scored, const std::vector<std::size_t>& order,
                       std::size_t k, TieRule rule, std::vector<TieLogEntry>& log) {
  if (k == 0 || k >= order.size()) return;
  const double boundary = scored.scores[order[k - 1]];
  if (scored.scores[order[k]] != boundary) return;
  TieLogEntry entry;
  entry.score = boundary;
  entry.rule = to_string(rule);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (scored.scores[order[i]] != boundary) continue;
    (i < k ? entry.selected_ids : entry.rejected_ids)
        .push_back(scored.roster->candidate(order[i]).id);
  }
  log.push_back(std::move(entry));
}

void fill_accounting(const ScoredRoster& scored, const std::vector<std::size_t>& chosen,
                     SelectionResult& out) {
  const auto& roster = *scored.roster;
  out.roster_advantaged = 0;
  out.roster_disadvantaged = 0;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    (roster.group_of(i) == kAdvantaged ? out.roster_advantaged : out.roster_disadvantaged)++;
  }
  bool all_outcomes = true;
  KahanSum outcome_sum, score_sum;
  out.threshold = chosen.empty() ? 0.0 : scored.scores[chosen.front()];
  for (std::size_t i : chosen) {
    const auto& c = roster.candidate(i);
    (roster.group_of(i) == kAdvantaged ? out.selected_advantaged
                                       : out.selected_disadvantaged)++;
    out.threshold = std::min(out.threshold, scored.scores[i]);
    score_sum.add(scored.scores[i]);
    if (c.true_outcome.has_value()) {
      outcome_sum.add(*c.true_outcome);
    } else {
      all_outcomes = false;
    }
  }
  out.acceptance_rate_advantaged =
      out.roster_advantaged ? static_cast<double>(out.selected_advantaged) /
                                  static_cast<double>(out.roster_advantaged)
                            : 0.0;
  out.acceptance_rate_disadvantaged =
      out.roster_disadvantaged ? static_cast<double>(out.selected_disadvantaged) /
                                     static_cast<double>(out.roster_disadvantaged)
                               : 0.0;
  const double n = static_cast<double>(chosen.size());
  if (all_outcomes && !chosen.empty()) {
    out.efficiency = outcome_sum.value() / n;
    out.efficiency_metric = "mean_true_outcome";
  } else {
    out.efficiency = chosen.empty() ? 0.0 : score_sum.value() / n;
    out.efficiency_metric = "mean_score";
  }
}

}  // namespace

// --- Roster -----------------------------------------------------------------

Roster::Roster(FeatureSchema schema, std::vector<Candidate> candidates)
    : schema_(std::move(schema)), candidates_(std::move(candidates)) {
  std::set<std::string> ids;
  for (const auto& c : candidates_) {
    if (c.id.empty()) throw ValidationError("roster: empty candidate id");
    if (!ids.insert(c.id).second) {
      throw ValidationError("roster: duplicate candidate id '" + c.id + "'");
    }
    check_conforms(schema_, c.features);
  }
}

int Roster::group_of(std::size_t i) const {
  return candidates_.at(i).features.cat(schema_.group_index());
}

std::uint64_t Roster::digest() const {
  Fnv f;
  f.u64(schema_.digest());
  f.u64(candidates_.size());
  for (const auto& c : candidates_) {
    f.str(c.id);
    for (double v : c.features.values) f.real(v);
    f.u64(c.true_outcome.has_value() ? 1 : 0);
    if (c.true_outcome.has_value()) f.real(*c.true_outcome);
  }
  return f.h;
}

Roster roster_from_dataset(const Dataset& data,
                           const std::optional<std::string>& outcome_column) {
  const auto& schema = data.schema();
  std::optional<std::size_t> oi;
  if (outcome_column.has_value()) oi = schema.outcome_index(*outcome_column);
  std::size_t width = 1;
  for (std::size_t n = data.size(); n >= 10; n /= 10) ++width;
  std::vector<Candidate> candidates;
  candidates.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::ostringstream id;
    id << "r";
    id.width(static_cast<int>(width));
    id.fill('0');
    id << i;
    Candidate c;
    c.id = id.str();
    c.features = data.row(i).features;
    if (oi.has_value()) c.true_outcome = data.row(i).outcomes[*oi];
    candidates.push_back(std::move(c));
  }
  return Roster(schema, std::move(candidates));
}

Roster read_roster_csv(const std::filesystem::path& path, const FeatureSchema& schema,
                       const std::optional<std::string>& outcome_column) {
  // Roster files are dataset files; positional ids keep input order legible.
  const Dataset data = read_dataset_csv(path, schema);
  return roster_from_dataset(data, outcome_column);
}

void write_roster_csv(const Roster& roster, const std::optional<std::string>& outcome_column,
                      const std::filesystem::path& path) {
  const auto& schema = roster.schema();
  std::vector<std::string> outcomes;
  if (outcome_column.has_value()) outcomes.push_back(*outcome_column);
  FeatureSchema out_schema(schema.features(), schema.group_feature(), outcomes);
  Dataset data(out_schema, "roster");
  for (const auto& c : roster.candidates()) {
    DatasetRow row;
    row.features = c.features;
    row.features.schema_digest = out_schema.digest();
    if (outcome_column.has_value()) row.outcomes.push_back(c.true_outcome);
    data.add_row(std::move(row));
  }
  write_dataset_csv(data, path);
}

// --- scoring ----------------------------------------------------------------

ScoredRoster score_roster(const trainer::TrainedScreener& screener, const Roster& roster) {
  if (screener.schema_digest() != roster.schema_digest()) {
    throw SchemaError("score_roster: roster schema does not match the screener's");
  }
  ScoredRoster out;
  out.roster = &roster;
  out.scores.reserve(roster.size());
  for (const auto& c : roster.candidates()) out.scores.push_back(screener.score(c.features));
  return out;
}

ScoredRoster score_roster(const ScoreFunction& score, const Roster& roster) {
  ScoredRoster out;
  out.roster = &roster;
  out.scores.reserve(roster.size());
  for (const auto& c : roster.candidates()) out.scores.push_back(score(c.features));
  return out;
}

// --- selection ----------------------------------------------------------------

std::string to_string(TieRule rule) {
  return rule == TieRule::by_id ? "by_id" : "stable_input_order";
}

TieRule tie_rule_from_string(const std::string& s) {
  if (s == "by_id") return TieRule::by_id;
  if (s == "stable_input_order") return TieRule::stable_input_order;
  throw ParameterError("unknown tie rule '" + s + "'");
}

SelectionResult select_top_k(const ScoredRoster& scored, std::size_t k, TieRule rule) {
  if (scored.roster == nullptr) throw ParameterError("select_top_k: unscored roster");
  const std::size_t n = scored.roster->size();
  if (k < 1 || k > n) {
    throw ParameterError("select_top_k: k = " + std::to_string(k) +
                         " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  const auto order = ranking(scored, pool, rule);
  const std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<long>(k));

  SelectionResult out;
  for (std::size_t i : chosen) out.selected_ids.push_back(scored.roster->candidate(i).id);
  log_boundary_ties(scored, order, k, rule, out.tie_log);
  fill_accounting(scored, chosen, out);
  return out;
}

SelectionResult select_with_group_target(const ScoredRoster& scored, std::size_t k,
                                         double target_share, TieRule rule) {
  if (scored.roster == nullptr) throw ParameterError("select_with_group_target: unscored roster");
  const auto& roster = *scored.roster;
  const std::size_t n = roster.size();
  if (k < 1 || k > n) {
    throw ParameterError("select_with_group_target: k outside [1, " + std::to_string(n) + "]");
  }
  if (!(target_share >= 0.0 && target_share <= 1.0)) {
    throw ParameterError("select_with_group_target: target share outside [0, 1]");
  }
  // Exact quota: the disadvantaged group receives ceil(target_share * k)
  // seats, the advantaged group the remainder.
  const auto quota_dis =
      static_cast<std::size_t>(std::ceil(target_share * static_cast<double>(k)));
  if (quota_dis > k) throw ParameterError("select_with_group_target: quota exceeds k");
  const std::size_t quota_adv = k - quota_dis;

  std::vector<std::size_t> adv_pool, dis_pool;
  for (std::size_t i = 0; i < n; ++i) {
    (roster.group_of(i) == kAdvantaged ? adv_pool : dis_pool).push_back(i);
  }
  if (dis_pool.size() < quota_dis) {
    throw InfeasibleError("group target infeasible: quota of " + std::to_string(quota_dis) +
                          " disadvantaged seats, only " + std::to_string(dis_pool.size()) +
                          " candidates");
  }
  if (adv_pool.size() < quota_adv) {
    throw InfeasibleError("group target infeasible: " + std::to_string(quota_adv) +
                          " advantaged seats, only " + std::to_string(adv_pool.size()) +
                          " candidates");
  }

  const auto adv_order = ranking(scored, adv_pool, rule);
  const auto dis_order = ranking(scored, dis_pool, rule);
  std::vector<std::size_t> chosen;
  chosen.reserve(k);
  chosen.insert(chosen.end(), dis_order.begin(), dis_order.begin() + static_cast<long>(quota_dis));
  chosen.insert(chosen.end(), adv_order.begin(), adv_order.begin() + static_cast<long>(quota_adv));
  // Present the combined selection in descending-score order.
  std::stable_sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    if (scored.scores[a] != scored.scores[b]) return scored.scores[a] > scored.scores[b];
    if (rule == TieRule::by_id) return roster.candidate(a).id < roster.candidate(b).id;
    return a < b;
  });

  SelectionResult out;
  for (std::size_t i : chosen) out.selected_ids.push_back(roster.candidate(i).id);
  log_boundary_ties(scored, dis_order, quota_dis, rule, out.tie_log);
  log_boundary_ties(scored, adv_order, quota_adv, rule, out.tie_log);
  fill_accounting(scored, chosen, out);
  out.disadvantaged_quota = quota_dis;
  if (quota_dis > 0) {
    out.threshold_disadvantaged = scored.scores[dis_order[quota_dis - 1]];
  }
  if (quota_adv > 0) {
    out.threshold_advantaged = scored.scores[adv_order[quota_adv - 1]];
  }
  return out;
}

Json SelectionResult::to_json() const {
  Json j;
  j["selected_ids"] = selected_ids;
  j["threshold"] = threshold;
  j["groups"]["advantaged"]["selected"] = selected_advantaged;
  j["groups"]["advantaged"]["roster"] = roster_advantaged;
  j["groups"]["advantaged"]["acceptance_rate"] = acceptance_rate_advantaged;
  j["groups"]["disadvantaged"]["selected"] = selected_disadvantaged;
  j["groups"]["disadvantaged"]["roster"] = roster_disadvantaged;
  j["groups"]["disadvantaged"]["acceptance_rate"] = acceptance_rate_disadvantaged;
  j["efficiency"]["value"] = efficiency;
  j["efficiency"]["metric"] = efficiency_metric;
  Json ties = Json::array();
  for (const auto& t : tie_log) {
    Json e;
    e["score"] = t.score;
    e["selected_ids"] = t.selected_ids;
    e["rejected_ids"] = t.rejected_ids;
    e["rule"] = t.rule;
    ties.push_back(std::move(e));
  }
  j["tie_log"] = std::move(ties);
  if (disadvantaged_quota.has_value()) {
    j["group_target"]["disadvantaged_quota"] = *disadvantaged_quota;
    if (threshold_disadvantaged.has_value()) {
      j["group_target"]["threshold_disadvantaged"] = *threshold_disadvantaged;
    }
    if (threshold_advantaged.has_value()) {
      j["group_target"]["threshold_advantaged"] = *threshold_advantaged;
    }
  }
  return j;
}

// --- counterfactual -------------------------------------------------------------

CounterfactualResult counterfactual(const trainer::TrainedScreener& screener,
                                    const Roster& roster, const std::string& candidate_id,
                                    const std::vector<std::pair<std::string, double>>& deltas,
                                    std::size_t k) {
  if (screener.schema_digest() != roster.schema_digest()) {
    throw SchemaError("counterfactual: roster schema does not match the screener's");
  }
  const auto& schema = roster.schema();
  std::optional<std::size_t> target;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (roster.candidate(i).id == candidate_id) {
      target = i;
      break;
    }
  }
  if (!target.has_value()) {
    throw ParameterError("counterfactual: no candidate with id '" + candidate_id + "'");
  }
  if (k < 1 || k > roster.size() - 1) {
    throw ParameterError("counterfactual: k must lie in [1, roster size - 1]");
  }

  FeatureVector changed = roster.candidate(*target).features;
  for (const auto& [name, value] : deltas) {
    changed.values.at(schema.index_of(name)) = value;
  }
  check_conforms(schema, changed);

  CounterfactualResult out;
  out.id = candidate_id;
  out.old_score = screener.score(roster.candidate(*target).features);
  out.new_score = screener.score(changed);

  // The bar: k-th best score among everyone else. Strictly exceeding it means
  // the candidate takes a seat; a tie does not.
  std::vector<double> others;
  others.reserve(roster.size() - 1);
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (i == *target) continue;
    others.push_back(screener.score(roster.candidate(i).features));
  }
  std::nth_element(others.begin(), others.begin() + static_cast<long>(k - 1), others.end(),
                   std::greater<double>());
  out.bar = others[k - 1];
  out.old_selected = out.old_score > out.bar;
  out.new_selected = out.new_score > out.bar;
  out.flipped = out.old_selected != out.new_selected;
  return out;
}

Json CounterfactualResult::to_json() const {
  Json j;
  j["id"] = id;
  j["old_score"] = old_score;
  j["new_score"] = new_score;
  j["bar"] = bar;
  j["old_selected"] = old_selected;
  j["new_selected"] = new_selected;
  j["flipped"] = flipped;
  return j;
}

// --- slice rates ------------------------------------------------------------------

std::vector<SliceRate> acceptance_rates(const SelectionResult& selection, const Roster& roster,
                                        const std::vector<Slice>& slices) {
  std::set<std::string> selected(selection.selected_ids.begin(), selection.selected_ids.end());

  std::vector<Slice> all;
  all.push_back({"group=advantaged", [&roster](const Candidate& c) {
                   return static_cast<int>(c.features.values[roster.schema().group_index()]) ==
                          kAdvantaged;
                 }});
  all.push_back({"group=disadvantaged", [&roster](const Candidate& c) {
                   return static_cast<int>(c.features.values[roster.schema().group_index()]) ==
                          kDisadvantaged;
                 }});
  all.insert(all.end(), slices.begin(), slices.end());

  std::vector<SliceRate> out;
  for (const auto& slice : all) {
    SliceRate r;
    r.label = slice.label;
    for (const auto& c : roster.candidates()) {
      if (!slice.predicate(c)) continue;
      ++r.members;
      if (selected.count(c.id)) ++r.selected;
    }
    if (r.members > 0) {
      r.rate = static_cast<double>(r.selected) / static_cast<double>(r.members);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace screen
}  // namespace screenaudit
