#include "screenaudit/audit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "screenaudit/io.hpp"
#include "screenaudit/numeric.hpp"
#include "screenaudit/oracle.hpp"
#include "screenaudit/screen.hpp"

namespace screenaudit {
namespace audit {

namespace {

constexpr double kDeclaredLossTolerance = 1e-9;

const char* kEvidenceNote =
    "This finding is statistical evidence for further examination, not a conclusion about "
    "intent or liability.";
const char* kBehavioralNote =
    "Tampering with training code itself is outside this audit's reach; only its behavioral "
    "signature in losses and selection rates is visible here.";

std::size_t share_to_k(double k_share, std::size_t n) {
  if (!(k_share > 0.0 && k_share < 1.0)) {
    throw ParameterError("selection share must lie in (0, 1)");
  }
  const auto k = static_cast<std::size_t>(std::llround(k_share * static_cast<double>(n)));
  return std::clamp<std::size_t>(k, 1, n);
}

void add_input(AuditFinding& f, const std::string& name, std::uint64_t digest) {
  f.input_digests.emplace_back(name, format_digest(digest));
}

// Weighted mean and (population) stddev of a column of encoded values.
struct Moments {
  double weight = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

Moments moments(const std::vector<double>& values, const std::vector<double>& weights) {
  Moments m;
  KahanSum wsum, vsum;
  for (std::size_t i = 0; i < values.size(); ++i) {
    wsum.add(weights[i]);
    vsum.add(weights[i] * values[i]);
  }
  m.weight = wsum.value();
  if (!(m.weight > 0.0)) return m;
  m.mean = vsum.value() / m.weight;
  KahanSum sq;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m.mean;
    sq.add(weights[i] * d * d);
  }
  m.stddev = std::sqrt(sq.value() / m.weight);
  return m;
}

}  // namespace

std::string to_string(AuditKind kind) {
  switch (kind) {
    case AuditKind::under_optimization:
      return "under_optimization";
    case AuditKind::outcome_choice:
      return "outcome_choice";
    case AuditKind::sample_drift:
      return "sample_drift";
    case AuditKind::simulated_probe:
      return "simulated_probe";
  }
  throw ParameterError("unknown audit kind");
}

std::string to_string(Verdict verdict) {
  return verdict == Verdict::pass ? "pass" : "flag";
}

double AuditFinding::statistic(const std::string& name) const {
  for (const auto& [k, v] : statistics) {
    if (k == name) return v;
  }
  throw ParameterError("finding has no statistic named '" + name + "'");
}

std::string AuditFinding::file_name() const {
  return to_string(kind) + "_seed" + std::to_string(seed) + ".json";
}

Json AuditFinding::to_json() const {
  Json j;
  j["format"] = "screenaudit.audit_finding/1";
  j["kind"] = to_string(kind);
  j["verdict"] = to_string(verdict);
  j["seed"] = seed;
  Json stats = Json::object();
  for (const auto& [k, v] : statistics) stats[k] = v;
  j["statistics"] = std::move(stats);
  Json th = Json::object();
  for (const auto& [k, v] : thresholds) th[k] = v;
  j["thresholds"] = std::move(th);
  Json inputs = Json::object();
  for (const auto& [k, v] : input_digests) inputs[k] = v;
  j["inputs"] = std::move(inputs);
  if (!details.is_null()) j["details"] = details;
  j["narrative"] = narrative;
  return j;
}

void AuditFinding::save(const std::filesystem::path& directory) const {
  write_json_file(directory / file_name(), to_json());
}

// --- retrain audit ----------------------------------------------------------

AuditFinding retrain_audit(const trainer::TrainedScreener& submitted, const Dataset& disclosed,
                           const std::string& outcome, const Representation& r,
                           const trainer::TrainConfig& cfg, double margin) {
  if (!(margin >= 0.0)) throw ParameterError("retrain audit: negative margin");
  if (submitted.schema_digest() != disclosed.schema().digest()) {
    throw SchemaError("retrain audit: disclosed data does not match the submitted schema");
  }
  const auto& md = submitted.metadata();
  if (md.outcome != outcome) {
    throw SchemaError("retrain audit: submitted screener declares outcome '" + md.outcome +
                      "', disclosed claim is '" + outcome + "'");
  }

  AuditFinding f;
  f.kind = AuditKind::under_optimization;
  f.seed = cfg.seed;
  f.thresholds.emplace_back("loss_ratio", 1.0 + margin);
  f.thresholds.emplace_back("declared_loss_relative_gap", kDeclaredLossTolerance);
  add_input(f, "submitted_screener", submitted.digest());
  add_input(f, "disclosed_data", disclosed.digest());

  std::ostringstream story;
  bool irreproducible = false;

  // First leg: does the disclosed data reproduce the declared holdout loss?
  const auto declared_rows =
      trainer::holdout_rows(disclosed, outcome, md.seed, md.holdout_fraction);
  if (!md.final_holdout_loss.has_value() || declared_rows.size() != md.holdout_rows) {
    irreproducible = true;
    story << "The submitted metadata's holdout split could not be reproduced from the "
             "disclosed data (declared "
          << md.holdout_rows << " holdout rows, reconstructed " << declared_rows.size()
          << (md.final_holdout_loss.has_value() ? "" : "; no holdout loss declared") << "). ";
  } else {
    const double recomputed =
        trainer::loss_on_rows(submitted, disclosed, outcome, declared_rows);
    const double declared = *md.final_holdout_loss;
    const double scale = std::max({std::abs(declared), std::abs(recomputed), 1.0});
    const double gap = std::abs(recomputed - declared) / scale;
    f.statistics.emplace_back("declared_holdout_loss", declared);
    f.statistics.emplace_back("recomputed_holdout_loss", recomputed);
    f.statistics.emplace_back("declared_loss_relative_gap", gap);
    if (gap > kDeclaredLossTolerance) {
      irreproducible = true;
      story << "The declared holdout loss " << format_double(declared)
            << " does not match the value " << format_double(recomputed)
            << " recomputed from the disclosed data. ";
    }
  }

  // Second leg: retrain with the auditor's own seed and compare both
  // screeners on the auditor's holdout rows, where their errors are paired.
  const trainer::TrainedScreener auditor =
      trainer::train(disclosed, outcome, r, cfg, submitted.encoder().spec(),
                     submitted.variant());
  const auto audit_rows = trainer::holdout_rows(disclosed, outcome, cfg.seed,
                                                cfg.holdout_fraction);
  if (audit_rows.empty()) {
    throw InsufficientDataError("retrain audit: auditor holdout split is empty");
  }
  const double submitted_loss =
      trainer::loss_on_rows(submitted, disclosed, outcome, audit_rows);
  const double auditor_loss = trainer::loss_on_rows(auditor, disclosed, outcome, audit_rows);
  const double ratio = auditor_loss > 0.0
                           ? submitted_loss / auditor_loss
                           : (submitted_loss > 0.0 ? std::numeric_limits<double>::max() : 1.0);
  const bool under_optimized = submitted_loss > auditor_loss * (1.0 + margin);

  f.statistics.emplace_back("submitted_loss", submitted_loss);
  f.statistics.emplace_back("auditor_loss", auditor_loss);
  f.statistics.emplace_back("loss_ratio", ratio);
  f.statistics.emplace_back("auditor_holdout_rows", static_cast<double>(audit_rows.size()));

  f.verdict = (under_optimized || irreproducible) ? Verdict::flag : Verdict::pass;
  if (under_optimized) {
    story << "On the auditor's holdout rows the submitted screener's loss "
          << format_double(submitted_loss) << " exceeds the independently retrained loss "
          << format_double(auditor_loss) << " by more than the " << format_double(margin)
          << " margin. ";
  } else {
    story << "On the auditor's holdout rows the submitted screener's loss "
          << format_double(submitted_loss) << " is within the " << format_double(margin)
          << " margin of the independently retrained loss " << format_double(auditor_loss)
          << ". ";
  }
  story << kBehavioralNote << " " << kEvidenceNote;
  f.narrative = story.str();
  return f;
}

// --- outcome choice audit -----------------------------------------------------

AuditFinding outcome_choice_audit(const Dataset& data, const std::vector<std::string>& outcomes,
                                  const std::string& declared_outcome, const Representation& r,
                                  double k_share, const trainer::TrainConfig& cfg,
                                  double slack) {
  if (outcomes.size() < 2) {
    throw ParameterError("outcome choice audit needs at least 2 candidate outcome columns");
  }
  if (std::find(outcomes.begin(), outcomes.end(), declared_outcome) == outcomes.end()) {
    throw ParameterError("declared outcome '" + declared_outcome +
                         "' is not among the audited columns");
  }
  if (!(slack >= 0.0)) throw ParameterError("outcome choice audit: negative slack");

  AuditFinding f;
  f.kind = AuditKind::outcome_choice;
  f.seed = cfg.seed;
  f.thresholds.emplace_back("gap_slack", slack);
  add_input(f, "data", data.digest());

  const std::size_t k = share_to_k(k_share, data.size());
  const screen::Roster roster = screen::roster_from_dataset(data, std::nullopt);
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < roster.size(); ++i) by_id.emplace(roster.candidate(i).id, i);

  struct Row {
    std::string outcome;
    bool ok = false;
    std::string error;
    double gap = 0.0;
    double rate_advantaged = 0.0;
    double rate_disadvantaged = 0.0;
    double efficiency = 0.0;
    std::size_t efficiency_rows = 0;
  };
  std::vector<Row> table;

  for (const auto& name : outcomes) {
    Row row;
    row.outcome = name;
    try {
      const auto screener = trainer::train(data, name, r, cfg);
      const auto scored = screen::score_roster(screener, roster);
      const auto sel = screen::select_top_k(scored, k);
      row.rate_advantaged = sel.acceptance_rate_advantaged;
      row.rate_disadvantaged = sel.acceptance_rate_disadvantaged;
      row.gap = sel.acceptance_rate_advantaged - sel.acceptance_rate_disadvantaged;
      // Selected-set quality measured on the same column the screener chased.
      const std::size_t oi = data.schema().outcome_index(name);
      KahanSum sum;
      std::size_t used = 0;
      std::vector<bool> picked(data.size(), false);
      for (const auto& id : sel.selected_ids) picked[by_id.at(id)] = true;
      for (std::size_t i = 0; i < data.size(); ++i) {
        if (!picked[i] || !data.row(i).outcomes[oi].has_value()) continue;
        sum.add(*data.row(i).outcomes[oi]);
        ++used;
      }
      row.efficiency = used > 0 ? sum.value() / static_cast<double>(used) : 0.0;
      row.efficiency_rows = used;
      row.ok = true;
    } catch (const Error& e) {
      row.error = e.what();
    }
    table.push_back(std::move(row));
  }

  const auto declared_it =
      std::find_if(table.begin(), table.end(), [&](const Row& row) {
        return row.outcome == declared_outcome;
      });
  bool declared_worst = false;
  if (declared_it->ok) {
    declared_worst = std::all_of(table.begin(), table.end(), [&](const Row& row) {
      if (row.outcome == declared_outcome || !row.ok) return true;
      return declared_it->gap > row.gap + slack;
    });
    // At least one trained alternative must exist for "worst" to mean anything.
    const bool any_alternative = std::any_of(table.begin(), table.end(), [&](const Row& row) {
      return row.outcome != declared_outcome && row.ok;
    });
    declared_worst = declared_worst && any_alternative;
  }
  f.verdict = declared_worst ? Verdict::flag : Verdict::pass;

  Json rows = Json::array();
  for (const auto& row : table) {
    Json e;
    e["outcome"] = row.outcome;
    e["declared"] = row.outcome == declared_outcome;
    if (row.ok) {
      e["acceptance_rate_advantaged"] = row.rate_advantaged;
      e["acceptance_rate_disadvantaged"] = row.rate_disadvantaged;
      e["gap"] = row.gap;
      e["selected_mean_outcome"] = row.efficiency;
      e["selected_with_outcome"] = row.efficiency_rows;
      f.statistics.emplace_back("gap:" + row.outcome, row.gap);
    } else {
      e["error"] = row.error;
    }
    rows.push_back(std::move(e));
  }
  f.details["table"] = std::move(rows);
  f.details["k"] = k;
  f.details["declared_outcome"] = declared_outcome;

  std::ostringstream story;
  if (declared_it->ok) {
    story << "Screeners were trained on " << outcomes.size()
          << " candidate outcome columns under one configuration and compared on a top-" << k
          << " selection. The declared outcome '" << declared_outcome
          << "' produced an advantaged-minus-disadvantaged acceptance gap of "
          << format_double(declared_it->gap)
          << (declared_worst ? ", larger than every alternative's by more than the slack. "
                             : "; at least one alternative matches or exceeds it. ");
  } else {
    story << "The declared outcome '" << declared_outcome
          << "' failed to train: " << declared_it->error << ". ";
  }
  story << kEvidenceNote;
  f.narrative = story.str();
  return f;
}

// --- sample drift audit ---------------------------------------------------------

AuditFinding sample_drift_audit(const Dataset& training, const Dataset& universe,
                                const DriftThresholds& thresholds) {
  if (training.schema().digest() != universe.schema().digest()) {
    throw SchemaError("sample drift audit: datasets do not share a schema");
  }
  if (training.size() == 0 || universe.size() == 0) {
    throw InsufficientDataError("sample drift audit: empty dataset");
  }
  const auto& schema = training.schema();

  AuditFinding f;
  f.kind = AuditKind::sample_drift;
  f.seed = 0;  // deterministic: no randomness consumed
  f.thresholds.emplace_back("feature_difference", thresholds.feature);
  f.thresholds.emplace_back("group_share_difference", thresholds.group_share);
  add_input(f, "training_data", training.digest());
  add_input(f, "universe_data", universe.digest());

  // Weighted group shares.
  const auto group_share = [&](const Dataset& d) {
    KahanSum total, dis;
    for (std::size_t i = 0; i < d.size(); ++i) {
      total.add(d.row(i).weight);
      if (d.group_of(i) == kDisadvantaged) dis.add(d.row(i).weight);
    }
    return dis.value() / total.value();
  };
  const double share_t = group_share(training);
  const double share_u = group_share(universe);

  bool any_over = false;
  std::vector<std::string> flagged;
  const auto record = [&](const std::string& name, double value, double limit) {
    f.statistics.emplace_back(name, value);
    if (value > limit) {
      any_over = true;
      flagged.push_back(name);
    }
  };
  record("group_share_difference", std::abs(share_t - share_u), thresholds.group_share);

  // Per-feature comparisons: pooled and within each group. Group scope -1
  // means pooled.
  const auto column = [&](const Dataset& d, std::size_t fi, int scope,
                          std::vector<double>& values, std::vector<double>& weights) {
    values.clear();
    weights.clear();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (scope >= 0 && d.group_of(i) != scope) continue;
      values.push_back(d.row(i).features.values[fi]);
      weights.push_back(d.row(i).weight);
    }
  };

  for (std::size_t fi = 0; fi < schema.arity(); ++fi) {
    if (fi == schema.group_index()) continue;
    const auto& spec = schema.feature(fi);
    for (int scope : {-1, kAdvantaged, kDisadvantaged}) {
      const std::string suffix = scope < 0 ? ""
                                 : scope == kAdvantaged ? ":advantaged"
                                                        : ":disadvantaged";
      std::vector<double> vt, wt, vu, wu;
      column(training, fi, scope, vt, wt);
      column(universe, fi, scope, vu, wu);
      if (vt.empty() || vu.empty()) continue;  // group absent: group share covers it
      if (spec.kind == FeatureKind::categorical) {
        // Largest per-level frequency difference.
        double worst = 0.0;
        for (int v = 0; v < spec.cardinality; ++v) {
          KahanSum ct, cu, st, su;
          for (std::size_t i = 0; i < vt.size(); ++i) {
            st.add(wt[i]);
            if (static_cast<int>(vt[i]) == v) ct.add(wt[i]);
          }
          for (std::size_t i = 0; i < vu.size(); ++i) {
            su.add(wu[i]);
            if (static_cast<int>(vu[i]) == v) cu.add(wu[i]);
          }
          worst = std::max(worst,
                           std::abs(ct.value() / st.value() - cu.value() / su.value()));
        }
        record("freq_diff:" + spec.name + suffix, worst, thresholds.feature);
      } else {
        const Moments mt = moments(vt, wt);
        const Moments mu = moments(vu, wu);
        const double raw = std::abs(mt.mean - mu.mean);
        const double value = mu.stddev > 0.0 ? raw / mu.stddev : raw;
        record("mean_diff:" + spec.name + suffix, value, thresholds.feature);
      }
    }
  }

  f.verdict = any_over ? Verdict::flag : Verdict::pass;
  std::ostringstream story;
  story << "The training sample was compared against the universe of " << universe.size()
        << " rows on the disadvantaged-group share and on every feature, pooled and within "
           "each group (real features as universe-standardized mean differences, categorical "
           "features as largest per-level frequency differences). ";
  if (any_over) {
    story << "Statistics over threshold:";
    for (const auto& name : flagged) story << ' ' << name << ';';
    story << ' ';
  } else {
    story << "No statistic crossed its threshold. ";
  }
  story << kEvidenceNote;
  f.narrative = story.str();
  return f;
}

// --- simulated probe -------------------------------------------------------------

AuditFinding simulated_probe(const TrainerUnderAudit& train_fn, const DiscreteWorld& probe,
                             const Representation& r, const ProbeConfig& config) {
  require_valid_world(probe);
  const double planted = oracle::disparity_table(probe, probe.f_table());
  if (planted > 0.0) {
    throw ParameterError(
        "probe world must not favor the advantaged group on the true outcome; its f "
        "disparity is " +
        format_double(planted));
  }
  if (config.n < 100) throw ParameterError("probe needs at least 100 rows");

  const Dataset data =
      sample_world(probe, config.n, config.disadvantaged_share, config.seed);
  const trainer::TrainedScreener screener = train_fn(data, "f", r, config.train);

  const screen::Roster roster = screen::roster_from_dataset(data, std::string("f"));
  const auto scored = screen::score_roster(screener, roster);
  const std::size_t k = share_to_k(config.k_share, roster.size());
  const auto sel = screen::select_top_k(scored, k);

  const double ra = sel.acceptance_rate_advantaged;
  const double rd = sel.acceptance_rate_disadvantaged;
  const auto na = static_cast<double>(sel.roster_advantaged);
  const auto nd = static_cast<double>(sel.roster_disadvantaged);
  if (!(na > 0.0) || !(nd > 0.0)) {
    throw InsufficientDataError("probe sample lacks one of the groups");
  }
  const double se = std::sqrt(ra * (1.0 - ra) / na + rd * (1.0 - rd) / nd);
  const double allowance = 3.0 * se;
  const double diff = ra - rd;

  AuditFinding f;
  f.kind = AuditKind::simulated_probe;
  f.seed = config.seed;
  f.verdict = diff > allowance ? Verdict::flag : Verdict::pass;
  f.statistics.emplace_back("acceptance_rate_advantaged", ra);
  f.statistics.emplace_back("acceptance_rate_disadvantaged", rd);
  f.statistics.emplace_back("rate_difference", diff);
  f.statistics.emplace_back("standard_error", se);
  f.statistics.emplace_back("planted_f_disparity", planted);
  f.statistics.emplace_back("rows", static_cast<double>(config.n));
  f.statistics.emplace_back("selected", static_cast<double>(k));
  f.thresholds.emplace_back("rate_difference", allowance);
  add_input(f, "probe_world", probe.digest());
  add_input(f, "probe_data", data.digest());
  add_input(f, "trained_screener", screener.digest());

  std::ostringstream story;
  story << "Seeded data from a probe world whose true outcome favors the disadvantaged group "
           "(planted disparity "
        << format_double(planted)
        << ") was fed through the training procedure under audit, followed by a top-" << k
        << " selection. The advantaged acceptance rate " << format_double(ra)
        << (f.verdict == Verdict::flag ? " exceeds" : " does not exceed")
        << " the disadvantaged rate " << format_double(rd)
        << " by more than 3 standard errors of the difference. ";
  story << kBehavioralNote << " " << kEvidenceNote;
  f.narrative = story.str();
  return f;
}

DiscreteWorld default_probe_world() {
  std::vector<FeatureSpec> feats(2);
  feats[0].name = "skill";
  feats[0].kind = FeatureKind::categorical;
  feats[0].cardinality = 4;
  feats[1].name = "group";
  feats[1].kind = FeatureKind::categorical;
  feats[1].cardinality = 2;
  const FeatureSchema schema(feats, "group", {});

  // Disadvantaged skill mass strictly dominates; both dyadic.
  const double adv[4] = {0.5, 0.25, 0.125, 0.125};
  const double dis[4] = {0.125, 0.125, 0.25, 0.5};
  const std::size_t cells = schema.cell_count();
  std::vector<double> p(cells, 0.0), q(cells, 0.0), fv(cells, 0.0);
  for (int s = 0; s < 4; ++s) {
    const std::size_t adv_cell = static_cast<std::size_t>(s) * 2 + kAdvantaged;
    const std::size_t dis_cell = static_cast<std::size_t>(s) * 2 + kDisadvantaged;
    p[adv_cell] = adv[s];
    q[dis_cell] = dis[s];
    fv[adv_cell] = fv[dis_cell] = static_cast<double>(s) / 3.0;
  }
  return DiscreteWorld(schema, p, q, fv, fv);
}

}  // namespace audit
}  // namespace screenaudit
