#include "screenaudit/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "screenaudit/errors.hpp"
#include "screenaudit/io.hpp"
#include "screenaudit/numeric.hpp"
#include "screenaudit/rng.hpp"

namespace screenaudit {
namespace scenarios {

namespace {

const std::map<std::string, std::map<std::string, double>>& param_table() {
  static const std::map<std::string, std::map<std::string, double>> table = {
      {"biased_ratings",
       {
           {"floor_prob", 0.875},   // chance a disadvantaged rating is floored to 0
           {"sales_noise", 0.1},    // stddev of the sales outcome noise
       }},
      {"false_arrests",
       {
           {"false_rate", 0.5},   // chance of one planted false arrest (disadvantaged)
           {"crime_p0", 0.5},     // P(crime = 0); P(1) below; P(2) is the remainder
           {"crime_p1", 0.25},
           {"fta_base", 0.2},     // failure-to-appear chance at crime level 0
           {"fta_slope", 0.2},    // added chance per crime level
       }},
      {"structural_admissions",
       {
           {"x1_shift", 0.5},          // group mean shift: +shift adv, -shift dis
           {"b1", 1.0},                // outcome weight on x1, both groups
           {"b2_advantaged", 1.5},     // outcome weight on x2, advantaged group
           {"b2_disadvantaged", 0.0},  // outcome weight on x2, disadvantaged group
           {"noise", 0.3},
       }},
      {"homogeneous_control",
       {
           // Same process and draws as structural_admissions, but the x2
           // slope is forced equal across groups, so overriding
           // b2_disadvantaged is rejected as unknown.
           {"x1_shift", 0.5},
           {"b1", 1.0},
           {"b2_advantaged", 1.5},
           {"noise", 0.3},
       }},
      {"selective_labels",
       {
           {"hire_cut", -1.0},        // advantaged hired at or above, disadvantaged below
           {"skill_weight", 1.0},
           {"interview_weight", 0.5},
           {"noise", 0.3},
       }},
      {"judge_release",
       {
           {"priors_scale", 1.5},
           {"severity_scale", 1.5},
           {"priors_shift", 0.5},  // added to the disadvantaged group's priors
           {"risk_base", 0.05},
           {"risk_priors_weight", 0.09},
           {"risk_severity_weight", 0.05},
           {"severity_inflation", 5.0},  // judge's overweighting of severity
           {"judge_noise", 0.1},
       }},
      {"data_entry_outcomes",
       {
           {"home_shift", 1.0},         // added home constraint, disadvantaged group
           {"home_weight", 0.6},        // how strongly home constraint cuts hours
           {"skill_hours_weight", 0.3},
           {"speed_noise", 0.3},
           {"outcome_noise", 0.2},
       }},
  };
  return table;
}

double param(const ScenarioSpec& spec, const std::string& name) {
  const auto it = spec.params.find(name);
  if (it == spec.params.end()) {
    throw ParameterError("scenario '" + spec.name + "' lost parameter '" + name + "'");
  }
  return it->second;
}

void require_in(double v, double lo, double hi, const std::string& what) {
  if (!(v >= lo && v <= hi)) {
    throw ParameterError(what + " = " + format_double(v) + " outside [" +
                         format_double(lo) + ", " + format_double(hi) + "]");
  }
}

FeatureSpec cat(const std::string& name, int cardinality) {
  FeatureSpec f;
  f.name = name;
  f.kind = FeatureKind::categorical;
  f.cardinality = cardinality;
  return f;
}

FeatureSpec real(const std::string& name, double lo, double hi) {
  FeatureSpec f;
  f.name = name;
  f.kind = FeatureKind::real;
  f.min = lo;
  f.max = hi;
  return f;
}

// Group draws share one stream prefix per scenario family so that paired
// scenarios reproduce each other's rows exactly.
std::vector<int> draw_groups(const ScenarioSpec& spec, const std::string& prefix) {
  const CounterRng rng(spec.seed, prefix + ".group");
  std::vector<int> groups(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    groups[i] = rng.uniform(i) < spec.disadvantaged_share ? kDisadvantaged : kAdvantaged;
  }
  return groups;
}

Json base_notes(const ScenarioSpec& spec) {
  Json j;
  j["format"] = "screenaudit.scenario_notes/1";
  j["scenario"] = spec.name;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["disadvantaged_share"] = spec.disadvantaged_share;
  Json params = Json::object();
  for (const auto& [k, v] : spec.params) params[k] = v;
  j["parameters"] = std::move(params);
  j["group_convention"] = "group 0 = advantaged, group 1 = disadvantaged";
  return j;
}

DatasetRow make_row(const FeatureSchema& schema, std::vector<double> features,
                    std::vector<std::optional<double>> outcomes) {
  DatasetRow row;
  row.features = make_vector(schema, std::move(features));
  row.outcomes = std::move(outcomes);
  return row;
}

// --- biased_ratings ---------------------------------------------------------

ScenarioOutput gen_biased_ratings(const ScenarioSpec& spec) {
  const double fp = param(spec, "floor_prob");
  const double noise = param(spec, "sales_noise");

  const FeatureSchema schema({cat("rating", 4), cat("group", 2)}, "group", {"sales"});
  Dataset data(schema, "scenario:" + spec.name);
  const auto groups = draw_groups(spec, spec.name);
  const CounterRng talent_rng(spec.seed, spec.name + ".talent");
  const CounterRng floor_rng(spec.seed, spec.name + ".floor");
  const CounterRng noise_rng(spec.seed, spec.name + ".sales_noise");
  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto talent = static_cast<double>(talent_rng.pick(i, 4));
    const bool floored =
        groups[i] == kDisadvantaged && floor_rng.bernoulli(i, fp) == 1;
    const double rating = floored ? 0.0 : talent;
    const double sales = talent / 3.0 + noise * noise_rng.normal(i);
    data.add_row(make_row(schema, {rating, static_cast<double>(groups[i])}, {sales}));
  }

  // Analytic world: talent uniform on {0..3} for both groups; the advantaged
  // rating equals talent, the disadvantaged rating is floored to 0 with
  // probability floor_prob. f = E[talent/3 | rating, group].
  const std::size_t cells = schema.cell_count();
  std::vector<double> p(cells, 0.0), q(cells, 0.0), f(cells, 0.0);
  const double q0 = fp + (1.0 - fp) / 4.0;
  const double f0_dis = (fp * 1.5) / q0 / 3.0;
  for (int r = 0; r < 4; ++r) {
    const std::size_t a = static_cast<std::size_t>(r) * 2 + kAdvantaged;
    const std::size_t d = static_cast<std::size_t>(r) * 2 + kDisadvantaged;
    p[a] = 0.25;
    q[d] = r == 0 ? q0 : (1.0 - fp) / 4.0;
    f[a] = static_cast<double>(r) / 3.0;
    f[d] = r == 0 ? f0_dis : static_cast<double>(r) / 3.0;
  }
  DiscreteWorld world(schema, p, q, f, f);

  Json notes = base_notes(spec);
  notes["columns"]["rating"] =
      "manager rating 0-3; equals talent for the advantaged group, floored to 0 with "
      "probability floor_prob for the disadvantaged group";
  notes["columns"]["sales"] = "talent/3 + sales_noise * normal";
  notes["planted"]["talent_distribution"] = "uniform on {0,1,2,3}, identical across groups";
  notes["planted"]["f_disparity"] = 0.0;
  notes["planted"]["world"] = "exact masses and f = E[talent/3 | rating, group]; proxy g = f";
  notes["directional_guarantees"] = Json::array(
      {"true-outcome disparity is exactly 0 (groups equally talented)",
       "a rating-only screener scores the disadvantaged group lower on average, so the "
       "decomposition's input-bias term is positive",
       "ratings predict sales for the advantaged group but carry almost no signal for the "
       "disadvantaged group when floor_prob is near 1"});
  return {std::move(data), std::move(world), std::move(notes)};
}

// --- false_arrests ----------------------------------------------------------

ScenarioOutput gen_false_arrests(const ScenarioSpec& spec) {
  const double fr = param(spec, "false_rate");
  const double p0 = param(spec, "crime_p0");
  const double p1 = param(spec, "crime_p1");
  const double base = param(spec, "fta_base");
  const double slope = param(spec, "fta_slope");
  const double p2 = 1.0 - p0 - p1;
  if (p2 < 0.0) throw ParameterError("crime_p0 + crime_p1 exceed 1");
  require_in(base + 2.0 * slope, 0.0, 1.0, "fta_base + 2*fta_slope");

  const FeatureSchema schema({cat("arrests", 4), cat("group", 2)}, "group", {"fta"});
  Dataset data(schema, "scenario:" + spec.name);
  const auto groups = draw_groups(spec, spec.name);
  const CounterRng crime_rng(spec.seed, spec.name + ".crime");
  const CounterRng false_rng(spec.seed, spec.name + ".false");
  const CounterRng fta_rng(spec.seed, spec.name + ".fta");
  const double pi[3] = {base, base + slope, base + 2.0 * slope};
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double u = crime_rng.uniform(i);
    const int c = u < p0 ? 0 : (u < p0 + p1 ? 1 : 2);
    const int extra =
        groups[i] == kDisadvantaged && false_rng.bernoulli(i, fr) == 1 ? 1 : 0;
    const auto arrests = static_cast<double>(c + extra);
    const double fta = fta_rng.uniform(i) < pi[c] ? 1.0 : 0.0;
    data.add_row(make_row(schema, {arrests, static_cast<double>(groups[i])}, {fta}));
  }

  // Analytic world over (arrests, group); f = E[fta propensity | cell].
  const double pc[3] = {p0, p1, p2};
  const std::size_t cells = schema.cell_count();
  std::vector<double> p(cells, 0.0), q(cells, 0.0), f(cells, 0.0);
  for (int j = 0; j < 4; ++j) {
    const std::size_t a = static_cast<std::size_t>(j) * 2 + kAdvantaged;
    const std::size_t d = static_cast<std::size_t>(j) * 2 + kDisadvantaged;
    p[a] = j < 3 ? pc[j] : 0.0;
    f[a] = pi[std::min(j, 2)];
    double mass = 0.0, mean = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double m = pc[c] * (c == j ? 1.0 - fr : 0.0) + pc[c] * (c + 1 == j ? fr : 0.0);
      mass += m;
      mean += m * pi[c];
    }
    q[d] = mass;
    f[d] = mass > 0.0 ? mean / mass : pi[std::min(j, 2)];
  }
  DiscreteWorld world(schema, p, q, f, f);

  Json notes = base_notes(spec);
  notes["columns"]["arrests"] =
      "true crime level 0-2 plus one planted false arrest with probability false_rate for "
      "the disadvantaged group";
  notes["columns"]["fta"] =
      "realized failure-to-appear, Bernoulli(fta_base + fta_slope * crime)";
  notes["planted"]["crime_distribution"] = "identical across groups";
  notes["planted"]["f_disparity"] = 0.0;
  notes["directional_guarantees"] = Json::array(
      {"true failure-to-appear propensity has identical distribution across groups",
       "false_rate > 0 inflates the disadvantaged group's arrest counts; at equal arrest "
       "counts its true propensity is lower",
       "false_rate = 0 makes the groups' arrest distributions identical"});
  return {std::move(data), std::move(world), std::move(notes)};
}

// --- structural_admissions & homogeneous_control ------------------------------

ScenarioOutput gen_structural(const ScenarioSpec& spec, bool homogeneous) {
  const double shift = param(spec, "x1_shift");
  const double b1 = param(spec, "b1");
  const double b2a = param(spec, "b2_advantaged");
  const double b2d = homogeneous ? b2a : param(spec, "b2_disadvantaged");
  const double noise = param(spec, "noise");

  const FeatureSchema schema({real("x1", -100.0, 100.0), real("x2", -100.0, 100.0),
                              cat("group", 2)},
                             "group", {"y"});
  Dataset data(schema, "scenario:" + spec.name);
  // Shared stream prefix: the control scenario reproduces the same draws row
  // for row, so paired comparisons differ only through the slopes.
  const std::string prefix = "structural";
  const auto groups = draw_groups(spec, prefix);
  const CounterRng x1_rng(spec.seed, prefix + ".x1");
  const CounterRng x2_rng(spec.seed, prefix + ".x2");
  const CounterRng noise_rng(spec.seed, prefix + ".noise");
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool dis = groups[i] == kDisadvantaged;
    const double x1 = x1_rng.normal(i) + (dis ? -shift : shift);
    const double x2 = x2_rng.normal(i);
    const double y = b1 * x1 + (dis ? b2d : b2a) * x2 + noise * noise_rng.normal(i);
    data.add_row(
        make_row(schema, {x1, x2, static_cast<double>(groups[i])}, {y}));
  }

  Json notes = base_notes(spec);
  notes["columns"]["x1"] = "normal(+-x1_shift, 1): advantaged shifted up, disadvantaged down";
  notes["columns"]["x2"] = "standard normal, identical across groups";
  notes["columns"]["y"] = "b1*x1 + b2_group*x2 + noise*normal";
  notes["planted"]["b2_advantaged"] = b2a;
  notes["planted"]["b2_disadvantaged"] = b2d;
  notes["planted"]["shared_streams"] =
      "structural.group/.x1/.x2/.noise; structural_admissions and homogeneous_control "
      "reproduce identical draws under one seed";
  if (homogeneous) {
    notes["directional_guarantees"] = Json::array(
        {"both groups share one outcome process, so group-aware training adds nothing "
         "beyond noise",
         "any disparity is structural: it flows entirely through the x1 mean shift"});
  } else {
    notes["directional_guarantees"] = Json::array(
        {"x2 predicts the outcome only for the advantaged group, so a group-blind model "
         "mis-ranks the disadvantaged group",
         "group-aware training weakly dominates blind training on the "
         "fairness-efficiency sweep",
         "the disadvantaged subpopulation's blind-vs-aware rank-decile matrix has more "
         "off-diagonal mass than the homogeneous control's under the same seed"});
  }
  return {std::move(data), std::nullopt, std::move(notes)};
}

// --- selective_labels ----------------------------------------------------------

ScenarioOutput gen_selective_labels(const ScenarioSpec& spec) {
  const double cut = param(spec, "hire_cut");
  const double sw = param(spec, "skill_weight");
  const double iw = param(spec, "interview_weight");
  const double noise = param(spec, "noise");

  const FeatureSchema schema({real("interview", -100.0, 100.0), real("skill", -100.0, 100.0),
                              cat("group", 2)},
                             "group", {"y"});
  Dataset data(schema, "scenario:" + spec.name);
  const auto groups = draw_groups(spec, spec.name);
  const CounterRng interview_rng(spec.seed, spec.name + ".interview");
  const CounterRng skill_rng(spec.seed, spec.name + ".skill");
  const CounterRng noise_rng(spec.seed, spec.name + ".noise");
  std::size_t hired = 0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool dis = groups[i] == kDisadvantaged;
    const double interview = interview_rng.normal(i);
    const double skill = skill_rng.normal(i);
    const double y = sw * skill + iw * interview + noise * noise_rng.normal(i);
    // The gatekeeper: advantaged admitted at or above the cut, disadvantaged
    // only below it. Outcomes exist only for the admitted.
    const bool admit = dis ? interview < cut : interview >= cut;
    if (admit) ++hired;
    data.add_row(make_row(schema, {interview, skill, static_cast<double>(groups[i])},
                          {admit ? std::optional<double>(y) : std::nullopt}));
  }

  Json notes = base_notes(spec);
  notes["columns"]["interview"] = "standard normal, identical across groups";
  notes["columns"]["skill"] = "standard normal, identical across groups";
  notes["columns"]["y"] =
      "skill_weight*skill + interview_weight*interview + noise*normal; censored unless "
      "admitted";
  notes["planted"]["admission_rule"] =
      "advantaged admitted iff interview >= hire_cut; disadvantaged admitted iff "
      "interview < hire_cut";
  notes["planted"]["admitted_rows"] = hired;
  notes["directional_guarantees"] = Json::array(
      {"the groups' feature and outcome processes are identical; only label observation "
       "differs",
       "within the admitted sample the disadvantaged group's interview mean sits below "
       "hire_cut, far under its universe mean of 0",
       "training on admitted rows only inherits the gatekeeper's selection rule"});
  return {std::move(data), std::nullopt, std::move(notes)};
}

// --- judge_release ---------------------------------------------------------------

double judge_formula(double priors, double severity, double base, double wp, double ws,
                     double inflation) {
  return base + wp * priors + ws * inflation * severity;
}

ScenarioOutput gen_judge_release(const ScenarioSpec& spec) {
  const double ps = param(spec, "priors_scale");
  const double ss = param(spec, "severity_scale");
  const double shift = param(spec, "priors_shift");
  const double base = param(spec, "risk_base");
  const double wp = param(spec, "risk_priors_weight");
  const double ws = param(spec, "risk_severity_weight");
  const double inflation = param(spec, "severity_inflation");
  const double jnoise = param(spec, "judge_noise");

  const FeatureSchema schema({real("priors", 0.0, 100.0), real("severity", 0.0, 100.0),
                              cat("group", 2)},
                             "group", {"fta", "fta_risk", "judge_score"});
  Dataset data(schema, "scenario:" + spec.name);
  const auto groups = draw_groups(spec, spec.name);
  const CounterRng priors_rng(spec.seed, spec.name + ".priors");
  const CounterRng severity_rng(spec.seed, spec.name + ".severity");
  const CounterRng fta_rng(spec.seed, spec.name + ".fta");
  const CounterRng judge_rng(spec.seed, spec.name + ".judge_noise");
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool dis = groups[i] == kDisadvantaged;
    const double priors = std::abs(priors_rng.normal(i)) * ps + (dis ? shift : 0.0);
    const double severity = std::abs(severity_rng.normal(i)) * ss;
    const double risk = std::clamp(base + wp * priors + ws * severity, 0.01, 0.99);
    const double fta = fta_rng.uniform(i) < risk ? 1.0 : 0.0;
    const double judge =
        judge_formula(priors, severity, base, wp, ws, inflation) + jnoise * judge_rng.normal(i);
    data.add_row(make_row(schema, {priors, severity, static_cast<double>(groups[i])},
                          {fta, risk, judge}));
  }

  Json notes = base_notes(spec);
  notes["columns"]["priors"] =
      "|normal| * priors_scale, plus priors_shift for the disadvantaged group";
  notes["columns"]["severity"] = "|normal| * severity_scale, identical across groups";
  notes["columns"]["fta_risk"] =
      "clamp(risk_base + risk_priors_weight*priors + risk_severity_weight*severity, "
      "0.01, 0.99)";
  notes["columns"]["fta"] = "realized Bernoulli(fta_risk)";
  notes["columns"]["judge_score"] =
      "risk formula with severity weight multiplied by severity_inflation, plus "
      "judge_noise * normal per defendant";
  notes["directional_guarantees"] = Json::array(
      {"true risk is driven mostly by priors; the judge over-weights severity",
       "with severity_inflation = 1 and judge_noise = 0 the judge score equals true risk",
       "a screener trained on realized fta outranks the judge score in rank correlation "
       "with true risk at the default inflation"});
  return {std::move(data), std::nullopt, std::move(notes)};
}

// --- data_entry_outcomes ----------------------------------------------------------

ScenarioOutput gen_data_entry(const ScenarioSpec& spec) {
  const double hshift = param(spec, "home_shift");
  const double hweight = param(spec, "home_weight");
  const double shw = param(spec, "skill_hours_weight");
  const double snoise = param(spec, "speed_noise");
  const double onoise = param(spec, "outcome_noise");

  const FeatureSchema schema({real("speed", -100.0, 100.0), cat("group", 2)}, "group",
                             {"volume", "hours"});
  Dataset data(schema, "scenario:" + spec.name);
  const auto groups = draw_groups(spec, spec.name);
  const CounterRng skill_rng(spec.seed, spec.name + ".skill");
  const CounterRng home_rng(spec.seed, spec.name + ".home");
  const CounterRng speed_rng(spec.seed, spec.name + ".speed_noise");
  const CounterRng volume_rng(spec.seed, spec.name + ".volume_noise");
  const CounterRng hours_rng(spec.seed, spec.name + ".hours_noise");
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool dis = groups[i] == kDisadvantaged;
    const double skill = skill_rng.normal(i);
    const double home = std::abs(home_rng.normal(i)) + (dis ? hshift : 0.0);
    const double speed = skill + snoise * speed_rng.normal(i);
    const double volume = skill + onoise * volume_rng.normal(i);
    const double hours = shw * skill - hweight * home + onoise * hours_rng.normal(i);
    data.add_row(
        make_row(schema, {speed, static_cast<double>(groups[i])}, {volume, hours}));
  }

  Json notes = base_notes(spec);
  notes["columns"]["speed"] = "skill + speed_noise * normal, identical across groups";
  notes["columns"]["volume"] = "skill + outcome_noise * normal: work produced";
  notes["columns"]["hours"] =
      "skill_hours_weight*skill - home_weight*home + outcome_noise * normal: time at "
      "the desk, cut by the home constraint";
  notes["planted"]["home_constraint"] =
      "|normal|, plus home_shift for the disadvantaged group; enters hours only";
  notes["directional_guarantees"] = Json::array(
      {"skill and volume have identical distributions across groups",
       "the hours outcome is lower for the disadvantaged group through the home "
       "constraint alone",
       "a group-aware screener trained on hours produces a strictly larger acceptance "
       "gap than one trained on volume"});
  return {std::move(data), std::nullopt, std::move(notes)};
}

}  // namespace

std::vector<std::string> scenario_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : param_table()) names.push_back(name);
  return names;
}

std::map<std::string, double> default_params(const std::string& name) {
  const auto it = param_table().find(name);
  if (it == param_table().end()) {
    throw ParameterError("unknown scenario '" + name + "'");
  }
  return it->second;
}

ScenarioSpec resolve(const ScenarioSpec& spec) {
  auto defaults = default_params(spec.name);
  for (const auto& [key, value] : spec.params) {
    const auto it = defaults.find(key);
    if (it == defaults.end()) {
      throw ParameterError("scenario '" + spec.name + "' has no parameter '" + key + "'");
    }
    if (!std::isfinite(value)) {
      throw ParameterError("scenario parameter '" + key + "' is non-finite");
    }
    it->second = value;
  }
  ScenarioSpec out = spec;
  out.params = std::move(defaults);
  if (out.n < 1) throw ParameterError("scenario needs n >= 1");
  if (!(out.disadvantaged_share > 0.0 && out.disadvantaged_share < 1.0)) {
    throw ParameterError("disadvantaged_share must lie in (0, 1)");
  }
  for (const auto& [key, value] : out.params) {
    if (key.find("noise") != std::string::npos && value < 0.0) {
      throw ParameterError("noise scale '" + key + "' must be non-negative");
    }
    if ((key.find("prob") != std::string::npos || key == "false_rate") &&
        !(value >= 0.0 && value <= 1.0)) {
      throw ParameterError("probability '" + key + "' must lie in [0, 1]");
    }
  }
  return out;
}

ScenarioOutput generate(const ScenarioSpec& raw) {
  const ScenarioSpec spec = resolve(raw);
  if (spec.name == "biased_ratings") return gen_biased_ratings(spec);
  if (spec.name == "false_arrests") return gen_false_arrests(spec);
  if (spec.name == "structural_admissions") return gen_structural(spec, false);
  if (spec.name == "homogeneous_control") return gen_structural(spec, true);
  if (spec.name == "selective_labels") return gen_selective_labels(spec);
  if (spec.name == "judge_release") return gen_judge_release(spec);
  if (spec.name == "data_entry_outcomes") return gen_data_entry(spec);
  throw ParameterError("unknown scenario '" + spec.name + "'");
}

ScoreFunction judge_policy(const ScenarioSpec& raw) {
  if (raw.name != "judge_release") {
    throw ParameterError("judge_policy requires a judge_release spec, got '" + raw.name + "'");
  }
  const ScenarioSpec spec = resolve(raw);
  const double base = param(spec, "risk_base");
  const double wp = param(spec, "risk_priors_weight");
  const double ws = param(spec, "risk_severity_weight");
  const double inflation = param(spec, "severity_inflation");
  return ScoreFunction(
      [base, wp, ws, inflation](std::span<const double> values) {
        return judge_formula(values[0], values[1], base, wp, ws, inflation);
      },
      ScoreProvenance::custom, "judge_release.features");
}

// --- release experiment -----------------------------------------------------------

Json ReleaseReport::to_json() const {
  const auto group_json = [](const GroupReleaseStats& g) {
    Json j;
    j["defendants"] = g.defendants;
    j["judge_detained"] = g.judge_detained;
    j["machine_detained"] = g.machine_detained;
    j["judge_detention_rate"] = g.judge_detention_rate;
    j["machine_detention_rate"] = g.machine_detention_rate;
    j["reduction_contribution"] = g.reduction_contribution;
    return j;
  };
  Json j;
  j["format"] = "screenaudit.release_experiment/1";
  j["defendants"] = defendants;
  j["judge"]["detained"] = judge_detained;
  j["judge"]["detention_rate"] = judge_detention_rate;
  j["judge"]["released_fta"] = judge_released_fta;
  j["machine"]["detained"] = machine_detained;
  j["machine"]["detention_rate"] = machine_detention_rate;
  j["machine"]["released_fta"] = machine_released_fta;
  j["reduction"] = reduction;
  j["groups"]["advantaged"] = group_json(advantaged);
  j["groups"]["disadvantaged"] = group_json(disadvantaged);
  return j;
}

ReleaseReport release_experiment(const Dataset& data, std::span<const double> machine_scores,
                                 double judge_detention_share, const std::string& judge_column,
                                 const std::string& risk_column) {
  const std::size_t n = data.size();
  if (n < 2) throw InsufficientDataError("release experiment needs at least 2 rows");
  if (machine_scores.size() != n) {
    throw ParameterError("release experiment: scores cover " +
                         std::to_string(machine_scores.size()) + " of " + std::to_string(n) +
                         " rows");
  }
  if (!(judge_detention_share > 0.0 && judge_detention_share < 1.0)) {
    throw ParameterError("judge detention share must lie in (0, 1)");
  }
  const std::size_t ji = data.schema().outcome_index(judge_column);
  const std::size_t ri = data.schema().outcome_index(risk_column);
  std::vector<double> judge(n), risk(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto jv = data.row(i).outcomes[ji];
    const auto rv = data.row(i).outcomes[ri];
    if (!jv.has_value() || !rv.has_value()) {
      throw ValidationError("release experiment: row " + std::to_string(i) +
                            " is censored on the judge or risk column");
    }
    judge[i] = *jv;
    risk[i] = *rv;
  }

  // Detain top-k by score, ties by row order; prefix sums of detained risk
  // give every released-set expected FTA in one pass.
  const auto detained_order = [n](const std::vector<double>& s) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    return order;
  };
  KahanSum total_risk_sum;
  for (double r : risk) total_risk_sum.add(r);
  const double total_risk = total_risk_sum.value();
  const auto released_fta_at = [&](const std::vector<double>& prefix, std::size_t k) {
    if (k >= n) return 0.0;
    return (total_risk - prefix[k]) / static_cast<double>(n - k);
  };
  const auto prefix_risk = [&](const std::vector<std::size_t>& order) {
    std::vector<double> prefix(n + 1, 0.0);
    KahanSum run;
    for (std::size_t k = 0; k < n; ++k) {
      run.add(risk[order[k]]);
      prefix[k + 1] = run.value();
    }
    return prefix;
  };

  const auto judge_order = detained_order(judge);
  const std::vector<double> machine_vec(machine_scores.begin(), machine_scores.end());
  const auto machine_order = detained_order(machine_vec);
  const auto judge_prefix = prefix_risk(judge_order);
  const auto machine_prefix = prefix_risk(machine_order);

  const auto k_judge = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(judge_detention_share * static_cast<double>(n))),
      1, n - 1);
  const double judge_fta = released_fta_at(judge_prefix, k_judge);

  std::size_t k_machine = n;
  for (std::size_t k = 0; k <= n; ++k) {
    if (released_fta_at(machine_prefix, k) <= judge_fta) {
      k_machine = k;
      break;
    }
  }

  ReleaseReport rep;
  rep.defendants = n;
  rep.judge_detained = k_judge;
  rep.machine_detained = k_machine;
  rep.judge_detention_rate = static_cast<double>(k_judge) / static_cast<double>(n);
  rep.machine_detention_rate = static_cast<double>(k_machine) / static_cast<double>(n);
  rep.judge_released_fta = judge_fta;
  rep.machine_released_fta = released_fta_at(machine_prefix, k_machine);
  rep.reduction = (static_cast<double>(k_judge) - static_cast<double>(k_machine)) /
                  static_cast<double>(k_judge);

  GroupReleaseStats* stats[2];
  stats[kAdvantaged] = &rep.advantaged;
  stats[kDisadvantaged] = &rep.disadvantaged;
  for (std::size_t i = 0; i < n; ++i) ++stats[data.group_of(i)]->defendants;
  for (std::size_t k = 0; k < k_judge; ++k) {
    ++stats[data.group_of(judge_order[k])]->judge_detained;
  }
  for (std::size_t k = 0; k < k_machine; ++k) {
    ++stats[data.group_of(machine_order[k])]->machine_detained;
  }
  for (GroupReleaseStats* g : stats) {
    if (g->defendants > 0) {
      g->judge_detention_rate =
          static_cast<double>(g->judge_detained) / static_cast<double>(g->defendants);
      g->machine_detention_rate =
          static_cast<double>(g->machine_detained) / static_cast<double>(g->defendants);
    }
    g->reduction_contribution =
        (static_cast<double>(g->judge_detained) - static_cast<double>(g->machine_detained)) /
        static_cast<double>(k_judge);
  }
  return rep;
}

ReleaseReport release_experiment(const Dataset& data,
                                 const trainer::TrainedScreener& screener,
                                 double judge_detention_share, const std::string& judge_column,
                                 const std::string& risk_column) {
  if (screener.schema_digest() != data.schema().digest()) {
    throw SchemaError("release experiment: dataset schema does not match the screener's");
  }
  std::vector<double> scores;
  scores.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    scores.push_back(screener.score(data.row(i).features));
  }
  return release_experiment(data, scores, judge_detention_share, judge_column, risk_column);
}

}  // namespace scenarios
}  // namespace screenaudit
