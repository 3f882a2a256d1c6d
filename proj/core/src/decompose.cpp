#include "screenaudit/decompose.hpp"

#include <cmath>

#include "screenaudit/numeric.hpp"
#include "screenaudit/rng.hpp"

namespace screenaudit {
namespace decomp {

namespace {

DecompositionReport decompose_tables(const DiscreteWorld& world, const Representation& r,
                                     const std::vector<double>& t_table,
                                     const std::string& t_provenance,
                                     const oracle::GroupWeights& weights) {
  const auto& schema = world.schema();
  const auto h = oracle::bayes_predictor(world, world.g_table(), r, weights);
  std::vector<double> h_table(world.cells());
  for (std::size_t c = 0; c < world.cells(); ++c) {
    h_table[c] = h(cell_values(schema, c));
  }

  const double d_f = oracle::disparity_table(world, world.f_table());
  const double d_g = oracle::disparity_table(world, world.g_table());
  const double d_hr = oracle::disparity_table(world, h_table);
  const double d_tr = oracle::disparity_table(world, t_table);

  DecompositionReport rep;
  rep.structural = d_f;
  rep.outcome_bias = d_g - d_f;
  rep.input_bias = d_hr - d_g;
  rep.training_bias = d_tr - d_hr;
  rep.total = d_tr;
  rep.residual =
      rep.total - (rep.structural + rep.outcome_bias + rep.input_bias + rep.training_bias);
  rep.weights = weights;
  rep.world_digest = format_digest(world.digest());
  rep.representation = r.describe();
  rep.screener_provenance = t_provenance;
  return rep;
}

std::vector<double> screener_table(const DiscreteWorld& world,
                                   const trainer::TrainedScreener& t) {
  const auto& schema = world.schema();
  if (schema.digest() != t.schema_digest()) {
    throw SchemaError("decompose: world schema does not match the screener's");
  }
  const std::uint64_t digest = schema.digest();
  std::vector<double> table(world.cells());
  for (std::size_t c = 0; c < world.cells(); ++c) {
    table[c] = t.score(FeatureVector{cell_values(schema, c), digest});
  }
  return table;
}

}  // namespace

DecompositionReport decompose(const DiscreteWorld& world, const Representation& r,
                              const ScoreFunction& t, const oracle::GroupWeights& weights) {
  require_valid_world(world);
  oracle::check_weights(weights);
  const auto& schema = world.schema();
  std::vector<double> t_table(world.cells());
  for (std::size_t c = 0; c < world.cells(); ++c) {
    t_table[c] = t(cell_values(schema, c));
  }
  return decompose_tables(world, r, t_table, to_string(t.provenance()), weights);
}

DecompositionReport decompose(const DiscreteWorld& world, const Representation& r,
                              const trainer::TrainedScreener& t,
                              const oracle::GroupWeights& weights) {
  require_valid_world(world);
  oracle::check_weights(weights);
  return decompose_tables(world, r, screener_table(world, t),
                          "trained:" + trainer::to_string(t.variant()), weights);
}

Json DecompositionReport::to_json() const {
  Json j;
  j["format"] = "screenaudit.decomposition/1";
  j["sign_convention"] = "positive = advantaged group's average is higher";
  j["weights"]["advantaged"] = weights.advantaged;
  j["weights"]["disadvantaged"] = weights.disadvantaged;
  j["world_digest"] = world_digest;
  j["representation"] = representation;
  j["screener"] = screener_provenance;
  auto term = [](double value, const char* label) {
    Json t;
    t["value"] = value;
    t["interpretation"] = label;
    return t;
  };
  j["terms"]["structural"] = term(structural, kStructuralLabel);
  j["terms"]["outcome_bias"] = term(outcome_bias, kOutcomeBiasLabel);
  j["terms"]["input_bias"] = term(input_bias, kInputBiasLabel);
  j["terms"]["training_bias"] = term(training_bias, kTrainingBiasLabel);
  j["total"] = total;
  j["residual"] = residual;
  if (note.has_value()) j["note"] = *note;
  return j;
}

Json EmpiricalDecomposition::to_json() const {
  Json j = report.to_json();
  j["bootstrap"]["resamples"] = bootstrap_resamples;
  j["bootstrap"]["seed"] = seed;
  j["bootstrap"]["se"]["structural"] = se_structural;
  j["bootstrap"]["se"]["outcome_bias"] = se_outcome_bias;
  j["bootstrap"]["se"]["input_bias"] = se_input_bias;
  j["bootstrap"]["se"]["training_bias"] = se_training_bias;
  j["bootstrap"]["se"]["total"] = se_total;
  j["unsupported_cells"] = unsupported_cells;
  return j;
}

EmpiricalDecomposition decompose_empirical(const Dataset& data, const std::string& f_column,
                                           const std::string& g_column, const Representation& r,
                                           const ScoreFunction& t,
                                           const oracle::GroupWeights& weights,
                                           std::size_t bootstrap_resamples, std::uint64_t seed) {
  oracle::check_weights(weights);
  if (bootstrap_resamples < 2) {
    throw ParameterError("decompose_empirical needs at least 2 bootstrap resamples");
  }
  const auto point = empirical_world(data, f_column, g_column);

  EmpiricalDecomposition out;
  out.report = decompose(point.world, r, t, weights);
  out.report.note =
      "terms estimated from sampled data; exact-world and sample quantities are "
      "bridged by the bootstrap standard errors below";
  out.bootstrap_resamples = bootstrap_resamples;
  out.seed = seed;
  out.unsupported_cells = point.unsupported_cells.size();

  // Stratified resampling: redraw each group's row list with replacement.
  std::vector<std::size_t> adv_rows, dis_rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (data.group_of(i) == kAdvantaged ? adv_rows : dis_rows).push_back(i);
  }
  const CounterRng adv_rng(seed, "bootstrap.advantaged");
  const CounterRng dis_rng(seed, "bootstrap.disadvantaged");

  std::vector<double> terms[5];
  for (auto& v : terms) v.reserve(bootstrap_resamples);
  for (std::size_t b = 0; b < bootstrap_resamples; ++b) {
    Dataset resample(data.schema(), "bootstrap");
    for (std::size_t i = 0; i < adv_rows.size(); ++i) {
      const std::uint64_t counter = b * adv_rows.size() + i;
      resample.add_row(data.row(adv_rows[adv_rng.pick(counter, adv_rows.size())]));
    }
    for (std::size_t i = 0; i < dis_rows.size(); ++i) {
      const std::uint64_t counter = b * dis_rows.size() + i;
      resample.add_row(data.row(dis_rows[dis_rng.pick(counter, dis_rows.size())]));
    }
    const auto world_b = empirical_world(resample, f_column, g_column);
    const auto rep_b = decompose(world_b.world, r, t, weights);
    terms[0].push_back(rep_b.structural);
    terms[1].push_back(rep_b.outcome_bias);
    terms[2].push_back(rep_b.input_bias);
    terms[3].push_back(rep_b.training_bias);
    terms[4].push_back(rep_b.total);
  }

  auto stddev = [&](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    KahanSum s;
    for (double x : v) s.add(x);
    const double mean = s.value() / n;
    KahanSum ss;
    for (double x : v) ss.add((x - mean) * (x - mean));
    return std::sqrt(ss.value() / (n - 1.0));
  };
  out.se_structural = stddev(terms[0]);
  out.se_outcome_bias = stddev(terms[1]);
  out.se_input_bias = stddev(terms[2]);
  out.se_training_bias = stddev(terms[3]);
  out.se_total = stddev(terms[4]);
  return out;
}

}  // namespace decomp
}  // namespace screenaudit
