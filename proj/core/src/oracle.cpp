#include "screenaudit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "screenaudit/numeric.hpp"

namespace screenaudit {
namespace oracle {

void check_weights(const GroupWeights& w) {
  if (!(w.advantaged >= 0.0) || !(w.disadvantaged >= 0.0) ||
      !std::isfinite(w.advantaged) || !std::isfinite(w.disadvantaged)) {
    throw ParameterError("group weights must be non-negative and finite");
  }
  if (w.advantaged == 0.0 && w.disadvantaged == 0.0) {
    throw ParameterError("degenerate group weights: both are zero");
  }
  if (std::abs(w.advantaged + w.disadvantaged - 1.0) > 1e-9) {
    throw ParameterError("group weights must sum to 1");
  }
}

double disparity(const DiscreteWorld& world, const ScoreFunction& v) {
  require_valid_world(world);
  const auto& schema = world.schema();
  KahanSum d;
  for (std::size_t c = 0; c < world.cells(); ++c) {
    const double value = v(cell_values(schema, c));  // throws naming the cell if non-finite
    d.add((world.p(c) - world.q(c)) * value);
  }
  return d.value();
}

double disparity_table(const DiscreteWorld& world, const std::vector<double>& values) {
  if (values.size() != world.cells()) {
    throw ValidationError("disparity_table: table size mismatch");
  }
  KahanSum d;
  for (std::size_t c = 0; c < world.cells(); ++c) {
    d.add((world.p(c) - world.q(c)) * values[c]);
  }
  return d.value();
}

ScoreFunction bayes_predictor(const DiscreteWorld& world, const std::vector<double>& target,
                              const Representation& r, const GroupWeights& weights) {
  require_valid_world(world);
  check_weights(weights);
  if (target.size() != world.cells()) {
    throw ValidationError("bayes_predictor: target table size mismatch");
  }
  const auto& schema = world.schema();
  const std::size_t cells = world.cells();

  // Image cell of each source cell under r (r is a self-map, so images index
  // into the same canonical enumeration).
  std::vector<std::size_t> image(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    image[c] = cell_index(schema, r.apply(cell_values(schema, c)));
  }

  std::vector<KahanSum> mass(cells), weighted(cells);
  KahanSum total_mass, total_weighted;
  for (std::size_t c = 0; c < cells; ++c) {
    const double m = weights.advantaged * world.p(c) + weights.disadvantaged * world.q(c);
    mass[image[c]].add(m);
    weighted[image[c]].add(m * target[c]);
    total_mass.add(m);
    total_weighted.add(m * target[c]);
  }
  const double pooled_mean =
      total_mass.value() > 0.0 ? total_weighted.value() / total_mass.value() : 0.0;

  auto table = std::make_shared<std::vector<double>>(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const std::size_t z = image[c];
    const double m = mass[z].value();
    // Zero-mass fibers carry the pooled global mean so h stays total.
    (*table)[c] = m > 0.0 ? weighted[z].value() / m : pooled_mean;
  }
  auto schema_copy = std::make_shared<FeatureSchema>(schema);
  return ScoreFunction(
      [table, schema_copy](std::span<const double> values) {
        return (*table)[cell_index(*schema_copy, values)];
      },
      ScoreProvenance::implied_predictor, "reduced:" + r.describe());
}

ScoreFunction bayes_predictor(const DiscreteWorld& world, const ScoreFunction& target,
                              const Representation& r, const GroupWeights& weights) {
  const auto& schema = world.schema();
  std::vector<double> table(world.cells());
  for (std::size_t c = 0; c < world.cells(); ++c) {
    table[c] = target(cell_values(schema, c));
  }
  return bayes_predictor(world, table, r, weights);
}

ExactSelection enumerate_select(const DiscreteWorld& world, const ScoreFunction& score,
                                double capacity_share, const GroupWeights& weights) {
  require_valid_world(world);
  check_weights(weights);
  if (!(capacity_share > 0.0 && capacity_share <= 1.0)) {
    throw ParameterError("enumerate_select: capacity share must lie in (0, 1]");
  }
  const auto& schema = world.schema();
  const std::size_t cells = world.cells();

  std::vector<double> scores(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    scores[c] = score(cell_values(schema, c));
  }
  std::vector<std::size_t> order(cells);
  std::iota(order.begin(), order.end(), 0);
  // Descending score; ties resolved by canonical cell order for determinism.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  ExactSelection out;
  out.capacity_share = capacity_share;
  out.admitted.assign(cells, 0.0);

  KahanSum pooled_total;
  for (std::size_t c = 0; c < cells; ++c) {
    pooled_total.add(weights.advantaged * world.p(c) + weights.disadvantaged * world.q(c));
  }
  const double capacity = capacity_share * pooled_total.value();

  KahanSum admitted_mass, admitted_f, adv_admitted, dis_admitted;
  double remaining = capacity;
  for (std::size_t c : order) {
    if (remaining <= 0.0) break;
    const double pooled = weights.advantaged * world.p(c) + weights.disadvantaged * world.q(c);
    if (pooled <= 0.0) continue;
    const double take = std::min(pooled, remaining);
    const double fraction = take / pooled;  // 1 except at the marginal cell
    out.admitted[c] = fraction;
    out.threshold_score = scores[c];
    admitted_mass.add(take);
    admitted_f.add(take * world.f(c));
    adv_admitted.add(fraction * world.p(c));
    dis_admitted.add(fraction * world.q(c));
    remaining -= take;
  }

  const double total_admitted = admitted_mass.value();
  out.mean_true_outcome = total_admitted > 0.0 ? admitted_f.value() / total_admitted : 0.0;
  out.advantaged_rate = adv_admitted.value();      // group masses each sum to 1
  out.disadvantaged_rate = dis_admitted.value();
  const double pool = weights.advantaged * adv_admitted.value() +
                      weights.disadvantaged * dis_admitted.value();
  if (pool > 0.0) {
    out.advantaged_share_of_admitted = weights.advantaged * adv_admitted.value() / pool;
    out.disadvantaged_share_of_admitted = weights.disadvantaged * dis_admitted.value() / pool;
  }
  return out;
}

}  // namespace oracle
}  // namespace screenaudit
