#pragma once

#include <vector>

#include "screenaudit/model.hpp"

namespace screenaudit {
namespace oracle {

// Weights defining the pooled population the implied predictor conditions on.
// Default models a 50/50 applicant mix; override when the deployment mix is
// known. Must be non-negative and sum to 1 (within 1e-9).
struct GroupWeights {
  double advantaged = 0.5;
  double disadvantaged = 0.5;
};

void check_weights(const GroupWeights& w);

// D(v) = sum_x [p(x) - q(x)] * v(x), accumulated with compensated summation in
// canonical cell order. Positive = the advantaged group's average is higher.
double disparity(const DiscreteWorld& world, const ScoreFunction& v);

// Same walk over an explicit table (used by decomposition internals).
double disparity_table(const DiscreteWorld& world, const std::vector<double>& values);

// The best predictor of `target` available through representation r:
// h(z) = E[target | r(x) = z] under the pooled mix w_adv * p + w_dis * q.
// Cells that r maps to a zero-mass image fall back to the pooled global mean.
// Returned as the composite h(r(x)), total on the full space; if r retains the
// group feature, h conditions on it through r(x).
ScoreFunction bayes_predictor(const DiscreteWorld& world, const std::vector<double>& target,
                              const Representation& r, const GroupWeights& weights = {});
ScoreFunction bayes_predictor(const DiscreteWorld& world, const ScoreFunction& target,
                              const Representation& r, const GroupWeights& weights = {});

// Exact mass-level selection: admit pooled mass greedily by descending score
// (ties broken by canonical cell order) until `capacity_share` of the total is
// filled; the marginal cell is split fractionally.
struct ExactSelection {
  // Fraction of each cell's pooled mass admitted (same indexing as the
  // world's tables): 1 above the threshold, fractional at the marginal cell.
  std::vector<double> admitted;
  double capacity_share = 0.0;
  double threshold_score = 0.0;     // score of the marginal cell
  double mean_true_outcome = 0.0;   // mass-weighted mean of f among admitted
  // Fraction of each group's own mass that is admitted.
  double advantaged_rate = 0.0;
  double disadvantaged_rate = 0.0;
  // Composition of the admitted pool.
  double advantaged_share_of_admitted = 0.0;
  double disadvantaged_share_of_admitted = 0.0;
};

ExactSelection enumerate_select(const DiscreteWorld& world, const ScoreFunction& score,
                                double capacity_share, const GroupWeights& weights = {});

}  // namespace oracle
}  // namespace screenaudit
