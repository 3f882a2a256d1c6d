#pragma once

#include <optional>
#include <string>

#include "screenaudit/io.hpp"
#include "screenaudit/model.hpp"
#include "screenaudit/oracle.hpp"
#include "screenaudit/trainer.hpp"

namespace screenaudit {
namespace decomp {

// Fixed interpretation labels attached to each term in serialized reports.
inline constexpr const char* kStructuralLabel =
    "group gap in the true outcome f itself";
inline constexpr const char* kOutcomeBiasLabel =
    "added by scoring the proxy outcome g instead of f";
inline constexpr const char* kInputBiasLabel =
    "added by restricting inputs to the reduced representation r(x)";
inline constexpr const char* kTrainingBiasLabel =
    "added by deploying the trained screener instead of the implied predictor";

// Additive split of the deployed screener's group disparity:
//   total = D(t.r) = structural + outcome_bias + input_bias + training_bias
// with structural = D(f), outcome_bias = D(g) - D(f),
// input_bias = D(h.r) - D(g), training_bias = D(t.r) - D(h.r),
// where h is the implied best predictor of g through r. Sign convention:
// positive = the advantaged group's average is higher.
struct DecompositionReport {
  double structural = 0.0;
  double outcome_bias = 0.0;
  double input_bias = 0.0;
  double training_bias = 0.0;
  double total = 0.0;
  double residual = 0.0;  // total minus the term sum; identity check

  oracle::GroupWeights weights;
  std::string world_digest;
  std::string representation;
  std::string screener_provenance;
  std::optional<std::string> note;  // set when computed from sampled data

  Json to_json() const;
};

DecompositionReport decompose(const DiscreteWorld& world, const Representation& r,
                              const ScoreFunction& t,
                              const oracle::GroupWeights& weights = {});

// Convenience: a fitted screener scores each cell through its own
// representation; `r` still defines the implied predictor h.
DecompositionReport decompose(const DiscreteWorld& world, const Representation& r,
                              const trainer::TrainedScreener& t,
                              const oracle::GroupWeights& weights = {});

// Same split on the empirical world estimated from data, with stratified
// (within-group) bootstrap standard errors per term. Point estimates come
// from the full sample; resample b redraws each group's rows with
// replacement, seeded by counter so the whole procedure is reproducible.
struct EmpiricalDecomposition {
  DecompositionReport report;
  double se_structural = 0.0;
  double se_outcome_bias = 0.0;
  double se_input_bias = 0.0;
  double se_training_bias = 0.0;
  double se_total = 0.0;
  std::size_t bootstrap_resamples = 0;
  std::uint64_t seed = 0;
  std::size_t unsupported_cells = 0;

  Json to_json() const;
};

EmpiricalDecomposition decompose_empirical(const Dataset& data, const std::string& f_column,
                                           const std::string& g_column, const Representation& r,
                                           const ScoreFunction& t,
                                           const oracle::GroupWeights& weights = {},
                                           std::size_t bootstrap_resamples = 200,
                                           std::uint64_t seed = 0);

}  // namespace decomp
}  // namespace screenaudit
