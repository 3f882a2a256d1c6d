#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "screenaudit/errors.hpp"

namespace screenaudit {

// Group label convention used throughout: the designated group feature is a
// binary categorical where value 0 is the advantaged group and value 1 the
// disadvantaged group. Disparities are reported advantaged-minus-disadvantaged,
// so a positive disparity means the advantaged group's average is higher.
inline constexpr int kAdvantaged = 0;
inline constexpr int kDisadvantaged = 1;

enum class FeatureKind { categorical, real };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::categorical;
  // Categorical: values are integers in [0, cardinality).
  int cardinality = 0;
  // Real: declared closed range [min, max].
  double min = 0.0;
  double max = 0.0;
};

// Declares the feature space: ordered features, which one is the protected
// group attribute, and the named outcome columns a conforming dataset carries.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  FeatureSchema(std::vector<FeatureSpec> features, std::string group_feature,
                std::vector<std::string> outcomes);

  std::size_t arity() const { return features_.size(); }
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
  const std::vector<FeatureSpec>& features() const { return features_; }
  std::size_t index_of(const std::string& name) const;
  bool has_feature(const std::string& name) const;

  std::size_t group_index() const { return group_index_; }
  const std::string& group_feature() const { return features_.at(group_index_).name; }

  const std::vector<std::string>& outcomes() const { return outcomes_; }
  std::size_t outcome_index(const std::string& name) const;

  bool all_categorical() const;
  // Number of cells in the product space; throws ValidationError when any
  // feature is real-valued or the product exceeds `cap`.
  std::size_t cell_count(std::size_t cap = kDefaultStateCap) const;

  // Stable content digest; changes iff the declaration changes.
  std::uint64_t digest() const;

  static constexpr std::size_t kDefaultStateCap = 1000000;

 private:
  std::vector<FeatureSpec> features_;
  std::size_t group_index_ = 0;
  std::vector<std::string> outcomes_;
};

// A point in a schema's feature space. Categorical coordinates hold small
// non-negative integers (exactly representable); reals hold finite doubles.
struct FeatureVector {
  std::vector<double> values;
  std::uint64_t schema_digest = 0;

  int cat(std::size_t i) const { return static_cast<int>(values.at(i)); }
  double real(std::size_t i) const { return values.at(i); }
};

FeatureVector make_vector(const FeatureSchema& schema, std::vector<double> values);

// Checks one vector against a schema; throws ValidationError naming the
// offending feature on the first violation.
void check_conforms(const FeatureSchema& schema, const FeatureVector& x);

// --- canonical cell enumeration (all-categorical schemas) -------------------
// Row-major with feature 0 most significant:
//   index = ((v0 * k1 + v1) * k2 + v2) * ...
std::size_t cell_index(const FeatureSchema& schema, std::span<const double> values);
std::vector<double> cell_values(const FeatureSchema& schema, std::size_t index);

// --- dataset -----------------------------------------------------------------

struct DatasetRow {
  FeatureVector features;
  // Aligned with schema.outcomes(); nullopt marks a censored observation.
  std::vector<std::optional<double>> outcomes;
  double weight = 1.0;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(FeatureSchema schema, std::string provenance);

  const FeatureSchema& schema() const { return schema_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  std::size_t size() const { return rows_.size(); }
  const DatasetRow& row(std::size_t i) const { return rows_.at(i); }
  const std::vector<DatasetRow>& rows() const { return rows_; }
  void add_row(DatasetRow row);

  int group_of(std::size_t i) const;
  std::optional<double> outcome(std::size_t i, std::size_t outcome_idx) const;

  std::uint64_t digest() const;

 private:
  FeatureSchema schema_;
  std::vector<DatasetRow> rows_;
  std::string provenance_;
};

struct Violation {
  std::string invariant;  // stable name of the broken invariant
  std::string detail;     // offending value / location
};

// Full conformance report: row conformance, non-negative finite weights,
// outcome finiteness. Returns all violations (empty = valid).
std::vector<Violation> validate_dataset(const Dataset& data);

// --- score functions ---------------------------------------------------------

// Provenance of a score map: which stage of the screening pipeline it models.
enum class ScoreProvenance { true_outcome, proxy_outcome, implied_predictor, trained, custom };

std::string to_string(ScoreProvenance p);

// Deterministic total map from feature vectors to finite real scores.
// Evaluation throws EvaluationError (naming the input cell) when the
// underlying function produces a non-finite value.
class ScoreFunction {
 public:
  using Fn = std::function<double(std::span<const double>)>;

  ScoreFunction() = default;
  ScoreFunction(Fn fn, ScoreProvenance provenance, std::string space);

  double operator()(std::span<const double> values) const;
  double operator()(const FeatureVector& x) const { return (*this)(x.values); }

  ScoreProvenance provenance() const { return provenance_; }
  const std::string& space() const { return space_; }

  // Table-backed score over an all-categorical schema, canonical cell order.
  static ScoreFunction from_table(const FeatureSchema& schema,
                                  std::vector<double> table,
                                  ScoreProvenance provenance,
                                  std::string space);

 private:
  Fn fn_;
  ScoreProvenance provenance_ = ScoreProvenance::custom;
  std::string space_;
};

// --- representation ----------------------------------------------------------

// What a screener is allowed to see. Modeled as an idempotent self-map on the
// schema's feature space: retained coordinates keep (possibly coarsened)
// values, dropped coordinates collapse to a fixed baseline. The reduced space
// is exactly the fixed-point set, so r(r(x)) == r(x) by construction and every
// downstream function composed with r is total on the full space.
class Representation {
 public:
  // Identity: retain everything, no coarsening.
  static Representation identity(const FeatureSchema& schema);
  // Retain only the named features.
  static Representation retain(const FeatureSchema& schema,
                               const std::vector<std::string>& names);
  // Identity minus the named features.
  static Representation drop(const FeatureSchema& schema,
                             const std::vector<std::string>& names);

  // Coarsen a categorical feature: value -> bucket (buckets must be a
  // surjection onto [0, bucket_count)). The representative of a bucket is its
  // smallest member value.
  Representation& coarsen_categorical(const std::string& name,
                                      std::vector<int> value_to_bucket);
  // Coarsen a real feature by ascending cut points; bucket b covers
  // [cut[b-1], cut[b]) and is represented by its lower edge (declared min for
  // the first bucket).
  Representation& coarsen_real(const std::string& name, std::vector<double> cuts);

  const FeatureSchema& schema() const { return schema_; }
  bool retains(std::size_t feature_index) const { return retained_.at(feature_index); }
  bool retains(const std::string& name) const;
  bool retains_group() const { return retained_.at(schema_.group_index()); }
  std::vector<std::size_t> retained_indices() const;

  // Apply the self-map. Output lives in the same schema.
  FeatureVector apply(const FeatureVector& x) const;
  std::vector<double> apply(std::span<const double> values) const;

  // Cardinality of a retained categorical feature after coarsening.
  int reduced_cardinality(std::size_t feature_index) const;
  // Bucket of a retained coordinate value (categorical or coarsened real).
  int bucket_of(std::size_t feature_index, double value) const;
  // Raw coarsening maps (empty = feature not coarsened).
  const std::vector<int>& categorical_buckets(std::size_t feature_index) const {
    return cat_buckets_.at(feature_index);
  }
  const std::vector<double>& real_cut_points(std::size_t feature_index) const {
    return real_cuts_.at(feature_index);
  }

  // Stable content digest over retained set + coarsening maps.
  std::uint64_t digest() const;

  // Human-readable summary, e.g. "retain{rating,group}".
  std::string describe() const;

 private:
  explicit Representation(FeatureSchema schema);

  FeatureSchema schema_;
  std::vector<bool> retained_;
  // Per-feature coarsening; empty vector = none.
  std::vector<std::vector<int>> cat_buckets_;    // value -> bucket
  std::vector<std::vector<double>> real_cuts_;   // ascending cut points
};

// --- discrete world ----------------------------------------------------------

// Ground-truth object for exact analysis: an all-categorical feature space
// with per-group probability masses p (advantaged) and q (disadvantaged), the
// true-outcome score f, and the chosen proxy outcome g.
class DiscreteWorld {
 public:
  DiscreteWorld() = default;
  DiscreteWorld(FeatureSchema schema, std::vector<double> p, std::vector<double> q,
                std::vector<double> f, std::vector<double> g,
                std::size_t state_cap = FeatureSchema::kDefaultStateCap);

  const FeatureSchema& schema() const { return schema_; }
  std::size_t cells() const { return p_.size(); }
  std::size_t state_cap() const { return state_cap_; }

  double p(std::size_t cell) const { return p_.at(cell); }
  double q(std::size_t cell) const { return q_.at(cell); }
  double f(std::size_t cell) const { return f_.at(cell); }
  double g(std::size_t cell) const { return g_.at(cell); }

  const std::vector<double>& p_table() const { return p_; }
  const std::vector<double>& q_table() const { return q_; }
  const std::vector<double>& f_table() const { return f_; }
  const std::vector<double>& g_table() const { return g_; }

  ScoreFunction f_score() const;
  ScoreFunction g_score() const;

  std::uint64_t digest() const;

 private:
  FeatureSchema schema_;
  std::vector<double> p_, q_, f_, g_;
  std::size_t state_cap_ = FeatureSchema::kDefaultStateCap;
};

// All TYPE invariants checked, one violation per broken invariant:
// mass_nonnegative, mass_normalized_p, mass_normalized_q, score_finite_f,
// score_finite_g, table_size, state_cap, schema_all_categorical,
// group_feature_binary. Mass normalization tolerance: |sum - 1| <= 1e-12.
std::vector<Violation> validate_world(const DiscreteWorld& world);

// Throwing wrapper used by constructors of derived objects.
void require_valid_world(const DiscreteWorld& world);

// --- world <-> dataset bridges ------------------------------------------------

struct EmpiricalWorld {
  DiscreteWorld world;
  // Cells with zero pooled mass; their scores are 0 by convention.
  std::vector<std::size_t> unsupported_cells;
};

// Weighted within-group frequencies become p/q; f and g tables are pooled
// weighted within-cell means of the named outcome columns. Requires an
// all-categorical schema, both groups present, and no censored values in the
// two outcome columns.
EmpiricalWorld empirical_world(const Dataset& data, const std::string& f_column,
                               const std::string& g_column);

// One row per (cell, group) with positive mass; weight = mass, outcomes = f,g.
// Round-trips through empirical_world exactly when masses are exact binary
// fractions.
Dataset enumerate_world(const DiscreteWorld& world);

// Seeded i.i.d. sample: row group ~ Bernoulli(disadvantaged_share), cell ~ the
// group's mass table, outcomes = exact f/g at the drawn cell. Counter-based,
// so growing n extends the sample without reshuffling earlier rows.
Dataset sample_world(const DiscreteWorld& world, std::size_t n,
                     double disadvantaged_share, std::uint64_t seed);

}  // namespace screenaudit
