#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "screenaudit/model.hpp"

namespace screenaudit {
namespace trainer {

using Json = nlohmann::ordered_json;

enum class LinkKind { linear, logistic };
enum class Variant { plain, blind, aware, orthogonalized };

std::string to_string(LinkKind k);
std::string to_string(Variant v);
LinkKind link_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

struct TrainConfig {
  LinkKind link = LinkKind::linear;
  double learning_rate = 0.2;
  std::size_t max_iterations = 5000;
  // Convergence: max-abs gradient component falls at or below this.
  double tolerance = 1e-8;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;
};

// How the design matrix is assembled beyond the representation itself.
struct EncoderSpec {
  // Enter the group indicator plus every base column interacted with it.
  bool group_interactions = false;
  // Subtract stored within-group means from every base column (group read
  // from the raw input, since the representation drops it).
  bool residualize_by_group = false;
};

// Maps a raw feature vector to a design row: intercept, then the retained
// non-group features (categoricals one-hot against baseline category 0,
// coarsened buckets likewise, reals as-is), then optionally the group block.
class RowEncoder {
 public:
  RowEncoder(const FeatureSchema& schema, const Representation& r, const EncoderSpec& spec);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t base_columns() const { return base_count_; }
  const EncoderSpec& spec() const { return spec_; }

  // Residualization means, one value per base column, per group.
  void set_group_means(std::vector<double> advantaged, std::vector<double> disadvantaged);
  bool has_group_means() const { return !means_[0].empty(); }
  const std::vector<double>& group_means(int group) const;

  std::vector<double> encode(const FeatureVector& raw) const;

 private:
  FeatureSchema schema_;
  Representation rep_;
  EncoderSpec spec_;
  std::vector<std::string> columns_;
  std::size_t base_count_ = 0;
  // (feature index, bucket) pair per base column; bucket < 0 marks a real.
  std::vector<std::pair<std::size_t, int>> base_layout_;
  std::vector<double> means_[2];
};

// Encoded objective, exposed so analytic gradients can be checked against
// finite differences.
struct TrainingProblem {
  std::size_t cols = 0;
  std::vector<double> X;  // row-major, rows() * cols
  std::vector<double> y;
  std::vector<double> w;
  LinkKind link = LinkKind::linear;

  std::size_t rows() const { return cols == 0 ? 0 : X.size() / cols; }
  double loss(std::span<const double> theta) const;
  std::vector<double> gradient(std::span<const double> theta) const;
  // Single fused pass; returns loss and fills grad.
  double loss_and_gradient(std::span<const double> theta, std::vector<double>& grad) const;
};

struct TrainMetadata {
  std::string outcome;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;
  std::size_t max_iterations = 0;
  double tolerance = 0.0;
  double holdout_fraction = 0.0;
  std::size_t iterations_run = 0;
  bool converged = false;
  double final_train_loss = 0.0;
  std::optional<double> final_holdout_loss;
  std::size_t censored_dropped = 0;
  std::size_t train_rows = 0;
  std::size_t holdout_rows = 0;
};

// A fitted screener: everything needed to score new candidates and to audit
// how it was produced.
class TrainedScreener {
 public:
  TrainedScreener(FeatureSchema schema, Representation rep, RowEncoder encoder,
                  Variant variant, LinkKind link, std::vector<double> params,
                  TrainMetadata metadata);

  double score(const FeatureVector& raw) const;

  const FeatureSchema& schema() const { return schema_; }
  std::uint64_t schema_digest() const { return schema_.digest(); }
  const Representation& representation() const { return rep_; }
  const RowEncoder& encoder() const { return encoder_; }
  Variant variant() const { return variant_; }
  LinkKind link() const { return link_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<std::string>& columns() const { return encoder_.columns(); }
  const TrainMetadata& metadata() const { return metadata_; }

  // Fitted weight by column name; throws ParameterError for unknown names.
  double coefficient(const std::string& column) const;

  Json to_json() const;
  static TrainedScreener from_json(const Json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedScreener load(const std::filesystem::path& path);

  // Content digest over the serialized artifact.
  std::uint64_t digest() const;

 private:
  FeatureSchema schema_;
  Representation rep_;
  RowEncoder encoder_;
  Variant variant_;
  LinkKind link_;
  std::vector<double> params_;
  TrainMetadata metadata_;
};

// Holdout membership is a pure function of (seed, holdout_fraction, row
// index), so audits can reproduce the split from artifact metadata alone.
bool is_holdout_row(std::uint64_t seed, double holdout_fraction, std::size_t row_index);
std::vector<std::size_t> holdout_rows(const Dataset& data, const std::string& outcome,
                                      std::uint64_t seed, double holdout_fraction);

// Full-batch deterministic gradient descent from a zero start. Censored rows
// are dropped (count recorded); divergence throws TrainingError carrying the
// last finite loss.
TrainedScreener train(const Dataset& data, const std::string& outcome, const Representation& r,
                      const TrainConfig& cfg, const EncoderSpec& spec = {},
                      Variant tag = Variant::plain);

struct VariantSet {
  TrainedScreener blind;
  TrainedScreener aware;
  TrainedScreener orthogonalized;
};

// Three screeners sharing data, config, and holdout split:
//   blind           = base_r minus the group feature
//   aware           = base_r plus the group feature, with group interactions
//   orthogonalized  = base_r minus the group feature, base columns
//                     residualized by stored within-group training means
VariantSet train_variants(const Dataset& data, const std::string& outcome,
                          const Representation& base_r, const TrainConfig& cfg);

struct Evaluation {
  double loss = 0.0;
  double loss_advantaged = 0.0;
  double loss_disadvantaged = 0.0;
  double mean_score_advantaged = 0.0;
  double mean_score_disadvantaged = 0.0;
  double rank_correlation = 0.0;  // Spearman between score and outcome
  std::size_t rows_used = 0;
};

// Scores every non-censored row of `data` against the screener's declared
// outcome column. Requires both groups present.
Evaluation evaluate(const TrainedScreener& screener, const Dataset& data);

// Loss of an arbitrary screener on the given rows (audit building block).
double loss_on_rows(const TrainedScreener& screener, const Dataset& data,
                    const std::string& outcome, std::span<const std::size_t> rows);

// Spearman rank correlation with average ranks on ties.
double spearman(std::span<const double> a, std::span<const double> b);

// View of a fitted screener as a total score function on the raw space.
ScoreFunction as_score_function(const TrainedScreener& screener);

}  // namespace trainer
}  // namespace screenaudit
