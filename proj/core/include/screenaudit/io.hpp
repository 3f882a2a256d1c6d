#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "screenaudit/model.hpp"

namespace screenaudit {

// All emitted JSON preserves insertion order so reruns are byte-identical.
using Json = nlohmann::ordered_json;

// Shortest round-trip decimal form (std::to_chars); the single formatting path
// for every number the toolkit writes.
std::string format_double(double v);

// 16-digit lowercase hex form of a content digest.
std::string format_digest(std::uint64_t digest);

// --- schema ------------------------------------------------------------------

Json schema_to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const Json& j);
void write_schema(const FeatureSchema& schema, const std::filesystem::path& path);
FeatureSchema read_schema(const std::filesystem::path& path);

// --- dataset CSV ----------------------------------------------------------------
// Layout: feature columns in schema order (the group column appears under its
// schema name), then outcome columns, then `weight`. Censored outcomes are the
// literal `NA`. Lines starting with '#' are ignored on read.

std::string dataset_to_csv(const Dataset& data);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, const FeatureSchema& schema);

// Schema inference for foreign CSVs: a column whose values are all integers in
// [0, 20) becomes a categorical with cardinality max+1 (the group column is
// always binary); anything else is real with the observed range. Columns after
// the features are declared by `outcome_columns`.
FeatureSchema infer_schema_from_csv(const std::filesystem::path& path,
                                    const std::string& group_column,
                                    const std::vector<std::string>& outcome_columns);

// --- world files -----------------------------------------------------------------
// JSON with the schema plus explicit mass/score tables keyed by canonical cell
// index.

Json world_to_json(const DiscreteWorld& world);
DiscreteWorld world_from_json(const Json& j);
void write_world(const DiscreteWorld& world, const std::filesystem::path& path);
DiscreteWorld read_world(const std::filesystem::path& path);

// --- representation ----------------------------------------------------------------

Json representation_to_json(const Representation& r);
Representation representation_from_json(const Json& j, const FeatureSchema& schema);

// --- small file helpers ---------------------------------------------------------

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
Json read_json_file(const std::filesystem::path& path);

}  // namespace screenaudit
