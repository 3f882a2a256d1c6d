#include "screenaudit/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace screenaudit {

namespace {

constexpr const char* kCensoredLiteral = "NA";

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw IoError("cannot parse number '" + s + "' in " + where);
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string format_digest(std::uint64_t digest) {
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = hex[digest & 0xF];
    digest >>= 4;
  }
  return out;
}

// --- schema ------------------------------------------------------------------

Json schema_to_json(const FeatureSchema& schema) {
  Json features = Json::array();
  for (const auto& f : schema.features()) {
    Json jf;
    jf["name"] = f.name;
    if (f.kind == FeatureKind::categorical) {
      jf["kind"] = "categorical";
      jf["cardinality"] = f.cardinality;
    } else {
      jf["kind"] = "real";
      jf["min"] = f.min;
      jf["max"] = f.max;
    }
    features.push_back(std::move(jf));
  }
  Json j;
  j["features"] = std::move(features);
  j["group_feature"] = schema.group_feature();
  j["outcomes"] = schema.outcomes();
  return j;
}

FeatureSchema schema_from_json(const Json& j) {
  std::vector<FeatureSpec> features;
  for (const auto& jf : j.at("features")) {
    FeatureSpec f;
    f.name = jf.at("name").get<std::string>();
    const auto kind = jf.at("kind").get<std::string>();
    if (kind == "categorical") {
      f.kind = FeatureKind::categorical;
      f.cardinality = jf.at("cardinality").get<int>();
    } else if (kind == "real") {
      f.kind = FeatureKind::real;
      f.min = jf.at("min").get<double>();
      f.max = jf.at("max").get<double>();
    } else {
      throw IoError("schema: unknown feature kind '" + kind + "'");
    }
    features.push_back(std::move(f));
  }
  return FeatureSchema(std::move(features), j.at("group_feature").get<std::string>(),
                       j.at("outcomes").get<std::vector<std::string>>());
}

void write_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  write_json_file(path, schema_to_json(schema));
}

FeatureSchema read_schema(const std::filesystem::path& path) {
  return schema_from_json(read_json_file(path));
}

// --- dataset CSV ----------------------------------------------------------------

std::string dataset_to_csv(const Dataset& data) {
  const auto& schema = data.schema();
  std::ostringstream os;
  for (std::size_t i = 0; i < schema.arity(); ++i) {
    if (i) os << ",";
    os << schema.feature(i).name;
  }
  for (const auto& o : schema.outcomes()) os << "," << o;
  os << ",weight\n";
  for (const auto& row : data.rows()) {
    for (std::size_t i = 0; i < row.features.values.size(); ++i) {
      if (i) os << ",";
      os << format_double(row.features.values[i]);
    }
    for (const auto& o : row.outcomes) {
      os << "," << (o.has_value() ? format_double(*o) : kCensoredLiteral);
    }
    os << "," << format_double(row.weight) << "\n";
  }
  return os.str();
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
  write_text_file(path, dataset_to_csv(data));
}

Dataset read_dataset_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::vector<std::string> header;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw IoError("'" + path.string() + "' has no header row");

  // Map every schema column to its position in the file.
  std::vector<std::size_t> feature_cols(schema.arity());
  std::vector<std::size_t> outcome_cols(schema.outcomes().size());
  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw SchemaError("'" + path.string() + "' is missing column '" + name + "'");
  };
  for (std::size_t i = 0; i < schema.arity(); ++i) {
    feature_cols[i] = find_col(schema.feature(i).name);
  }
  for (std::size_t i = 0; i < schema.outcomes().size(); ++i) {
    outcome_cols[i] = find_col(schema.outcomes()[i]);
  }
  std::optional<std::size_t> weight_col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "weight") weight_col = i;
  }

  Dataset data(schema, path.string());
  const std::uint64_t digest = schema.digest();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IoError("'" + path.string() + "' line " + std::to_string(lineno) + " has " +
                    std::to_string(fields.size()) + " fields, header has " +
                    std::to_string(header.size()));
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    DatasetRow row;
    row.features.schema_digest = digest;
    row.features.values.reserve(schema.arity());
    for (std::size_t i = 0; i < schema.arity(); ++i) {
      row.features.values.push_back(parse_double(fields[feature_cols[i]], where));
    }
    for (std::size_t i = 0; i < outcome_cols.size(); ++i) {
      const auto& s = fields[outcome_cols[i]];
      if (s == kCensoredLiteral) {
        row.outcomes.push_back(std::nullopt);
      } else {
        row.outcomes.push_back(parse_double(s, where));
      }
    }
    row.weight = weight_col ? parse_double(fields[*weight_col], where) : 1.0;
    check_conforms(schema, row.features);
    data.add_row(std::move(row));
  }
  return data;
}

FeatureSchema infer_schema_from_csv(const std::filesystem::path& path,
                                    const std::string& group_column,
                                    const std::vector<std::string>& outcome_columns) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    header = split_csv_line(line);
    break;
  }
  if (header.empty()) throw IoError("'" + path.string() + "' has no header row");

  const std::size_t ncols = header.size();
  std::vector<bool> integral(ncols, true);
  std::vector<double> lo(ncols, 0.0), hi(ncols, 0.0);
  std::vector<bool> seen(ncols, false);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != ncols) {
      throw IoError("'" + path.string() + "' line " + std::to_string(lineno) +
                    " has inconsistent field count");
    }
    for (std::size_t i = 0; i < ncols; ++i) {
      if (fields[i] == kCensoredLiteral) continue;
      const double v = parse_double(fields[i], path.string() + ":" + std::to_string(lineno));
      if (!seen[i]) {
        lo[i] = hi[i] = v;
        seen[i] = true;
      } else {
        lo[i] = std::min(lo[i], v);
        hi[i] = std::max(hi[i], v);
      }
      if (v != std::floor(v) || v < 0.0 || v >= 20.0) integral[i] = false;
    }
  }

  std::vector<FeatureSpec> features;
  for (std::size_t i = 0; i < ncols; ++i) {
    const auto& name = header[i];
    if (name == "weight") continue;
    if (std::find(outcome_columns.begin(), outcome_columns.end(), name) !=
        outcome_columns.end()) {
      continue;
    }
    FeatureSpec f;
    f.name = name;
    if (name == group_column) {
      f.kind = FeatureKind::categorical;
      f.cardinality = 2;
    } else if (integral[i] && seen[i]) {
      f.kind = FeatureKind::categorical;
      f.cardinality = static_cast<int>(hi[i]) + 1;
    } else {
      f.kind = FeatureKind::real;
      // Pad the observed range so near-boundary values in later files conform.
      const double span = seen[i] ? (hi[i] - lo[i]) : 1.0;
      f.min = lo[i] - 0.5 * span - 1.0;
      f.max = hi[i] + 0.5 * span + 1.0;
    }
    features.push_back(std::move(f));
  }
  for (const auto& o : outcome_columns) {
    if (std::find(header.begin(), header.end(), o) == header.end()) {
      throw SchemaError("'" + path.string() + "' is missing outcome column '" + o + "'");
    }
  }
  return FeatureSchema(std::move(features), group_column, outcome_columns);
}

// --- world files -----------------------------------------------------------------

Json world_to_json(const DiscreteWorld& world) {
  Json j;
  j["format"] = "screenaudit.world/1";
  j["schema"] = schema_to_json(world.schema());
  j["state_cap"] = world.state_cap();
  j["p"] = world.p_table();
  j["q"] = world.q_table();
  j["f"] = world.f_table();
  j["g"] = world.g_table();
  return j;
}

DiscreteWorld world_from_json(const Json& j) {
  const auto format = j.value("format", std::string());
  if (format != "screenaudit.world/1") {
    throw IoError("unrecognized world format '" + format + "'");
  }
  DiscreteWorld world(schema_from_json(j.at("schema")), j.at("p").get<std::vector<double>>(),
                      j.at("q").get<std::vector<double>>(), j.at("f").get<std::vector<double>>(),
                      j.at("g").get<std::vector<double>>(),
                      j.value("state_cap", FeatureSchema::kDefaultStateCap));
  require_valid_world(world);
  return world;
}

void write_world(const DiscreteWorld& world, const std::filesystem::path& path) {
  write_json_file(path, world_to_json(world));
}

DiscreteWorld read_world(const std::filesystem::path& path) {
  return world_from_json(read_json_file(path));
}

// --- representation ----------------------------------------------------------------

Json representation_to_json(const Representation& r) {
  const auto& schema = r.schema();
  Json retained = Json::array();
  Json cat = Json::object();
  Json real = Json::object();
  for (std::size_t i = 0; i < schema.arity(); ++i) {
    if (!r.retains(i)) continue;
    const auto& f = schema.feature(i);
    retained.push_back(f.name);
    if (!r.categorical_buckets(i).empty()) cat[f.name] = r.categorical_buckets(i);
    if (!r.real_cut_points(i).empty()) real[f.name] = r.real_cut_points(i);
  }
  Json j;
  j["retained"] = std::move(retained);
  j["coarsen_categorical"] = std::move(cat);
  j["coarsen_real"] = std::move(real);
  return j;
}

Representation representation_from_json(const Json& j, const FeatureSchema& schema) {
  auto r = Representation::retain(schema, j.at("retained").get<std::vector<std::string>>());
  if (j.contains("coarsen_categorical")) {
    for (const auto& [name, buckets] : j.at("coarsen_categorical").items()) {
      r.coarsen_categorical(name, buckets.get<std::vector<int>>());
    }
  }
  if (j.contains("coarsen_real")) {
    for (const auto& [name, cuts] : j.at("coarsen_real").items()) {
      r.coarsen_real(name, cuts.get<std::vector<double>>());
    }
  }
  return r;
}

// --- small file helpers ---------------------------------------------------------

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Json read_json_file(const std::filesystem::path& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse '" + path.string() + "': " + e.what());
  }
}

}  // namespace screenaudit
