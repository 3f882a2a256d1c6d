#include "screenaudit/model.hpp"

#include <algorithm>
#include <bit>
#include <memory>
#include <cmath>
#include <sstream>

#include "screenaudit/numeric.hpp"
#include "screenaudit/rng.hpp"

namespace screenaudit {

namespace {

// Incremental FNV-1a over a canonical byte stream; used for content digests.
class Fnv {
 public:
  void add_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(std::string_view s) {
    add_u64(s.size());
    add_bytes(s.data(), s.size());
  }
  void add_u64(std::uint64_t v) { add_bytes(&v, sizeof v); }
  void add_double(double v) { add_u64(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string feature_label(const FeatureSchema& schema, std::span<const double> values) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < schema.arity(); ++i) {
    if (i) os << ",";
    os << schema.feature(i).name << "=" << values[i];
  }
  os << ")";
  return os.str();
}

}  // namespace

// --- FeatureSchema -----------------------------------------------------------

FeatureSchema::FeatureSchema(std::vector<FeatureSpec> features, std::string group_feature,
                             std::vector<std::string> outcomes)
    : features_(std::move(features)), outcomes_(std::move(outcomes)) {
  if (features_.empty()) throw ValidationError("schema: feature list is empty");
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto& f = features_[i];
    if (f.name.empty()) throw ValidationError("schema: feature name empty");
    for (std::size_t j = i + 1; j < features_.size(); ++j) {
      if (features_[j].name == f.name) {
        throw ValidationError("schema: duplicate feature name '" + f.name + "'");
      }
    }
    if (f.kind == FeatureKind::categorical) {
      if (f.cardinality < 1) {
        throw ValidationError("schema: feature '" + f.name + "' has cardinality " +
                              std::to_string(f.cardinality) + " (must be >= 1)");
      }
    } else {
      if (!(f.min <= f.max) || !std::isfinite(f.min) || !std::isfinite(f.max)) {
        throw ValidationError("schema: feature '" + f.name + "' has invalid range");
      }
    }
  }
  bool found = false;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == group_feature) {
      group_index_ = i;
      found = true;
      break;
    }
  }
  if (!found) {
    throw ValidationError("schema: group feature '" + group_feature +
                          "' is not among the declared features");
  }
  const auto& g = features_[group_index_];
  if (g.kind != FeatureKind::categorical || g.cardinality != 2) {
    throw ValidationError("schema: group feature '" + group_feature +
                          "' must be a binary categorical");
  }
  for (std::size_t i = 0; i < outcomes_.size(); ++i) {
    if (outcomes_[i].empty()) throw ValidationError("schema: outcome name empty");
    for (std::size_t j = i + 1; j < outcomes_.size(); ++j) {
      if (outcomes_[j] == outcomes_[i]) {
        throw ValidationError("schema: duplicate outcome name '" + outcomes_[i] + "'");
      }
    }
  }
}

std::size_t FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  throw ParameterError("schema has no feature named '" + name + "'");
}

bool FeatureSchema::has_feature(const std::string& name) const {
  return std::any_of(features_.begin(), features_.end(),
                     [&](const FeatureSpec& f) { return f.name == name; });
}

std::size_t FeatureSchema::outcome_index(const std::string& name) const {
  for (std::size_t i = 0; i < outcomes_.size(); ++i) {
    if (outcomes_[i] == name) return i;
  }
  throw ParameterError("schema has no outcome column named '" + name + "'");
}

bool FeatureSchema::all_categorical() const {
  return std::all_of(features_.begin(), features_.end(),
                     [](const FeatureSpec& f) { return f.kind == FeatureKind::categorical; });
}

std::size_t FeatureSchema::cell_count(std::size_t cap) const {
  if (!all_categorical()) {
    throw ValidationError("cell enumeration requires an all-categorical schema");
  }
  std::size_t n = 1;
  for (const auto& f : features_) {
    const auto k = static_cast<std::size_t>(f.cardinality);
    if (n > cap / k) {
      throw ValidationError("schema state count exceeds cap of " + std::to_string(cap));
    }
    n *= k;
  }
  return n;
}

std::uint64_t FeatureSchema::digest() const {
  Fnv h;
  h.add_u64(features_.size());
  for (const auto& f : features_) {
    h.add(f.name);
    h.add_u64(f.kind == FeatureKind::categorical ? 0 : 1);
    h.add_u64(static_cast<std::uint64_t>(f.cardinality));
    h.add_double(f.min);
    h.add_double(f.max);
  }
  h.add_u64(group_index_);
  h.add_u64(outcomes_.size());
  for (const auto& o : outcomes_) h.add(o);
  return h.value();
}

// --- FeatureVector -----------------------------------------------------------

FeatureVector make_vector(const FeatureSchema& schema, std::vector<double> values) {
  FeatureVector x{std::move(values), schema.digest()};
  check_conforms(schema, x);
  return x;
}

void check_conforms(const FeatureSchema& schema, const FeatureVector& x) {
  if (x.values.size() != schema.arity()) {
    throw ValidationError("feature vector has " + std::to_string(x.values.size()) +
                          " coordinates, schema declares " + std::to_string(schema.arity()));
  }
  for (std::size_t i = 0; i < schema.arity(); ++i) {
    const auto& f = schema.feature(i);
    const double v = x.values[i];
    if (!std::isfinite(v)) {
      throw ValidationError("feature '" + f.name + "' is non-finite");
    }
    if (f.kind == FeatureKind::categorical) {
      if (v != std::floor(v) || v < 0 || v >= f.cardinality) {
        throw ValidationError("feature '" + f.name + "' value " + std::to_string(v) +
                              " outside categorical range [0," +
                              std::to_string(f.cardinality) + ")");
      }
    }
  }
}

// --- canonical enumeration -----------------------------------------------------

std::size_t cell_index(const FeatureSchema& schema, std::span<const double> values) {
  if (values.size() != schema.arity()) {
    throw ValidationError("cell_index: coordinate count mismatch");
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < schema.arity(); ++i) {
    const auto& f = schema.feature(i);
    if (f.kind != FeatureKind::categorical) {
      throw ValidationError("cell_index requires an all-categorical schema");
    }
    const int v = static_cast<int>(values[i]);
    if (values[i] != std::floor(values[i]) || v < 0 || v >= f.cardinality) {
      throw ValidationError("cell_index: feature '" + f.name + "' value out of range");
    }
    idx = idx * static_cast<std::size_t>(f.cardinality) + static_cast<std::size_t>(v);
  }
  return idx;
}

std::vector<double> cell_values(const FeatureSchema& schema, std::size_t index) {
  std::vector<double> values(schema.arity());
  std::size_t rest = index;
  for (std::size_t i = schema.arity(); i-- > 0;) {
    const auto k = static_cast<std::size_t>(schema.feature(i).cardinality);
    values[i] = static_cast<double>(rest % k);
    rest /= k;
  }
  if (rest != 0) throw ParameterError("cell_values: index out of range");
  return values;
}

// --- Dataset -------------------------------------------------------------------

Dataset::Dataset(FeatureSchema schema, std::string provenance)
    : schema_(std::move(schema)), provenance_(std::move(provenance)) {}

void Dataset::add_row(DatasetRow row) {
  if (row.outcomes.size() != schema_.outcomes().size()) {
    throw ValidationError("dataset row carries " + std::to_string(row.outcomes.size()) +
                          " outcomes, schema declares " +
                          std::to_string(schema_.outcomes().size()));
  }
  rows_.push_back(std::move(row));
}

int Dataset::group_of(std::size_t i) const {
  return rows_.at(i).features.cat(schema_.group_index());
}

std::optional<double> Dataset::outcome(std::size_t i, std::size_t outcome_idx) const {
  return rows_.at(i).outcomes.at(outcome_idx);
}

std::uint64_t Dataset::digest() const {
  Fnv h;
  h.add_u64(schema_.digest());
  h.add_u64(rows_.size());
  for (const auto& r : rows_) {
    for (double v : r.features.values) h.add_double(v);
    for (const auto& o : r.outcomes) {
      h.add_u64(o.has_value() ? 1 : 0);
      h.add_double(o.value_or(0.0));
    }
    h.add_double(r.weight);
  }
  return h.value();
}

std::vector<Violation> validate_dataset(const Dataset& data) {
  std::vector<Violation> out;
  const auto& schema = data.schema();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data.row(i);
    try {
      check_conforms(schema, row.features);
    } catch (const ValidationError& e) {
      out.push_back({"row_conforms_to_schema", "row " + std::to_string(i) + ": " + e.what()});
    }
    if (!(row.weight >= 0.0) || !std::isfinite(row.weight)) {
      out.push_back({"weight_nonnegative_finite",
                     "row " + std::to_string(i) + ": weight " + std::to_string(row.weight)});
    }
    for (std::size_t j = 0; j < row.outcomes.size(); ++j) {
      if (row.outcomes[j].has_value() && !std::isfinite(*row.outcomes[j])) {
        out.push_back({"outcome_finite", "row " + std::to_string(i) + ", column '" +
                                             schema.outcomes()[j] + "'"});
      }
    }
  }
  return out;
}

// --- ScoreFunction ---------------------------------------------------------------

std::string to_string(ScoreProvenance p) {
  switch (p) {
    case ScoreProvenance::true_outcome: return "true_outcome";
    case ScoreProvenance::proxy_outcome: return "proxy_outcome";
    case ScoreProvenance::implied_predictor: return "implied_predictor";
    case ScoreProvenance::trained: return "trained";
    case ScoreProvenance::custom: return "custom";
  }
  return "custom";
}

ScoreFunction::ScoreFunction(Fn fn, ScoreProvenance provenance, std::string space)
    : fn_(std::move(fn)), provenance_(provenance), space_(std::move(space)) {}

double ScoreFunction::operator()(std::span<const double> values) const {
  if (!fn_) throw EvaluationError("score function is empty");
  const double v = fn_(values);
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "score function (" << to_string(provenance_) << ") returned non-finite value at (";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) os << ",";
      os << values[i];
    }
    os << ")";
    throw EvaluationError(os.str());
  }
  return v;
}

ScoreFunction ScoreFunction::from_table(const FeatureSchema& schema, std::vector<double> table,
                                        ScoreProvenance provenance, std::string space) {
  const std::size_t cells = schema.cell_count();
  if (table.size() != cells) {
    throw ValidationError("score table has " + std::to_string(table.size()) +
                          " entries for a schema with " + std::to_string(cells) + " cells");
  }
  auto shared = std::make_shared<std::vector<double>>(std::move(table));
  auto schema_copy = std::make_shared<FeatureSchema>(schema);
  return ScoreFunction(
      [shared, schema_copy](std::span<const double> values) {
        return (*shared)[cell_index(*schema_copy, values)];
      },
      provenance, std::move(space));
}

// --- Representation ----------------------------------------------------------------

Representation::Representation(FeatureSchema schema)
    : schema_(std::move(schema)),
      retained_(schema_.arity(), true),
      cat_buckets_(schema_.arity()),
      real_cuts_(schema_.arity()) {}

Representation Representation::identity(const FeatureSchema& schema) {
  return Representation(schema);
}

Representation Representation::retain(const FeatureSchema& schema,
                                      const std::vector<std::string>& names) {
  Representation r(schema);
  std::fill(r.retained_.begin(), r.retained_.end(), false);
  for (const auto& name : names) r.retained_.at(schema.index_of(name)) = true;
  return r;
}

Representation Representation::drop(const FeatureSchema& schema,
                                    const std::vector<std::string>& names) {
  Representation r(schema);
  for (const auto& name : names) r.retained_.at(schema.index_of(name)) = false;
  return r;
}

Representation& Representation::coarsen_categorical(const std::string& name,
                                                    std::vector<int> value_to_bucket) {
  const std::size_t i = schema_.index_of(name);
  const auto& f = schema_.feature(i);
  if (f.kind != FeatureKind::categorical) {
    throw ParameterError("coarsen_categorical: feature '" + name + "' is real-valued");
  }
  if (static_cast<int>(value_to_bucket.size()) != f.cardinality) {
    throw ParameterError("coarsen_categorical: map size must equal cardinality of '" + name + "'");
  }
  int max_bucket = -1;
  for (int b : value_to_bucket) {
    if (b < 0) throw ParameterError("coarsen_categorical: negative bucket");
    max_bucket = std::max(max_bucket, b);
  }
  std::vector<bool> seen(static_cast<std::size_t>(max_bucket) + 1, false);
  for (int b : value_to_bucket) seen[static_cast<std::size_t>(b)] = true;
  if (!std::all_of(seen.begin(), seen.end(), [](bool s) { return s; })) {
    throw ParameterError("coarsen_categorical: buckets must cover 0..max without gaps");
  }
  cat_buckets_[i] = std::move(value_to_bucket);
  return *this;
}

Representation& Representation::coarsen_real(const std::string& name, std::vector<double> cuts) {
  const std::size_t i = schema_.index_of(name);
  if (schema_.feature(i).kind != FeatureKind::real) {
    throw ParameterError("coarsen_real: feature '" + name + "' is categorical");
  }
  if (!std::is_sorted(cuts.begin(), cuts.end())) {
    throw ParameterError("coarsen_real: cut points must be ascending");
  }
  real_cuts_[i] = std::move(cuts);
  return *this;
}

bool Representation::retains(const std::string& name) const {
  return retained_.at(schema_.index_of(name));
}

std::vector<std::size_t> Representation::retained_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < retained_.size(); ++i) {
    if (retained_[i]) out.push_back(i);
  }
  return out;
}

int Representation::reduced_cardinality(std::size_t i) const {
  const auto& f = schema_.feature(i);
  if (f.kind != FeatureKind::categorical) {
    throw ParameterError("reduced_cardinality: feature '" + f.name + "' is real-valued");
  }
  if (cat_buckets_[i].empty()) return f.cardinality;
  return *std::max_element(cat_buckets_[i].begin(), cat_buckets_[i].end()) + 1;
}

int Representation::bucket_of(std::size_t i, double value) const {
  const auto& f = schema_.feature(i);
  if (f.kind == FeatureKind::categorical) {
    const int v = static_cast<int>(value);
    if (cat_buckets_[i].empty()) return v;
    return cat_buckets_[i].at(static_cast<std::size_t>(v));
  }
  const auto& cuts = real_cuts_[i];
  return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

std::vector<double> Representation::apply(std::span<const double> values) const {
  if (values.size() != schema_.arity()) {
    throw ValidationError("representation: coordinate count mismatch");
  }
  std::vector<double> out(values.begin(), values.end());
  for (std::size_t i = 0; i < schema_.arity(); ++i) {
    const auto& f = schema_.feature(i);
    if (!retained_[i]) {
      // Dropped coordinates collapse to the baseline so the result stays in
      // the same space and repeated application is a no-op.
      out[i] = (f.kind == FeatureKind::categorical) ? 0.0 : f.min;
      continue;
    }
    if (f.kind == FeatureKind::categorical) {
      if (!cat_buckets_[i].empty()) {
        const int b = cat_buckets_[i].at(static_cast<std::size_t>(out[i]));
        // Representative = smallest original value mapping to this bucket.
        for (int v = 0; v < f.cardinality; ++v) {
          if (cat_buckets_[i][static_cast<std::size_t>(v)] == b) {
            out[i] = static_cast<double>(v);
            break;
          }
        }
      }
    } else if (!real_cuts_[i].empty()) {
      const auto& cuts = real_cuts_[i];
      const auto b = static_cast<std::size_t>(
          std::upper_bound(cuts.begin(), cuts.end(), out[i]) - cuts.begin());
      out[i] = (b == 0) ? f.min : cuts[b - 1];
    }
  }
  return out;
}

FeatureVector Representation::apply(const FeatureVector& x) const {
  return FeatureVector{apply(std::span<const double>(x.values)), x.schema_digest};
}

std::uint64_t Representation::digest() const {
  Fnv h;
  h.add_u64(schema_.digest());
  for (std::size_t i = 0; i < retained_.size(); ++i) {
    h.add_u64(retained_[i] ? 1 : 0);
    h.add_u64(cat_buckets_[i].size());
    for (int b : cat_buckets_[i]) h.add_u64(static_cast<std::uint64_t>(b));
    h.add_u64(real_cuts_[i].size());
    for (double c : real_cuts_[i]) h.add_double(c);
  }
  return h.value();
}

std::string Representation::describe() const {
  std::ostringstream os;
  os << "retain{";
  bool first = true;
  for (std::size_t i = 0; i < retained_.size(); ++i) {
    if (!retained_[i]) continue;
    if (!first) os << ",";
    first = false;
    os << schema_.feature(i).name;
    if (!cat_buckets_[i].empty() || !real_cuts_[i].empty()) os << "~coarse";
  }
  os << "}";
  return os.str();
}

// --- DiscreteWorld ------------------------------------------------------------------

DiscreteWorld::DiscreteWorld(FeatureSchema schema, std::vector<double> p, std::vector<double> q,
                             std::vector<double> f, std::vector<double> g, std::size_t state_cap)
    : schema_(std::move(schema)),
      p_(std::move(p)),
      q_(std::move(q)),
      f_(std::move(f)),
      g_(std::move(g)),
      state_cap_(state_cap) {}

ScoreFunction DiscreteWorld::f_score() const {
  return ScoreFunction::from_table(schema_, f_, ScoreProvenance::true_outcome, "full");
}

ScoreFunction DiscreteWorld::g_score() const {
  return ScoreFunction::from_table(schema_, g_, ScoreProvenance::proxy_outcome, "full");
}

std::uint64_t DiscreteWorld::digest() const {
  Fnv h;
  h.add_u64(schema_.digest());
  for (const auto* table : {&p_, &q_, &f_, &g_}) {
    h.add_u64(table->size());
    for (double v : *table) h.add_double(v);
  }
  return h.value();
}

std::vector<Violation> validate_world(const DiscreteWorld& world) {
  std::vector<Violation> out;
  const auto& schema = world.schema();
  if (!schema.all_categorical()) {
    out.push_back({"schema_all_categorical", "schema declares a real-valued feature"});
    return out;  // cell enumeration is undefined; stop here
  }
  const auto& g = schema.feature(schema.group_index());
  if (g.cardinality != 2) {
    out.push_back({"group_feature_binary",
                   "group feature '" + g.name + "' has cardinality " +
                       std::to_string(g.cardinality)});
  }
  std::size_t cells = 0;
  try {
    cells = schema.cell_count(world.state_cap());
  } catch (const ValidationError& e) {
    out.push_back({"state_cap", e.what()});
    return out;
  }
  const struct {
    const char* name;
    const std::vector<double>* table;
  } tables[] = {{"p", &world.p_table()},
                {"q", &world.q_table()},
                {"f", &world.f_table()},
                {"g", &world.g_table()}};
  for (const auto& t : tables) {
    if (t.table->size() != cells) {
      out.push_back({"table_size", std::string(t.name) + " has " +
                                       std::to_string(t.table->size()) + " entries, expected " +
                                       std::to_string(cells)});
    }
  }
  if (!out.empty()) return out;  // sizes wrong: per-cell checks would misreport

  for (const auto* mass : {&world.p_table(), &world.q_table()}) {
    const char* name = (mass == &world.p_table()) ? "p" : "q";
    bool nonneg = true;
    for (std::size_t c = 0; c < cells; ++c) {
      const double m = (*mass)[c];
      if (!(m >= 0.0) || !std::isfinite(m)) {
        out.push_back({"mass_nonnegative", std::string(name) + "[" + std::to_string(c) +
                                               "] = " + std::to_string(m)});
        nonneg = false;
        break;
      }
    }
    if (nonneg) {
      KahanSum s;
      for (double m : *mass) s.add(m);
      const double total = s.value();
      if (std::abs(total - 1.0) > 1e-12) {
        out.push_back({std::string("mass_normalized_") + name,
                       std::string(name) + " sums to " + std::to_string(total)});
      }
    }
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (!std::isfinite(world.f(c))) {
      out.push_back({"score_finite_f", "f[" + std::to_string(c) + "]"});
      break;
    }
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (!std::isfinite(world.g(c))) {
      out.push_back({"score_finite_g", "g[" + std::to_string(c) + "]"});
      break;
    }
  }
  return out;
}

void require_valid_world(const DiscreteWorld& world) {
  const auto violations = validate_world(world);
  if (!violations.empty()) {
    throw ValidationError("invalid world: " + violations.front().invariant + " (" +
                          violations.front().detail + ")");
  }
}

// --- world <-> dataset bridges ---------------------------------------------------

EmpiricalWorld empirical_world(const Dataset& data, const std::string& f_column,
                               const std::string& g_column) {
  const auto& schema = data.schema();
  if (!schema.all_categorical()) {
    throw SchemaError("empirical_world requires an all-categorical schema");
  }
  const std::size_t cells = schema.cell_count();
  const std::size_t fi = schema.outcome_index(f_column);
  const std::size_t gi = schema.outcome_index(g_column);

  std::vector<KahanSum> p(cells), q(cells), fw(cells), gw(cells), mw(cells);
  KahanSum p_total, q_total;
  bool saw_adv = false, saw_dis = false;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data.row(i);
    check_conforms(schema, row.features);
    if (!row.outcomes[fi].has_value() || !row.outcomes[gi].has_value()) {
      throw ValidationError("empirical_world: row " + std::to_string(i) +
                            " is censored on '" +
                            (!row.outcomes[fi].has_value() ? f_column : g_column) + "'");
    }
    const std::size_t c = cell_index(schema, row.features.values);
    const double w = row.weight;
    if (data.group_of(i) == kAdvantaged) {
      p[c].add(w);
      p_total.add(w);
      saw_adv = true;
    } else {
      q[c].add(w);
      q_total.add(w);
      saw_dis = true;
    }
    fw[c].add(w * (*row.outcomes[fi]));
    gw[c].add(w * (*row.outcomes[gi]));
    mw[c].add(w);
  }
  if (!saw_adv || !saw_dis) {
    throw InsufficientDataError(std::string("empirical_world: no rows for the ") +
                                (!saw_adv ? "advantaged" : "disadvantaged") + " group");
  }
  const double pt = p_total.value();
  const double qt = q_total.value();
  if (!(pt > 0.0) || !(qt > 0.0)) {
    throw InsufficientDataError("empirical_world: a group has zero total weight");
  }

  std::vector<double> pv(cells), qv(cells), fv(cells), gv(cells);
  std::vector<std::size_t> unsupported;
  for (std::size_t c = 0; c < cells; ++c) {
    pv[c] = p[c].value() / pt;
    qv[c] = q[c].value() / qt;
    const double m = mw[c].value();
    if (m > 0.0) {
      fv[c] = fw[c].value() / m;
      gv[c] = gw[c].value() / m;
    } else {
      // Unsupported cell: mass zero in both groups; scores pinned to 0 and
      // the cell reported so callers can see where the data ran out.
      fv[c] = 0.0;
      gv[c] = 0.0;
      unsupported.push_back(c);
    }
  }
  EmpiricalWorld out{DiscreteWorld(schema, std::move(pv), std::move(qv), std::move(fv),
                                   std::move(gv)),
                     std::move(unsupported)};
  require_valid_world(out.world);
  return out;
}

namespace {

// The dataset bridges identify a row's population by its group coordinate, so
// they only make sense for worlds whose advantaged mass sits on group=0 cells
// and disadvantaged mass on group=1 cells (how every generator here builds
// them). Anything else would silently re-label mass, so reject it.
void require_group_consistent(const DiscreteWorld& world, const char* op) {
  const auto& schema = world.schema();
  const std::size_t gi = schema.group_index();
  for (std::size_t c = 0; c < world.cells(); ++c) {
    const int coord = static_cast<int>(cell_values(schema, c)[gi]);
    if ((world.p(c) > 0.0 && coord != kAdvantaged) ||
        (world.q(c) > 0.0 && coord != kDisadvantaged)) {
      throw ValidationError(std::string(op) +
                            ": world mass at cell " + std::to_string(c) +
                            " contradicts its group coordinate");
    }
  }
}

}  // namespace

Dataset enumerate_world(const DiscreteWorld& world) {
  require_valid_world(world);
  require_group_consistent(world, "enumerate_world");
  const auto& schema = world.schema();
  FeatureSchema data_schema(schema.features(), schema.group_feature(), {"f", "g"});
  Dataset out(data_schema, "enumerate_world");
  const std::uint64_t digest = data_schema.digest();
  for (std::size_t c = 0; c < world.cells(); ++c) {
    for (int grp : {kAdvantaged, kDisadvantaged}) {
      const double mass = (grp == kAdvantaged) ? world.p(c) : world.q(c);
      if (mass <= 0.0) continue;
      DatasetRow row;
      row.features = FeatureVector{cell_values(schema, c), digest};
      row.outcomes = {world.f(c), world.g(c)};
      row.weight = mass;
      out.add_row(std::move(row));
    }
  }
  return out;
}

Dataset sample_world(const DiscreteWorld& world, std::size_t n, double disadvantaged_share,
                     std::uint64_t seed) {
  require_valid_world(world);
  require_group_consistent(world, "sample_world");
  if (!(disadvantaged_share > 0.0 && disadvantaged_share < 1.0)) {
    throw ParameterError("sample_world: disadvantaged share must lie in (0,1)");
  }
  const auto& schema = world.schema();
  // Per-group cumulative mass in canonical cell order for inverse-CDF draws.
  const std::size_t cells = world.cells();
  std::vector<double> p_cdf(cells), q_cdf(cells);
  KahanSum pa, qa;
  for (std::size_t c = 0; c < cells; ++c) {
    pa.add(world.p(c));
    qa.add(world.q(c));
    p_cdf[c] = pa.value();
    q_cdf[c] = qa.value();
  }
  FeatureSchema data_schema(schema.features(), schema.group_feature(), {"f", "g"});
  Dataset out(data_schema, "sample_world");
  const std::uint64_t digest = data_schema.digest();
  const CounterRng group_rng(seed, "sample_world.group");
  const CounterRng cell_rng(seed, "sample_world.cell");
  for (std::size_t i = 0; i < n; ++i) {
    const int grp = group_rng.uniform(i) < disadvantaged_share ? kDisadvantaged : kAdvantaged;
    const auto& cdf = (grp == kAdvantaged) ? p_cdf : q_cdf;
    const double u = cell_rng.uniform(i) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t c = std::min(static_cast<std::size_t>(it - cdf.begin()), cells - 1);
    // Skip trailing zero-mass cells the binary search may land on.
    while (c > 0 && ((grp == kAdvantaged ? world.p(c) : world.q(c)) <= 0.0)) --c;
    DatasetRow row;
    row.features = FeatureVector{cell_values(schema, c), digest};
    row.outcomes = {world.f(c), world.g(c)};
    row.weight = 1.0;
    out.add_row(std::move(row));
  }
  return out;
}

}  // namespace screenaudit
