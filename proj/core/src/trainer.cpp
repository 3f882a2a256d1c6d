#include "screenaudit/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "screenaudit/io.hpp"
#include "screenaudit/numeric.hpp"
#include "screenaudit/rng.hpp"

namespace screenaudit {
namespace trainer {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr double kProbFloor = 1e-12;

}  // namespace

std::string to_string(LinkKind k) {
  return k == LinkKind::linear ? "linear" : "logistic";
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::plain: return "plain";
    case Variant::blind: return "blind";
    case Variant::aware: return "aware";
    case Variant::orthogonalized: return "orthogonalized";
  }
  return "plain";
}

LinkKind link_from_string(const std::string& s) {
  if (s == "linear") return LinkKind::linear;
  if (s == "logistic") return LinkKind::logistic;
  throw ParameterError("unknown link '" + s + "'");
}

Variant variant_from_string(const std::string& s) {
  if (s == "plain") return Variant::plain;
  if (s == "blind") return Variant::blind;
  if (s == "aware") return Variant::aware;
  if (s == "orthogonalized") return Variant::orthogonalized;
  throw ParameterError("unknown variant '" + s + "'");
}

// --- RowEncoder ----------------------------------------------------------------

RowEncoder::RowEncoder(const FeatureSchema& schema, const Representation& r,
                       const EncoderSpec& spec)
    : schema_(schema), rep_(r), spec_(spec) {
  if (spec.group_interactions && spec.residualize_by_group) {
    throw ParameterError("encoder: group interactions and residualization are exclusive");
  }
  if (spec.group_interactions && !r.retains_group()) {
    throw ParameterError("encoder: group interactions need the group feature retained");
  }
  if (spec.residualize_by_group && r.retains_group()) {
    throw ParameterError("encoder: residualization needs the group feature dropped");
  }
  columns_.push_back("(intercept)");
  const std::size_t gi = schema.group_index();
  for (std::size_t i = 0; i < schema.arity(); ++i) {
    if (i == gi || !r.retains(i)) continue;
    const auto& f = schema.feature(i);
    if (f.kind == FeatureKind::categorical) {
      const int reduced = r.reduced_cardinality(i);
      const bool coarsened = reduced != f.cardinality;
      for (int b = 1; b < reduced; ++b) {
        columns_.push_back(coarsened ? f.name + "~b" + std::to_string(b)
                                     : f.name + "=" + std::to_string(b));
        base_layout_.emplace_back(i, b);
      }
    } else {
      columns_.push_back(f.name);
      base_layout_.emplace_back(i, -1);
    }
  }
  base_count_ = base_layout_.size();
  if (spec.group_interactions) {
    columns_.push_back(schema.group_feature() + "=1");
    for (std::size_t b = 0; b < base_count_; ++b) {
      columns_.push_back(columns_[1 + b] + ":g1");
    }
  }
}

void RowEncoder::set_group_means(std::vector<double> advantaged,
                                 std::vector<double> disadvantaged) {
  if (advantaged.size() != base_count_ || disadvantaged.size() != base_count_) {
    throw ParameterError("encoder: group means must cover every base column");
  }
  means_[kAdvantaged] = std::move(advantaged);
  means_[kDisadvantaged] = std::move(disadvantaged);
}

const std::vector<double>& RowEncoder::group_means(int group) const {
  if (group != kAdvantaged && group != kDisadvantaged) {
    throw ParameterError("encoder: group must be 0 or 1");
  }
  return means_[group];
}

std::vector<double> RowEncoder::encode(const FeatureVector& raw) const {
  const auto applied = rep_.apply(raw.values);
  std::vector<double> row(columns_.size(), 0.0);
  row[0] = 1.0;
  for (std::size_t b = 0; b < base_count_; ++b) {
    const auto [i, bucket] = base_layout_[b];
    if (bucket < 0) {
      row[1 + b] = applied[i];
    } else {
      row[1 + b] = rep_.bucket_of(i, applied[i]) == bucket ? 1.0 : 0.0;
    }
  }
  if (spec_.residualize_by_group) {
    if (!has_group_means()) {
      throw ParameterError("encoder: residualization means are not set");
    }
    const int grp = static_cast<int>(raw.values.at(schema_.group_index()));
    const auto& mu = means_[grp == kAdvantaged ? kAdvantaged : kDisadvantaged];
    for (std::size_t b = 0; b < base_count_; ++b) row[1 + b] -= mu[b];
  }
  if (spec_.group_interactions) {
    const double g = applied[schema_.group_index()] == kDisadvantaged ? 1.0 : 0.0;
    row[1 + base_count_] = g;
    for (std::size_t b = 0; b < base_count_; ++b) {
      row[2 + base_count_ + b] = row[1 + b] * g;
    }
  }
  return row;
}

// --- TrainingProblem -------------------------------------------------------------

double TrainingProblem::loss_and_gradient(std::span<const double> theta,
                                          std::vector<double>& grad) const {
  if (theta.size() != cols) throw ParameterError("theta size mismatch");
  grad.assign(cols, 0.0);
  const std::size_t n = rows();
  KahanSum loss_sum, weight_sum;
  std::vector<KahanSum> g(cols);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = X.data() + i * cols;
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += xi[j] * theta[j];
    const double wi = w[i];
    double resid;  // d(loss_i)/dz, up to the shared weight factor
    if (link == LinkKind::linear) {
      const double e = z - y[i];
      loss_sum.add(wi * e * e);
      resid = 2.0 * e;
    } else {
      const double p = sigmoid(z);
      const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
      loss_sum.add(wi * -(y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc)));
      resid = p - y[i];
    }
    const double scale = wi * resid;
    for (std::size_t j = 0; j < cols; ++j) g[j].add(scale * xi[j]);
    weight_sum.add(wi);
  }
  const double total_w = weight_sum.value();
  if (!(total_w > 0.0)) throw InsufficientDataError("training problem has zero total weight");
  for (std::size_t j = 0; j < cols; ++j) grad[j] = g[j].value() / total_w;
  return loss_sum.value() / total_w;
}

double TrainingProblem::loss(std::span<const double> theta) const {
  std::vector<double> scratch;
  return loss_and_gradient(theta, scratch);
}

std::vector<double> TrainingProblem::gradient(std::span<const double> theta) const {
  std::vector<double> grad;
  loss_and_gradient(theta, grad);
  return grad;
}

// --- TrainedScreener ----------------------------------------------------------------

TrainedScreener::TrainedScreener(FeatureSchema schema, Representation rep, RowEncoder encoder,
                                 Variant variant, LinkKind link, std::vector<double> params,
                                 TrainMetadata metadata)
    : schema_(std::move(schema)),
      rep_(std::move(rep)),
      encoder_(std::move(encoder)),
      variant_(variant),
      link_(link),
      params_(std::move(params)),
      metadata_(std::move(metadata)) {
  if (params_.size() != encoder_.columns().size()) {
    throw ValidationError("screener parameter count does not match encoder columns");
  }
}

double TrainedScreener::score(const FeatureVector& raw) const {
  if (raw.schema_digest != 0 && raw.schema_digest != schema_.digest()) {
    throw SchemaError("feature vector schema digest does not match the screener's schema");
  }
  const auto row = encoder_.encode(raw);
  double z = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) z += row[j] * params_[j];
  return link_ == LinkKind::linear ? z : sigmoid(z);
}

double TrainedScreener::coefficient(const std::string& column) const {
  const auto& cols = encoder_.columns();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    if (cols[j] == column) return params_[j];
  }
  throw ParameterError("screener has no column named '" + column + "'");
}

Json TrainedScreener::to_json() const {
  Json j;
  j["format"] = "screenaudit.screener/1";
  j["schema"] = schema_to_json(schema_);
  j["schema_digest"] = format_digest(schema_.digest());
  j["variant"] = to_string(variant_);
  j["link"] = to_string(link_);
  j["representation"] = representation_to_json(rep_);
  j["encoder"]["group_interactions"] = encoder_.spec().group_interactions;
  j["encoder"]["residualize_by_group"] = encoder_.spec().residualize_by_group;
  j["columns"] = encoder_.columns();
  j["params"] = params_;
  if (encoder_.has_group_means()) {
    j["group_means"]["advantaged"] = encoder_.group_means(kAdvantaged);
    j["group_means"]["disadvantaged"] = encoder_.group_means(kDisadvantaged);
  }
  Json m;
  m["outcome"] = metadata_.outcome;
  m["seed"] = metadata_.seed;
  m["learning_rate"] = metadata_.learning_rate;
  m["max_iterations"] = metadata_.max_iterations;
  m["tolerance"] = metadata_.tolerance;
  m["holdout_fraction"] = metadata_.holdout_fraction;
  m["iterations_run"] = metadata_.iterations_run;
  m["converged"] = metadata_.converged;
  m["final_train_loss"] = metadata_.final_train_loss;
  if (metadata_.final_holdout_loss.has_value()) {
    m["final_holdout_loss"] = *metadata_.final_holdout_loss;
  } else {
    m["final_holdout_loss"] = nullptr;
  }
  m["censored_dropped"] = metadata_.censored_dropped;
  m["train_rows"] = metadata_.train_rows;
  m["holdout_rows"] = metadata_.holdout_rows;
  j["metadata"] = std::move(m);
  return j;
}

TrainedScreener TrainedScreener::from_json(const Json& j) {
  const auto format = j.value("format", std::string());
  if (format != "screenaudit.screener/1") {
    throw IoError("unrecognized screener format '" + format + "'");
  }
  auto schema = schema_from_json(j.at("schema"));
  auto rep = representation_from_json(j.at("representation"), schema);
  EncoderSpec spec;
  spec.group_interactions = j.at("encoder").at("group_interactions").get<bool>();
  spec.residualize_by_group = j.at("encoder").at("residualize_by_group").get<bool>();
  RowEncoder encoder(schema, rep, spec);
  if (j.contains("group_means")) {
    encoder.set_group_means(j.at("group_means").at("advantaged").get<std::vector<double>>(),
                            j.at("group_means").at("disadvantaged").get<std::vector<double>>());
  }
  const auto declared = j.at("columns").get<std::vector<std::string>>();
  if (declared != encoder.columns()) {
    throw ValidationError("screener artifact columns do not match its declared encoder");
  }
  const auto& m = j.at("metadata");
  TrainMetadata md;
  md.outcome = m.at("outcome").get<std::string>();
  md.seed = m.at("seed").get<std::uint64_t>();
  md.learning_rate = m.at("learning_rate").get<double>();
  md.max_iterations = m.at("max_iterations").get<std::size_t>();
  md.tolerance = m.at("tolerance").get<double>();
  md.holdout_fraction = m.at("holdout_fraction").get<double>();
  md.iterations_run = m.at("iterations_run").get<std::size_t>();
  md.converged = m.at("converged").get<bool>();
  md.final_train_loss = m.at("final_train_loss").get<double>();
  if (!m.at("final_holdout_loss").is_null()) {
    md.final_holdout_loss = m.at("final_holdout_loss").get<double>();
  }
  md.censored_dropped = m.at("censored_dropped").get<std::size_t>();
  md.train_rows = m.at("train_rows").get<std::size_t>();
  md.holdout_rows = m.at("holdout_rows").get<std::size_t>();
  return TrainedScreener(std::move(schema), std::move(rep), std::move(encoder),
                         variant_from_string(j.at("variant").get<std::string>()),
                         link_from_string(j.at("link").get<std::string>()),
                         j.at("params").get<std::vector<double>>(), std::move(md));
}

void TrainedScreener::save(const std::filesystem::path& path) const {
  write_json_file(path, to_json());
}

TrainedScreener TrainedScreener::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

std::uint64_t TrainedScreener::digest() const {
  const std::string s = to_json().dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// --- training ---------------------------------------------------------------------

bool is_holdout_row(std::uint64_t seed, double holdout_fraction, std::size_t row_index) {
  const CounterRng rng(seed, "trainer.holdout");
  return rng.uniform(row_index) < holdout_fraction;
}

std::vector<std::size_t> holdout_rows(const Dataset& data, const std::string& outcome,
                                      std::uint64_t seed, double holdout_fraction) {
  const std::size_t oi = data.schema().outcome_index(outcome);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.row(i).outcomes[oi].has_value()) continue;
    if (is_holdout_row(seed, holdout_fraction, i)) out.push_back(i);
  }
  return out;
}

TrainedScreener train(const Dataset& data, const std::string& outcome, const Representation& r,
                      const TrainConfig& cfg, const EncoderSpec& spec, Variant tag) {
  const auto& schema = data.schema();
  const std::size_t oi = schema.outcome_index(outcome);
  if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0)) {
    throw ParameterError("holdout fraction must lie in [0, 1)");
  }
  if (!(cfg.learning_rate > 0.0)) throw ParameterError("learning rate must be positive");

  RowEncoder encoder(schema, r, spec);

  // Split on original row indices so the partition is reproducible from
  // (seed, holdout_fraction) alone; censored rows are dropped either way.
  std::vector<std::size_t> train_idx, holdout_idx;
  std::size_t censored = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.row(i).outcomes[oi].has_value()) {
      ++censored;
      continue;
    }
    if (is_holdout_row(cfg.seed, cfg.holdout_fraction, i)) {
      holdout_idx.push_back(i);
    } else {
      train_idx.push_back(i);
    }
  }
  if (train_idx.size() < 2) {
    throw InsufficientDataError("training needs at least 2 non-censored training rows, has " +
                                std::to_string(train_idx.size()));
  }
  {
    const double first = *data.row(train_idx[0]).outcomes[oi];
    const bool varying = std::any_of(train_idx.begin(), train_idx.end(), [&](std::size_t i) {
      return *data.row(i).outcomes[oi] != first;
    });
    if (!varying) throw TrainingError("constant outcome: '" + outcome + "' never varies");
  }
  if (cfg.link == LinkKind::logistic) {
    for (std::size_t i : train_idx) {
      const double yv = *data.row(i).outcomes[oi];
      if (yv < 0.0 || yv > 1.0) {
        throw ValidationError("logistic link needs outcomes in [0,1]; row " +
                              std::to_string(i) + " has " + format_double(yv));
      }
    }
  }

  if (spec.residualize_by_group) {
    // Within-group means of every base column over the training split only;
    // stored in the artifact and applied identically at scoring time.
    const std::size_t gi = schema.group_index();
    std::vector<KahanSum> sums[2];
    sums[0].resize(encoder.base_columns());
    sums[1].resize(encoder.base_columns());
    KahanSum wsum[2];
    RowEncoder plain(schema, r, EncoderSpec{});
    for (std::size_t i : train_idx) {
      const auto& row = data.row(i);
      const int grp = static_cast<int>(row.features.values[gi]) == kAdvantaged ? 0 : 1;
      const auto enc = plain.encode(row.features);
      for (std::size_t b = 0; b < encoder.base_columns(); ++b) {
        sums[grp][b].add(row.weight * enc[1 + b]);
      }
      wsum[grp].add(row.weight);
    }
    if (!(wsum[0].value() > 0.0) || !(wsum[1].value() > 0.0)) {
      throw InsufficientDataError("residualization needs training rows from both groups");
    }
    std::vector<double> mu_adv(encoder.base_columns()), mu_dis(encoder.base_columns());
    for (std::size_t b = 0; b < encoder.base_columns(); ++b) {
      mu_adv[b] = sums[0][b].value() / wsum[0].value();
      mu_dis[b] = sums[1][b].value() / wsum[1].value();
    }
    encoder.set_group_means(std::move(mu_adv), std::move(mu_dis));
  }

  auto build_problem = [&](const std::vector<std::size_t>& idx) {
    TrainingProblem prob;
    prob.cols = encoder.columns().size();
    prob.link = cfg.link;
    prob.X.reserve(idx.size() * prob.cols);
    prob.y.reserve(idx.size());
    prob.w.reserve(idx.size());
    for (std::size_t i : idx) {
      const auto& row = data.row(i);
      const auto enc = encoder.encode(row.features);
      prob.X.insert(prob.X.end(), enc.begin(), enc.end());
      prob.y.push_back(*row.outcomes[oi]);
      prob.w.push_back(row.weight);
    }
    return prob;
  };
  const TrainingProblem train_prob = build_problem(train_idx);

  std::vector<double> theta(train_prob.cols, 0.0);
  std::vector<double> grad;
  double last_finite_loss = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  for (std::size_t it = 0; it <= cfg.max_iterations; ++it) {
    const double loss = train_prob.loss_and_gradient(theta, grad);
    if (!std::isfinite(loss)) {
      throw TrainingError("training diverged at iteration " + std::to_string(it) +
                              "; last finite loss " + format_double(last_finite_loss),
                          it, last_finite_loss);
    }
    last_finite_loss = loss;
    double gmax = 0.0;
    for (double gj : grad) gmax = std::max(gmax, std::abs(gj));
    if (!std::isfinite(gmax)) {
      throw TrainingError("gradient overflow at iteration " + std::to_string(it), it,
                          last_finite_loss);
    }
    if (gmax <= cfg.tolerance) {
      converged = true;
      iterations = it;
      break;
    }
    if (it == cfg.max_iterations) {
      iterations = it;
      break;
    }
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= cfg.learning_rate * grad[j];
  }

  TrainMetadata md;
  md.outcome = outcome;
  md.seed = cfg.seed;
  md.learning_rate = cfg.learning_rate;
  md.max_iterations = cfg.max_iterations;
  md.tolerance = cfg.tolerance;
  md.holdout_fraction = cfg.holdout_fraction;
  md.iterations_run = iterations;
  md.converged = converged;
  md.final_train_loss = last_finite_loss;
  if (!holdout_idx.empty()) {
    md.final_holdout_loss = build_problem(holdout_idx).loss(theta);
  }
  md.censored_dropped = censored;
  md.train_rows = train_idx.size();
  md.holdout_rows = holdout_idx.size();
  return TrainedScreener(schema, r, std::move(encoder), tag, cfg.link, std::move(theta),
                         std::move(md));
}

VariantSet train_variants(const Dataset& data, const std::string& outcome,
                          const Representation& base_r, const TrainConfig& cfg) {
  const auto& schema = data.schema();
  const std::string& group = schema.group_feature();

  auto blind_r = base_r;
  auto aware_r = base_r;
  if (!base_r.retains_group()) {
    // Re-derive an identical representation with the group feature added.
    std::vector<std::string> names;
    for (std::size_t i : base_r.retained_indices()) names.push_back(schema.feature(i).name);
    names.push_back(group);
    aware_r = Representation::retain(schema, names);
  }
  if (base_r.retains_group()) {
    std::vector<std::string> names;
    for (std::size_t i : base_r.retained_indices()) {
      if (i != schema.group_index()) names.push_back(schema.feature(i).name);
    }
    blind_r = Representation::retain(schema, names);
  }

  EncoderSpec aware_spec;
  aware_spec.group_interactions = true;
  EncoderSpec ortho_spec;
  ortho_spec.residualize_by_group = true;

  return VariantSet{
      train(data, outcome, blind_r, cfg, EncoderSpec{}, Variant::blind),
      train(data, outcome, aware_r, cfg, aware_spec, Variant::aware),
      train(data, outcome, blind_r, cfg, ortho_spec, Variant::orthogonalized),
  };
}

// --- evaluation ----------------------------------------------------------------------

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ParameterError("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw InsufficientDataError("spearman needs at least 2 observations");
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
      i = j + 1;
    }
    return rank;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  KahanSum sa, sb;
  for (std::size_t i = 0; i < n; ++i) {
    sa.add(ra[i]);
    sb.add(rb[i]);
  }
  const double ma = sa.value() / static_cast<double>(n);
  const double mb = sb.value() / static_cast<double>(n);
  KahanSum sab, saa, sbb;
  for (std::size_t i = 0; i < n; ++i) {
    sab.add((ra[i] - ma) * (rb[i] - mb));
    saa.add((ra[i] - ma) * (ra[i] - ma));
    sbb.add((rb[i] - mb) * (rb[i] - mb));
  }
  const double denom = std::sqrt(saa.value() * sbb.value());
  if (denom == 0.0) return 0.0;  // a constant sequence: correlation undefined, report 0
  return sab.value() / denom;
}

Evaluation evaluate(const TrainedScreener& screener, const Dataset& data) {
  const auto& schema = data.schema();
  if (schema.digest() != screener.schema_digest()) {
    throw SchemaError("evaluate: dataset schema does not match the screener's");
  }
  const std::size_t oi = schema.outcome_index(screener.metadata().outcome);
  const bool logistic = screener.link() == LinkKind::logistic;

  KahanSum loss[2], wsum[2], score_sum[2];
  std::vector<double> scores, outcomes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& row = data.row(i);
    if (!row.outcomes[oi].has_value()) continue;
    const double yv = *row.outcomes[oi];
    const double s = screener.score(row.features);
    const int grp = data.group_of(i) == kAdvantaged ? 0 : 1;
    double l;
    if (logistic) {
      const double pc = std::clamp(s, kProbFloor, 1.0 - kProbFloor);
      l = -(yv * std::log(pc) + (1.0 - yv) * std::log(1.0 - pc));
    } else {
      l = (s - yv) * (s - yv);
    }
    loss[grp].add(row.weight * l);
    wsum[grp].add(row.weight);
    score_sum[grp].add(row.weight * s);
    scores.push_back(s);
    outcomes.push_back(yv);
  }
  if (!(wsum[0].value() > 0.0) || !(wsum[1].value() > 0.0)) {
    throw InsufficientDataError("evaluate needs non-censored rows from both groups");
  }
  Evaluation ev;
  ev.rows_used = scores.size();
  ev.loss = (loss[0].value() + loss[1].value()) / (wsum[0].value() + wsum[1].value());
  ev.loss_advantaged = loss[0].value() / wsum[0].value();
  ev.loss_disadvantaged = loss[1].value() / wsum[1].value();
  ev.mean_score_advantaged = score_sum[0].value() / wsum[0].value();
  ev.mean_score_disadvantaged = score_sum[1].value() / wsum[1].value();
  ev.rank_correlation = spearman(scores, outcomes);
  return ev;
}

double loss_on_rows(const TrainedScreener& screener, const Dataset& data,
                    const std::string& outcome, std::span<const std::size_t> rows) {
  const std::size_t oi = data.schema().outcome_index(outcome);
  const bool logistic = screener.link() == LinkKind::logistic;
  KahanSum loss, wsum;
  for (std::size_t i : rows) {
    const auto& row = data.row(i);
    if (!row.outcomes[oi].has_value()) {
      throw ValidationError("loss_on_rows: row " + std::to_string(i) + " is censored");
    }
    const double yv = *row.outcomes[oi];
    const double s = screener.score(row.features);
    double l;
    if (logistic) {
      const double pc = std::clamp(s, kProbFloor, 1.0 - kProbFloor);
      l = -(yv * std::log(pc) + (1.0 - yv) * std::log(1.0 - pc));
    } else {
      l = (s - yv) * (s - yv);
    }
    loss.add(row.weight * l);
    wsum.add(row.weight);
  }
  if (!(wsum.value() > 0.0)) throw InsufficientDataError("loss_on_rows: empty row set");
  return loss.value() / wsum.value();
}

ScoreFunction as_score_function(const TrainedScreener& screener) {
  const auto shared = std::make_shared<TrainedScreener>(screener);
  return ScoreFunction(
      [shared](std::span<const double> values) {
        FeatureVector x;
        x.values.assign(values.begin(), values.end());
        return shared->score(x);
      },
      ScoreProvenance::trained, "raw:" + to_string(screener.variant()));
}

}  // namespace trainer
}  // namespace screenaudit
