#include "cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "screenaudit/audit.hpp"
#include "screenaudit/decompose.hpp"
#include "screenaudit/errors.hpp"
#include "screenaudit/io.hpp"
#include "screenaudit/model.hpp"
#include "screenaudit/oracle.hpp"
#include "screenaudit/scenarios.hpp"
#include "screenaudit/screen.hpp"
#include "screenaudit/tradeoff.hpp"
#include "screenaudit/trainer.hpp"

namespace screenaudit {
namespace cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

std::string default_out_root() {
  if (const char* env = std::getenv("SCREENAUDIT_OUT_ROOT")) return env;
  return "out";
}

fs::path prescan_out(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) return fs::path(argv[i + 1]);
    if (a.rfind("--out=", 0) == 0) return fs::path(a.substr(6));
  }
  return fs::path(default_out_root());
}

// One run at a time per output directory.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : path_(dir / ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw Error("lock_held", "output directory '" + dir.string() +
                                   "' is in use by another run (remove '" + path_.string() +
                                   "' if that run is gone)");
    }
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      std::error_code ec;
      fs::remove(path_, ec);
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

// Timestamps and host info live here so every primary output stays
// byte-reproducible.
void write_sidecar(const fs::path& out, int argc, const char* const* argv) {
  Json meta;
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  meta["timestamp"] = stamp;
  char host[256] = {};
  meta["host"] = ::gethostname(host, sizeof host - 1) == 0 ? host : "unknown";
  meta["version"] = kVersion;
  Json cmd = Json::array();
  for (int i = 0; i < argc; ++i) cmd.push_back(argv[i]);
  meta["command_line"] = std::move(cmd);
  write_json_file(out / "run_meta.json", meta);
}

// Keys in a --config file fill any option the command line left untouched;
// unknown keys are errors.
class ConfigBinder {
 public:
  void bind(CLI::Option* opt, std::string key, std::function<void(const Json&)> set) {
    entries_.push_back({opt, std::move(key), std::move(set)});
  }

  void apply(const Json& cfg) const {
    if (!cfg.is_object()) throw ParameterError("config file must hold a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      const Entry* hit = nullptr;
      for (const auto& e : entries_) {
        if (e.key == key) {
          hit = &e;
          break;
        }
      }
      if (hit == nullptr) throw ParameterError("unknown config key '" + key + "'");
      if (hit->opt != nullptr && hit->opt->count() > 0) continue;  // flags win
      hit->set(value);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::string key;
    std::function<void(const Json&)> set;
  };
  std::vector<Entry> entries_;
};

template <class T>
CLI::Option* bound(ConfigBinder& b, CLI::Option* opt, const std::string& key, T& var) {
  b.bind(opt, key, [&var](const Json& j) { var = j.get<T>(); });
  return opt;
}

struct RunState {
  fs::path out;
  bool out_ready = false;
  Json run_config;
};

struct Ctx {
  RunState* state = nullptr;
  int argc = 0;
  const char* const* argv = nullptr;
};

struct CommonFlags {
  std::string config_path;
  std::string out_dir = default_out_root();
  ConfigBinder binder;
  fs::path out;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON config file; explicit flags override its values");
    bound(binder, cmd->add_option("--out", out_dir, "output directory")->capture_default_str(),
          "out", out_dir);
  }

  // Config merge, directory creation, lock, sidecar — then the body.
  template <class Body>
  void guarded(Ctx& ctx, Body&& body) {
    if (!config_path.empty()) binder.apply(read_json_file(config_path));
    out = fs::path(out_dir);
    ctx.state->out = out;
    ctx.state->out_ready = true;
    fs::create_directories(out);
    DirLock lock(out);
    std::error_code ec;
    fs::remove(out / "error.json", ec);  // stale report from an earlier failed run
    write_sidecar(out, ctx.argc, ctx.argv);
    body();
  }

  Json base_run(const std::string& subcommand) const {
    Json run;
    run["subcommand"] = subcommand;
    run["out"] = out_dir;
    return run;
  }
};

// ---- small shared pieces ----------------------------------------------------

void write_report(const fs::path& path, const Json& run, const Json& body) {
  Json out;
  out["run"] = run;
  for (const auto& [key, value] : body.items()) out[key] = value;
  write_json_file(path, out);
  std::cout << "wrote " << path.string() << "\n";
}

void write_data_csv(const fs::path& path, const Json& run, const Dataset& data) {
  write_text_file(path, "# config: " + run.dump() + "\n" + dataset_to_csv(data));
  std::cout << "wrote " << path.string() << "\n";
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::pair<std::string, double>> parse_assignments(
    const std::vector<std::string>& items, const std::string& flag) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParameterError("--" + flag + " expects name=value, got '" + item + "'");
    }
    const std::string value = item.substr(eq + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (used != value.size() || value.empty()) {
      throw ParameterError("--" + flag + ": '" + item + "' has no numeric value");
    }
    out.emplace_back(item.substr(0, eq), v);
  }
  return out;
}

Json assignments_json(const std::vector<std::pair<std::string, double>>& items) {
  Json j = Json::object();
  for (const auto& [name, value] : items) j[name] = value;
  return j;
}

Representation representation_from_lists(const FeatureSchema& schema,
                                         const std::vector<std::string>& retain,
                                         const std::vector<std::string>& drop) {
  if (!retain.empty() && !drop.empty()) {
    throw ParameterError("give either retained or dropped features, not both");
  }
  if (!retain.empty()) return Representation::retain(schema, retain);
  if (!drop.empty()) return Representation::drop(schema, drop);
  return Representation::identity(schema);
}

std::size_t resolve_k(std::size_t k, double k_share, std::size_t n) {
  if (k > 0 && k_share > 0.0) throw ParameterError("give either k or k_share, not both");
  if (k > 0) {
    if (k > n) throw ParameterError("k exceeds the roster size");
    return k;
  }
  if (k_share > 0.0) {
    if (k_share >= 1.0) throw ParameterError("k_share must lie in (0, 1)");
    const auto v = static_cast<std::size_t>(std::llround(k_share * static_cast<double>(n)));
    return std::clamp<std::size_t>(v, std::size_t{1}, n);
  }
  throw ParameterError("one of k or k_share is required");
}

std::vector<double> build_targets(double target_max, double target_step) {
  if (!(target_step > 0.0)) throw ParameterError("target_step must be positive");
  if (target_max < 0.0 || target_max > 1.0) throw ParameterError("target_max must lie in [0, 1]");
  // A step like 0.01 whose reciprocal is (nearly) integral is generated as
  // i / 100 so the grid hits round targets exactly.
  const double inv = 1.0 / target_step;
  const double rounded = std::round(inv);
  const bool regular = std::abs(inv - rounded) < 1e-6 * inv;
  const int steps = static_cast<int>(std::floor(target_max / target_step + 1e-9));
  std::vector<double> targets;
  targets.reserve(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    targets.push_back(regular ? static_cast<double>(i) / rounded
                              : static_cast<double>(i) * target_step);
  }
  return targets;
}

struct TrainFlags {
  std::string link = "linear";
  double learning_rate = 0.2;
  std::size_t max_iterations = 5000;
  double tolerance = 1e-8;
  double holdout_fraction = 0.2;

  void add(CLI::App* cmd, ConfigBinder& b) {
    bound(b, cmd->add_option("--link", link, "model link: linear or logistic")
                 ->capture_default_str(),
          "link", link);
    bound(b, cmd->add_option("--learning_rate", learning_rate, "gradient-descent step size")
                 ->capture_default_str(),
          "learning_rate", learning_rate);
    bound(b, cmd->add_option("--max_iterations", max_iterations, "gradient-descent iteration cap")
                 ->capture_default_str(),
          "max_iterations", max_iterations);
    bound(b, cmd->add_option("--tolerance", tolerance,
                             "converged once the max-abs gradient component falls to this")
                 ->capture_default_str(),
          "tolerance", tolerance);
    bound(b, cmd->add_option("--holdout_fraction", holdout_fraction, "held-out evaluation share")
                 ->capture_default_str(),
          "holdout_fraction", holdout_fraction);
  }

  trainer::TrainConfig to_config(std::uint64_t seed) const {
    trainer::TrainConfig c;
    c.link = trainer::link_from_string(link);
    c.learning_rate = learning_rate;
    c.max_iterations = max_iterations;
    c.tolerance = tolerance;
    c.holdout_fraction = holdout_fraction;
    c.seed = seed;
    return c;
  }

  void emit(Json& run) const {
    run["link"] = link;
    run["learning_rate"] = learning_rate;
    run["max_iterations"] = max_iterations;
    run["tolerance"] = tolerance;
    run["holdout_fraction"] = holdout_fraction;
  }
};

trainer::TrainConfig train_config_from_json(const Json& j, trainer::TrainConfig base) {
  static const std::set<std::string> kKeys{"link",      "learning_rate",    "max_iterations",
                                           "tolerance", "holdout_fraction", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (kKeys.find(key) == kKeys.end()) {
      throw ParameterError("unknown train config key '" + key + "'");
    }
    (void)value;
  }
  if (j.contains("link")) base.link = trainer::link_from_string(j.at("link").get<std::string>());
  if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("max_iterations")) {
    base.max_iterations = j.at("max_iterations").get<std::size_t>();
  }
  if (j.contains("tolerance")) base.tolerance = j.at("tolerance").get<double>();
  if (j.contains("holdout_fraction")) {
    base.holdout_fraction = j.at("holdout_fraction").get<double>();
  }
  if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
  return base;
}

Json evaluation_to_json(const trainer::Evaluation& e) {
  Json j;
  j["loss"] = e.loss;
  j["loss_advantaged"] = e.loss_advantaged;
  j["loss_disadvantaged"] = e.loss_disadvantaged;
  j["mean_score_advantaged"] = e.mean_score_advantaged;
  j["mean_score_disadvantaged"] = e.mean_score_disadvantaged;
  j["rank_correlation"] = e.rank_correlation;
  j["rows_used"] = e.rows_used;
  return j;
}

Json screener_summary(const trainer::TrainedScreener& s, const std::string& file,
                      const Dataset& data) {
  const auto& md = s.metadata();
  Json j;
  j["file"] = file;
  j["variant"] = trainer::to_string(s.variant());
  j["link"] = trainer::to_string(s.link());
  j["iterations_run"] = md.iterations_run;
  j["converged"] = md.converged;
  j["final_train_loss"] = md.final_train_loss;
  if (md.final_holdout_loss.has_value()) {
    j["final_holdout_loss"] = *md.final_holdout_loss;
  } else {
    j["final_holdout_loss"] = nullptr;
  }
  j["digest"] = format_digest(s.digest());
  j["evaluation"] = evaluation_to_json(trainer::evaluate(s, data));
  return j;
}

Json slice_rates_json(const std::vector<screen::SliceRate>& rates) {
  Json arr = Json::array();
  for (const auto& r : rates) {
    Json e;
    e["slice"] = r.label;
    e["members"] = r.members;
    e["selected"] = r.selected;
    if (r.rate.has_value()) {
      e["rate"] = *r.rate;
    } else {
      e["rate"] = nullptr;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

// ---- scenario ---------------------------------------------------------------

struct ScenarioCmd {
  CommonFlags common;
  std::string name;
  std::size_t n = 20000;
  std::uint64_t seed = 0;
  double disadvantaged_share = 0.5;
  std::vector<std::string> param_flags;
  std::vector<std::pair<std::string, double>> params;

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand(
        "scenario", "generate a synthetic dataset with one planted, disclosed mechanism");
    common.add(cmd);
    auto& b = common.binder;
    bound(b,
          cmd->add_option("--name", name, "one of: " + join(scenarios::scenario_names(), ", ")),
          "name", name);
    bound(b, cmd->add_option("--n", n, "rows to draw")->capture_default_str(), "n", n);
    bound(b, cmd->add_option("--seed", seed, "generation seed")->capture_default_str(), "seed",
          seed);
    bound(b,
          cmd->add_option("--disadvantaged_share", disadvantaged_share,
                          "probability a row is disadvantaged")
              ->capture_default_str(),
          "disadvantaged_share", disadvantaged_share);
    b.bind(cmd->add_option("--param", param_flags,
                           "scenario parameter override, name=value (repeatable)"),
           "param", [this](const Json& j) {
             for (const auto& [k, v] : j.items()) params.emplace_back(k, v.get<double>());
           });
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  void execute(RunState& state) {
    if (!param_flags.empty()) params = parse_assignments(param_flags, "param");
    scenarios::ScenarioSpec spec;
    spec.name = name;
    spec.n = n;
    spec.seed = seed;
    spec.disadvantaged_share = disadvantaged_share;
    for (const auto& [k, v] : params) spec.params[k] = v;
    const auto resolved = scenarios::resolve(spec);

    Json run = common.base_run("scenario");
    run["name"] = name;
    run["n"] = n;
    run["seed"] = seed;
    run["disadvantaged_share"] = disadvantaged_share;
    Json pj = Json::object();
    for (const auto& [k, v] : resolved.params) pj[k] = v;
    run["param"] = pj;  // fully resolved, so the run reproduces without defaults
    state.run_config = run;

    auto output = scenarios::generate(spec);
    write_data_csv(common.out / "data.csv", run, output.data);
    write_report(common.out / "schema.json", run, schema_to_json(output.data.schema()));
    write_report(common.out / "notes.json", run, output.notes);
    if (output.world.has_value()) {
      write_report(common.out / "world.json", run, world_to_json(*output.world));
    }
  }
};

// ---- train --------------------------------------------------------------------

struct TrainCmd {
  CommonFlags common;
  std::string data_path, schema_path, outcome;
  std::string variant = "plain";
  std::vector<std::string> retain, drop;
  TrainFlags tf;
  std::uint64_t seed = 0;

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand("train", "fit screeners by deterministic gradient descent");
    common.add(cmd);
    auto& b = common.binder;
    bound(b, cmd->add_option("--data", data_path, "training dataset CSV"), "data", data_path);
    bound(b, cmd->add_option("--schema", schema_path, "feature schema JSON"), "schema",
          schema_path);
    bound(b, cmd->add_option("--outcome", outcome, "outcome column to fit"), "outcome", outcome);
    bound(b,
          cmd->add_option("--variant", variant,
                          "plain, blind, aware, orthogonalized, or all")
              ->capture_default_str(),
          "variant", variant);
    bound(b, cmd->add_option("--retain", retain, "features the screener may see"), "retain",
          retain);
    bound(b, cmd->add_option("--drop", drop, "features hidden from the screener"), "drop", drop);
    tf.add(cmd, b);
    bound(b, cmd->add_option("--seed", seed, "holdout-split seed")->capture_default_str(), "seed",
          seed);
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  void execute(RunState& state) {
    Json run = common.base_run("train");
    run["data"] = data_path;
    run["schema"] = schema_path;
    run["outcome"] = outcome;
    run["variant"] = variant;
    if (!retain.empty()) run["retain"] = retain;
    if (!drop.empty()) run["drop"] = drop;
    tf.emit(run);
    run["seed"] = seed;
    state.run_config = run;

    static const std::set<std::string> kVariants{"plain", "blind", "aware", "orthogonalized",
                                                 "all"};
    if (kVariants.find(variant) == kVariants.end()) {
      throw ParameterError("unknown variant '" + variant +
                           "' (plain, blind, aware, orthogonalized, all)");
    }
    if (data_path.empty() || schema_path.empty()) {
      throw ParameterError("train requires --data and --schema");
    }
    if (outcome.empty()) throw ParameterError("train requires --outcome");

    const auto schema = read_schema(schema_path);
    const auto data = read_dataset_csv(data_path, schema);
    const auto base_r = representation_from_lists(schema, retain, drop);
    const auto cfg = tf.to_config(seed);

    Json report;
    report["format"] = "screenaudit.train_report/1";
    Json screeners = Json::object();
    auto ship = [&](const std::string& tag, const trainer::TrainedScreener& s,
                    const std::string& file) {
      write_report(common.out / file, run, s.to_json());
      screeners[tag] = screener_summary(s, file, data);
    };
    if (variant == "plain") {
      ship("plain", trainer::train(data, outcome, base_r, cfg), "screener.json");
    } else {
      const auto vs = trainer::train_variants(data, outcome, base_r, cfg);
      if (variant == "blind" || variant == "all") {
        ship("blind", vs.blind, "screener_blind.json");
      }
      if (variant == "aware" || variant == "all") {
        ship("aware", vs.aware, "screener_aware.json");
      }
      if (variant == "orthogonalized" || variant == "all") {
        ship("orthogonalized", vs.orthogonalized, "screener_orthogonalized.json");
      }
    }
    report["screeners"] = std::move(screeners);
    write_report(common.out / "train_report.json", run, report);
  }
};

// ---- decompose ------------------------------------------------------------------

struct DecomposeCmd {
  CommonFlags common;
  std::string world_path, data_path, schema_path;
  std::string f_column = "f", g_column = "g";
  std::string screener_path;
  std::vector<std::string> retain, drop;
  double advantaged_weight = 0.5;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand(
        "decompose", "split a screener's group disparity into its four additive sources");
    common.add(cmd);
    auto& b = common.binder;
    bound(b, cmd->add_option("--world", world_path, "ground-truth world JSON (exact mode)"),
          "world", world_path);
    bound(b, cmd->add_option("--data", data_path, "dataset CSV (empirical mode)"), "data",
          data_path);
    bound(b, cmd->add_option("--schema", schema_path, "feature schema JSON (empirical mode)"),
          "schema", schema_path);
    bound(b,
          cmd->add_option("--f_column", f_column, "true-outcome column")->capture_default_str(),
          "f_column", f_column);
    bound(b,
          cmd->add_option("--g_column", g_column, "proxy-outcome column")->capture_default_str(),
          "g_column", g_column);
    bound(b,
          cmd->add_option("--screener", screener_path,
                          "fitted screener JSON; exact mode defaults to the implied predictor"),
          "screener", screener_path);
    bound(b, cmd->add_option("--retain", retain, "features the screener may see"), "retain",
          retain);
    bound(b, cmd->add_option("--drop", drop, "features hidden from the screener"), "drop", drop);
    bound(b,
          cmd->add_option("--advantaged_weight", advantaged_weight,
                          "advantaged share of the pooled mix the implied predictor conditions on")
              ->capture_default_str(),
          "advantaged_weight", advantaged_weight);
    bound(b,
          cmd->add_option("--bootstrap", bootstrap, "bootstrap resamples (empirical mode)")
              ->capture_default_str(),
          "bootstrap", bootstrap);
    bound(b, cmd->add_option("--seed", seed, "bootstrap seed")->capture_default_str(), "seed",
          seed);
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  void execute(RunState& state) {
    const bool world_mode = !world_path.empty();
    if (world_mode && !data_path.empty()) {
      throw ParameterError("give either --world or --data, not both");
    }
    if (!world_mode && data_path.empty()) {
      throw ParameterError("decompose needs --world or --data");
    }

    Json run = common.base_run("decompose");
    if (world_mode) {
      run["world"] = world_path;
    } else {
      run["data"] = data_path;
      run["schema"] = schema_path;
      run["f_column"] = f_column;
      run["g_column"] = g_column;
    }
    if (!screener_path.empty()) run["screener"] = screener_path;
    if (!retain.empty()) run["retain"] = retain;
    if (!drop.empty()) run["drop"] = drop;
    run["advantaged_weight"] = advantaged_weight;
    if (!world_mode) {
      run["bootstrap"] = bootstrap;
      run["seed"] = seed;
    }
    state.run_config = run;

    const oracle::GroupWeights weights{advantaged_weight, 1.0 - advantaged_weight};
    if (world_mode) {
      const auto world = read_world(world_path);
      const auto r = representation_from_lists(world.schema(), retain, drop);
      decomp::DecompositionReport report;
      if (!screener_path.empty()) {
        report = decomp::decompose(world, r, trainer::TrainedScreener::load(screener_path),
                                   weights);
      } else {
        // No deployed screener: analyze the implied predictor itself, so the
        // training term is exactly zero.
        const auto h = oracle::bayes_predictor(world, world.g_score(), r, weights);
        report = decomp::decompose(world, r, h, weights);
      }
      write_report(common.out / "decomposition.json", run, report.to_json());
    } else {
      if (schema_path.empty()) throw ParameterError("empirical decompose requires --schema");
      if (screener_path.empty()) throw ParameterError("empirical decompose requires --screener");
      const auto schema = read_schema(schema_path);
      const auto data = read_dataset_csv(data_path, schema);
      const auto r = representation_from_lists(schema, retain, drop);
      const auto s = trainer::TrainedScreener::load(screener_path);
      const auto result = decomp::decompose_empirical(data, f_column, g_column, r,
                                                      trainer::as_score_function(s), weights,
                                                      bootstrap, seed);
      write_report(common.out / "decomposition.json", run, result.to_json());
    }
  }
};

// ---- select -------------------------------------------------------------------

struct SelectCmd {
  CommonFlags common;
  std::string data_path, schema_path, screener_path, outcome;
  std::size_t k = 0;
  double k_share = 0.0;
  double target_share = -1.0;
  std::string tie_rule = "by_id";

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand("select",
                                   "score a roster and select the top k, optionally under an "
                                   "exact group-share target");
    common.add(cmd);
    auto& b = common.binder;
    bound(b, cmd->add_option("--data", data_path, "candidate roster CSV"), "data", data_path);
    bound(b, cmd->add_option("--schema", schema_path, "feature schema JSON"), "schema",
          schema_path);
    bound(b, cmd->add_option("--screener", screener_path, "fitted screener JSON"), "screener",
          screener_path);
    bound(b, cmd->add_option("--outcome", outcome, "true-outcome column for efficiency"),
          "outcome", outcome);
    bound(b, cmd->add_option("--k", k, "seats to fill"), "k", k);
    bound(b, cmd->add_option("--k_share", k_share, "seats as a share of the roster"), "k_share",
          k_share);
    bound(b,
          cmd->add_option("--target_share", target_share,
                          "disadvantaged share of selected (exact quota)"),
          "target_share", target_share);
    bound(b,
          cmd->add_option("--tie_rule", tie_rule, "by_id or stable_input_order")
              ->capture_default_str(),
          "tie_rule", tie_rule);
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  void execute(RunState& state) {
    Json run = common.base_run("select");
    run["data"] = data_path;
    run["schema"] = schema_path;
    run["screener"] = screener_path;
    if (!outcome.empty()) run["outcome"] = outcome;
    if (k > 0) run["k"] = k;
    if (k_share > 0.0) run["k_share"] = k_share;
    if (target_share >= 0.0) run["target_share"] = target_share;
    run["tie_rule"] = tie_rule;
    state.run_config = run;

    if (data_path.empty() || schema_path.empty() || screener_path.empty()) {
      throw ParameterError("select requires --data, --schema, and --screener");
    }
    const auto schema = read_schema(schema_path);
    const auto data = read_dataset_csv(data_path, schema);
    const std::optional<std::string> oc =
        outcome.empty() ? std::nullopt : std::optional<std::string>(outcome);
    const auto roster = screen::roster_from_dataset(data, oc);
    const auto s = trainer::TrainedScreener::load(screener_path);
    const auto scored = screen::score_roster(s, roster);
    const auto kk = resolve_k(k, k_share, roster.size());
    const auto rule = screen::tie_rule_from_string(tie_rule);
    const auto selection =
        target_share >= 0.0 ? screen::select_with_group_target(scored, kk, target_share, rule)
                            : screen::select_top_k(scored, kk, rule);

    Json body;
    body["format"] = "screenaudit.selection/1";
    body["k"] = kk;
    body["screener_digest"] = format_digest(s.digest());
    body["roster_digest"] = format_digest(roster.digest());
    const Json selection_json = selection.to_json();
    for (const auto& [key, value] : selection_json.items()) body[key] = value;
    body["slice_rates"] = slice_rates_json(screen::acceptance_rates(selection, roster, {}));
    write_report(common.out / "selection.json", run, body);
  }
};

// ---- counterfactual ---------------------------------------------------------------

struct CounterfactualCmd {
  CommonFlags common;
  std::string data_path, schema_path, screener_path, id;
  std::vector<std::string> set_flags;
  std::vector<std::pair<std::string, double>> deltas;
  std::size_t k = 0;
  double k_share = 0.0;

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand(
        "counterfactual", "re-score one candidate with named features changed and report "
                          "whether the selection flips");
    common.add(cmd);
    auto& b = common.binder;
    bound(b, cmd->add_option("--data", data_path, "candidate roster CSV"), "data", data_path);
    bound(b, cmd->add_option("--schema", schema_path, "feature schema JSON"), "schema",
          schema_path);
    bound(b, cmd->add_option("--screener", screener_path, "fitted screener JSON"), "screener",
          screener_path);
    bound(b, cmd->add_option("--id", id, "candidate id (row ids are r00000, r00001, ...)"), "id",
          id);
    b.bind(cmd->add_option("--set", set_flags, "feature change, name=value (repeatable)"), "set",
           [this](const Json& j) {
             for (const auto& [key, v] : j.items()) deltas.emplace_back(key, v.get<double>());
           });
    bound(b, cmd->add_option("--k", k, "seats to fill"), "k", k);
    bound(b, cmd->add_option("--k_share", k_share, "seats as a share of the roster"), "k_share",
          k_share);
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  void execute(RunState& state) {
    if (!set_flags.empty()) deltas = parse_assignments(set_flags, "set");

    Json run = common.base_run("counterfactual");
    run["data"] = data_path;
    run["schema"] = schema_path;
    run["screener"] = screener_path;
    run["id"] = id;
    run["set"] = assignments_json(deltas);
    if (k > 0) run["k"] = k;
    if (k_share > 0.0) run["k_share"] = k_share;
    state.run_config = run;

    if (data_path.empty() || schema_path.empty() || screener_path.empty()) {
      throw ParameterError("counterfactual requires --data, --schema, and --screener");
    }
    if (id.empty()) throw ParameterError("counterfactual requires --id");
    if (deltas.empty()) throw ParameterError("counterfactual requires at least one --set change");

    const auto schema = read_schema(schema_path);
    const auto data = read_dataset_csv(data_path, schema);
    const auto roster = screen::roster_from_dataset(data, std::nullopt);
    const auto s = trainer::TrainedScreener::load(screener_path);
    const auto kk = resolve_k(k, k_share, roster.size());
    const auto result = screen::counterfactual(s, roster, id, deltas, kk);

    Json body;
    body["format"] = "screenaudit.counterfactual/1";
    const Json result_json = result.to_json();
    for (const auto& [key, value] : result_json.items()) body[key] = value;
    write_report(common.out / "counterfactual.json", run, body);
  }
};

// ---- tradeoff -------------------------------------------------------------------

struct TradeoffCmd {
  CommonFlags common;
  std::string data_path, schema_path, outcome;
  std::vector<std::string> retain, drop;
  std::vector<std::string> variants{"blind", "aware"};
  std::size_t k = 0;
  double k_share = 0.0;
  double target_max = 0.5;
  double target_step = 0.01;
  std::string efficiency = "mean_outcome";
  double cut = 0.0;
  bool plot_data = false;
  bool deciles = false;
  TrainFlags tf;
  std::uint64_t seed = 0;

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand(
        "tradeoff", "sweep exact group-share targets and emit efficiency curves, dominance "
                    "verdicts, and rank-decile movement");
    common.add(cmd);
    auto& b = common.binder;
    bound(b, cmd->add_option("--data", data_path, "dataset CSV"), "data", data_path);
    bound(b, cmd->add_option("--schema", schema_path, "feature schema JSON"), "schema",
          schema_path);
    bound(b, cmd->add_option("--outcome", outcome, "outcome column to fit and evaluate"),
          "outcome", outcome);
    bound(b, cmd->add_option("--retain", retain, "base features the screeners may see"),
          "retain", retain);
    bound(b, cmd->add_option("--drop", drop, "base features hidden from the screeners"), "drop",
          drop);
    bound(b,
          cmd->add_option("--variants", variants,
                          "screeners to sweep: blind, aware, orthogonalized")
              ->capture_default_str(),
          "variants", variants);
    bound(b, cmd->add_option("--k", k, "seats to fill"), "k", k);
    bound(b,
          cmd->add_option("--k_share", k_share, "seats as a share of the roster (default 0.25)"),
          "k_share", k_share);
    bound(b, cmd->add_option("--target_max", target_max, "top of the target grid")
                 ->capture_default_str(),
          "target_max", target_max);
    bound(b, cmd->add_option("--target_step", target_step, "target grid spacing")
                 ->capture_default_str(),
          "target_step", target_step);
    bound(b,
          cmd->add_option("--efficiency", efficiency,
                          "mean_outcome or share_at_or_above_cut")
              ->capture_default_str(),
          "efficiency", efficiency);
    bound(b, cmd->add_option("--cut", cut, "outcome cut point (cut mode)")->capture_default_str(),
          "cut", cut);
    bound(b, cmd->add_flag("--plot_data,--plot-data", plot_data, "also emit CSVs for plotting"),
          "plot_data", plot_data);
    bound(b,
          cmd->add_flag("--deciles", deciles,
                        "also emit the blind-vs-aware rank-decile matrix for the "
                        "disadvantaged group"),
          "deciles", deciles);
    tf.add(cmd, b);
    bound(b, cmd->add_option("--seed", seed, "holdout-split seed")->capture_default_str(), "seed",
          seed);
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  void execute(RunState& state) {
    Json run = common.base_run("tradeoff");
    run["data"] = data_path;
    run["schema"] = schema_path;
    run["outcome"] = outcome;
    if (!retain.empty()) run["retain"] = retain;
    if (!drop.empty()) run["drop"] = drop;
    run["variants"] = variants;
    if (k > 0) run["k"] = k;
    if (k_share > 0.0) run["k_share"] = k_share;
    run["target_max"] = target_max;
    run["target_step"] = target_step;
    run["efficiency"] = efficiency;
    if (efficiency != "mean_outcome") run["cut"] = cut;
    run["plot_data"] = plot_data;
    run["deciles"] = deciles;
    tf.emit(run);
    run["seed"] = seed;
    state.run_config = run;

    if (data_path.empty() || schema_path.empty()) {
      throw ParameterError("tradeoff requires --data and --schema");
    }
    if (outcome.empty()) throw ParameterError("tradeoff requires --outcome");
    if (variants.empty()) throw ParameterError("tradeoff requires at least one variant");
    std::set<std::string> seen;
    for (const auto& v : variants) {
      if (v != "blind" && v != "aware" && v != "orthogonalized") {
        throw ParameterError("unknown variant '" + v + "' (blind, aware, orthogonalized)");
      }
      if (!seen.insert(v).second) throw ParameterError("variant '" + v + "' listed twice");
    }

    tradeoff::EfficiencySpec espec;
    if (efficiency == "mean_outcome") {
      espec.mode = tradeoff::EfficiencySpec::Mode::mean_outcome;
    } else if (efficiency == "share_at_or_above_cut") {
      espec.mode = tradeoff::EfficiencySpec::Mode::share_at_or_above_cut;
      espec.cut = cut;
    } else {
      throw ParameterError("unknown efficiency '" + efficiency +
                           "' (mean_outcome, share_at_or_above_cut)");
    }
    const auto targets = build_targets(target_max, target_step);

    const auto schema = read_schema(schema_path);
    const auto data = read_dataset_csv(data_path, schema);
    const auto base_r = representation_from_lists(schema, retain, drop);
    const auto cfg = tf.to_config(seed);
    const auto vs = trainer::train_variants(data, outcome, base_r, cfg);
    const auto roster = screen::roster_from_dataset(data, outcome);
    const auto kk = (k == 0 && k_share == 0.0) ? resolve_k(0, 0.25, roster.size())
                                               : resolve_k(k, k_share, roster.size());

    std::vector<std::pair<std::string, const trainer::TrainedScreener*>> chosen;
    for (const auto& v : variants) {
      if (v == "blind") chosen.emplace_back(v, &vs.blind);
      if (v == "aware") chosen.emplace_back(v, &vs.aware);
      if (v == "orthogonalized") chosen.emplace_back(v, &vs.orthogonalized);
    }

    std::vector<tradeoff::TradeoffCurve> curves;
    Json curves_json = Json::array();
    for (const auto& [tag, sp] : chosen) {
      write_report(common.out / ("screener_" + tag + ".json"), run, sp->to_json());
      curves.push_back(tradeoff::tradeoff_curve(*sp, roster, kk, targets, espec));
      curves_json.push_back(curves.back().to_json());
      if (plot_data) {
        tradeoff::write_curve_csv(curves.back(), common.out / ("curve_" + tag + ".csv"),
                                  {"config: " + run.dump()});
        std::cout << "wrote " << (common.out / ("curve_" + tag + ".csv")).string() << "\n";
      }
    }

    Json dominance = Json::array();
    for (std::size_t i = 0; i < curves.size(); ++i) {
      for (std::size_t j = 0; j < curves.size(); ++j) {
        if (i == j) continue;
        dominance.push_back(tradeoff::dominance_check(curves[i], curves[j]).to_json());
      }
    }

    Json body;
    body["format"] = "screenaudit.tradeoff_report/1";
    body["k"] = kk;
    body["grid"]["max"] = target_max;
    body["grid"]["step"] = target_step;
    body["grid"]["size"] = targets.size();
    body["efficiency_definition"] = espec.describe();
    body["roster_digest"] = format_digest(roster.digest());
    body["curves"] = std::move(curves_json);
    body["dominance"] = std::move(dominance);
    write_report(common.out / "tradeoff.json", run, body);

    if (deciles) {
      const std::size_t gi = roster.schema().group_index();
      const screen::Slice dis{"disadvantaged", [gi](const screen::Candidate& c) {
                                return c.features.cat(gi) == kDisadvantaged;
                              }};
      const auto matrix = tradeoff::decile_matrix(vs.blind, vs.aware, roster, dis);
      write_report(common.out / "deciles.json", run, matrix.to_json());
      if (plot_data) {
        tradeoff::write_matrix_csv(matrix, common.out / "deciles.csv",
                                   {"config: " + run.dump()});
        std::cout << "wrote " << (common.out / "deciles.csv").string() << "\n";
      }
    }
  }
};

// ---- audit --------------------------------------------------------------------

struct AuditCmd {
  CommonFlags common;
  std::string data_path, schema_path;
  Json audits;

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand(
        "audit", "run the battery of screening audits described by the config file");
    common.add(cmd);
    auto& b = common.binder;
    bound(b, cmd->add_option("--data", data_path, "disclosed training dataset CSV"), "data",
          data_path);
    bound(b, cmd->add_option("--schema", schema_path, "feature schema JSON"), "schema",
          schema_path);
    b.bind(nullptr, "audits", [this](const Json& j) { audits = j; });
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  static void check_entry_keys(const Json& entry, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : entry.items()) {
      (void)value;
      if (allowed.find(key) == allowed.end()) {
        throw ParameterError("unknown key '" + key + "' in audit entry of kind '" +
                             entry.value("kind", std::string("?")) + "'");
      }
    }
  }

  static Representation entry_representation(const Json& entry, const FeatureSchema& schema,
                                             const std::optional<Representation>& fallback) {
    const auto retain = entry.value("retain", std::vector<std::string>{});
    const auto drop = entry.value("drop", std::vector<std::string>{});
    if (retain.empty() && drop.empty()) {
      if (fallback.has_value()) return *fallback;
      return Representation::drop(schema, {schema.group_feature()});
    }
    return representation_from_lists(schema, retain, drop);
  }

  void execute(RunState& state) {
    Json run = common.base_run("audit");
    if (!data_path.empty()) run["data"] = data_path;
    if (!schema_path.empty()) run["schema"] = schema_path;
    run["audits"] = audits.is_null() ? Json::array() : audits;
    state.run_config = run;

    if (!audits.is_array() || audits.empty()) {
      throw ParameterError("audit requires a --config file with a non-empty 'audits' array");
    }

    std::optional<FeatureSchema> schema;
    std::optional<Dataset> shared;
    auto shared_data = [&]() -> const Dataset& {
      if (!shared.has_value()) {
        if (data_path.empty() || schema_path.empty()) {
          throw ParameterError("this audit battery needs --data and --schema");
        }
        schema = read_schema(schema_path);
        shared = read_dataset_csv(data_path, *schema);
      }
      return *shared;
    };

    Json findings = Json::array();
    std::set<std::string> file_names;
    std::size_t flags_raised = 0;
    for (const auto& entry : audits) {
      if (!entry.is_object() || !entry.contains("kind")) {
        throw ParameterError("every audit entry needs a 'kind'");
      }
      const auto kind = entry.at("kind").get<std::string>();
      const auto seed = entry.value("seed", std::uint64_t{0});
      audit::AuditFinding finding;

      if (kind == "under_optimization") {
        check_entry_keys(entry, {"kind", "seed", "screener", "outcome", "margin", "retain",
                                 "drop", "train"});
        if (!entry.contains("screener")) {
          throw ParameterError("under_optimization entries need a 'screener' path");
        }
        const auto submitted =
            trainer::TrainedScreener::load(entry.at("screener").get<std::string>());
        const auto outcome = entry.value("outcome", submitted.metadata().outcome);
        const auto margin = entry.value("margin", 0.05);
        trainer::TrainConfig base;
        base.link = submitted.link();
        base.seed = seed;
        const auto cfg = train_config_from_json(entry.value("train", Json::object()), base);
        const auto& data = shared_data();
        const auto r = entry_representation(entry, data.schema(), submitted.representation());
        finding = audit::retrain_audit(submitted, data, outcome, r, cfg, margin);
      } else if (kind == "outcome_choice") {
        check_entry_keys(entry, {"kind", "seed", "outcomes", "declared_outcome", "k_share",
                                 "slack", "retain", "drop", "train"});
        if (!entry.contains("outcomes") || !entry.contains("declared_outcome")) {
          throw ParameterError(
              "outcome_choice entries need 'outcomes' and 'declared_outcome'");
        }
        const auto outcomes = entry.at("outcomes").get<std::vector<std::string>>();
        const auto declared = entry.at("declared_outcome").get<std::string>();
        const auto k_share = entry.value("k_share", 0.25);
        const auto slack = entry.value("slack", 0.0);
        trainer::TrainConfig base;
        base.seed = seed;
        const auto cfg = train_config_from_json(entry.value("train", Json::object()), base);
        const auto& data = shared_data();
        const auto r = entry_representation(entry, data.schema(), std::nullopt);
        finding = audit::outcome_choice_audit(data, outcomes, declared, r, k_share, cfg, slack);
      } else if (kind == "sample_drift") {
        check_entry_keys(entry, {"kind", "seed", "universe", "thresholds"});
        if (!entry.contains("universe")) {
          throw ParameterError("sample_drift entries need a 'universe' dataset path");
        }
        const auto& data = shared_data();
        const auto universe =
            read_dataset_csv(entry.at("universe").get<std::string>(), data.schema());
        audit::DriftThresholds th;
        if (entry.contains("thresholds")) {
          const auto& tj = entry.at("thresholds");
          th.feature = tj.value("feature", th.feature);
          th.group_share = tj.value("group_share", th.group_share);
        }
        finding = audit::sample_drift_audit(data, universe, th);
      } else if (kind == "simulated_probe") {
        check_entry_keys(entry, {"kind", "seed", "n", "disadvantaged_share", "k_share",
                                 "retain", "drop", "train"});
        audit::ProbeConfig pc;
        pc.n = entry.value("n", std::size_t{20000});
        pc.disadvantaged_share = entry.value("disadvantaged_share", 0.5);
        pc.k_share = entry.value("k_share", 0.25);
        pc.seed = seed;
        trainer::TrainConfig base;
        base.seed = seed;
        pc.train = train_config_from_json(entry.value("train", Json::object()), base);
        const auto probe = audit::default_probe_world();
        const auto r = entry_representation(entry, probe.schema(), std::nullopt);
        const audit::TrainerUnderAudit honest =
            [](const Dataset& d, const std::string& oc, const Representation& rr,
               const trainer::TrainConfig& cc) { return trainer::train(d, oc, rr, cc); };
        finding = audit::simulated_probe(honest, probe, r, pc);
      } else {
        throw ParameterError("unknown audit kind '" + kind +
                             "' (under_optimization, outcome_choice, sample_drift, "
                             "simulated_probe)");
      }

      if (!file_names.insert(finding.file_name()).second) {
        throw ParameterError("two audit entries share kind '" + kind + "' and seed " +
                             std::to_string(seed) + "; give them distinct seeds");
      }
      write_report(common.out / finding.file_name(), run, finding.to_json());
      findings.push_back(finding.to_json());
      if (finding.verdict == audit::Verdict::flag) ++flags_raised;
    }

    Json body;
    body["format"] = "screenaudit.audit_battery/1";
    body["entries"] = audits.size();
    body["flags_raised"] = flags_raised;
    body["findings"] = std::move(findings);
    write_report(common.out / "battery_report.json", run, body);
  }
};

// ---- release-sim ------------------------------------------------------------------

struct ReleaseCmd {
  CommonFlags common;
  std::string data_path, schema_path;
  std::size_t n = 20000;
  std::uint64_t seed = 0;
  double disadvantaged_share = 0.5;
  std::vector<std::string> param_flags;
  std::vector<std::pair<std::string, double>> params;
  double judge_share = 0.3;
  std::string outcome = "fta";
  std::vector<std::string> retain{"priors", "severity"};
  std::string judge_column = "judge_score";
  std::string risk_column = "fta_risk";
  TrainFlags tf{.link = "logistic",
                .learning_rate = 0.5,
                .max_iterations = 20000,
                .tolerance = 1e-8,
                .holdout_fraction = 0.2};

  void setup(CLI::App& app, Ctx& ctx) {
    auto* cmd = app.add_subcommand(
        "release-sim", "train a risk screener and compare its detention policy against the "
                       "recorded judge");
    common.add(cmd);
    auto& b = common.binder;
    bound(b, cmd->add_option("--data", data_path,
                             "bail-style dataset CSV; omitted = generate judge_release"),
          "data", data_path);
    bound(b, cmd->add_option("--schema", schema_path, "feature schema JSON"), "schema",
          schema_path);
    bound(b, cmd->add_option("--n", n, "rows to generate")->capture_default_str(), "n", n);
    bound(b, cmd->add_option("--seed", seed, "generation and holdout seed")
                 ->capture_default_str(),
          "seed", seed);
    bound(b,
          cmd->add_option("--disadvantaged_share", disadvantaged_share,
                          "probability a generated row is disadvantaged")
              ->capture_default_str(),
          "disadvantaged_share", disadvantaged_share);
    b.bind(cmd->add_option("--param", param_flags,
                           "judge_release parameter override, name=value (repeatable)"),
           "param", [this](const Json& j) {
             for (const auto& [key, v] : j.items()) params.emplace_back(key, v.get<double>());
           });
    bound(b, cmd->add_option("--judge_share", judge_share, "share the judge detains")
                 ->capture_default_str(),
          "judge_share", judge_share);
    bound(b, cmd->add_option("--outcome", outcome, "realized outcome column to fit")
                 ->capture_default_str(),
          "outcome", outcome);
    bound(b, cmd->add_option("--retain", retain, "features the screener may see")
                 ->capture_default_str(),
          "retain", retain);
    bound(b, cmd->add_option("--judge_column", judge_column, "recorded judge score column")
                 ->capture_default_str(),
          "judge_column", judge_column);
    bound(b, cmd->add_option("--risk_column", risk_column, "ground-truth risk column")
                 ->capture_default_str(),
          "risk_column", risk_column);
    tf.add(cmd, b);
    cmd->callback([this, &ctx] { common.guarded(ctx, [this, &ctx] { execute(*ctx.state); }); });
  }

  void execute(RunState& state) {
    if (!param_flags.empty()) params = parse_assignments(param_flags, "param");
    const bool generate = data_path.empty();

    Json run = common.base_run("release-sim");
    if (generate) {
      run["n"] = n;
      run["disadvantaged_share"] = disadvantaged_share;
      run["param"] = assignments_json(params);
    } else {
      run["data"] = data_path;
      run["schema"] = schema_path;
    }
    run["seed"] = seed;
    run["judge_share"] = judge_share;
    run["outcome"] = outcome;
    run["retain"] = retain;
    run["judge_column"] = judge_column;
    run["risk_column"] = risk_column;
    tf.emit(run);
    state.run_config = run;

    Dataset data;
    if (generate) {
      scenarios::ScenarioSpec spec;
      spec.name = "judge_release";
      spec.n = n;
      spec.seed = seed;
      spec.disadvantaged_share = disadvantaged_share;
      for (const auto& [key, v] : params) spec.params[key] = v;
      auto output = scenarios::generate(spec);
      data = std::move(output.data);
      write_data_csv(common.out / "data.csv", run, data);
      write_report(common.out / "schema.json", run, schema_to_json(data.schema()));
      write_report(common.out / "notes.json", run, output.notes);
    } else {
      if (schema_path.empty()) throw ParameterError("release-sim with --data needs --schema");
      data = read_dataset_csv(data_path, read_schema(schema_path));
    }

    const auto r = Representation::retain(data.schema(), retain);
    const auto screener = trainer::train(data, outcome, r, tf.to_config(seed));
    write_report(common.out / "screener.json", run, screener.to_json());
    const auto report =
        scenarios::release_experiment(data, screener, judge_share, judge_column, risk_column);
    write_report(common.out / "release_report.json", run, report.to_json());
  }
};

// ---- error report -------------------------------------------------------------

void write_error_report(const fs::path& out, const Json& run, const std::string& code,
                        const std::string& message) {
  try {
    fs::create_directories(out);
    Json j;
    j["error"]["code"] = code;
    j["error"]["message"] = message;
    j["run"] = run.is_null() ? Json::object() : run;
    write_json_file(out / "error.json", j);
  } catch (...) {
    // Best effort: stderr and the exit code already carry the failure.
  }
}

int run_impl(int argc, const char* const* argv) {
  CLI::App app{"deterministic screening-bias decomposition and audit toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  RunState state;
  Ctx ctx{&state, argc, argv};
  ScenarioCmd scenario;
  TrainCmd train;
  DecomposeCmd decompose;
  SelectCmd select;
  CounterfactualCmd counterfactual;
  TradeoffCmd tradeoff;
  AuditCmd audit;
  ReleaseCmd release;
  scenario.setup(app, ctx);
  train.setup(app, ctx);
  decompose.setup(app, ctx);
  select.setup(app, ctx);
  counterfactual.setup(app, ctx);
  tradeoff.setup(app, ctx);
  audit.setup(app, ctx);
  release.setup(app, ctx);

  const auto report_to = [&]() { return state.out_ready ? state.out : prescan_out(argc, argv); };
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    write_error_report(report_to(), state.run_config, "usage", e.what());
    return 1;
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << "\n";
    write_error_report(report_to(), state.run_config, e.code(), e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [config]: " << e.what() << "\n";
    write_error_report(report_to(), state.run_config, "config", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    write_error_report(report_to(), state.run_config, "internal", e.what());
    return 1;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) { return run_impl(argc, argv); }

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("screenaudit");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_impl(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cli
}  // namespace screenaudit
