#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "screenaudit/errors.hpp"
#include "screenaudit/scenarios.hpp"
#include "screenaudit/trainer.hpp"
#include "support.hpp"

using namespace screenaudit;
using namespace screenaudit::trainer;

namespace {

// y = b0 + b1 * x1 + noise, x1 real, group independent of everything.
Dataset linear_dataset(std::size_t n, double b0, double b1, double noise_sd,
                       std::uint64_t seed) {
  const FeatureSchema schema({support::real_spec("x1", -4.0, 4.0), support::cat_spec("group", 2)},
                             "group", {"y"});
  Dataset data(schema, "test:linear");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::clamp(normal(rng), -4.0, 4.0);
    const double y = b0 + b1 * x + noise_sd * normal(rng);
    DatasetRow row;
    row.features = make_vector(schema, {x, static_cast<double>(i % 2)});
    row.outcomes = {y};
    data.add_row(std::move(row));
  }
  return data;
}

TrainingProblem random_problem(LinkKind link, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(0.5, 2.0);
  TrainingProblem prob;
  prob.link = link;
  prob.cols = 4;
  const std::size_t rows = 60;
  for (std::size_t i = 0; i < rows; ++i) {
    prob.X.push_back(1.0);
    for (std::size_t j = 1; j < prob.cols; ++j) prob.X.push_back(normal(rng));
    if (link == LinkKind::linear) {
      prob.y.push_back(normal(rng));
    } else {
      prob.y.push_back(rng() % 2 == 0 ? 1.0 : 0.0);
    }
    prob.w.push_back(wdist(rng));
  }
  return prob;
}

}  // namespace

TEST_CASE("analytic gradients match central differences for both links") {
  for (const auto link : {LinkKind::linear, LinkKind::logistic}) {
    const auto prob = random_problem(link, link == LinkKind::linear ? 11 : 12);
    const auto loss = [&](const std::vector<double>& theta) { return prob.loss(theta); };
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> tdist(-1.0, 1.0);
    for (int point = 0; point < 5; ++point) {
      std::vector<double> theta(prob.cols);
      for (auto& t : theta) t = tdist(rng);
      const auto grad = prob.gradient(theta);
      for (std::size_t i = 0; i < prob.cols; ++i) {
        const double fd = support::central_diff(loss, theta, i, 1e-6);
        CHECK(std::abs(grad[i] - fd) <= 1e-5 * std::max(1.0, std::abs(grad[i])));
      }
    }
  }
}

TEST_CASE("logistic training recovers planted log-odds") {
  // x=0 rows: 90 with y=0, 10 with y=1; x=1 rows mirrored. The optimum is
  // intercept = logit(0.1), slope = 2 * log(9).
  const auto schema = support::binary_schema(1, {"y"});
  Dataset data(schema, "test:logodds");
  for (int x = 0; x < 2; ++x) {
    for (int i = 0; i < 100; ++i) {
      const double y = (i < 10) == (x == 0) ? 1.0 : 0.0;
      DatasetRow row;
      row.features = make_vector(schema, {static_cast<double>(x), static_cast<double>(i % 2)});
      row.outcomes = {y};
      data.add_row(std::move(row));
    }
  }
  TrainConfig cfg;
  cfg.link = LinkKind::logistic;
  cfg.learning_rate = 1.0;
  cfg.max_iterations = 30000;
  cfg.tolerance = 1e-10;
  cfg.holdout_fraction = 0.0;
  const auto screener = train(data, "y", Representation::retain(schema, {"x1"}), cfg);
  CHECK(screener.metadata().converged);
  CHECK(screener.coefficient("x1=1") == doctest::Approx(2.0 * std::log(9.0)).epsilon(1e-3));
  CHECK(screener.coefficient("(intercept)") == doctest::Approx(-std::log(9.0)).epsilon(1e-3));
  const double lo = screener.score(make_vector(schema, {0, 0}));
  const double hi = screener.score(make_vector(schema, {1, 0}));
  CHECK(lo == doctest::Approx(0.1).epsilon(1e-3));
  CHECK(hi == doctest::Approx(0.9).epsilon(1e-3));
}

TEST_CASE("constant outcome refuses to train") {
  const auto schema = support::binary_schema(1, {"y"});
  Dataset data(schema, "test:constant");
  for (int i = 0; i < 40; ++i) {
    DatasetRow row;
    row.features = make_vector(schema, {static_cast<double>(i % 2), static_cast<double>(i / 20)});
    row.outcomes = {0.7};
    data.add_row(std::move(row));
  }
  TrainConfig cfg;
  cfg.holdout_fraction = 0.0;
  CHECK_THROWS_WITH_AS(train(data, "y", Representation::retain(schema, {"x1"}), cfg),
                       "constant outcome: 'y' never varies", TrainingError);
}

TEST_CASE("linear training matches the least-squares oracle") {
  const auto data = linear_dataset(10000, 0.5, 0.3, 0.1, 21);
  const auto& schema = data.schema();
  TrainConfig cfg;
  cfg.learning_rate = 0.2;
  cfg.max_iterations = 20000;
  cfg.tolerance = 1e-10;
  cfg.holdout_fraction = 0.2;
  cfg.seed = 3;
  const auto screener = train(data, "y", Representation::retain(schema, {"x1"}), cfg);
  CHECK(screener.metadata().converged);
  CHECK(std::abs(screener.coefficient("x1") - 0.3) <= 0.03);

  // Rebuild the exact training design (non-holdout rows) and solve it directly.
  std::vector<double> X, y;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (is_holdout_row(cfg.seed, cfg.holdout_fraction, i)) continue;
    const auto row = screener.encoder().encode(data.row(i).features);
    X.insert(X.end(), row.begin(), row.end());
    y.push_back(*data.row(i).outcomes[0]);
  }
  const auto ols = support::solve_least_squares(X, 2, y);
  CHECK(screener.coefficient("(intercept)") == doctest::Approx(ols[0]).epsilon(1e-5));
  CHECK(screener.coefficient("x1") == doctest::Approx(ols[1]).epsilon(1e-5));
  CHECK(screener.metadata().train_rows == y.size());
  CHECK(screener.metadata().holdout_rows == data.size() - y.size());
}

TEST_CASE("blind and aware agree when the outcome ignores the group") {
  const FeatureSchema schema({support::cat_spec("x1", 3), support::cat_spec("group", 2)},
                             "group", {"y"});
  Dataset data(schema, "test:groupfree");
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < 20000; ++i) {
    const double x = static_cast<double>(rng() % 3);
    const double g = static_cast<double>(rng() % 2);
    DatasetRow row;
    row.features = make_vector(schema, {x, g});
    row.outcomes = {0.2 + 0.1 * x + 0.05 * normal(rng)};
    data.add_row(std::move(row));
  }
  TrainConfig cfg;
  cfg.max_iterations = 20000;
  cfg.tolerance = 1e-10;
  cfg.seed = 5;
  const auto set = train_variants(data, "y", Representation::identity(schema), cfg);
  CHECK(std::abs(set.aware.coefficient("group=1")) <= 0.02);
  for (std::size_t i = 0; i < data.size(); i += 97) {
    const auto& x = data.row(i).features;
    CHECK(std::abs(set.blind.score(x) - set.aware.score(x)) <= 0.02);
  }
}

TEST_CASE("aware screener ignores ratings the advantaged group never shares") {
  // With every disadvantaged rating floored, the rating columns carry no
  // variation for that group: the interaction weights never leave zero while
  // the advantaged rating weights stay informative.
  scenarios::ScenarioSpec spec;
  spec.name = "biased_ratings";
  spec.n = 6000;
  spec.seed = 17;
  spec.params["floor_prob"] = 1.0;
  const auto out = scenarios::generate(spec);
  TrainConfig cfg;
  cfg.max_iterations = 20000;
  cfg.tolerance = 1e-10;
  cfg.seed = 2;
  const auto set = train_variants(out.data, "sales",
                                  Representation::identity(out.data.schema()), cfg);

  CHECK(set.aware.coefficient("rating=1:g1") == 0.0);
  CHECK(set.aware.coefficient("rating=2:g1") == 0.0);
  CHECK(set.aware.coefficient("rating=3:g1") == 0.0);
  CHECK(set.aware.coefficient("rating=1") > 0.15);
  CHECK(set.aware.coefficient("rating=2") > set.aware.coefficient("rating=1"));
  CHECK(set.aware.coefficient("rating=3") > set.aware.coefficient("rating=2"));
  CHECK(set.aware.coefficient("group=1") > 0.3);

  // The aware column space contains the blind one, and separating the groups
  // genuinely helps here.
  CHECK(set.aware.metadata().final_train_loss <= set.blind.metadata().final_train_loss + 1e-6);
  CHECK(set.aware.metadata().final_train_loss < set.blind.metadata().final_train_loss - 0.01);
}

TEST_CASE("orthogonalized screener centers base columns within each group") {
  const FeatureSchema schema({support::real_spec("x1", -10.0, 10.0), support::cat_spec("x2", 3),
                              support::cat_spec("group", 2)},
                             "group", {"y"});
  Dataset data(schema, "test:ortho");
  std::mt19937_64 rng(41);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < 2000; ++i) {
    const double g = static_cast<double>(rng() % 2);
    const double x1 = std::clamp(normal(rng) + 1.5 * g, -10.0, 10.0);
    const double x2 = static_cast<double>(rng() % 3);
    DatasetRow row;
    row.features = make_vector(schema, {x1, x2, g});
    row.outcomes = {x1 + 0.5 * x2 + 0.2 * normal(rng)};
    data.add_row(std::move(row));
  }
  TrainConfig cfg;
  cfg.max_iterations = 5000;
  cfg.holdout_fraction = 0.0;
  const auto set = train_variants(data, "y", Representation::identity(schema), cfg);
  const auto& enc = set.orthogonalized.encoder();
  REQUIRE(enc.has_group_means());
  const std::size_t base = enc.base_columns();
  for (int g = 0; g < 2; ++g) {
    std::vector<double> sums(base, 0.0);
    std::size_t members = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.row(i).features.values[schema.group_index()] != g) continue;
      const auto row = enc.encode(data.row(i).features);
      for (std::size_t j = 0; j < base; ++j) sums[j] += row[1 + j];
      ++members;
    }
    for (std::size_t j = 0; j < base; ++j) {
      CHECK(std::abs(sums[j] / static_cast<double>(members)) <= 1e-10);
    }
  }
}

TEST_CASE("noiseless linear data is fit to numerical precision") {
  const auto schema = support::binary_schema(2, {"y"});
  Dataset data(schema, "test:noiseless");
  for (int i = 0; i < 400; ++i) {
    const double x1 = (i >> 0) & 1, x2 = (i >> 1) & 1, g = (i >> 2) & 1;
    DatasetRow row;
    row.features = make_vector(schema, {x1, x2, g});
    row.outcomes = {0.25 + 0.5 * x1 - 0.25 * x2};
    data.add_row(std::move(row));
  }
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.max_iterations = 50000;
  cfg.tolerance = 1e-12;
  cfg.holdout_fraction = 0.0;
  const auto screener = train(data, "y", Representation::retain(schema, {"x1", "x2"}), cfg);
  CHECK(screener.metadata().converged);
  CHECK(screener.metadata().iterations_run < 50000);
  CHECK(screener.metadata().final_train_loss <= 1e-9);
  CHECK(screener.coefficient("x1=1") == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(screener.coefficient("x2=1") == doctest::Approx(-0.25).epsilon(1e-6));
}

TEST_CASE("all-zero logistic parameters score one half and lose ln 2") {
  const auto schema = support::binary_schema(1, {"y"});
  const auto rep = Representation::retain(schema, {"x1"});
  const RowEncoder enc(schema, rep, {});
  TrainMetadata meta;
  meta.outcome = "y";
  const TrainedScreener zero(schema, rep, enc, Variant::plain, LinkKind::logistic,
                             std::vector<double>(enc.columns().size(), 0.0), meta);
  CHECK(zero.score(make_vector(schema, {0, 0})) == 0.5);
  CHECK(zero.score(make_vector(schema, {1, 1})) == 0.5);

  Dataset data(schema, "test:ln2");
  std::vector<std::size_t> rows;
  for (int i = 0; i < 10; ++i) {
    DatasetRow row;
    row.features = make_vector(schema, {static_cast<double>(i % 2), static_cast<double>(i % 2)});
    row.outcomes = {i % 3 == 0 ? 1.0 : 0.0};
    data.add_row(std::move(row));
    rows.push_back(static_cast<std::size_t>(i));
  }
  CHECK(loss_on_rows(zero, data, "y", rows) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("honest training beats sabotaged parameters on the holdout") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto data = linear_dataset(2000, 0.2, 0.6, 0.3, 100 + seed);
    TrainConfig cfg;
    cfg.holdout_fraction = 0.25;
    cfg.seed = seed;
    const auto honest = train(data, "y", Representation::retain(data.schema(), {"x1"}), cfg);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> params(honest.params().size());
    for (auto& p : params) p = dist(rng);
    const TrainedScreener sabotaged(honest.schema(), honest.representation(), honest.encoder(),
                                    honest.variant(), honest.link(), params, honest.metadata());

    const auto holdout = holdout_rows(data, "y", cfg.seed, cfg.holdout_fraction);
    REQUIRE(!holdout.empty());
    CHECK(loss_on_rows(honest, data, "y", holdout) < loss_on_rows(sabotaged, data, "y", holdout));
  }
}

TEST_CASE("holdout membership is a pure function with the declared rate") {
  std::size_t held = 0;
  for (std::size_t i = 0; i < 20000; ++i) {
    const bool a = is_holdout_row(5, 0.2, i);
    CHECK(a == is_holdout_row(5, 0.2, i));
    held += a ? 1 : 0;
  }
  const double share = static_cast<double>(held) / 20000.0;
  CHECK(std::abs(share - 0.2) <= 3.0 * std::sqrt(0.2 * 0.8 / 20000.0));
  bool differs = false;
  for (std::size_t i = 0; i < 200 && !differs; ++i) {
    differs = is_holdout_row(5, 0.2, i) != is_holdout_row(6, 0.2, i);
  }
  CHECK(differs);
  for (std::size_t i = 0; i < 200; ++i) CHECK(!is_holdout_row(5, 0.0, i));
}

TEST_CASE("holdout outcomes never reach the fitted parameters") {
  auto data = linear_dataset(3000, 0.1, 0.4, 0.2, 77);
  TrainConfig cfg;
  cfg.holdout_fraction = 0.3;
  cfg.seed = 9;
  const auto before = train(data, "y", Representation::retain(data.schema(), {"x1"}), cfg);

  Dataset tampered(data.schema(), "test:tampered");
  for (std::size_t i = 0; i < data.size(); ++i) {
    DatasetRow row = data.row(i);
    if (is_holdout_row(cfg.seed, cfg.holdout_fraction, i)) {
      row.outcomes[0] = *row.outcomes[0] + 5.0;
    }
    tampered.add_row(std::move(row));
  }
  const auto after = train(tampered, "y", Representation::retain(data.schema(), {"x1"}), cfg);

  REQUIRE(before.params().size() == after.params().size());
  for (std::size_t j = 0; j < before.params().size(); ++j) {
    CHECK(before.params()[j] == after.params()[j]);
  }
  REQUIRE(before.metadata().final_holdout_loss.has_value());
  REQUIRE(after.metadata().final_holdout_loss.has_value());
  CHECK(*before.metadata().final_holdout_loss != *after.metadata().final_holdout_loss);
}

TEST_CASE("screener artifacts round-trip through disk") {
  const auto data = linear_dataset(500, 0.3, -0.2, 0.1, 55);
  TrainConfig cfg;
  cfg.seed = 4;
  const auto screener = train(data, "y", Representation::retain(data.schema(), {"x1"}), cfg);

  support::TempDir dir;
  const auto path = dir.path() / "screener.json";
  screener.save(path);
  const auto loaded = TrainedScreener::load(path);

  CHECK(loaded.digest() == screener.digest());
  CHECK(loaded.to_json() == screener.to_json());
  CHECK(loaded.params() == screener.params());
  CHECK(loaded.columns() == screener.columns());
  CHECK(loaded.variant() == screener.variant());
  CHECK(loaded.metadata().train_rows == screener.metadata().train_rows);
  const auto probe = make_vector(data.schema(), {1.25, 0});
  CHECK(loaded.score(probe) == screener.score(probe));
  CHECK_THROWS_AS(loaded.coefficient("no_such_column"), ParameterError);

  const auto rebuilt = TrainedScreener::from_json(screener.to_json());
  CHECK(rebuilt.digest() == screener.digest());
}

TEST_CASE("spearman uses average ranks on ties") {
  const std::vector<double> up{1, 2, 3, 4}, down{9, 7, 5, 3}, flat{2, 2, 2, 2};
  CHECK(spearman(up, std::vector<double>{10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman(up, down) == doctest::Approx(-1.0));
  CHECK(spearman(up, flat) == 0.0);
  // a = {1,1,2} has ranks {1.5, 1.5, 3}; against {1,2,3} the correlation is
  // 1.5 / sqrt(1.5 * 2).
  CHECK(spearman(std::vector<double>{1, 1, 2}, std::vector<double>{1, 2, 3}) ==
        doctest::Approx(1.5 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("evaluate reports per-group losses and rank correlation") {
  const auto data = linear_dataset(4000, 0.0, 1.0, 0.05, 66);
  TrainConfig cfg;
  cfg.seed = 8;
  const auto screener = train(data, "y", Representation::retain(data.schema(), {"x1"}), cfg);
  const auto eval = evaluate(screener, data);
  CHECK(eval.rows_used == data.size());
  CHECK(eval.loss >= 0.0);
  CHECK(eval.rank_correlation > 0.95);
  CHECK(std::isfinite(eval.mean_score_advantaged));
  CHECK(std::isfinite(eval.mean_score_disadvantaged));

  Dataset one_group(data.schema(), "test:onegroup");
  for (std::size_t i = 0; i < 50; ++i) {
    DatasetRow row = data.row(i);
    row.features.values[data.schema().group_index()] = 0.0;
    row.features = make_vector(data.schema(), std::move(row.features.values));
    one_group.add_row(std::move(row));
  }
  CHECK_THROWS_AS(evaluate(screener, one_group), InsufficientDataError);
}

TEST_CASE("divergent training reports the last finite loss") {
  const auto data = linear_dataset(200, 0.0, 2.0, 0.1, 88);
  TrainConfig cfg;
  cfg.learning_rate = 1e8;
  cfg.holdout_fraction = 0.0;
  try {
    train(data, "y", Representation::retain(data.schema(), {"x1"}), cfg);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.iteration() >= 1);
    CHECK(std::isfinite(e.last_finite_loss()));
    CHECK(e.last_finite_loss() >= 0.0);
  }
}

TEST_CASE("variant set shares data, config, and holdout split") {
  auto data = linear_dataset(1000, 0.2, 0.5, 0.2, 99);
  // Censor a handful of outcomes; every variant must drop the same rows.
  Dataset with_gaps(data.schema(), "test:gaps");
  for (std::size_t i = 0; i < data.size(); ++i) {
    DatasetRow row = data.row(i);
    if (i % 50 == 0) row.outcomes[0] = std::nullopt;
    with_gaps.add_row(std::move(row));
  }
  TrainConfig cfg;
  cfg.seed = 12;
  const auto set = train_variants(with_gaps, "y", Representation::identity(data.schema()), cfg);

  CHECK(set.blind.variant() == Variant::blind);
  CHECK(set.aware.variant() == Variant::aware);
  CHECK(set.orthogonalized.variant() == Variant::orthogonalized);
  for (const auto* s : {&set.blind, &set.aware, &set.orthogonalized}) {
    CHECK(s->metadata().seed == cfg.seed);
    CHECK(s->metadata().censored_dropped == 20);
    CHECK(s->metadata().train_rows == set.blind.metadata().train_rows);
    CHECK(s->metadata().holdout_rows == set.blind.metadata().holdout_rows);
  }
  CHECK_THROWS_AS(set.blind.coefficient("group=1"), ParameterError);
  CHECK_NOTHROW(set.aware.coefficient("group=1"));
}
