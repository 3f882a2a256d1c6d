#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "screenaudit/decompose.hpp"
#include "screenaudit/errors.hpp"
#include "screenaudit/oracle.hpp"
#include "screenaudit/scenarios.hpp"
#include "screenaudit/trainer.hpp"
#include "support.hpp"

using namespace screenaudit;

namespace {

ScoreFunction table_fn(const FeatureSchema& schema, std::vector<double> table) {
  return ScoreFunction::from_table(schema, std::move(table), ScoreProvenance::custom, "full");
}

// A world with independent random f and g tables.
DiscreteWorld proxy_world(std::mt19937_64& rng, std::size_t extra_features,
                          std::size_t min_per_cell = 0) {
  const auto base = support::dyadic_world(rng, extra_features, min_per_cell);
  const auto g = support::dyadic_scores(rng, base.cells());
  return DiscreteWorld(base.schema(), base.p_table(), base.q_table(), base.f_table(), g);
}

// Recompute every term with the independent oracles.
struct BruteTerms {
  double structural, outcome_bias, input_bias, training_bias, total;
};

BruteTerms brute_decompose(const DiscreteWorld& world, const Representation& r,
                           const std::vector<double>& t_table,
                           const oracle::GroupWeights& w = {}) {
  const double df = support::brute_disparity(world, world.f_table());
  const double dg = support::brute_disparity(world, world.g_table());
  const auto h = support::brute_bayes_table(world, world.g_table(), r, w.advantaged,
                                            w.disadvantaged);
  const double dh = support::brute_disparity(world, h);
  const double dt = support::brute_disparity(world, t_table);
  return {df, dg - df, dh - dg, dt - dh, dt};
}

}  // namespace

TEST_CASE("collapsing every input attributes the whole proxy gap to input bias") {
  std::mt19937_64 rng(7);
  const auto world = proxy_world(rng, 2, 1);
  const auto none = Representation::retain(world.schema(), {});
  const auto h = oracle::bayes_predictor(world, world.g_table(), none);
  const auto report = decomp::decompose(world, none, h);

  const double dg = support::brute_disparity(world, world.g_table());
  CHECK(report.structural ==
        doctest::Approx(support::brute_disparity(world, world.f_table())).epsilon(1e-12));
  CHECK(report.outcome_bias == doctest::Approx(dg - report.structural).epsilon(1e-12));
  // h is constant, so its disparity vanishes and input bias cancels D(g).
  CHECK(report.input_bias == doctest::Approx(-dg).epsilon(1e-12));
  CHECK(std::abs(report.training_bias) <= 1e-12);
  CHECK(std::abs(report.total) <= 1e-12);
  CHECK(std::abs(report.residual) <= 1e-12);
}

TEST_CASE("random worlds: residual vanishes and terms match brute recomputation") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto world = proxy_world(rng, 1 + static_cast<std::size_t>(trial % 3));
    const auto r = support::random_representation(rng, world.schema());
    const auto t_table = support::dyadic_scores(rng, world.cells());
    const bool custom = trial % 4 == 0;
    const oracle::GroupWeights w = custom ? oracle::GroupWeights{0.75, 0.25}
                                          : oracle::GroupWeights{};

    const auto report =
        decomp::decompose(world, r, table_fn(world.schema(), t_table), w);
    CHECK(std::abs(report.residual) <= 1e-9);
    CHECK(report.total == doctest::Approx(report.structural + report.outcome_bias +
                                          report.input_bias + report.training_bias +
                                          report.residual)
                              .epsilon(1e-12));

    const auto brute = brute_decompose(world, r, t_table, w);
    CHECK(report.structural == doctest::Approx(brute.structural).epsilon(1e-12));
    CHECK(report.outcome_bias == doctest::Approx(brute.outcome_bias).epsilon(1e-12));
    CHECK(report.input_bias == doctest::Approx(brute.input_bias).epsilon(1e-12));
    CHECK(report.training_bias == doctest::Approx(brute.training_bias).epsilon(1e-12));
    CHECK(report.total == doctest::Approx(brute.total).epsilon(1e-12));
  }
}

TEST_CASE("deploying the implied predictor leaves no training bias") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto world = proxy_world(rng, 2);
    const auto r = support::random_representation(rng, world.schema());
    const auto h = oracle::bayes_predictor(world, world.g_table(), r);
    const auto report = decomp::decompose(world, r, h);
    CHECK(std::abs(report.training_bias) <= 1e-12);
    CHECK(std::abs(report.residual) <= 1e-12);
  }
}

TEST_CASE("identity representation with the proxy as screener isolates the proxy gap") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto world = proxy_world(rng, 2, 1);
    const auto id = Representation::identity(world.schema());
    const auto report = decomp::decompose(world, id, table_fn(world.schema(), world.g_table()));
    CHECK(std::abs(report.input_bias) <= 1e-12);
    CHECK(std::abs(report.training_bias) <= 1e-12);
    CHECK(report.total ==
          doctest::Approx(support::brute_disparity(world, world.g_table())).epsilon(1e-12));
  }
}

TEST_CASE("honest proxy produces exactly zero outcome bias") {
  std::mt19937_64 rng(19);
  const auto base = support::dyadic_world(rng, 2);
  const DiscreteWorld world(base.schema(), base.p_table(), base.q_table(), base.f_table(),
                            base.f_table());  // proxy g is f itself
  const auto r = Representation::identity(world.schema());
  const auto report = decomp::decompose(world, r, table_fn(world.schema(), world.f_table()));
  CHECK(report.outcome_bias == 0.0);
}

TEST_CASE("floored ratings push input bias strictly positive") {
  scenarios::ScenarioSpec spec;
  spec.name = "biased_ratings";
  spec.n = 100;  // the analytic world is what matters here
  spec.seed = 1;
  const auto out = scenarios::generate(spec);
  REQUIRE(out.world.has_value());
  const auto& world = *out.world;
  const auto r = Representation::drop(world.schema(), {"group"});
  const auto h = oracle::bayes_predictor(world, world.g_table(), r);
  const auto report = decomp::decompose(world, r, h);

  // Groups are equally talented and the proxy is honest; the whole deployed
  // gap comes from scoring ratings without knowing who was floored.
  CHECK(std::abs(report.structural) <= 1e-12);
  CHECK(report.outcome_bias == 0.0);
  CHECK(report.input_bias > 0.1);
  CHECK(std::abs(report.training_bias) <= 1e-12);
  CHECK(report.total == doctest::Approx(report.input_bias).epsilon(1e-9));
  CHECK(std::abs(report.residual) <= 1e-12);
}

TEST_CASE("mirrored world with symmetric tables has no disparity anywhere") {
  // Masses mirrored across groups, scores equal on mirrored cells: every
  // disparity integral cancels pairwise.
  const auto schema = support::binary_schema(1);
  const std::vector<double> p{0.75, 0.0, 0.25, 0.0};
  const std::vector<double> q{0.0, 0.75, 0.0, 0.25};
  const std::vector<double> f{0.25, 0.25, 0.875, 0.875};
  const std::vector<double> g{0.5, 0.5, 0.75, 0.75};
  const DiscreteWorld world(schema, p, q, f, g);
  const auto r = Representation::drop(schema, {"group"});
  const auto report = decomp::decompose(world, r, table_fn(schema, g));
  CHECK(std::abs(report.structural) <= 1e-12);
  CHECK(std::abs(report.outcome_bias) <= 1e-12);
  CHECK(std::abs(report.input_bias) <= 1e-12);
  CHECK(std::abs(report.training_bias) <= 1e-12);
  CHECK(std::abs(report.total) <= 1e-12);
}

TEST_CASE("enumerated data reproduces the exact decomposition") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto world = proxy_world(rng, 2);
    const auto r = support::random_representation(rng, world.schema());
    const auto t_table = support::dyadic_scores(rng, world.cells());
    const auto t = table_fn(world.schema(), t_table);

    const auto exact = decomp::decompose(world, r, t);
    const auto data = enumerate_world(world);
    const auto emp = decomp::decompose_empirical(data, "f", "g", r, t, {}, 10, 0);

    CHECK(emp.report.structural == doctest::Approx(exact.structural).epsilon(1e-12));
    CHECK(emp.report.outcome_bias == doctest::Approx(exact.outcome_bias).epsilon(1e-12));
    CHECK(emp.report.input_bias == doctest::Approx(exact.input_bias).epsilon(1e-12));
    CHECK(emp.report.training_bias == doctest::Approx(exact.training_bias).epsilon(1e-12));
    CHECK(emp.report.total == doctest::Approx(exact.total).epsilon(1e-12));
    CHECK(emp.report.note.has_value());
  }
}

TEST_CASE("sampled data lands within three bootstrap errors of the exact terms") {
  std::mt19937_64 rng(29);
  const auto world = proxy_world(rng, 2, 1);
  const auto r = Representation::drop(world.schema(), {"group"});
  const auto t_table = support::dyadic_scores(rng, world.cells());
  const auto t = table_fn(world.schema(), t_table);

  const auto exact = decomp::decompose(world, r, t);
  const auto data = sample_world(world, 50000, 0.5, 424242);
  const auto emp = decomp::decompose_empirical(data, "f", "g", r, t, {}, 200, 7);

  CHECK(emp.bootstrap_resamples == 200);
  CHECK(emp.se_total > 0.0);
  CHECK(std::abs(emp.report.structural - exact.structural) <= 3.0 * emp.se_structural);
  CHECK(std::abs(emp.report.outcome_bias - exact.outcome_bias) <= 3.0 * emp.se_outcome_bias);
  CHECK(std::abs(emp.report.input_bias - exact.input_bias) <= 3.0 * emp.se_input_bias);
  CHECK(std::abs(emp.report.training_bias - exact.training_bias) <= 3.0 * emp.se_training_bias);
  CHECK(std::abs(emp.report.total - exact.total) <= 3.0 * emp.se_total);
}

TEST_CASE("bootstrap is reproducible under its seed") {
  std::mt19937_64 rng(31);
  const auto world = proxy_world(rng, 1, 1);
  const auto r = Representation::drop(world.schema(), {"group"});
  const auto t = table_fn(world.schema(), world.g_table());
  const auto data = sample_world(world, 2000, 0.5, 9);
  const auto a = decomp::decompose_empirical(data, "f", "g", r, t, {}, 50, 3);
  const auto b = decomp::decompose_empirical(data, "f", "g", r, t, {}, 50, 3);
  CHECK(a.se_structural == b.se_structural);
  CHECK(a.se_total == b.se_total);
  const auto c = decomp::decompose_empirical(data, "f", "g", r, t, {}, 50, 4);
  CHECK(a.se_total != c.se_total);
}

TEST_CASE("fitted screeners slot into the decomposition") {
  std::mt19937_64 rng(37);
  const auto base = proxy_world(rng, 1, 1);
  // The screener is trained on sampled data whose schema carries the f/g
  // outcome columns; give the world the same schema so the digests agree.
  const FeatureSchema ds(base.schema().features(), base.schema().group_feature(), {"f", "g"});
  const DiscreteWorld world(ds, base.p_table(), base.q_table(), base.f_table(), base.g_table());
  const auto data = sample_world(world, 4000, 0.5, 5);
  trainer::TrainConfig cfg;
  cfg.seed = 1;
  const auto r = Representation::drop(ds, {"group"});
  const auto screener = trainer::train(data, "g", r, cfg);
  const auto report = decomp::decompose(world, r, screener);
  CHECK(std::abs(report.residual) <= 1e-9);
  CHECK(std::isfinite(report.total));
  CHECK(!report.screener_provenance.empty());
}
