#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "screenaudit/errors.hpp"
#include "screenaudit/io.hpp"
#include "screenaudit/model.hpp"
#include "support.hpp"

using namespace screenaudit;

namespace {

DiscreteWorld trivial_world() {
  // (x, group); p on group=0 cells, q on group=1 cells.
  const auto schema = support::binary_schema(1);
  return DiscreteWorld(schema, {0.5, 0.0, 0.5, 0.0}, {0.0, 0.25, 0.0, 0.75}, {0, 0, 1, 1},
                       {0, 0, 1, 1});
}

}  // namespace

TEST_CASE("cell index enumerates row-major with the last feature fastest") {
  const auto schema = support::binary_schema(2);  // x1, x2, group
  REQUIRE(schema.cell_count() == 8);
  for (std::size_t c = 0; c < 8; ++c) {
    const auto vals = cell_values(schema, c);
    CHECK(cell_index(schema, vals) == c);
  }
  CHECK(cell_index(schema, std::vector<double>{0, 0, 1}) == 1);
  CHECK(cell_index(schema, std::vector<double>{0, 1, 0}) == 2);
  CHECK(cell_index(schema, std::vector<double>{1, 0, 0}) == 4);
  CHECK_THROWS_AS(cell_values(schema, 8), ParameterError);
  CHECK_THROWS_AS(cell_index(schema, std::vector<double>{0, 0}), ValidationError);
  CHECK_THROWS_AS(cell_index(schema, std::vector<double>{0, 0, 2}), ValidationError);
  CHECK_THROWS_AS(cell_index(schema, std::vector<double>{0, 0, 0.5}), ValidationError);
}

TEST_CASE("schema lookups and digests") {
  const auto schema = support::binary_schema(2, {"f", "g"});
  CHECK(schema.index_of("x1") == 0);
  CHECK(schema.group_index() == 2);
  CHECK(schema.group_feature() == "group");
  CHECK(schema.outcome_index("g") == 1);
  CHECK_THROWS_AS(schema.index_of("nope"), ParameterError);
  CHECK_THROWS_AS(schema.outcome_index("nope"), ParameterError);
  CHECK(schema.digest() == support::binary_schema(2, {"f", "g"}).digest());
  CHECK(schema.digest() != support::binary_schema(3, {"f", "g"}).digest());
}

TEST_CASE("make_vector enforces conformance") {
  const auto schema = support::binary_schema(1);
  CHECK_NOTHROW(make_vector(schema, {1, 0}));
  CHECK_THROWS_AS(make_vector(schema, {1}), ValidationError);
  CHECK_THROWS_AS(make_vector(schema, {2, 0}), ValidationError);
  CHECK_THROWS_AS(make_vector(schema, {0.5, 0}), ValidationError);
  const FeatureSchema with_real({support::real_spec("z", -1.0, 1.0), support::cat_spec("group", 2)},
                                "group", {});
  CHECK_NOTHROW(make_vector(with_real, {0.25, 1}));
  // Declared real ranges are descriptive, not conformance constraints.
  CHECK_NOTHROW(make_vector(with_real, {2.0, 1}));
  CHECK_THROWS_AS(make_vector(with_real, {std::nan(""), 1}), ValidationError);
}

TEST_CASE("well-formed world validates cleanly") {
  CHECK(validate_world(trivial_world()).empty());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto world = support::dyadic_world(rng, 1 + static_cast<std::size_t>(i % 3));
    CHECK(validate_world(world).empty());
  }
}

// Break exactly one invariant per case; expect exactly one violation carrying
// that invariant's name.
TEST_CASE("validation fuzzer: one broken invariant, one named violation") {
  const auto schema = support::binary_schema(1);
  const std::vector<double> p{0.5, 0.0, 0.5, 0.0};
  const std::vector<double> q{0.0, 0.25, 0.0, 0.75};
  const std::vector<double> s{0, 0, 1, 1};

  const auto only = [](const std::vector<Violation>& v, const std::string& name) {
    REQUIRE(v.size() == 1);
    CHECK(v.front().invariant == name);
  };

  SUBCASE("negative mass") {
    only(validate_world(DiscreteWorld(schema, {0.6, -0.1, 0.5, 0.0}, q, s, s)),
         "mass_nonnegative");
  }
  SUBCASE("p not normalized") {
    only(validate_world(DiscreteWorld(schema, {0.5, 0.0, 0.47, 0.0}, q, s, s)),
         "mass_normalized_p");
  }
  SUBCASE("q not normalized") {
    only(validate_world(DiscreteWorld(schema, p, {0.0, 0.25, 0.0, 0.72}, s, s)),
         "mass_normalized_q");
  }
  SUBCASE("non-finite f") {
    only(validate_world(
             DiscreteWorld(schema, p, q, {0, std::numeric_limits<double>::quiet_NaN(), 1, 1}, s)),
         "score_finite_f");
  }
  SUBCASE("non-finite g") {
    only(validate_world(
             DiscreteWorld(schema, p, q, s, {0, 0, std::numeric_limits<double>::infinity(), 1})),
         "score_finite_g");
  }
  SUBCASE("table size") {
    only(validate_world(DiscreteWorld(schema, {0.5, 0.5, 0.0}, q, s, s)), "table_size");
  }
  SUBCASE("state cap") {
    only(validate_world(DiscreteWorld(schema, p, q, s, s, 2)), "state_cap");
  }
  SUBCASE("real-valued feature") {
    const FeatureSchema bad(
        {support::real_spec("z", 0.0, 1.0), support::cat_spec("group", 2)}, "group", {});
    only(validate_world(DiscreteWorld(bad, p, q, s, s)), "schema_all_categorical");
  }
  SUBCASE("non-binary group") {
    // Rejected at schema construction, before world validation can run.
    CHECK_THROWS_AS(FeatureSchema({support::cat_spec("x1", 2), support::cat_spec("group", 3)},
                                  "group", {}),
                    ValidationError);
  }
}

TEST_CASE("dataset validation names its violations") {
  const auto schema = support::binary_schema(1, {"y"});
  Dataset data(schema, "test");
  DatasetRow ok;
  ok.features = make_vector(schema, {1, 0});
  ok.outcomes = {0.5};
  data.add_row(ok);
  CHECK(validate_dataset(data).empty());

  DatasetRow bad_weight = ok;
  bad_weight.weight = -1.0;
  data.add_row(bad_weight);
  DatasetRow bad_outcome = ok;
  bad_outcome.outcomes = {std::numeric_limits<double>::infinity()};
  data.add_row(bad_outcome);
  DatasetRow bad_row = ok;
  bad_row.features.values = {3.0, 0.0};
  data.add_row(bad_row);

  const auto violations = validate_dataset(data);
  REQUIRE(violations.size() == 3);
  CHECK(violations[0].invariant == "weight_nonnegative_finite");
  CHECK(violations[1].invariant == "outcome_finite");
  CHECK(violations[2].invariant == "row_conforms_to_schema");
}

TEST_CASE("score tables are total on the schema and reject non-finite values") {
  const auto schema = support::binary_schema(1);
  const auto s = ScoreFunction::from_table(schema, {0.0, 0.25, 0.5, 1.0},
                                           ScoreProvenance::custom, "full");
  CHECK(s(std::vector<double>{0, 1}) == 0.25);
  CHECK(s(std::vector<double>{1, 1}) == 1.0);
  CHECK(to_string(s.provenance()) == "custom");
  CHECK_THROWS_AS(
      ScoreFunction::from_table(schema, {0.0, 0.25}, ScoreProvenance::custom, "full"),
      ValidationError);
  const ScoreFunction nan_fn([](std::span<const double>) { return std::nan(""); },
                             ScoreProvenance::custom, "full");
  CHECK_THROWS_AS(nan_fn(std::vector<double>{0, 1}), EvaluationError);
}

TEST_CASE("representation idempotence: applying twice equals applying once") {
  std::mt19937_64 rng(7);
  const auto schema = support::binary_schema(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto r = support::random_representation(rng, schema);
    if (trial % 3 == 0) r.coarsen_categorical("x1", {0, 0});  // merge both values
    for (std::size_t c = 0; c < schema.cell_count(); ++c) {
      const auto once = r.apply(cell_values(schema, c));
      const auto twice = r.apply(once);
      CHECK(once == twice);
    }
  }
}

TEST_CASE("representation retain/drop/coarsen basics") {
  const auto schema = support::binary_schema(2);
  const auto id = Representation::identity(schema);
  CHECK(id.retains_group());
  CHECK(id.retained_indices().size() == 3);

  const auto blind = Representation::drop(schema, {"group"});
  CHECK_FALSE(blind.retains_group());
  CHECK(blind.retains("x1"));
  const auto vals = blind.apply(std::vector<double>{1, 1, 1});
  CHECK(vals == std::vector<double>{1, 1, 0});

  const auto nothing = Representation::retain(schema, {});
  CHECK(nothing.retained_indices().empty());
  CHECK(nothing.apply(std::vector<double>{1, 1, 1}) == std::vector<double>{0, 0, 0});

  CHECK_THROWS_AS(Representation::retain(schema, {"nope"}), ParameterError);
  CHECK(id.digest() != blind.digest());
  CHECK(blind.describe().find("x1") != std::string::npos);
}

TEST_CASE("empirical counts: degenerate four-row dataset") {
  // Advantaged rows both at x=1, disadvantaged rows both at x=0.
  const auto schema = support::binary_schema(1, {"y"});
  Dataset data(schema, "test");
  const auto add = [&](double x, double g, double y) {
    DatasetRow row;
    row.features = make_vector(schema, {x, g});
    row.outcomes = {y};
    data.add_row(row);
  };
  add(1, 0, 1.0);
  add(1, 0, 0.0);
  add(0, 1, 1.0);
  add(0, 1, 0.0);
  const auto ew = empirical_world(data, "y", "y");
  // Cells: (x, group) with group fastest: 0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1)
  CHECK(ew.world.p(2) == 1.0);
  CHECK(ew.world.q(1) == 1.0);
  CHECK(ew.world.p(0) == 0.0);
  CHECK(ew.world.q(3) == 0.0);
  CHECK(ew.world.f(2) == 0.5);  // pooled within-cell mean
  CHECK(ew.world.f(1) == 0.5);
  // Unobserved cells are flagged and carry score 0.
  REQUIRE(ew.unsupported_cells.size() == 2);
  CHECK(ew.world.f(0) == 0.0);
  CHECK(ew.world.f(3) == 0.0);
}

TEST_CASE("empirical_world requires both groups and uncensored outcomes") {
  const auto schema = support::binary_schema(1, {"y"});
  Dataset one_group(schema, "test");
  DatasetRow row;
  row.features = make_vector(schema, {0, 0});
  row.outcomes = {1.0};
  one_group.add_row(row);
  CHECK_THROWS_AS(empirical_world(one_group, "y", "y"), InsufficientDataError);

  Dataset censored(schema, "test");
  censored.add_row(row);
  DatasetRow na;
  na.features = make_vector(schema, {0, 1});
  na.outcomes = {std::nullopt};
  censored.add_row(na);
  CHECK_THROWS_AS(empirical_world(censored, "y", "y"), ValidationError);

  const FeatureSchema with_real(
      {support::real_spec("z", -10.0, 10.0), support::cat_spec("group", 2)}, "group", {"y"});
  Dataset real_data(with_real, "test");
  DatasetRow rr;
  rr.features = make_vector(with_real, {0.5, 0});
  rr.outcomes = {1.0};
  real_data.add_row(rr);
  rr.features = make_vector(with_real, {0.5, 1});
  real_data.add_row(rr);
  CHECK_THROWS_AS(empirical_world(real_data, "y", "y"), SchemaError);
}

TEST_CASE("enumerate then re-estimate reproduces dyadic worlds exactly") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 25; ++trial) {
    const auto world = support::dyadic_world(rng, 1 + static_cast<std::size_t>(trial % 3));
    const auto data = enumerate_world(world);
    const auto ew = empirical_world(data, "f", "g");
    for (std::size_t c = 0; c < world.cells(); ++c) {
      CHECK(ew.world.p(c) == world.p(c));
      CHECK(ew.world.q(c) == world.q(c));
      // Scores reproduce exactly on supported cells; unsupported are 0.
      if (world.p(c) + world.q(c) > 0.0) {
        CHECK(ew.world.f(c) == world.f(c));
        CHECK(ew.world.g(c) == world.g(c));
      }
    }
  }
}

TEST_CASE("sampling tracks the world's masses within 3 binomial SEs") {
  std::mt19937_64 rng(3);
  const auto world = support::dyadic_world(rng, 1, /*min_per_cell=*/1);
  const std::size_t n = 10000;
  const auto data = sample_world(world, n, 0.5, 99);
  REQUIRE(data.size() == n);
  std::vector<double> p_hat(world.cells(), 0.0), q_hat(world.cells(), 0.0);
  std::size_t n_adv = 0, n_dis = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto cell = cell_index(world.schema(), data.row(i).features.values);
    if (data.group_of(i) == kAdvantaged) {
      ++n_adv;
      p_hat[cell] += 1.0;
    } else {
      ++n_dis;
      q_hat[cell] += 1.0;
    }
    // Outcomes are the exact world scores at the drawn cell.
    CHECK(*data.row(i).outcomes[0] == world.f(cell));
    CHECK(*data.row(i).outcomes[1] == world.g(cell));
  }
  CHECK(n_adv + n_dis == n);
  CHECK(std::abs(static_cast<double>(n_dis) / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
  for (std::size_t c = 0; c < world.cells(); ++c) {
    const double ph = p_hat[c] / static_cast<double>(n_adv);
    const double qh = q_hat[c] / static_cast<double>(n_dis);
    const double se_p = std::sqrt(world.p(c) * (1.0 - world.p(c)) / n_adv);
    const double se_q = std::sqrt(world.q(c) * (1.0 - world.q(c)) / n_dis);
    CHECK(std::abs(ph - world.p(c)) <= 3.0 * se_p + 1e-12);
    CHECK(std::abs(qh - world.q(c)) <= 3.0 * se_q + 1e-12);
  }
}

TEST_CASE("sampling extends without reshuffling earlier rows") {
  std::mt19937_64 rng(4);
  const auto world = support::dyadic_world(rng, 2);
  const auto small = sample_world(world, 500, 0.4, 7);
  const auto large = sample_world(world, 1200, 0.4, 7);
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK(small.row(i).features.values == large.row(i).features.values);
    CHECK(small.row(i).outcomes == large.row(i).outcomes);
  }
}

TEST_CASE("dataset CSV round-trips including censored outcomes and comments") {
  const auto schema = FeatureSchema({support::real_spec("score", -5.0, 5.0),
                                     support::cat_spec("level", 3), support::cat_spec("group", 2)},
                                    "group", {"y1", "y2"});
  Dataset data(schema, "test");
  DatasetRow a;
  a.features = make_vector(schema, {1.25, 2, 0});
  a.outcomes = {0.5, std::nullopt};
  a.weight = 2.0;
  data.add_row(a);
  DatasetRow b;
  b.features = make_vector(schema, {-0.75, 0, 1});
  b.outcomes = {std::nullopt, -1.0};
  data.add_row(b);

  support::TempDir tmp;
  const auto path = tmp.path() / "data.csv";
  write_dataset_csv(data, path);
  // Comment lines are ignored on read.
  const auto original = read_text_file(path);
  write_text_file(path, "# a comment line\n" + original);
  const auto back = read_dataset_csv(path, schema);
  REQUIRE(back.size() == 2);
  CHECK(back.row(0).features.values == a.features.values);
  CHECK(back.row(0).outcomes == a.outcomes);
  CHECK(back.row(0).weight == 2.0);
  CHECK(back.row(1).outcomes == b.outcomes);
  CHECK(dataset_to_csv(back) == dataset_to_csv(data));
}

TEST_CASE("schema inference: small integer columns become categoricals") {
  support::TempDir tmp;
  const auto path = tmp.path() / "foreign.csv";
  write_text_file(path,
                  "age,level,group,y\n"
                  "41.5,2,0,1\n"
                  "23.25,0,1,0\n"
                  "33,1,1,1\n");
  const auto schema = infer_schema_from_csv(path, "group", {"y"});
  REQUIRE(schema.arity() == 3);
  CHECK(schema.feature(0).kind == FeatureKind::real);
  CHECK(schema.feature(1).kind == FeatureKind::categorical);
  CHECK(schema.feature(1).cardinality == 3);
  CHECK(schema.feature(2).cardinality == 2);
  CHECK(schema.group_feature() == "group");
  CHECK(schema.outcomes() == std::vector<std::string>{"y"});
  const auto data = read_dataset_csv(path, schema);
  CHECK(data.size() == 3);
  CHECK(data.group_of(0) == kAdvantaged);
  CHECK(data.group_of(2) == kDisadvantaged);
}

TEST_CASE("world JSON round-trips bit-exactly") {
  std::mt19937_64 rng(8);
  const auto world = support::dyadic_world(rng, 2);
  support::TempDir tmp;
  write_world(world, tmp.path() / "w.json");
  const auto back = read_world(tmp.path() / "w.json");
  CHECK(back.digest() == world.digest());
  CHECK(back.p_table() == world.p_table());
  CHECK(back.q_table() == world.q_table());
  CHECK(back.f_table() == world.f_table());
  CHECK(back.g_table() == world.g_table());
}

TEST_CASE("representation JSON round-trips") {
  const auto schema = support::binary_schema(3);
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const auto r = support::random_representation(rng, schema);
    const auto back = representation_from_json(representation_to_json(r), schema);
    CHECK(back.digest() == r.digest());
  }
}
