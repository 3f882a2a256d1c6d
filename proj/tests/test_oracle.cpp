#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "screenaudit/errors.hpp"
#include "screenaudit/oracle.hpp"
#include "support.hpp"

using namespace screenaudit;

namespace {

ScoreFunction table_fn(const FeatureSchema& schema, std::vector<double> t) {
  return ScoreFunction::from_table(schema, std::move(t), ScoreProvenance::custom, "full");
}

}  // namespace

TEST_CASE("disparity: hand-enumerated two-cell value") {
  // x in {0,1} with v(x) = x; advantaged mass (0.2, 0.8), disadvantaged
  // (0.6, 0.4): D = (0.8 - 0.4) * 1 + (0.2 - 0.6) * 0 = 0.4.
  const auto schema = support::binary_schema(1);
  const DiscreteWorld world(schema, {0.2, 0.0, 0.8, 0.0}, {0.0, 0.6, 0.0, 0.4}, {0, 0, 1, 1},
                            {0, 0, 1, 1});
  const auto v = table_fn(schema, {0, 0, 1, 1});  // v reads x only
  CHECK(oracle::disparity(world, v) == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("disparity: constant v and p=q both give zero") {
  std::mt19937_64 rng(5);
  const auto world = support::dyadic_world(rng, 2);
  const auto& schema = world.schema();
  const auto constant = table_fn(schema, std::vector<double>(world.cells(), 0.7));
  CHECK(std::abs(oracle::disparity(world, constant)) <= 1e-15);

  // Identical distributions: share one mass table across both groups (the
  // group coordinate is dropped so v cannot distinguish the groups).
  const std::vector<double> m{0.25, 0.25, 0.125, 0.125, 0.125, 0.0, 0.125, 0.0};
  const auto big = support::binary_schema(2);
  const DiscreteWorld same(big, m, m, std::vector<double>(8, 0.0), std::vector<double>(8, 0.0));
  const auto v = table_fn(big, support::dyadic_scores(rng, 8));
  CHECK(std::abs(oracle::disparity(same, v)) <= 1e-15);
}

TEST_CASE("disparity sign: positive means the advantaged average is higher") {
  const auto schema = support::binary_schema(1);
  // All advantaged mass on the unique cell maximizing v.
  const std::vector<double> v{0.0, 0.0, 1.0, 0.25};
  const DiscreteWorld world(schema, {0.0, 0.0, 1.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, v, v);
  CHECK(oracle::disparity(world, table_fn(schema, v)) > 0.0);
}

TEST_CASE("disparity matches the plain-sum oracle on random dyadic worlds") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto world = support::dyadic_world(rng, 1 + static_cast<std::size_t>(trial % 3));
    const auto t = support::dyadic_scores(rng, world.cells());
    const double lib = oracle::disparity(world, table_fn(world.schema(), t));
    const double brute = support::brute_disparity(world, t);
    CHECK(lib == doctest::Approx(brute).epsilon(1e-14));
    CHECK(lib == oracle::disparity_table(world, t));
  }
}

TEST_CASE("disparity is linear in the score function") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const auto world = support::dyadic_world(rng, 2);
    const auto v1 = support::dyadic_scores(rng, world.cells());
    const auto v2 = support::dyadic_scores(rng, world.cells());
    const double a = coef(rng), b = coef(rng);
    std::vector<double> mix(world.cells());
    for (std::size_t c = 0; c < mix.size(); ++c) mix[c] = a * v1[c] + b * v2[c];
    const auto& schema = world.schema();
    const double lhs = oracle::disparity(world, table_fn(schema, mix));
    const double rhs = a * oracle::disparity(world, table_fn(schema, v1)) +
                       b * oracle::disparity(world, table_fn(schema, v2));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("bayes predictor: identity representation reproduces the target") {
  std::mt19937_64 rng(17);
  const auto world = support::dyadic_world(rng, 2, /*min_per_cell=*/1);
  const auto target = support::dyadic_scores(rng, world.cells());
  const auto h = oracle::bayes_predictor(world, target, Representation::identity(world.schema()));
  const auto ht = support::score_table(h, world.schema());
  // Dyadic masses and scores make the conditional mean of a single cell exact.
  for (std::size_t c = 0; c < world.cells(); ++c) CHECK(ht[c] == target[c]);
}

TEST_CASE("bayes predictor: collapsing everything gives the pooled mean") {
  std::mt19937_64 rng(19);
  const auto world = support::dyadic_world(rng, 2);
  const auto target = support::dyadic_scores(rng, world.cells());
  const auto r = Representation::retain(world.schema(), {});
  const auto h = oracle::bayes_predictor(world, target, r);
  double mean = 0.0;
  for (std::size_t c = 0; c < world.cells(); ++c) {
    mean += 0.5 * (world.p(c) + world.q(c)) * target[c];
  }
  const auto ht = support::score_table(h, world.schema());
  for (double v : ht) CHECK(v == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("bayes predictor: dropped coordinate averages a uniform fiber to one half") {
  // Uniform masses, target = x2; dropping x2 leaves h = 0.5 on every cell.
  const auto schema = support::binary_schema(2);  // x1, x2, group
  std::vector<double> p(8, 0.0), q(8, 0.0), target(8, 0.0);
  for (std::size_t c = 0; c < 8; ++c) {
    const auto vals = cell_values(schema, c);
    if (static_cast<int>(vals[2]) == kAdvantaged) p[c] = 0.25;
    if (static_cast<int>(vals[2]) == kDisadvantaged) q[c] = 0.25;
    target[c] = vals[1];
  }
  const DiscreteWorld world(schema, p, q, target, target);
  const auto r = Representation::drop(schema, {"x2"});
  const auto ht =
      support::score_table(oracle::bayes_predictor(world, target, r), schema);
  for (double v : ht) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("bayes predictor matches the fiber-enumeration oracle") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const auto world = support::dyadic_world(rng, 1 + static_cast<std::size_t>(trial % 3));
    const auto target = support::dyadic_scores(rng, world.cells());
    const auto r = support::random_representation(rng, world.schema());
    const bool custom_weights = trial % 4 == 0;
    const oracle::GroupWeights w =
        custom_weights ? oracle::GroupWeights{0.75, 0.25} : oracle::GroupWeights{};
    const auto h = oracle::bayes_predictor(world, target, r, w);
    const auto lib = support::score_table(h, world.schema());
    const auto brute =
        support::brute_bayes_table(world, target, r, w.advantaged, w.disadvantaged);
    for (std::size_t c = 0; c < world.cells(); ++c) {
      CHECK(lib[c] == doctest::Approx(brute[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("bayes predictor: zero-mass fibers fall back to the pooled mean") {
  const auto schema = support::binary_schema(1);
  // Mass only at x=1; the x=0 fiber is empty under r = retain(x1).
  const DiscreteWorld world(schema, {0.0, 0.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 1.0},
                            {0.5, 0.5, 0.25, 0.75}, {0.5, 0.5, 0.25, 0.75});
  const auto r = Representation::retain(schema, {"x1"});
  const auto ht = support::score_table(
      oracle::bayes_predictor(world, world.f_table(), r), schema);
  CHECK(ht[2] == doctest::Approx(0.5).epsilon(1e-14));   // (0.25 + 0.75) / 2
  CHECK(ht[3] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(ht[0] == doctest::Approx(0.5).epsilon(1e-14));   // empty fiber -> pooled mean
}

TEST_CASE("bayes predictor is pooled-mean preserving and pooled-loss optimal") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const auto world = support::dyadic_world(rng, 2);
    const auto target = support::dyadic_scores(rng, world.cells());
    const auto r = support::random_representation(rng, world.schema());
    const auto ht =
        support::score_table(oracle::bayes_predictor(world, target, r), world.schema());

    const auto pooled_mean = [&](const std::vector<double>& v) {
      double m = 0.0;
      for (std::size_t c = 0; c < v.size(); ++c) m += 0.5 * (world.p(c) + world.q(c)) * v[c];
      return m;
    };
    CHECK(pooled_mean(ht) == doctest::Approx(pooled_mean(target)).epsilon(1e-12));

    const auto pooled_loss = [&](const std::vector<double>& v) {
      double loss = 0.0;
      for (std::size_t c = 0; c < v.size(); ++c) {
        const double d = target[c] - v[c];
        loss += 0.5 * (world.p(c) + world.q(c)) * d * d;
      }
      return loss;
    };
    const double base = pooled_loss(ht);
    // Perturbing h on any single fiber never lowers the pooled loss. A fiber
    // is identified by the reduced value, so shift all cells sharing one.
    for (std::size_t c0 = 0; c0 < world.cells(); ++c0) {
      const auto key = r.apply(cell_values(world.schema(), c0));
      for (double eps : {1e-3, -1e-3}) {
        auto bumped = ht;
        for (std::size_t c = 0; c < world.cells(); ++c) {
          if (r.apply(cell_values(world.schema(), c)) == key) bumped[c] += eps;
        }
        CHECK(pooled_loss(bumped) >= base - 1e-10);
      }
    }
  }
}

TEST_CASE("group weights are validated") {
  CHECK_NOTHROW(oracle::check_weights({0.3, 0.7}));
  CHECK_THROWS_AS(oracle::check_weights({-0.1, 1.1}), ParameterError);
  CHECK_THROWS_AS(oracle::check_weights({0.4, 0.4}), ParameterError);
  CHECK_THROWS_AS(oracle::check_weights({0.0, 0.0}), ParameterError);
}

TEST_CASE("enumerate_select: full capacity admits everyone") {
  std::mt19937_64 rng(31);
  const auto world = support::dyadic_world(rng, 2);
  const auto score = table_fn(world.schema(), support::dyadic_scores(rng, world.cells()));
  const auto sel = oracle::enumerate_select(world, score, 1.0);
  double pooled_f = 0.0, admitted_mass = 0.0;
  for (std::size_t c = 0; c < world.cells(); ++c) {
    const double pooled = 0.5 * (world.p(c) + world.q(c));
    pooled_f += pooled * world.f(c);
    admitted_mass += sel.admitted[c] * pooled;
    // Every supported cell is fully admitted.
    CHECK(sel.admitted[c] == (pooled > 0.0 ? 1.0 : 0.0));
  }
  CHECK(admitted_mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sel.mean_true_outcome == doctest::Approx(pooled_f).epsilon(1e-12));
  CHECK(sel.advantaged_rate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sel.disadvantaged_rate == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("enumerate_select: forced ordering on two scored cells") {
  const auto schema = support::binary_schema(1);
  // Group-consistent: advantaged at x=1 (score 0.9), disadvantaged at x=0
  // (score 0.1); capacity for half the pool admits only the high-score cell.
  const DiscreteWorld world(schema, {0.0, 0.0, 1.0, 0.0}, {1.0, 0.0, 0.0, 0.0},
                            {0, 0, 1, 1}, {0, 0, 1, 1});
  const auto score = table_fn(schema, {0.1, 0.1, 0.9, 0.9});
  const auto sel = oracle::enumerate_select(world, score, 0.5);
  CHECK(sel.admitted[2] == 1.0);
  CHECK(sel.admitted[0] == 0.0);
  CHECK(sel.threshold_score == 0.9);
  CHECK(sel.advantaged_rate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sel.disadvantaged_rate == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sel.advantaged_share_of_admitted == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("enumerate_select: fractional marginal cell by hand") {
  const auto schema = support::binary_schema(1);
  // Pooled masses: cell2 = 0.25, cell0 = 0.25, cell1 = 0.125, cell3 = 0.375.
  const DiscreteWorld world(schema, {0.5, 0.0, 0.5, 0.0}, {0.0, 0.25, 0.0, 0.75},
                            {0.2, 0.4, 0.8, 0.6}, {0.2, 0.4, 0.8, 0.6});
  const auto score = table_fn(schema, {0.1, 0.3, 0.9, 0.5});
  // Capacity 0.45: cell2 fully (0.25), then cell3 partially (0.2 of 0.375);
  // admitted[] holds the admitted fraction of each cell's pooled mass.
  const auto sel = oracle::enumerate_select(world, score, 0.45);
  CHECK(sel.admitted[2] == 1.0);
  CHECK(sel.admitted[3] == doctest::Approx(0.2 / 0.375).epsilon(1e-12));
  CHECK(sel.admitted[0] == 0.0);
  CHECK(sel.admitted[1] == 0.0);
  CHECK(sel.threshold_score == 0.5);
  const double want_mean = (0.25 * 0.8 + 0.2 * 0.6) / 0.45;
  CHECK(sel.mean_true_outcome == doctest::Approx(want_mean).epsilon(1e-12));
  // Rates are fractions of each group's own pooled mass (0.5 per group here):
  // admitted advantaged mass is cell2's 0.25, disadvantaged is cell3's 0.2.
  CHECK(sel.advantaged_rate == doctest::Approx(0.25 / 0.5).epsilon(1e-12));
  CHECK(sel.disadvantaged_rate == doctest::Approx(0.2 / 0.5).epsilon(1e-12));
  CHECK(sel.advantaged_share_of_admitted == doctest::Approx(0.25 / 0.45).epsilon(1e-12));
}

TEST_CASE("enumerate_select: ties break by canonical cell order") {
  const auto schema = support::binary_schema(1);
  const DiscreteWorld world(schema, {0.5, 0.0, 0.5, 0.0}, {0.0, 0.5, 0.0, 0.5},
                            {0, 0, 1, 1}, {0, 0, 1, 1});
  const auto score = table_fn(schema, {0.5, 0.5, 0.5, 0.5});
  const auto sel = oracle::enumerate_select(world, score, 0.25);
  CHECK(sel.admitted[0] == 1.0);
  CHECK(sel.admitted[1] == 0.0);
  CHECK(sel.admitted[2] == 0.0);
  CHECK(sel.admitted[3] == 0.0);
}

TEST_CASE("enumerate_select: mean f is non-increasing in capacity when score = f") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const auto world = support::dyadic_world(rng, 2);
    double last = std::numeric_limits<double>::infinity();
    for (double cap : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      const auto sel = oracle::enumerate_select(world, world.f_score(), cap);
      CHECK(sel.mean_true_outcome <= last + 1e-12);
      last = sel.mean_true_outcome;
    }
  }
}

TEST_CASE("enumerate_select validates capacity") {
  std::mt19937_64 rng(41);
  const auto world = support::dyadic_world(rng, 1);
  CHECK_THROWS_AS(oracle::enumerate_select(world, world.f_score(), 0.0), ParameterError);
  CHECK_THROWS_AS(oracle::enumerate_select(world, world.f_score(), 1.5), ParameterError);
}
