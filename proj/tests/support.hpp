#pragma once

// Shared test support: independent brute-force oracles and seeded generators.
// Everything here is written the straightforward way (plain left-to-right
// sums, explicit fiber enumeration, normal equations) so that library results
// are checked against code sharing no implementation with them.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "screenaudit/model.hpp"

namespace support {

// Masses on a 1/4096 grid and scores on a 1/256 grid keep every sum and every
// single-fiber conditional mean in these tests exactly representable, so
// equality assertions can be exact wherever the contract promises exactness.
inline constexpr double kMassGrid = 4096.0;
inline constexpr double kScoreGrid = 256.0;

inline screenaudit::FeatureSpec cat_spec(const std::string& name, int cardinality) {
  screenaudit::FeatureSpec f;
  f.name = name;
  f.kind = screenaudit::FeatureKind::categorical;
  f.cardinality = cardinality;
  return f;
}

inline screenaudit::FeatureSpec real_spec(const std::string& name, double lo, double hi) {
  screenaudit::FeatureSpec f;
  f.name = name;
  f.kind = screenaudit::FeatureKind::real;
  f.min = lo;
  f.max = hi;
  return f;
}

// Binary features x1..x{extra}, then the binary group feature last.
inline screenaudit::FeatureSchema binary_schema(std::size_t extra_features,
                                                std::vector<std::string> outcomes = {}) {
  std::vector<screenaudit::FeatureSpec> fs;
  for (std::size_t i = 0; i < extra_features; ++i) {
    fs.push_back(cat_spec("x" + std::to_string(i + 1), 2));
  }
  fs.push_back(cat_spec("group", 2));
  return screenaudit::FeatureSchema(std::move(fs), "group", std::move(outcomes));
}

// `units` balls dropped uniformly into the given cells; each cell optionally
// seeded with `min_per_cell` balls first (full-support worlds).
inline std::vector<double> dyadic_masses(std::mt19937_64& rng,
                                         const std::vector<std::size_t>& cells,
                                         std::size_t total_cells, int min_per_cell = 0) {
  std::vector<int> counts(total_cells, 0);
  int remaining = static_cast<int>(kMassGrid);
  for (std::size_t c : cells) {
    counts[c] = min_per_cell;
    remaining -= min_per_cell;
  }
  if (remaining < 0) throw std::logic_error("dyadic_masses: min_per_cell too large");
  std::uniform_int_distribution<std::size_t> pick(0, cells.size() - 1);
  for (int b = 0; b < remaining; ++b) ++counts[cells[pick(rng)]];
  std::vector<double> mass(total_cells, 0.0);
  for (std::size_t c = 0; c < total_cells; ++c) {
    mass[c] = static_cast<double>(counts[c]) / kMassGrid;
  }
  return mass;
}

inline std::vector<double> dyadic_scores(std::mt19937_64& rng, std::size_t cells,
                                         int max_units = 256) {
  std::uniform_int_distribution<int> pick(0, max_units);
  std::vector<double> s(cells);
  for (auto& v : s) v = static_cast<double>(pick(rng)) / kScoreGrid;
  return s;
}

inline std::vector<std::size_t> cells_of_group(const screenaudit::FeatureSchema& schema,
                                               int group) {
  std::vector<std::size_t> out;
  const std::size_t gi = schema.group_index();
  for (std::size_t c = 0; c < schema.cell_count(); ++c) {
    if (static_cast<int>(screenaudit::cell_values(schema, c)[gi]) == group) out.push_back(c);
  }
  return out;
}

// Group-consistent random world: p lives on group=0 cells, q on group=1 cells,
// all masses and scores dyadic. min_per_cell=1 gives full support.
inline screenaudit::DiscreteWorld dyadic_world(std::mt19937_64& rng, std::size_t extra_features,
                                               int min_per_cell = 0) {
  const auto schema = binary_schema(extra_features);
  const std::size_t cells = schema.cell_count();
  const auto adv = cells_of_group(schema, screenaudit::kAdvantaged);
  const auto dis = cells_of_group(schema, screenaudit::kDisadvantaged);
  return screenaudit::DiscreteWorld(schema, dyadic_masses(rng, adv, cells, min_per_cell),
                                    dyadic_masses(rng, dis, cells, min_per_cell),
                                    dyadic_scores(rng, cells), dyadic_scores(rng, cells));
}

// Random subset representation; may drop everything (collapse) or keep all.
inline screenaudit::Representation random_representation(
    std::mt19937_64& rng, const screenaudit::FeatureSchema& schema) {
  std::bernoulli_distribution coin(0.6);
  std::vector<std::string> keep;
  for (const auto& f : schema.features()) {
    if (coin(rng)) keep.push_back(f.name);
  }
  return screenaudit::Representation::retain(schema, keep);
}

// --- independent oracles -----------------------------------------------------

// Plain left-to-right sum, no compensation.
inline double brute_disparity(const screenaudit::DiscreteWorld& world,
                              const std::vector<double>& values) {
  double sum = 0.0;
  for (std::size_t c = 0; c < world.cells(); ++c) {
    sum += (world.p(c) - world.q(c)) * values[c];
  }
  return sum;
}

// Composite h(r(x)) via direct fiber enumeration; zero-mass fibers fall back
// to the pooled global mean of the target.
inline std::vector<double> brute_bayes_table(const screenaudit::DiscreteWorld& world,
                                             const std::vector<double>& target,
                                             const screenaudit::Representation& r,
                                             double w_advantaged = 0.5,
                                             double w_disadvantaged = 0.5) {
  const auto& schema = world.schema();
  const std::size_t cells = world.cells();
  std::map<std::vector<double>, std::pair<double, double>> fibers;  // mass, mass*target
  double pooled_mean = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    const double m = w_advantaged * world.p(c) + w_disadvantaged * world.q(c);
    auto& f = fibers[r.apply(screenaudit::cell_values(schema, c))];
    f.first += m;
    f.second += m * target[c];
    pooled_mean += m * target[c];
  }
  std::vector<double> h(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const auto& f = fibers.at(r.apply(screenaudit::cell_values(schema, c)));
    h[c] = f.first > 0.0 ? f.second / f.first : pooled_mean;
  }
  return h;
}

// Evaluate a score function on every cell of an all-categorical schema.
inline std::vector<double> score_table(const screenaudit::ScoreFunction& s,
                                       const screenaudit::FeatureSchema& schema) {
  const std::size_t cells = schema.cell_count();
  std::vector<double> out(cells);
  for (std::size_t c = 0; c < cells; ++c) out[c] = s(screenaudit::cell_values(schema, c));
  return out;
}

// Ordinary least squares by normal equations + Gaussian elimination with
// partial pivoting. X is row-major with `cols` columns.
inline std::vector<double> solve_least_squares(const std::vector<double>& X, std::size_t cols,
                                               const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> a(cols * cols, 0.0), b(cols, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double xij = X[i * cols + j];
      b[j] += xij * y[i];
      for (std::size_t k = 0; k < cols; ++k) a[j * cols + k] += xij * X[i * cols + k];
    }
  }
  for (std::size_t col = 0; col < cols; ++col) {
    std::size_t piv = col;
    for (std::size_t row = col + 1; row < cols; ++row) {
      if (std::abs(a[row * cols + col]) > std::abs(a[piv * cols + col])) piv = row;
    }
    if (piv != col) {
      for (std::size_t k = 0; k < cols; ++k) std::swap(a[piv * cols + k], a[col * cols + k]);
      std::swap(b[piv], b[col]);
    }
    const double d = a[col * cols + col];
    if (d == 0.0) throw std::runtime_error("singular normal equations");
    for (std::size_t row = col + 1; row < cols; ++row) {
      const double factor = a[row * cols + col] / d;
      for (std::size_t k = col; k < cols; ++k) a[row * cols + k] -= factor * a[col * cols + k];
      b[row] -= factor * b[col];
    }
  }
  std::vector<double> theta(cols);
  for (std::size_t col = cols; col-- > 0;) {
    double s = b[col];
    for (std::size_t k = col + 1; k < cols; ++k) s -= a[col * cols + k] * theta[k];
    theta[col] = s / a[col * cols + col];
  }
  return theta;
}

template <typename Loss>
double central_diff(const Loss& loss, std::vector<double> theta, std::size_t i, double h) {
  theta[i] += h;
  const double up = loss(theta);
  theta[i] -= 2.0 * h;
  const double down = loss(theta);
  return (up - down) / (2.0 * h);
}

// Descending score, ties by ascending id.
inline std::vector<std::string> brute_top_k(const std::vector<std::string>& ids,
                                            const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (scores[x] != scores[y]) return scores[x] > scores[y];
    return ids[x] < ids[y];
  });
  order.resize(k);
  std::vector<std::string> out;
  out.reserve(k);
  for (auto i : order) out.push_back(ids[i]);
  return out;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "screenaudit_test_XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (::mkdtemp(buf.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace support
