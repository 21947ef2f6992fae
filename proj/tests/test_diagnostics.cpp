#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oracle.hpp"
#include "pvalert/diagnostics.hpp"
#include "pvalert/error.hpp"
#include "pvalert/pvalue.hpp"

using namespace pvalert;

namespace {

std::vector<double> uniform_pvalues(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  const UnivariateGaussian g;
  std::vector<double> out(n);
  for (auto& p : out) p = pvalue_gaussian_1d(g, z(rng)).value();
  return out;
}

}  // namespace

TEST_CASE("expected counts are beta times n exactly, actual counts are monotone") {
  const auto pv = uniform_pvalues(200, 1);
  const std::vector<double> grid = {0.01, 0.05, 0.1, 0.5, 1.0};
  const auto r = expected_vs_actual(pv, grid, true);
  CHECK(r.n == 200);
  CHECK(r.expected[0] == 2.0);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(r.expected[i] == grid[i] * 200.0);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(r.actual[i] >= r.actual[i - 1]);
  CHECK(r.actual.back() == 200);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto brute = std::count_if(pv.begin(), pv.end(), [&](double p) { return p <= grid[i]; });
    CHECK(r.actual[i] == static_cast<std::uint64_t>(brute));
  }
}

TEST_CASE("a correct Gaussian model gives ConsistentFit") {
  int consistent = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = expected_vs_actual(uniform_pvalues(100000, seed), log_grid(1e-4, 1e-1, 20), true);
    if (r.verdict == Verdict::ConsistentFit) ++consistent;
  }
  CHECK(consistent == 20);
}

TEST_CASE("over-production gives TailsTooThick") {
  std::vector<double> pv(200, 0.5);
  for (int i = 0; i < 61; ++i) pv[i] = 0.001;
  std::vector<double> grid = log_grid(1e-4, 1e-1, 20);
  grid.insert(std::lower_bound(grid.begin(), grid.end(), 0.01), 0.01);
  const auto r = expected_vs_actual(pv, grid, true);
  const auto at = r.find(0.01);
  REQUIRE(at.has_value());
  CHECK(r.expected[*at] == 2.0);
  CHECK(r.actual[*at] == 61);
  CHECK(r.verdict == Verdict::TailsTooThick);
  CHECK_FALSE(r.annotation.empty());
}

TEST_CASE("under-production is informative only with equality") {
  const std::vector<double> ones(200, 1.0);
  const auto grid = log_grid(1e-4, 1e-1, 20);
  const auto loose = expected_vs_actual(ones, grid, false);
  CHECK(loose.actual.front() == 0);
  CHECK(loose.verdict == Verdict::ConsistentFit);
  const auto strict = expected_vs_actual(uniform_pvalues(1000, 2), grid, true);
  CHECK(strict.verdict != Verdict::TailsTooThin);
  std::vector<double> thin = uniform_pvalues(100000, 3);
  for (auto& p : thin) p = std::min(1.0, 0.2 + p);
  CHECK(expected_vs_actual(thin, grid, true).verdict == Verdict::TailsTooThin);
  CHECK(expected_vs_actual(thin, grid, false).verdict == Verdict::ConsistentFit);
}

TEST_CASE("no eligible grid point is inconclusive") {
  const std::vector<double> pv = {0.3, 0.7};
  CHECK(expected_vs_actual(pv, std::vector<double>{0.01, 0.1}, true).verdict == Verdict::Inconclusive);
}

TEST_CASE("diagnostics input checks") {
  const std::vector<double> grid = {0.1, 1.0};
  CHECK_THROWS_AS(expected_vs_actual(std::vector<double>{}, grid, true), InputError);
  CHECK_THROWS_AS(expected_vs_actual(std::vector<double>{1.2}, grid, true), InputError);
  CHECK_THROWS_AS(expected_vs_actual(std::vector<double>{0.5}, std::vector<double>{0.5, 0.1}, true), ConfigError);
  CHECK_THROWS_AS(expected_vs_actual(std::vector<double>{0.5}, std::vector<double>{0.0}, true), ConfigError);
}

TEST_CASE("grids") {
  const auto g = log_grid(1e-4, 1e-1, 20);
  REQUIRE(g.size() == 21);
  CHECK(g.front() == doctest::Approx(1e-4));
  CHECK(g[19] == doctest::Approx(1e-1));
  CHECK(g.back() == 1.0);
  CHECK(std::is_sorted(g.begin(), g.end()));
  CHECK(parse_grid("log:1e-4:1e-1:20") == g);
  CHECK(parse_grid("list:0.01,0.05,1") == std::vector<double>{0.01, 0.05, 1.0});
  CHECK_THROWS_AS(parse_grid("log:1e-4"), ConfigError);
  CHECK(parse_grid("list:0.5,0.1") == std::vector<double>{0.1, 0.5});
  CHECK_THROWS_AS(parse_grid("list:0.5,2"), ConfigError);
  CHECK_THROWS_AS(parse_grid("bogus"), ConfigError);
}

TEST_CASE("equality eligibility and attained levels") {
  CHECK(equality_eligible(ModelFamily::MultivariateGaussian));
  CHECK(equality_eligible(ModelFamily::UnivariateGaussian));
  CHECK_FALSE(equality_eligible(ModelFamily::Discrete));
  CHECK(attained_levels(DiscreteModel({0.25, 0.25, 0.25, 0.25})) == std::vector<double>{1.0});
  const auto tri = attained_levels(DiscreteModel({1.0 / 6, 1.0 / 3, 1.0 / 2}));
  CHECK(tri == std::vector<double>{1.0 / 6, 0.5, 1.0});

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 10;
    std::vector<double> w(k);
    double total = 0;
    for (auto& x : w) total += (x = static_cast<double>(rng() % 5));
    if (total == 0) continue;
    for (auto& x : w) x /= total;
    const DiscreteModel m(w);
    std::vector<double> image;
    for (std::size_t i = 0; i < k; ++i) image.push_back(oracle::oracle_pvalue_discrete(m, i).value());
    std::sort(image.begin(), image.end());
    image.erase(std::unique(image.begin(), image.end()), image.end());
    CHECK(attained_levels(m) == image);
  }
}

TEST_CASE("expected alert fraction never exceeds beta") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + trial % 8;
    std::vector<double> w(k);
    double total = 0;
    for (auto& x : w) total += (x = 1.0 + static_cast<double>(rng() % 7));
    for (auto& x : w) x /= total;
    const DiscreteModel m(w);
    for (int i = 0; i <= 100; ++i) {
      const double beta = i / 100.0;
      CHECK(expected_alert_fraction(m, beta) <= beta + 1e-15);
    }
    for (double level : attained_levels(m)) CHECK(expected_alert_fraction(m, level) == level);
  }
}

TEST_CASE("report serialization") {
  const auto r = expected_vs_actual(uniform_pvalues(500, 9), std::vector<double>{0.01, 0.1, 1.0}, true);
  std::ostringstream csv;
  write_report_csv(csv, r);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "beta,expected,actual,ratio");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);
  std::ostringstream table;
  write_report_table(table, r);
  CHECK(table.str().find("verdict=") != std::string::npos);
}
