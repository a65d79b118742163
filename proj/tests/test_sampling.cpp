#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <vector>

#include "qcopilot/error.hpp"
#include "qcopilot/io/csv.hpp"
#include "qcopilot/sampling/lhs.hpp"

using namespace qcp;
using namespace qcp::sampling;

TEST_SUITE("sampling") {
  TEST_CASE("designs are stratified") {
    const auto one = latin_hypercube(1, 3, 2);
    CHECK(one.points.rows() == 1);
    CHECK(is_stratified(one.points));
    CHECK(std::isinf(one.maximin_distance));

    const auto line = latin_hypercube(4, 1, 9);
    std::vector<int> strata;
    for (int i = 0; i < 4; ++i) strata.push_back(static_cast<int>(line.points(i, 0) * 4));
    std::sort(strata.begin(), strata.end());
    CHECK(strata == std::vector<int>{0, 1, 2, 3});

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto d = latin_hypercube(50, 5, seed);
      CHECK(d.seed == seed);
      CHECK(is_stratified(d.points));
      CHECK(d.points.minCoeff() >= 0.0);
      CHECK(d.points.maxCoeff() <= 1.0);
    }
    CHECK_THROWS_AS(latin_hypercube(0, 2, 1), ArityError);
    CHECK_THROWS_AS(latin_hypercube(3, 0, 1), ArityError);
  }

  TEST_CASE("is_stratified rejects a doubled stratum") {
    Eigen::MatrixXd p(2, 1);
    p << 0.1, 0.2;
    CHECK_FALSE(is_stratified(p));
    p << 0.1, 1.0;
    CHECK(is_stratified(p));
  }

  TEST_CASE("same seed, same design") {
    CHECK(latin_hypercube(30, 4, 77).points == latin_hypercube(30, 4, 77).points);
    CHECK(latin_hypercube(30, 4, 77).points != latin_hypercube(30, 4, 78).points);
  }

  TEST_CASE("zero iterations leave the design unchanged") {
    const auto d = latin_hypercube(20, 3, 4);
    const auto o = optimize_maximin(d, 0, 1);
    CHECK(o.points == d.points);
    CHECK(o.maximin_distance == d.maximin_distance);
  }

  TEST_CASE("annealing never lowers the maximin distance and keeps stratification") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto d = latin_hypercube(30, 4, seed);
      double prev = d.maximin_distance;
      for (std::size_t iters : {10u, 100u, 1000u}) {
        AnnealStats stats;
        const auto o = optimize_maximin(d, iters, seed, &stats);
        CHECK(stats.proposals == iters);
        CHECK(stats.accepted <= stats.proposals);
        CHECK(is_stratified(o.points));
        CHECK(o.maximin_distance >= d.maximin_distance);
        CHECK(o.maximin_distance == doctest::Approx(maximin_distance(o.points)).epsilon(1e-15));
        prev = std::max(prev, o.maximin_distance);
      }
    }
  }

  TEST_CASE("optimized designs beat the median random design") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      std::vector<double> random;
      for (std::uint64_t r = 0; r < 100; ++r) random.push_back(latin_hypercube(50, 5, 1000 * seed + r).maximin_distance);
      std::nth_element(random.begin(), random.begin() + 50, random.end());
      const auto o = optimize_maximin(latin_hypercube(50, 5, seed), 10000, seed);
      CHECK(o.maximin_distance >= random[50]);
    }
  }

  TEST_CASE("marginal empirical CDF stays within 1/n of uniform") {
    const std::size_t n = 200;
    const auto d = optimize_maximin(latin_hypercube(n, 3, 12), 2000, 3);
    for (Eigen::Index k = 0; k < 3; ++k) {
      std::vector<double> col(d.points.col(k).data(), d.points.col(k).data() + n);
      std::sort(col.begin(), col.end());
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - col[i]));
        worst = std::max(worst, std::abs(static_cast<double>(i) / n - col[i]));
      }
      CHECK(worst <= 1.0 / n + 1e-12);
    }
  }

  TEST_CASE("csv export") {
    const auto d = latin_hypercube(7, 2, 5);
    const auto path = std::filesystem::temp_directory_path() / "qcp_design_test.csv";
    write_design_csv(d, path);
    const auto t = io::read_csv(path);
    CHECK(t.header == std::vector<std::string>{"x1", "x2"});
    REQUIRE(t.rows.size() == 7);
    for (int i = 0; i < 7; ++i)
      for (int k = 0; k < 2; ++k) CHECK(io::parse_double(t.rows[i][k]) == d.points(i, k));
    std::filesystem::remove(path);
  }
}
