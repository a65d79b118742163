#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "qcopilot/error.hpp"
#include "qcopilot/rng.hpp"
#include "qcopilot/sampling/lhs.hpp"
#include "qcopilot/sim/backend.hpp"
#include "qcopilot/spaces.hpp"
#include "qcopilot/uq/uq.hpp"

using namespace qcp;
using namespace qcp::uq;

namespace {

CorrelationMatrix two_input(double r0, double r1) {
  CorrelationMatrix m;
  m.labels = {"a", "b", "y"};
  m.input_count = 2;
  m.values = Eigen::MatrixXd::Identity(3, 3);
  m.values(0, 2) = m.values(2, 0) = r0;
  m.values(1, 2) = m.values(2, 1) = r1;
  return m;
}

}  // namespace

TEST_SUITE("uq") {
  TEST_CASE("pearson basics") {
    Rng rng = make_rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd c(200, 3);
    for (int i = 0; i < 200; ++i) {
      c(i, 0) = n(rng);
      c(i, 1) = n(rng);
      c(i, 2) = 2.0 * c(i, 0) - c(i, 1) + 0.3 * n(rng);
    }
    const auto m = pearson_matrix({"a", "b", "y"}, 2, c);
    for (int i = 0; i < 3; ++i) CHECK(m.values(i, i) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.values == m.values.transpose());
    CHECK(m.at("a", "y") > 0.8);
    CHECK(m.at("b", "y") < -0.3);
    CHECK(m.sample_count == 200);

    // Positive affine maps of a column leave every coefficient unchanged.
    Eigen::MatrixXd t = c;
    t.col(0) = 3.5 * t.col(0).array() + 1e3;
    t.col(2) = 0.01 * t.col(2).array() - 7.0;
    const auto mt = pearson_matrix({"a", "b", "y"}, 2, t);
    CHECK((mt.values - m.values).cwiseAbs().maxCoeff() <= 1e-12);

    CHECK_THROWS_AS(pearson_matrix({"a", "b"}, 1, c.topRows(2).leftCols(2)), ArityError);
    CHECK_THROWS_AS(pearson_matrix({"a", "b"}, 1, c), ArityError);
  }

  TEST_CASE("constant column is degenerate") {
    Eigen::MatrixXd c(10, 2);
    for (int i = 0; i < 10; ++i) {
      c(i, 0) = 4.0;
      c(i, 1) = i;
    }
    const auto m = pearson_matrix({"a", "y"}, 1, c);
    CHECK(m.degenerate == std::vector<bool>{true, false});
    CHECK(m.at("a", "y") == 0.0);
    CHECK(m.at("a", "a") == 1.0);
  }

  TEST_CASE("noiseless MOT scan ranks intensity and gradient first") {
    sim::SimulatorConfig cfg;
    cfg.mot.noise_rel = 0.0;
    const sim::ColdAtomRig rig(cfg);
    const auto d = sampling::latin_hypercube(500, 5, 1);
    std::vector<ExperimentRecord> recs;
    for (int i = 0; i < 500; ++i) {
      std::vector<double> u(5);
      for (int k = 0; k < 5; ++k) u[k] = d.points(i, k);
      ExperimentRecord r;
      r.setting = denormalize(rig.mot(), u);
      r.raw_observables = rig.shoot_mot(r.setting, 5).observables;
      recs.push_back(r);
    }
    const auto m = pearson_matrix(recs, rig.mot(), {kPixelIntegral});
    const std::vector<std::pair<std::string, double>> frozen{{"X1", 0.065697516117095484},
                                                             {"X2", -0.277088700980057},
                                                             {"X3", 0.73580884694544835},
                                                             {"X4", 0.060426443676912384},
                                                             {"X5", 0.50531470857163341}};
    for (const auto& [s, v] : frozen) CHECK(m.at(s, kPixelIntegral) == doctest::Approx(v).epsilon(1e-9));
    const auto drops = compare_matrices(m, m, kPixelIntegral);
    for (const auto& x : drops) CHECK(x.drop == 0.0);
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [s, v] : frozen) ranked.push_back({-std::abs(m.at(s, kPixelIntegral)), s});
    std::sort(ranked.begin(), ranked.end());
    CHECK(ranked[0].second == "X3");
    CHECK(ranked[1].second == "X5");
    CHECK(column_of(recs, rig.mot(), "X3").size() == 500);
    CHECK_THROWS_AS(column_of(recs, rig.mot(), "nothing"), LookupError);
  }

  TEST_CASE("summaries") {
    const auto flat = summarize(std::vector<double>(20, 3.0), "x", Subset::all);
    CHECK(flat.counts == std::vector<std::size_t>{20});
    CHECK(flat.bin_edges.size() == 2);
    CHECK(flat.bandwidth > 0.0);
    CHECK_THROWS_AS(summarize(std::vector<double>(5, 1.0), "x", Subset::all), ArityError);
    CHECK(summarize({}, "x", Subset::accepted).empty);

    Rng rng = make_rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(10000);
    for (auto& x : v) x = u(rng);
    const auto s = summarize(v, "u", Subset::all);
    REQUIRE(s.counts.size() + 1 == s.bin_edges.size());
    std::size_t total = 0;
    for (std::size_t b = 0; b < s.counts.size(); ++b) {
      const double p = s.bin_edges[b + 1] - s.bin_edges[b];
      const double expect = 10000 * p, sd = std::sqrt(10000 * p * (1 - p));
      CHECK(std::abs(static_cast<double>(s.counts[b]) - expect) <= 5 * sd);
      total += s.counts[b];
    }
    CHECK(total == 10000);

    // Trapezoid integral of the density over its grid.
    double area = 0.0;
    for (std::size_t i = 1; i < s.grid.size(); ++i) area += 0.5 * (s.density[i] + s.density[i - 1]) * (s.grid[i] - s.grid[i - 1]);
    CHECK(area == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(density_at(s, 0.5) == doctest::Approx(1.0).epsilon(0.1));
    CHECK(shape_distance(s, s) == 0.0);
  }

  TEST_CASE("distribution_summary accepted subset follows the threshold") {
    std::vector<ExperimentRecord> recs;
    const auto pgc = pgc_space();
    for (int i = 0; i < 30; ++i) {
      ExperimentRecord r;
      r.setting.values = {50.0 + i, 0.4, 1.0, 5.0, 10.0, 5.0};
      r.raw_observables = {{kTemperature, static_cast<double>(i)}, {kAtomNumber, 1e7}};
      recs.push_back(r);
    }
    const auto pair = distribution_summary(recs, pgc, "P1", pgc_objectives()[0]);
    CHECK(pair.all.sample_count == 30);
    CHECK(pair.accepted.sample_count == 10);
    const auto none = distribution_summary(recs, pgc, "P1", std::nullopt);
    CHECK(none.accepted.sample_count == 30);
  }

  TEST_CASE("compare_matrices examples") {
    auto drops = compare_matrices(two_input(0.5, 0.5), two_input(0.5, 0.005), "y");
    CHECK(drops[0].symbol == "b");
    CHECK(drops[0].drop == doctest::Approx(2.0));
    CHECK(drops[1].drop == 0.0);
    drops = compare_matrices(two_input(0.5, 0.5), two_input(0.0, 0.5), "y");
    CHECK(drops[0].symbol == "a");
    CHECK(drops[0].drop == doctest::Approx(std::log10(0.5) + 6.0));
    CHECK(drops[0].floored);

    // Swapping the roles negates each drop.
    Rng rng = make_rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      const auto a = two_input(u(rng), u(rng)), b = two_input(u(rng), u(rng));
      const auto ab = compare_matrices(a, b, "y"), ba = compare_matrices(b, a, "y");
      for (const auto& x : ab)
        for (const auto& y : ba)
          if (x.symbol == y.symbol) CHECK(x.drop == doctest::Approx(-y.drop).epsilon(1e-15));
    }
    auto other = two_input(0.1, 0.1);
    other.labels[1] = "c";
    CHECK_THROWS_AS(compare_matrices(two_input(0.1, 0.1), other, "y"), SchemaError);
  }

  TEST_CASE("matrix csv round trip") {
    const auto m = two_input(0.123456789012345678, -1.0 / 3.0);
    const auto path = std::filesystem::temp_directory_path() / "qcp_matrix_test.csv";
    write_matrix_csv(m, path);
    const auto back = read_matrix_csv(path, 2);
    CHECK(back.labels == m.labels);
    CHECK(back.values == m.values);
    CHECK_THROWS_AS(read_matrix_csv(path, 4), SchemaError);
    std::filesystem::remove(path);
  }
}
