#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "qcopilot/error.hpp"
#include "qcopilot/io/csv.hpp"
#include "qcopilot/opt/acquisition.hpp"
#include "qcopilot/opt/campaign.hpp"
#include "qcopilot/opt/pareto.hpp"
#include "qcopilot/rng.hpp"

using namespace qcp;
using namespace qcp::opt;

namespace {

ParameterSpace toy_space() {
  return ParameterSpace("toy", {{"a", "A", "V", -1.0, 1.0}, {"b", "B", "V", 0.0, 2.0}});
}

// Peak 10 at (0.3, 1.2), plus a second observable trading off against it.
Observables toy_eval(const Setting& s, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> n(0.0, 0.05);
  const double a = s.values[0], b = s.values[1];
  const double f = 10.0 - 4.0 * (a - 0.3) * (a - 0.3) - 3.0 * (b - 1.2) * (b - 1.2);
  return {{"f", f + n(rng)}, {"g", 1.0 + a * a + b + n(rng)}};
}

const std::vector<ObjectiveSpec> kSingle{{"f", Direction::maximize, std::nullopt}};
const std::vector<ObjectiveSpec> kDouble{{"g", Direction::minimize, std::nullopt}, {"f", Direction::maximize, std::nullopt}};

std::vector<Point2> to_points(const std::vector<oracle::P2>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("normal helpers") {
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
    CHECK(normal_pdf(0.0) == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)));
    CHECK(log_normal_cdf(-40.0) == doctest::Approx(-804.6084420137538).epsilon(1e-10));
    CHECK(log_normal_cdf(-1.0) == doctest::Approx(std::log(normal_cdf(-1.0))).epsilon(1e-14));
  }

  TEST_CASE("log_ei edge cases and monotonicity") {
    CHECK(log_ei(1.0, 0.0, 1.0).value == -std::numeric_limits<double>::infinity());
    CHECK(log_ei(0.5, 0.0, 1.0).value == -std::numeric_limits<double>::infinity());
    CHECK(log_ei(2.0, 0.0, 1.0).value == doctest::Approx(0.0).epsilon(1e-15));
    double prev = -std::numeric_limits<double>::infinity();
    for (double mu = -40.0; mu <= 5.0; mu += 0.25) {
      const double v = log_ei(mu, 1.0, 0.0).value;
      CHECK(v > prev);
      prev = v;
    }
  }

  TEST_CASE("log_ei derivatives match finite differences") {
    for (double z : {-30.0, -8.0, -3.5, -1.0, 0.0, 2.0}) {
      const double sigma = 0.7, inc = 1.0, mu = inc + z * sigma, h = 1e-6;
      const auto r = log_ei(mu, sigma, inc);
      CHECK(r.d_mean == doctest::Approx((log_ei(mu + h, sigma, inc).value - log_ei(mu - h, sigma, inc).value) / (2 * h)).epsilon(1e-5));
      CHECK(r.d_sigma == doctest::Approx((log_ei(mu, sigma + h, inc).value - log_ei(mu, sigma - h, inc).value) / (2 * h)).epsilon(1e-5));
    }
  }

  TEST_CASE("exp(log_ei) matches Monte Carlo EI including z = -30") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 20; ++i) {
      const double sigma = 0.1 + 2.0 * u(rng);
      const double z = i == 0 ? -30.0 : -12.0 + 14.0 * u(rng);
      const double inc = 5.0 * u(rng) - 2.5;
      const double mu = inc + z * sigma;
      const double mc = oracle::mc_ei(mu, sigma, inc, 1'000'000, 1000 + i);
      CHECK(std::exp(log_ei(mu, sigma, inc).value) == doctest::Approx(mc).epsilon(0.01));
    }
  }

  TEST_CASE("pareto_front examples") {
    const auto f = pareto_front({{0, 1}, {1, 0}, {1, 1}});
    CHECK(f.points == std::vector<Point2>{{0, 1}, {1, 0}});
    CHECK(f.provenance == std::vector<std::size_t>{0, 1});
    CHECK(pareto_front({{2, 3}}).points == std::vector<Point2>{{2, 3}});
    CHECK(pareto_front({}).points.empty());
    CHECK(pareto_front({{1, 1}, {1, 1}}).points.size() == 2);
  }

  TEST_CASE("pareto_front equals the brute-force filter on random instances") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> grid(0, 20);
    for (int t = 0; t < 200; ++t) {
      std::vector<oracle::P2> pts(200);
      for (auto& p : pts) p = {static_cast<double>(grid(rng)), static_cast<double>(grid(rng))};
      auto expect = oracle::brute_front(pts);
      auto got = pareto_front(to_points(pts)).provenance;
      std::sort(got.begin(), got.end());
      CHECK(got == expect);
    }
  }

  TEST_CASE("hypervolume_2d examples, grid oracle and monotonicity") {
    CHECK(hypervolume_2d(std::vector<Point2>{{0, 0}}, {1, 1}) == 1.0);
    CHECK(hypervolume_2d(std::vector<Point2>{}, {1, 1}) == 0.0);
    CHECK(hypervolume_2d(std::vector<Point2>{{2, 0}}, {1, 1}) == 0.0);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
      const auto front = oracle::random_front(rng, 1 + t % 12);
      const oracle::P2 ref{1.1, 1.1};
      const double got = hypervolume_2d(to_points(front), {1.1, 1.1});
      CHECK(got == doctest::Approx(oracle::hv(front, ref)).epsilon(1e-12));
      CHECK(got == doctest::Approx(oracle::grid_hv(front, ref, 256)).epsilon(0.02));
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Point2> pts;
    double prev = 0.0;
    for (int i = 0; i < 200; ++i) {
      pts.push_back({u(rng), u(rng)});
      const double v = hypervolume_2d(pareto_front(pts), {1.0, 1.0});
      CHECK(v >= prev);
      prev = v;
    }
  }

  TEST_CASE("reference_point pads the span") {
    const auto r = reference_point({{0, 10}, {2, 14}});
    CHECK(r[0] == doctest::Approx(2.2));
    CHECK(r[1] == doctest::Approx(14.4));
    const auto flat = reference_point({{1, 1}});
    CHECK(flat[0] == doctest::Approx(1.1));
  }

  TEST_CASE("ehvi_2d limits and Monte Carlo agreement") {
    const std::vector<Point2> front{{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}};
    const Point2 ref{1.0, 1.0};
    const double zero[2] = {0.0, 0.0};
    const double dominated[2] = {0.9, 0.9};
    CHECK(ehvi_2d(dominated, zero, front, ref).value == 0.0);
    const double p[2] = {0.3, 0.4};
    auto with = front;
    with.push_back({0.3, 0.4});
    CHECK(ehvi_2d(p, zero, front, ref).value ==
          doctest::Approx(hypervolume_2d(pareto_front(with), ref) - hypervolume_2d(front, ref)).epsilon(1e-12));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
      const auto f = oracle::random_front(rng, 2 + t % 6);
      const oracle::P2 r{1.2, 1.2};
      const double mu[2] = {0.2 + 0.8 * u(rng), 0.2 + 0.8 * u(rng)};
      const double sd[2] = {0.05 + 0.3 * u(rng), 0.05 + 0.3 * u(rng)};
      const double got = ehvi_2d(mu, sd, to_points(f), {1.2, 1.2}).value;
      CHECK(got >= 0.0);
      CHECK(got == doctest::Approx(oracle::mc_ehvi({mu[0], mu[1]}, {sd[0], sd[1]}, f, r, 1'000'000, 50 + t)).epsilon(0.02));
    }
  }

  TEST_CASE("ehvi_2d gradients match finite differences") {
    const std::vector<Point2> front{{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}};
    const double mu[2] = {0.45, 0.55}, sd[2] = {0.2, 0.15};
    const auto r = ehvi_2d(mu, sd, front, {1.0, 1.0});
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      double mp[2] = {mu[0], mu[1]}, mm[2] = {mu[0], mu[1]}, sp[2] = {sd[0], sd[1]}, sm[2] = {sd[0], sd[1]};
      mp[k] += h;
      mm[k] -= h;
      sp[k] += h;
      sm[k] -= h;
      CHECK(r.d_mean[k] == doctest::Approx((ehvi_2d(mp, sd, front, {1, 1}).value - ehvi_2d(mm, sd, front, {1, 1}).value) / (2 * h)).epsilon(1e-5));
      CHECK(r.d_sigma[k] == doctest::Approx((ehvi_2d(mu, sp, front, {1, 1}).value - ehvi_2d(mu, sm, front, {1, 1}).value) / (2 * h)).epsilon(1e-5));
    }
  }

  TEST_CASE("q = 1 proposal matches the 1e4-point grid argmax on a 1-d posterior") {
    Eigen::MatrixXd x(6, 1);
    x << 0.05, 0.2, 0.35, 0.6, 0.8, 0.95;
    Eigen::VectorXd y(6);
    y << 0.1, 0.9, 0.4, 1.1, 0.2, 0.5;
    gp::KernelConfig k;
    k.lengthscales = {0.12};
    k.noise_variance = 1e-6;
    const gp::GpModel m(x, y, k);
    ProposalContext ctx;
    ctx.models = {&m};
    ctx.incumbent = 1.1;
    ctx.observed = x;
    ctx.ranking = y;
    const auto pick = propose_batch(ctx, 1, Acquisition::log_ei, 7);
    REQUIRE(pick.size() == 1);
    double best = -std::numeric_limits<double>::infinity(), arg = 0.0;
    for (int i = 0; i <= 10000; ++i) {
      const double t = i / 10000.0;
      const double v = log_ei(m, Eigen::VectorXd::Constant(1, t), 1.1);
      if (v > best) {
        best = v;
        arg = t;
      }
    }
    CHECK(std::abs(pick[0](0) - arg) <= 1e-4);
    CHECK(acquisition_value(ctx, Acquisition::log_ei, pick[0]) >= best - 1e-9);
  }

  TEST_CASE("batch points are distinct") {
    Eigen::MatrixXd x(8, 2);
    Eigen::VectorXd y(8);
    Rng rng = make_rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 8; ++i) {
      x.row(i) << u(rng), u(rng);
      y(i) = std::sin(4 * x(i, 0)) + x(i, 1);
    }
    const auto m = gp::fit(x, y, 1, {});
    ProposalContext ctx;
    ctx.models = {&m};
    ctx.incumbent = y.maxCoeff();
    ctx.observed = x;
    ctx.ranking = y;
    const auto batch = propose_batch(ctx, 6, Acquisition::log_ei, 3);
    REQUIRE(batch.size() == 6);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      CHECK(batch[i].minCoeff() >= 0.0);
      CHECK(batch[i].maxCoeff() <= 1.0);
      for (std::size_t j = 0; j < i; ++j) CHECK((batch[i] - batch[j]).norm() >= 1e-6);
      for (Eigen::Index r = 0; r < x.rows(); ++r) CHECK((batch[i] - x.row(r).transpose()).norm() >= 1e-6);
    }
  }

  TEST_CASE("config validation") {
    CampaignConfig c;
    c.budget = 1;
    CHECK_THROWS_AS(check_config(c, 2, 1), SpecError);
    c.budget = 20;
    c.batch_size = 0;
    CHECK_THROWS_AS(check_config(c, 2, 1), SpecError);
    c.batch_size = 4;
    c.acquisition = Acquisition::ehvi;
    CHECK_THROWS_AS(check_config(c, 2, 1), UnsupportedError);
    c.acquisition = Acquisition::log_ei;
    CHECK(resolved_initial_design(c, 2) == 10);
    CHECK(resolved_initial_design(c, 6) == 12);
    c.budget = 8;
    CHECK(resolved_initial_design(c, 6) == 8);
  }

  TEST_CASE("single-objective campaign") {
    CampaignConfig c;
    c.budget = 30;
    c.seed = 11;
    c.gp_restarts = 2;
    const auto h = run_campaign(toy_eval, toy_space(), kSingle, c);
    REQUIRE(h.records.size() == 30);
    CHECK(h.best_so_far.size() == 30);
    for (std::size_t i = 1; i < h.best_so_far.size(); ++i) CHECK(h.best_so_far[i] >= h.best_so_far[i - 1]);
    for (const auto& r : h.records) {
      CHECK(r.repeats == 3);
      CHECK(r.stage == Stage::optimization);
      CHECK(r.objectives.size() == 1);
    }
    CHECK(h.best_so_far.back() > 9.8);
    // Bit-exact determinism.
    const auto again = run_campaign(toy_eval, toy_space(), kSingle, c);
    CHECK(again.records == h.records);
    CHECK(again.best_so_far == h.best_so_far);
  }

  TEST_CASE("budget equal to the initial design is pure LHS") {
    CampaignConfig c;
    c.budget = 10;
    c.initial_design = 10;
    const auto h = run_campaign(toy_eval, toy_space(), kSingle, c);
    CHECK(h.records.size() == 10);
    CHECK(h.fitted_kernels.empty());
  }

  TEST_CASE("failed evaluations consume budget and stay out of the records") {
    CampaignConfig c;
    c.budget = 24;
    c.gp_restarts = 1;
    std::size_t calls = 0;
    const auto flaky = [&](const Setting& s, std::uint64_t seed) {
      if (++calls % 7 == 0) throw EvaluationError("camera timeout");
      return toy_eval(s, seed);
    };
    const auto h = run_campaign(flaky, toy_space(), kSingle, c);
    CHECK(h.records.size() + h.failures.size() == 24);
    CHECK_FALSE(h.failures.empty());
    for (std::size_t i = 1; i < h.record_evaluation.size(); ++i) CHECK(h.record_evaluation[i] > h.record_evaluation[i - 1]);
  }

  TEST_CASE("two-objective campaign exports") {
    CampaignConfig c;
    c.budget = 24;
    c.acquisition = Acquisition::ehvi;
    c.gp_restarts = 2;
    c.seed = 5;
    const auto h = run_campaign(toy_eval, toy_space(), kDouble, c);
    REQUIRE(h.records.size() == 24);
    REQUIRE(h.reference.has_value());
    for (std::size_t i = 1; i < h.best_so_far.size(); ++i) CHECK(h.best_so_far[i] >= h.best_so_far[i - 1]);
    CHECK(h.best_so_far.back() == doctest::Approx(hypervolume_2d(pareto_front(objective_points(h)), *h.reference)));
    // Maximized f enters flipped.
    CHECK(h.records[0].objectives[1] == -h.records[0].raw_observables.at("f"));

    const auto dir = std::filesystem::temp_directory_path() / "qcp_opt_test";
    std::filesystem::create_directories(dir);
    write_history_csv(h, toy_space(), kDouble, dir / "h.csv");
    write_pareto_csv(h, dir / "p.csv");
    const auto hist = io::read_csv(dir / "h.csv");
    CHECK(hist.header == std::vector<std::string>{"iteration", "A", "B", "g", "f", "best_so_far"});
    CHECK(hist.rows.size() == 24);
    const auto par = io::read_csv(dir / "p.csv");
    CHECK(par.header == std::vector<std::string>{"objective1", "objective2", "is_front"});
    std::vector<oracle::P2> front;
    for (const auto& r : par.rows)
      if (r[2] == "1") front.push_back({io::parse_double(r[0]), io::parse_double(r[1])});
    CHECK(oracle::brute_front(front).size() == front.size());
    std::filesystem::remove_all(dir);
  }
}
