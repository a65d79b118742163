#include <benchmark/benchmark.h>

#include <random>

#include "qcopilot/gp/gp.hpp"
#include "qcopilot/opt/acquisition.hpp"
#include "qcopilot/opt/pareto.hpp"
#include "qcopilot/rng.hpp"
#include "qcopilot/sampling/lhs.hpp"
#include "qcopilot/sim/ccd.hpp"

using namespace qcp;

namespace {

void training_set(std::size_t n, std::size_t d, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  Rng rng = make_rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      x(i, k) = u(rng);
      s += std::sin(3.0 * x(i, k) + k);
    }
    y(i) = s + 0.01 * u(rng);
  }
}

std::vector<opt::Point2> staircase(std::size_t m) {
  std::vector<opt::Point2> f;
  for (std::size_t i = 0; i < m; ++i) {
    const double t = (i + 0.5) / static_cast<double>(m);
    f.push_back({t, 1.0 - t * t});
  }
  return f;
}

void BM_GpFit(benchmark::State& state) {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  training_set(static_cast<std::size_t>(state.range(0)), 5, x, y);
  for (auto _ : state) benchmark::DoNotOptimize(gp::fit(x, y, 3));
}
BENCHMARK(BM_GpFit)->Arg(25)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_GpPredict(benchmark::State& state) {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  training_set(static_cast<std::size_t>(state.range(0)), 5, x, y);
  const auto model = gp::fit(x, y, 3);
  const Eigen::VectorXd q = Eigen::VectorXd::Constant(5, 0.4);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(q));
}
BENCHMARK(BM_GpPredict)->Arg(50)->Arg(200);

void BM_LogEi(benchmark::State& state) {
  double z = -20.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(opt::log_ei(z, 1.0, 0.0));
    z = z > 5.0 ? -20.0 : z + 0.37;
  }
}
BENCHMARK(BM_LogEi);

void BM_Ehvi2d(benchmark::State& state) {
  const auto f = staircase(static_cast<std::size_t>(state.range(0)));
  const double mu[2] = {0.5, 0.5}, sd[2] = {0.2, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(opt::ehvi_2d(mu, sd, f, {1.2, 1.2}));
}
BENCHMARK(BM_Ehvi2d)->Arg(4)->Arg(32)->Arg(256);

void BM_ParetoFront(benchmark::State& state) {
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<opt::Point2> pts(static_cast<std::size_t>(state.range(0)));
  for (auto& p : pts) p = {u(rng), u(rng)};
  for (auto _ : state) {
    const auto front = opt::pareto_front(pts);
    benchmark::DoNotOptimize(opt::hypervolume_2d(front, {1.1, 1.1}));
  }
}
BENCHMARK(BM_ParetoFront)->Arg(100)->Arg(1000)->Arg(10000);

void BM_Lhs(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampling::latin_hypercube(static_cast<std::size_t>(state.range(0)), 6, ++seed));
}
BENCHMARK(BM_Lhs)->Arg(50)->Arg(500);

void BM_Maximin(benchmark::State& state) {
  const auto d = sampling::latin_hypercube(static_cast<std::size_t>(state.range(0)), 5, 1);
  for (auto _ : state) benchmark::DoNotOptimize(sampling::optimize_maximin(d, 10000, 2));
}
BENCHMARK(BM_Maximin)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_RenderCcd(benchmark::State& state) {
  const sim::CloudState cloud{5e7, 20e-6, 4e-4, 1e-3};
  const sim::CcdGeometry g;
  const sim::PhysicalConstants c;
  for (auto _ : state) benchmark::DoNotOptimize(sim::render_ccd(cloud, 5e-3, g, c));
}
BENCHMARK(BM_RenderCcd);

}  // namespace

BENCHMARK_MAIN();
