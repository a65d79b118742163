#include "qcopilot/opt/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "qcopilot/error.hpp"
#include "qcopilot/io/csv.hpp"
#include "qcopilot/opt/acquisition.hpp"
#include "qcopilot/rng.hpp"
#include "qcopilot/sampling/lhs.hpp"

namespace qcp::opt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Log-scale acquisition and its gradient for a batch of points.
struct Scored {
  Eigen::VectorXd value;
  Eigen::MatrixXd grad;
};

Scored score(const ProposalContext& ctx, const std::vector<gp::GpModel>& models, Acquisition acq,
             const Eigen::MatrixXd& x, double incumbent, const std::vector<Point2>& front) {
  const Eigen::Index m = x.rows(), d = x.cols();
  Scored s;
  s.value.resize(m);
  s.grad.setZero(m, d);
  std::vector<gp::BatchPrediction> preds(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) models[k].predict_batch(x, preds[k], true);
  for (Eigen::Index a = 0; a < m; ++a) {
    double mean[2], sigma[2];
    Eigen::VectorXd dsig[2];
    for (std::size_t k = 0; k < models.size(); ++k) {
      mean[k] = preds[k].mean(a);
      sigma[k] = std::sqrt(preds[k].variance(a));
      dsig[k] = sigma[k] > 0.0 ? (preds[k].variance_grad.row(a).transpose() / (2.0 * sigma[k])).eval()
                               : Eigen::VectorXd::Zero(d);
    }
    if (acq == Acquisition::log_ei) {
      const LogEi e = log_ei(mean[0], sigma[0], incumbent);
      s.value(a) = e.value;
      if (std::isfinite(e.value))
        s.grad.row(a) = (e.d_mean * preds[0].mean_grad.row(a).transpose() + e.d_sigma * dsig[0]).transpose();
    } else {
      const Ehvi e = ehvi_2d(mean, sigma, front, ctx.reference);
      if (e.value > 0.0) {
        s.value(a) = std::log(e.value);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
        for (int k = 0; k < 2; ++k)
          g += e.d_mean[k] * preds[k].mean_grad.row(a).transpose() + e.d_sigma[k] * dsig[k];
        s.grad.row(a) = (g / e.value).transpose();
      } else {
        s.value(a) = kNegInf;
      }
    }
  }
  return s;
}

// Lockstep projected ascent along normalized gradients with per-start adaptive steps.
void ascend(const ProposalContext& ctx, const std::vector<gp::GpModel>& models, Acquisition acq, double incumbent,
            const std::vector<Point2>& front, const AcquisitionOptions& opt, Eigen::MatrixXd& x,
            Eigen::VectorXd& value) {
  const Eigen::Index m = x.rows();
  Scored cur = score(ctx, models, acq, x, incumbent, front);
  value = cur.value;
  std::vector<double> step(m, opt.initial_step);
  for (int it = 0; it < opt.iterations; ++it) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index a = 0; a < m; ++a)
      if (step[a] >= opt.min_step && std::isfinite(value(a)) && cur.grad.row(a).norm() > 0.0) active.push_back(a);
    if (active.empty()) break;
    Eigen::MatrixXd trial(static_cast<Eigen::Index>(active.size()), x.cols());
    for (std::size_t i = 0; i < active.size(); ++i) {
      const Eigen::Index a = active[i];
      const Eigen::RowVectorXd dir = cur.grad.row(a) / cur.grad.row(a).norm();
      trial.row(static_cast<Eigen::Index>(i)) = (x.row(a) + step[a] * dir).cwiseMax(0.0).cwiseMin(1.0);
    }
    const Scored next = score(ctx, models, acq, trial, incumbent, front);
    for (std::size_t i = 0; i < active.size(); ++i) {
      const Eigen::Index a = active[i], r = static_cast<Eigen::Index>(i);
      if (next.value(r) > value(a)) {
        x.row(a) = trial.row(r);
        value(a) = next.value(r);
        cur.grad.row(a) = next.grad.row(r);
        step[a] = std::min(step[a] * 1.5, 0.5);
      } else {
        step[a] *= 0.5;
      }
    }
  }
}

double min_distance_to(const Eigen::VectorXd& x, const Eigen::MatrixXd& rows) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < rows.rows(); ++i) best = std::min(best, (rows.row(i).transpose() - x).norm());
  return best;
}

}  // namespace

std::string to_string(Acquisition a) { return a == Acquisition::log_ei ? "log_ei" : "ehvi"; }

std::size_t resolved_initial_design(const CampaignConfig& config, std::size_t dimension) {
  const std::size_t n0 = config.initial_design ? config.initial_design : std::max<std::size_t>(2 * dimension, 10);
  return std::min(n0, config.budget);
}

void check_config(const CampaignConfig& c, std::size_t dimension, std::size_t objective_count) {
  const std::size_t n0 = resolved_initial_design(c, dimension);
  if (c.budget < 2) throw SpecError("campaign budget must be >= 2");
  if (n0 < 2 || n0 > c.budget) throw SpecError("initial design must lie in [2, budget]");
  if (c.batch_size < 1) throw SpecError("batch size must be >= 1");
  if (c.repeats_per_setting < 1) throw SpecError("repeats per setting must be >= 1");
  if (c.acquisition == Acquisition::log_ei && objective_count != 1)
    throw SpecError("log_ei campaigns take exactly one objective");
  if (c.acquisition == Acquisition::ehvi && objective_count != 2)
    throw UnsupportedError("ehvi campaigns take exactly two objectives");
  if (!(c.refit_growth >= 1.0)) throw SpecError("refit growth must be >= 1");
}

std::vector<Point2> objective_points(const CampaignHistory& h) {
  std::vector<Point2> out;
  out.reserve(h.records.size());
  for (const auto& r : h.records) {
    if (r.objectives.size() != 2) throw ArityError("objective_points needs two-objective records");
    out.push_back({r.objectives[0], r.objectives[1]});
  }
  return out;
}

double acquisition_value(const ProposalContext& ctx, Acquisition acq, const Eigen::VectorXd& x) {
  std::vector<gp::GpModel> models;
  for (const auto* m : ctx.models) models.push_back(*m);
  return score(ctx, models, acq, x.transpose(), ctx.incumbent, ctx.front).value(0);
}

std::vector<Eigen::VectorXd> propose_batch(const ProposalContext& ctx, std::size_t q, Acquisition acq,
                                           std::uint64_t seed, const AcquisitionOptions& opt) {
  const std::size_t need_models = acq == Acquisition::log_ei ? 1 : 2;
  if (ctx.models.size() != need_models) throw ArityError("propose_batch: wrong number of models");
  const auto d = static_cast<Eigen::Index>(ctx.models[0]->dimension());

  // Starting points: LHS plus Gaussian kicks around the best observed rows.
  const int n_lhs = std::max(opt.lhs_starts, 1);
  const int n_pert = ctx.observed.rows() > 0 ? std::max(opt.perturbed_starts, 0) : 0;
  Eigen::MatrixXd starts(n_lhs + n_pert, d);
  starts.topRows(n_lhs) = sampling::latin_hypercube(static_cast<std::size_t>(n_lhs), static_cast<std::size_t>(d),
                                                    derive_seed(seed, {1}))
                              .points;
  if (n_pert > 0) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(ctx.observed.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return ctx.ranking(a) > ctx.ranking(b); });
    const std::size_t centers = std::min<std::size_t>(8, order.size());
    Rng rng = make_rng(seed, {2});
    std::normal_distribution<double> kick(0.0, opt.perturbation);
    for (int i = 0; i < n_pert; ++i) {
      const Eigen::Index c = order[static_cast<std::size_t>(i) % centers];
      for (Eigen::Index j = 0; j < d; ++j) starts(n_lhs + i, j) = std::clamp(ctx.observed(c, j) + kick(rng), 0.0, 1.0);
    }
  }

  std::vector<gp::GpModel> models;
  for (const auto* m : ctx.models) models.push_back(*m);
  double incumbent = ctx.incumbent;
  std::vector<Point2> front = ctx.front;
  std::vector<Eigen::VectorXd> picks;
  Eigen::MatrixXd taken = ctx.observed;

  for (std::size_t j = 0; j < q; ++j) {
    Eigen::MatrixXd x = starts;
    Eigen::VectorXd value;
    ascend(ctx, models, acq, incumbent, front, opt, x, value);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return value(a) > value(b); });
    Eigen::VectorXd pick;
    for (Eigen::Index a : order) {
      const Eigen::VectorXd cand = x.row(a).transpose();
      if (min_distance_to(cand, taken) >= opt.dedup_distance) {
        pick = cand;
        break;
      }
    }
    if (pick.size() == 0) {
      // Every optimum collides with an existing point; fall back to a fresh space-filling point.
      Rng rng = make_rng(seed, {3, j});
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      do {
        pick = Eigen::VectorXd::NullaryExpr(d, [&]() { return unif(rng); });
      } while (min_distance_to(pick, taken) < opt.dedup_distance);
    }
    picks.push_back(pick);
    taken.conservativeResize(taken.rows() + 1, d);
    taken.row(taken.rows() - 1) = pick.transpose();
    if (j + 1 == q) break;
    // Kriging believer: condition on the posterior mean at the pick.
    if (acq == Acquisition::log_ei) {
      const double mu = models[0].predict(pick).mean;
      models[0] = models[0].condition_on(pick, mu);
      incumbent = std::max(incumbent, mu);
    } else {
      const double mu0 = models[0].predict(pick).mean, mu1 = models[1].predict(pick).mean;
      models[0] = models[0].condition_on(pick, mu0);
      models[1] = models[1].condition_on(pick, mu1);
      front.push_back({mu0, mu1});
      front = pareto_front(front).points;
    }
  }
  return picks;
}

CampaignHistory run_campaign(const Evaluator& evaluate, const ParameterSpace& space,
                             const std::vector<ObjectiveSpec>& objectives, const CampaignConfig& config) {
  const std::size_t d = space.dimension();
  check_config(config, d, objectives.size());
  const SignMode mode = config.acquisition == Acquisition::log_ei ? SignMode::single_max : SignMode::multi_min;
  const std::size_t n_obj = objectives.size();

  CampaignHistory h;
  std::size_t evaluations = 0;
  auto run_one = [&](const Eigen::VectorXd& u) {
    const std::size_t index = evaluations++;
    std::vector<double> unit(u.data(), u.data() + u.size());
    const Setting setting = denormalize_clamped(space, unit);
    const std::uint64_t record_seed = derive_seed(config.seed, {0x65, index});
    try {
      std::vector<Observables> shots;
      for (int r = 0; r < config.repeats_per_setting; ++r)
        shots.push_back(evaluate(setting, derive_seed(record_seed, {static_cast<std::uint64_t>(r)})));
      ExperimentRecord rec;
      rec.sub_experiment_id = config.sub_experiment_id;
      rec.setting = setting;
      rec.raw_observables = average_observables(shots);
      rec.objectives = apply_sign_convention(rec.raw_observables, objectives, mode);
      rec.repeats = config.repeats_per_setting;
      rec.stage = Stage::optimization;
      rec.seed = record_seed;
      rec.timestamp = index;
      check_record(rec, n_obj);
      h.records.push_back(std::move(rec));
      h.record_evaluation.push_back(index);
    } catch (const Error& e) {
      h.failures.push_back({index, setting, e.what()});
    }
  };
  auto snapshot_front = [&]() {
    if (n_obj == 2) h.front_trace.push_back(pareto_front(objective_points(h)));
  };

  const std::size_t n0 = resolved_initial_design(config, d);
  const auto design = sampling::latin_hypercube(n0, d, derive_seed(config.seed, {0x4c}));
  for (Eigen::Index i = 0; i < design.points.rows(); ++i) run_one(design.points.row(i).transpose());
  snapshot_front();

  std::vector<gp::KernelConfig> kernels(n_obj);
  std::size_t last_fit = 0;
  std::size_t iteration = 0;
  while (evaluations < config.budget) {
    const std::size_t q = std::min(config.batch_size, config.budget - evaluations);
    const std::size_t n = h.records.size();
    std::vector<Eigen::VectorXd> batch;
    if (n < 2) {
      Rng rng = make_rng(config.seed, {0x72, iteration});
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (std::size_t j = 0; j < q; ++j)
        batch.push_back(Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(d), [&]() { return unif(rng); }));
    } else {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i < n; ++i) {
        const auto u = normalize(space, h.records[i].setting);
        for (std::size_t k = 0; k < d; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = u[k];
      }
      const bool refit = last_fit == 0 || static_cast<double>(n) >= config.refit_growth * static_cast<double>(last_fit);
      std::vector<gp::GpModel> models;
      for (std::size_t k = 0; k < n_obj; ++k) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = h.records[i].objectives[k];
        if (refit) {
          gp::FitOptions fo;
          fo.restarts = config.gp_restarts;
          fo.family = config.kernel;
          fo.max_fit_points = config.max_fit_points;
          fo.warm_start = last_fit ? &kernels[k] : nullptr;
          models.push_back(gp::fit(x, y, derive_seed(config.seed, {0x66, iteration, k}), fo));
          kernels[k] = models.back().kernel();
        } else {
          models.emplace_back(x, y, kernels[k]);
        }
      }
      if (refit) last_fit = n;

      ProposalContext ctx;
      for (const auto& m : models) ctx.models.push_back(&m);
      ctx.observed = x;
      ctx.ranking.resize(static_cast<Eigen::Index>(n));
      if (n_obj == 1) {
        ctx.incumbent = kNegInf;
        for (std::size_t i = 0; i < n; ++i) {
          ctx.incumbent = std::max(ctx.incumbent, h.records[i].objectives[0]);
          ctx.ranking(static_cast<Eigen::Index>(i)) = h.records[i].objectives[0];
        }
      } else {
        const auto pts = objective_points(h);
        ctx.front = pareto_front(pts).points;
        ctx.reference = reference_point(pts);
        for (std::size_t i = 0; i < n; ++i) {
          int dominated_by = 0;
          for (const auto& p : pts) dominated_by += dominates(p, pts[i]);
          ctx.ranking(static_cast<Eigen::Index>(i)) = -dominated_by;
        }
      }
      batch = propose_batch(ctx, q, config.acquisition, derive_seed(config.seed, {0x70, iteration}), config.acq);
    }
    for (const auto& u : batch) run_one(u);
    snapshot_front();
    ++iteration;
  }
  if (last_fit) h.fitted_kernels = kernels;

  if (n_obj == 1) {
    double best = kNegInf;
    for (const auto& r : h.records) {
      best = std::max(best, r.objectives[0]);
      h.best_so_far.push_back(best);
    }
  } else if (!h.records.empty()) {
    const auto pts = objective_points(h);
    h.reference = reference_point(pts);
    std::vector<Point2> prefix;
    for (const auto& p : pts) {
      prefix.push_back(p);
      h.best_so_far.push_back(hypervolume_2d(pareto_front(prefix).points, *h.reference));
    }
  }
  return h;
}

void write_history_csv(const CampaignHistory& h, const ParameterSpace& space, const std::vector<ObjectiveSpec>& objectives,
                       const std::filesystem::path& path) {
  io::CsvWriter csv(path);
  std::vector<std::string> header{"iteration"};
  for (const auto& s : space.symbols()) header.push_back(s);
  for (const auto& o : objectives) header.push_back(o.name);
  header.push_back("best_so_far");
  csv.row(header);
  for (std::size_t i = 0; i < h.records.size(); ++i) {
    std::vector<double> row{static_cast<double>(h.record_evaluation[i])};
    for (double v : h.records[i].setting.values) row.push_back(v);
    for (double v : h.records[i].objectives) row.push_back(v);
    row.push_back(h.best_so_far[i]);
    csv.row(row);
  }
}

void write_pareto_csv(const CampaignHistory& h, const std::filesystem::path& path) {
  const auto pts = objective_points(h);
  const auto front = pareto_front(pts);
  std::vector<char> on_front(pts.size(), 0);
  for (std::size_t idx : front.provenance) on_front[idx] = 1;
  io::CsvWriter csv(path);
  csv.row(std::vector<std::string>{"objective1", "objective2", "is_front"});
  for (std::size_t i = 0; i < pts.size(); ++i)
    csv.row(std::vector<std::string>{io::format_double(pts[i][0]), io::format_double(pts[i][1]), on_front[i] ? "1" : "0"});
}

}  // namespace qcp::opt
