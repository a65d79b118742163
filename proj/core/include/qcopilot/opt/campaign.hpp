#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qcopilot/gp/gp.hpp"
#include "qcopilot/opt/pareto.hpp"
#include "qcopilot/param_space.hpp"

namespace qcp::opt {

enum class Acquisition { log_ei, ehvi };

std::string to_string(Acquisition a);

struct AcquisitionOptions {
  int lhs_starts = 32;
  int perturbed_starts = 32;
  double perturbation = 0.05;  // std of the Gaussian kick around the best points, unit cube
  int iterations = 30;
  double initial_step = 0.05;
  double min_step = 1e-6;
  double dedup_distance = 1e-6;
};

struct CampaignConfig {
  std::size_t budget = 100;
  std::size_t batch_size = 4;
  int repeats_per_setting = 3;
  std::size_t initial_design = 0;  // 0: max(2d, 10), capped at budget
  Acquisition acquisition = Acquisition::log_ei;
  std::uint64_t seed = 0;
  int gp_restarts = 8;
  gp::KernelFamily kernel = gp::KernelFamily::matern_5_2;
  // Hyperparameters are refit once the data set has grown by this factor since the last fit;
  // in between the surrogate is reconditioned with the previous hyperparameters.
  double refit_growth = 1.2;
  std::size_t max_fit_points = 200;
  AcquisitionOptions acq;
  std::string sub_experiment_id = "experiment";
};

// Throws SpecError unless budget >= initial_design >= 2, q >= 1 and repeats >= 1.
void check_config(const CampaignConfig& config, std::size_t dimension, std::size_t objective_count);
std::size_t resolved_initial_design(const CampaignConfig& config, std::size_t dimension);

// One shot of the experiment. Throws EvaluationError (or any qcp::Error) on failure.
using Evaluator = std::function<Observables(const Setting& setting, std::uint64_t shot_seed)>;

struct FailedEvaluation {
  std::size_t evaluation = 0;  // position in the evaluation sequence
  Setting setting;
  std::string message;
};

struct CampaignHistory {
  std::vector<ExperimentRecord> records;
  std::vector<std::size_t> record_evaluation;  // evaluation index of each record
  std::vector<FailedEvaluation> failures;
  // Maximization form. Single objective: running max of the objective. Two objectives:
  // hypervolume of the running front against `reference`.
  std::vector<double> best_so_far;
  std::vector<ParetoFront> front_trace;  // one per batch, two-objective campaigns only
  std::optional<Point2> reference;       // final EHVI reference point
  std::vector<gp::KernelConfig> fitted_kernels;  // per objective, last refit
};

// Objective vectors of the records in minimization form (two-objective campaigns).
std::vector<Point2> objective_points(const CampaignHistory& history);

struct ProposalContext {
  std::vector<const gp::GpModel*> models;  // one per objective, maximization (log_ei) or minimization (ehvi)
  double incumbent = 0.0;                  // log_ei
  std::vector<Point2> front;               // ehvi
  Point2 reference{0.0, 0.0};              // ehvi
  Eigen::MatrixXd observed;                // unit-cube inputs already evaluated, n x d
  Eigen::VectorXd ranking;                 // per observed row, larger is better; picks perturbation centers
};

// q distinct unit-cube points by Kriging-believer greedy batch construction.
std::vector<Eigen::VectorXd> propose_batch(const ProposalContext& context, std::size_t q, Acquisition acquisition,
                                           std::uint64_t seed, const AcquisitionOptions& options = {});

// log EI or log EHVI at a single unit-cube point, as maximized by propose_batch (-inf if zero).
double acquisition_value(const ProposalContext& context, Acquisition acquisition, const Eigen::VectorXd& x);

CampaignHistory run_campaign(const Evaluator& evaluate, const ParameterSpace& space,
                             const std::vector<ObjectiveSpec>& objectives, const CampaignConfig& config);

// iteration, <symbols...>, <objective names...>, best_so_far
void write_history_csv(const CampaignHistory& history, const ParameterSpace& space,
                       const std::vector<ObjectiveSpec>& objectives, const std::filesystem::path& path);
// objective1, objective2, is_front over all records (minimization form).
void write_pareto_csv(const CampaignHistory& history, const std::filesystem::path& path);

}  // namespace qcp::opt
