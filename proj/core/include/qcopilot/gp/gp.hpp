#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace qcp::gp {

enum class KernelFamily { squared_exponential, matern_5_2 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& text);

struct KernelConfig {
  std::vector<double> lengthscales;  // ARD, unit-cube coordinates
  double signal_variance = 1.0;      // in standardized target units
  double noise_variance = 1e-6;
  KernelFamily family = KernelFamily::matern_5_2;
};

// Throws SpecError unless every hyperparameter is finite and positive and lengthscales match dim.
void check_kernel(const KernelConfig& kernel, std::size_t dim);

// Covariance of the latent function (no noise term).
double kernel_value(const KernelConfig& kernel, const double* a, const double* b, std::size_t dim);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;  // latent function variance, original units
};

// Batched posterior over m query rows; gradients are d/dx of mean and variance.
struct BatchPrediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd mean_grad;      // m x d, filled only when requested
  Eigen::MatrixXd variance_grad;  // m x d
};

// Exact GP posterior over unit-cube inputs with standardized targets. The Cholesky factor of
// K + (noise + jitter) I is cached and kept in step with inputs and kernel.
class GpModel {
 public:
  GpModel() = default;
  // Conditions on (points, values) with fixed hyperparameters. points is n x d.
  // Throws ArityError on n < 1 or length mismatch, NumericalError if jitter escalation fails.
  GpModel(Eigen::MatrixXd points, const Eigen::VectorXd& values, KernelConfig kernel);
  // Restores a model with a given standardization (used by load).
  static GpModel from_standardized(Eigen::MatrixXd points, Eigen::VectorXd standardized, KernelConfig kernel,
                                   double mean, double std);

  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t dimension() const { return static_cast<std::size_t>(x_.cols()); }
  const Eigen::MatrixXd& inputs() const { return x_; }
  const Eigen::VectorXd& targets() const { return y_; }  // standardized
  Eigen::VectorXd raw_targets() const;
  const KernelConfig& kernel() const { return kernel_; }
  double target_mean() const { return mean_; }
  double target_std() const { return std_; }  // 0 when all targets are equal
  double jitter() const { return jitter_; }
  const Eigen::MatrixXd& factor() const { return l_; }

  Prediction predict(const Eigen::VectorXd& x) const;
  void predict_batch(const Eigen::MatrixXd& queries, BatchPrediction& out, bool gradients) const;

  // Appends one observation (original units) keeping hyperparameters and standardization fixed.
  // Extends the factor by one row in O(n^2).
  GpModel condition_on(const Eigen::VectorXd& x, double value) const;

  double log_marginal_likelihood() const;

 private:
  void factorize();
  Eigen::VectorXd kernel_row(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  KernelConfig kernel_;
  double mean_ = 0.0;
  double std_ = 0.0;
  double jitter_ = 1e-10;
  Eigen::MatrixXd l_;
  Eigen::VectorXd alpha_;
};

// Log hyperparameter vector layout: [log l_1 .. log l_d, log signal_variance, log noise_variance].
Eigen::VectorXd pack(const KernelConfig& kernel);
KernelConfig unpack(const Eigen::VectorXd& theta, KernelFamily family);

struct LmlResult {
  double value = 0.0;
  Eigen::VectorXd gradient;  // w.r.t. the packed log hyperparameters
};

// Log marginal likelihood of standardized targets y at log hyperparameters theta.
// Returns value -inf when the covariance cannot be factorized even with maximal jitter.
LmlResult log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                                  KernelFamily family, bool with_gradient = true);

struct FitOptions {
  int restarts = 8;
  KernelFamily family = KernelFamily::matern_5_2;
  double box_lower = 1e-3;  // lengthscale and signal variance box
  double box_upper = 1e3;
  double noise_floor = 1e-8;
  int max_iterations = 60;
  // Hyperparameters are selected on at most this many points (evenly spaced subset) and the
  // returned model is conditioned on all of them. 0 means no cap.
  std::size_t max_fit_points = 0;
  // Replaces the first restart's starting point, e.g. with the previous fit of a campaign.
  const KernelConfig* warm_start = nullptr;
};

struct FitReport {
  std::vector<double> start_lml;  // LML at each restart's starting point
  std::vector<double> end_lml;
  double best_lml = 0.0;
};

// Maximizes the log marginal likelihood over `restarts` projected-gradient ascents.
// Throws ArityError on fewer than 2 points, DomainError on non-finite values.
GpModel fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, std::uint64_t seed,
            const FitOptions& options = {}, FitReport* report = nullptr);

// Structured-text dump of hyperparameters and data; load refactorizes.
std::string dump(const GpModel& model);
GpModel load(const std::string& text);

}  // namespace qcp::gp
