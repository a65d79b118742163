#pragma once

#include <vector>

#include "qcopilot/gp/gp.hpp"
#include "qcopilot/opt/pareto.hpp"

namespace qcp::opt {

double normal_pdf(double z);
double normal_cdf(double z);
// log Phi(z), accurate for z << 0.
double log_normal_cdf(double z);

struct LogEi {
  double value = 0.0;  // log EI, -inf when no improvement is possible
  double d_mean = 0.0;   // d/d mu
  double d_sigma = 0.0;  // d/d sigma
};

// Expected improvement over `incumbent` of a maximization target with posterior N(mu, sigma^2),
// on a log scale. Uses a continued fraction for the Mills ratio below z = -3.
LogEi log_ei(double mean, double sigma, double incumbent);
double log_ei(const gp::GpModel& model, const Eigen::VectorXd& x, double incumbent);

struct Ehvi {
  double value = 0.0;
  double d_mean[2] = {0.0, 0.0};
  double d_sigma[2] = {0.0, 0.0};
};

// Exact 2-objective EHVI (minimization) for independent Gaussian objectives, by decomposition of
// the nondominated region into vertical strips.
Ehvi ehvi_2d(const double mean[2], const double sigma[2], const std::vector<Point2>& front, const Point2& ref);
double ehvi_2d(const gp::GpModel& m1, const gp::GpModel& m2, const Eigen::VectorXd& x,
               const std::vector<Point2>& front, const Point2& ref);

}  // namespace qcp::opt
