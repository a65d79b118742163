#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "qcopilot/gp/gp.hpp"

namespace oracle {

using qcp::gp::GpModel;
using qcp::gp::KernelConfig;
using qcp::gp::KernelFamily;
using qcp::gp::Prediction;

// Kernels and posterior written out independently of the library, solved densely with LU.
inline double oracle_kernel(const KernelConfig& k, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < a.size(); ++j) r2 += std::pow((a(j) - b(j)) / k.lengthscales[static_cast<std::size_t>(j)], 2);
  if (k.family == KernelFamily::squared_exponential) return k.signal_variance * std::exp(-0.5 * r2);
  const double r = std::sqrt(5.0 * r2);
  return k.signal_variance * (1.0 + r + r * r / 3.0) * std::exp(-r);
}

inline Eigen::MatrixXd oracle_cov(const KernelConfig& k, const Eigen::MatrixXd& x, double diag) {
  const auto n = x.rows();
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = oracle_kernel(k, x.row(i), x.row(j)) + (i == j ? diag : 0.0);
  return c;
}

inline Prediction oracle_predict(const GpModel& m, const Eigen::VectorXd& q) {
  const auto& x = m.inputs();
  const Eigen::MatrixXd c = oracle_cov(m.kernel(), x, m.kernel().noise_variance + m.jitter());
  Eigen::VectorXd ks(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) ks(i) = oracle_kernel(m.kernel(), x.row(i), q);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
  const double scale = m.target_std() > 0 ? m.target_std() : 1.0;
  Prediction p;
  p.mean = m.target_mean() + scale * ks.dot(lu.solve(m.targets()));
  p.variance = std::max(0.0, m.kernel().signal_variance - ks.dot(lu.solve(ks))) * m.target_std() * m.target_std();
  return p;
}

inline double oracle_lml(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const KernelConfig& k, double jitter) {
  const Eigen::MatrixXd c = oracle_cov(k, x, k.noise_variance + jitter);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
  const double logdet = lu.matrixLU().diagonal().array().abs().log().sum();
  return -0.5 * y.dot(lu.solve(y)) - 0.5 * logdet - 0.5 * static_cast<double>(x.rows()) * std::log(2 * std::numbers::pi);
}

}  // namespace oracle
