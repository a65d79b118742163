#include "qcopilot/opt/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace qcp::opt {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// u(t) = 1 / (t + 2 / (t + 3 / (t + ...))), so that Phi(-t) = phi(t) / (t + u) and
// phi(t) - t Phi(-t) = phi(t) u / (t + u).
double mills_tail(double t) {
  double u = 0.0;
  for (int k = 120; k >= 2; --k) u = k / (t + u);
  return 1.0 / (t + u);
}

// (h - mu)^+ expectation and its partials.
struct Psi {
  double value, d_mean, d_sigma;
};

Psi psi(double h, double mean, double sigma) {
  if (std::isinf(h)) return h < 0 ? Psi{0.0, 0.0, 0.0} : Psi{std::numeric_limits<double>::infinity(), -1.0, 0.0};
  if (!(sigma > 0.0)) {
    const bool above = h > mean;
    return {above ? h - mean : 0.0, above ? -1.0 : 0.0, 0.0};
  }
  const double z = (h - mean) / sigma;
  const double cdf = normal_cdf(z), pdf = normal_pdf(z);
  return {(h - mean) * cdf + sigma * pdf, -cdf, pdf};
}

}  // namespace

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_normal_cdf(double z) {
  if (z > -5.0) return std::log(normal_cdf(z));
  const double t = -z;
  return -0.5 * t * t - kLogSqrt2Pi - std::log(t + mills_tail(t));
}

LogEi log_ei(double mean, double sigma, double incumbent) {
  LogEi out;
  if (!(sigma > 0.0)) {
    if (mean > incumbent) {
      out.value = std::log(mean - incumbent);
      out.d_mean = 1.0 / (mean - incumbent);
    } else {
      out.value = kNegInf;
    }
    return out;
  }
  const double z = (mean - incumbent) / sigma;
  if (z >= -3.0) {
    const double cdf = normal_cdf(z), pdf = normal_pdf(z);
    const double h = z * cdf + pdf;
    const double ei = sigma * h;
    out.value = std::log(ei);
    out.d_mean = cdf / ei;
    out.d_sigma = pdf / ei;
    return out;
  }
  const double t = -z;
  const double u = mills_tail(t);
  out.value = std::log(sigma) - 0.5 * t * t - kLogSqrt2Pi + std::log(u / (t + u));
  out.d_mean = 1.0 / (sigma * u);
  out.d_sigma = (t + u) / (sigma * u);
  return out;
}

double log_ei(const gp::GpModel& model, const Eigen::VectorXd& x, double incumbent) {
  const auto p = model.predict(x);
  return log_ei(p.mean, std::sqrt(p.variance), incumbent).value;
}

Ehvi ehvi_2d(const double mean[2], const double sigma[2], const std::vector<Point2>& front, const Point2& ref) {
  std::vector<Point2> pts;
  for (const auto& p : front)
    if (p[0] < ref[0] && p[1] < ref[1]) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  std::vector<Point2> stair;
  for (const auto& p : pts)
    if (stair.empty() || p[1] < stair.back()[1]) stair.push_back(p);

  Ehvi out;
  const std::size_t m = stair.size();
  // Strip i spans f1 in [x_i, x_{i+1}) with nondominated f2 below h_i.
  auto left = [&](std::size_t i) { return i == 0 ? -std::numeric_limits<double>::infinity() : stair[i - 1][0]; };
  auto right = [&](std::size_t i) { return i == m ? ref[0] : stair[i][0]; };
  auto height = [&](std::size_t i) { return i == 0 ? ref[1] : stair[i - 1][1]; };
  for (std::size_t i = 0; i <= m; ++i) {
    const Psi a = psi(right(i), mean[0], sigma[0]);
    const Psi b = psi(left(i), mean[0], sigma[0]);
    const Psi c = psi(height(i), mean[1], sigma[1]);
    const double width = a.value - b.value;
    out.value += width * c.value;
    out.d_mean[0] += (a.d_mean - b.d_mean) * c.value;
    out.d_sigma[0] += (a.d_sigma - b.d_sigma) * c.value;
    out.d_mean[1] += width * c.d_mean;
    out.d_sigma[1] += width * c.d_sigma;
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

double ehvi_2d(const gp::GpModel& m1, const gp::GpModel& m2, const Eigen::VectorXd& x,
               const std::vector<Point2>& front, const Point2& ref) {
  const auto p1 = m1.predict(x), p2 = m2.predict(x);
  const double mean[2] = {p1.mean, p2.mean};
  const double sigma[2] = {std::sqrt(p1.variance), std::sqrt(p2.variance)};
  return ehvi_2d(mean, sigma, front, ref).value;
}

}  // namespace qcp::opt
