#include "qcopilot/gp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <random>

#include "qcopilot/error.hpp"
#include "qcopilot/rng.hpp"

namespace qcp::gp {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;
constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;

// Correlation k/sigma^2 and the radial factor g with dk/dDelta_j = -g * Delta_j / l_j^2.
inline void radial(KernelFamily family, double r2, double sf2, double& k, double& g) {
  if (family == KernelFamily::squared_exponential) {
    k = sf2 * std::exp(-0.5 * r2);
    g = k;
  } else {
    const double r = std::sqrt(r2);
    const double e = std::exp(-kSqrt5 * r);
    k = sf2 * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * e;
    g = sf2 * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * e;
  }
}

Eigen::MatrixXd scaled(const Eigen::MatrixXd& x, const std::vector<double>& ls) {
  Eigen::MatrixXd z = x;
  for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) /= ls[j];
  return z;
}

// Squared scaled distances between rows of a and rows of b.
Eigen::MatrixXd sq_dist(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd d = (-2.0 * a * b.transpose()).eval();
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

Eigen::MatrixXd latent_cov(const Eigen::MatrixXd& z, const KernelConfig& kc) {
  const Eigen::Index n = z.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    k(b, b) = kc.signal_variance;
    for (Eigen::Index a = b + 1; a < n; ++a) {
      const double r2 = (z.row(a) - z.row(b)).squaredNorm();
      double kv, g;
      radial(kc.family, r2, kc.signal_variance, kv, g);
      k(a, b) = kv;
      k(b, a) = kv;
    }
  }
  return k;
}

// Cholesky with the jitter ladder. Returns false if even the maximal jitter fails.
bool cholesky(Eigen::MatrixXd k, double noise, double& jitter, Eigen::MatrixXd& l) {
  for (jitter = kJitterStart; jitter <= kJitterMax * (1.0 + 1e-12); jitter *= 2.0) {
    Eigen::MatrixXd a = k;
    a.diagonal().array() += noise + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      l = llt.matrixL();
      if ((l.diagonal().array() > 0.0).all() && l.allFinite()) return true;
    }
  }
  return false;
}

double target_scale(double std) { return std > 0.0 ? std : 1.0; }

void standardize(const Eigen::VectorXd& values, double& mean, double& std) {
  const double n = static_cast<double>(values.size());
  mean = values.mean();
  std = std::sqrt((values.array() - mean).square().sum() / n);
  const double mag = std::max(std::abs(mean), 1e-300);
  if (!(std > 1e-14 * mag)) std = 0.0;
}

}  // namespace

std::string to_string(KernelFamily family) {
  return family == KernelFamily::squared_exponential ? "squared_exponential" : "matern_5_2";
}

KernelFamily kernel_family_from_string(const std::string& text) {
  if (text == "squared_exponential") return KernelFamily::squared_exponential;
  if (text == "matern_5_2") return KernelFamily::matern_5_2;
  throw SchemaError("unknown kernel family '" + text + "'");
}

void check_kernel(const KernelConfig& kc, std::size_t dim) {
  if (kc.lengthscales.size() != dim) throw SpecError("lengthscales must match the input dimension");
  for (double l : kc.lengthscales)
    if (!(l > 0.0) || !std::isfinite(l)) throw SpecError("lengthscales must be positive");
  if (!(kc.signal_variance > 0.0) || !std::isfinite(kc.signal_variance))
    throw SpecError("signal variance must be positive");
  if (!(kc.noise_variance > 0.0) || !std::isfinite(kc.noise_variance))
    throw SpecError("noise variance must be positive");
}

double kernel_value(const KernelConfig& kc, const double* a, const double* b, std::size_t dim) {
  double r2 = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = (a[j] - b[j]) / kc.lengthscales[j];
    r2 += d * d;
  }
  double k, g;
  radial(kc.family, r2, kc.signal_variance, k, g);
  return k;
}

GpModel::GpModel(Eigen::MatrixXd points, const Eigen::VectorXd& values, KernelConfig kernel)
    : x_(std::move(points)), kernel_(std::move(kernel)) {
  if (x_.rows() < 1) throw ArityError("GP needs at least one point");
  if (values.size() != x_.rows()) throw ArityError("GP points and values differ in length");
  if (!values.allFinite() || !x_.allFinite()) throw DomainError("GP data must be finite");
  check_kernel(kernel_, static_cast<std::size_t>(x_.cols()));
  standardize(values, mean_, std_);
  y_ = (values.array() - mean_) / target_scale(std_);
  factorize();
}

GpModel GpModel::from_standardized(Eigen::MatrixXd points, Eigen::VectorXd standardized, KernelConfig kernel,
                                   double mean, double std) {
  if (points.rows() < 1 || standardized.size() != points.rows()) throw ArityError("GP data has inconsistent size");
  if (!(std >= 0.0) || !std::isfinite(mean)) throw SchemaError("GP standardization is invalid");
  check_kernel(kernel, static_cast<std::size_t>(points.cols()));
  GpModel m;
  m.x_ = std::move(points);
  m.y_ = std::move(standardized);
  m.kernel_ = std::move(kernel);
  m.mean_ = mean;
  m.std_ = std;
  m.factorize();
  return m;
}

Eigen::VectorXd GpModel::raw_targets() const { return (y_.array() * target_scale(std_) + mean_).matrix(); }

void GpModel::factorize() {
  const Eigen::MatrixXd z = scaled(x_, kernel_.lengthscales);
  if (!cholesky(latent_cov(z, kernel_), kernel_.noise_variance, jitter_, l_))
    throw NumericalError("GP covariance not positive definite even with jitter 1e-4");
  alpha_ = l_.triangularView<Eigen::Lower>().solve(y_);
  l_.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
}

Eigen::VectorXd GpModel::kernel_row(const Eigen::VectorXd& x) const {
  Eigen::VectorXd k(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    Eigen::VectorXd xi = x_.row(i).transpose();
    k(i) = kernel_value(kernel_, x.data(), xi.data(), dimension());
  }
  return k;
}

Prediction GpModel::predict(const Eigen::VectorXd& x) const {
  BatchPrediction bp;
  predict_batch(x.transpose(), bp, false);
  return {bp.mean(0), bp.variance(0)};
}

void GpModel::predict_batch(const Eigen::MatrixXd& q, BatchPrediction& out, bool gradients) const {
  if (q.cols() != x_.cols()) throw ArityError("query dimension does not match GP");
  const Eigen::Index m = q.rows(), n = x_.rows(), d = x_.cols();
  const Eigen::MatrixXd zq = scaled(q, kernel_.lengthscales);
  const Eigen::MatrixXd zx = scaled(x_, kernel_.lengthscales);
  const Eigen::MatrixXd r2 = sq_dist(zq, zx);
  Eigen::MatrixXd ks(m, n), g(gradients ? m : 0, gradients ? n : 0);
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index a = 0; a < m; ++a) {
      double kv, gv;
      radial(kernel_.family, r2(a, b), kernel_.signal_variance, kv, gv);
      ks(a, b) = kv;
      if (gradients) g(a, b) = gv;
    }
  const double scale = target_scale(std_);
  const double var_scale = std_ * std_;
  Eigen::VectorXd mu = ks * alpha_;
  Eigen::MatrixXd v = ks.transpose();
  l_.triangularView<Eigen::Lower>().solveInPlace(v);
  Eigen::VectorXd var = (kernel_.signal_variance - v.colwise().squaredNorm().transpose().array()).matrix();
  out.mean = (mu.array() * scale + mean_).matrix();
  out.variance = (var.array().max(0.0) * var_scale).matrix();
  if (!gradients) return;

  Eigen::VectorXd inv_l2(d);
  for (Eigen::Index j = 0; j < d; ++j) inv_l2(j) = 1.0 / (kernel_.lengthscales[j] * kernel_.lengthscales[j]);
  // d mu / d q_j = -sum_b g_ab alpha_b (q_aj - x_bj) / l_j^2
  const Eigen::VectorXd ga = g * alpha_;
  const Eigen::MatrixXd gax = g * (x_.array().colwise() * alpha_.array()).matrix();
  // d var / d q_j = -2 sum_b w_b dk_ab/dq_j with w = K^-1 k*
  l_.transpose().triangularView<Eigen::Upper>().solveInPlace(v);
  const Eigen::MatrixXd gw = g.cwiseProduct(v.transpose());
  const Eigen::VectorXd gw_sum = gw.rowwise().sum();
  const Eigen::MatrixXd gwx = gw * x_;
  out.mean_grad.resize(m, d);
  out.variance_grad.resize(m, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    out.mean_grad.col(j) = (-(q.col(j).cwiseProduct(ga) - gax.col(j)) * inv_l2(j)) * scale;
    out.variance_grad.col(j) = (2.0 * (q.col(j).cwiseProduct(gw_sum) - gwx.col(j)) * inv_l2(j)) * var_scale;
  }
  for (Eigen::Index a = 0; a < m; ++a)
    if (var(a) <= 0.0) out.variance_grad.row(a).setZero();
}

GpModel GpModel::condition_on(const Eigen::VectorXd& x, double value) const {
  if (x.size() != x_.cols()) throw ArityError("conditioning point has wrong dimension");
  GpModel out = *this;
  const Eigen::Index n = x_.rows();
  const Eigen::VectorXd k = kernel_row(x);
  out.x_.conservativeResize(n + 1, Eigen::NoChange);
  out.x_.row(n) = x.transpose();
  out.y_.conservativeResize(n + 1);
  out.y_(n) = (value - mean_) / target_scale(std_);
  const Eigen::VectorXd l = l_.triangularView<Eigen::Lower>().solve(k);
  const double d2 = kernel_.signal_variance + kernel_.noise_variance + jitter_ - l.squaredNorm();
  if (!(d2 > 1e-12 * kernel_.signal_variance)) {
    out.factorize();
    return out;
  }
  out.l_.conservativeResize(n + 1, n + 1);
  out.l_.col(n).setZero();
  out.l_.row(n).head(n) = l.transpose();
  out.l_(n, n) = std::sqrt(d2);
  out.alpha_ = out.l_.triangularView<Eigen::Lower>().solve(out.y_);
  out.l_.transpose().triangularView<Eigen::Upper>().solveInPlace(out.alpha_);
  return out;
}

double GpModel::log_marginal_likelihood() const {
  const double n = static_cast<double>(y_.size());
  return -0.5 * y_.dot(alpha_) - l_.diagonal().array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Eigen::VectorXd pack(const KernelConfig& kc) {
  const auto d = static_cast<Eigen::Index>(kc.lengthscales.size());
  Eigen::VectorXd theta(d + 2);
  for (Eigen::Index j = 0; j < d; ++j) theta(j) = std::log(kc.lengthscales[j]);
  theta(d) = std::log(kc.signal_variance);
  theta(d + 1) = std::log(kc.noise_variance);
  return theta;
}

KernelConfig unpack(const Eigen::VectorXd& theta, KernelFamily family) {
  KernelConfig kc;
  kc.family = family;
  const Eigen::Index d = theta.size() - 2;
  for (Eigen::Index j = 0; j < d; ++j) kc.lengthscales.push_back(std::exp(theta(j)));
  kc.signal_variance = std::exp(theta(d));
  kc.noise_variance = std::exp(theta(d + 1));
  return kc;
}

LmlResult log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                                  KernelFamily family, bool with_gradient) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (theta.size() != d + 2) throw ArityError("theta has wrong length");
  const KernelConfig kc = unpack(theta, family);
  const Eigen::MatrixXd z = scaled(x, kc.lengthscales);
  const Eigen::MatrixXd kf = latent_cov(z, kc);
  LmlResult res;
  double jitter = 0.0;
  Eigen::MatrixXd l;
  if (!cholesky(kf, kc.noise_variance, jitter, l)) {
    res.value = -std::numeric_limits<double>::infinity();
    res.gradient = Eigen::VectorXd::Zero(d + 2);
    return res;
  }
  Eigen::VectorXd alpha = l.triangularView<Eigen::Lower>().solve(y);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);
  res.value = -0.5 * y.dot(alpha) - l.diagonal().array().log().sum() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!with_gradient) return res;

  Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
  l.triangularView<Eigen::Lower>().solveInPlace(kinv);
  l.transpose().triangularView<Eigen::Upper>().solveInPlace(kinv);
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;
  res.gradient = Eigen::VectorXd::Zero(d + 2);
  // Off-diagonal pairs counted twice by symmetry; the diagonal has zero lengthscale derivative.
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index a = b + 1; a < n; ++a) {
      const double r2 = (z.row(a) - z.row(b)).squaredNorm();
      double kv, g;
      radial(family, r2, kc.signal_variance, kv, g);
      const double wg = 2.0 * w(a, b) * g;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double dz = z(a, j) - z(b, j);
        res.gradient(j) += wg * dz * dz;
      }
    }
  res.gradient.head(d) *= 0.5;
  res.gradient(d) = 0.5 * (w.cwiseProduct(kf)).sum();
  res.gradient(d + 1) = 0.5 * kc.noise_variance * w.trace();
  return res;
}

GpModel fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values, std::uint64_t seed,
            const FitOptions& opt, FitReport* report) {
  const Eigen::Index n = points.rows(), d = points.cols();
  if (n < 2) throw ArityError("GP fit needs at least 2 points");
  if (values.size() != n) throw ArityError("GP points and values differ in length");
  if (!values.allFinite() || !points.allFinite()) throw DomainError("GP data must be finite");
  if (opt.restarts < 1) throw SpecError("GP fit needs at least one restart");

  double mean, std;
  standardize(values, mean, std);
  Eigen::MatrixXd xs = points;
  Eigen::VectorXd ys = (values.array() - mean) / target_scale(std);
  if (opt.max_fit_points > 1 && static_cast<std::size_t>(n) > opt.max_fit_points) {
    const auto m = static_cast<Eigen::Index>(opt.max_fit_points);
    Eigen::MatrixXd sx(m, d);
    Eigen::VectorXd sy(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index src = i * n / m;
      sx.row(i) = points.row(src);
      sy(i) = ys(src);
    }
    xs = std::move(sx);
    ys = std::move(sy);
  }

  Eigen::VectorXd lo(d + 2), hi(d + 2);
  lo.setConstant(std::log(opt.box_lower));
  hi.setConstant(std::log(opt.box_upper));
  lo(d + 1) = std::log(opt.noise_floor);
  auto project = [&](Eigen::VectorXd t) { return t.cwiseMax(lo).cwiseMin(hi).eval(); };

  Rng rng = make_rng(seed, {0x6770});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw = [&](double a, double b) { return std::log(a) + unif(rng) * (std::log(b) - std::log(a)); };

  FitReport rep;
  Eigen::VectorXd best_theta;
  double best = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < opt.restarts; ++r) {
    Eigen::VectorXd theta(d + 2);
    if (r == 0) {
      if (opt.warm_start && opt.warm_start->lengthscales.size() == static_cast<std::size_t>(d)) {
        theta = pack(*opt.warm_start);
      } else {
        theta.head(d).setConstant(std::log(0.3));
        theta(d) = 0.0;
        theta(d + 1) = std::log(1e-2);
      }
    } else {
      for (Eigen::Index j = 0; j < d; ++j) theta(j) = draw(0.05, 3.0);
      theta(d) = draw(0.2, 5.0);
      theta(d + 1) = draw(1e-6, 0.2);
    }
    theta = project(theta);
    LmlResult cur = log_marginal_likelihood(xs, ys, theta, opt.family);
    rep.start_lml.push_back(cur.value);
    double step = 0.0;
    if (std::isfinite(cur.value)) {
      const double gmax = cur.gradient.cwiseAbs().maxCoeff();
      step = gmax > 0.0 ? 0.2 / gmax : 0.0;
    }
    for (int it = 0; it < opt.max_iterations && step > 0.0; ++it) {
      Eigen::VectorXd trial;
      LmlResult next;
      bool accepted = false;
      for (int bt = 0; bt < 30; ++bt) {
        trial = project(theta + step * cur.gradient);
        const double gain = cur.gradient.dot(trial - theta);
        if (gain <= 0.0) break;
        next = log_marginal_likelihood(xs, ys, trial, opt.family, false);
        if (next.value >= cur.value + 1e-4 * gain) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      next = log_marginal_likelihood(xs, ys, trial, opt.family);
      const Eigen::VectorXd s = trial - theta;
      const Eigen::VectorXd yv = next.gradient - cur.gradient;
      const double improvement = next.value - cur.value;
      theta = trial;
      cur = next;
      if (s.norm() < 1e-7 || improvement < 1e-10 * (1.0 + std::abs(cur.value))) break;
      const double sy = s.dot(yv);
      step = sy < 0.0 ? std::clamp(-s.squaredNorm() / sy, 1e-6, 1e3) : std::min(step * 2.0, 1e3);
    }
    rep.end_lml.push_back(cur.value);
    if (cur.value > best || best_theta.size() == 0) {
      best = cur.value;
      best_theta = theta;
    }
  }
  rep.best_lml = best;
  if (report) *report = rep;
  return GpModel(points, values, unpack(best_theta, opt.family));
}

std::string dump(const GpModel& model) {
  nlohmann::ordered_json j;
  j["family"] = to_string(model.kernel().family);
  j["lengthscales"] = model.kernel().lengthscales;
  j["signal_variance"] = model.kernel().signal_variance;
  j["noise_variance"] = model.kernel().noise_variance;
  j["target_mean"] = model.target_mean();
  j["target_std"] = model.target_std();
  auto inputs = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < model.inputs().rows(); ++i) {
    std::vector<double> row(model.dimension());
    for (std::size_t k = 0; k < model.dimension(); ++k) row[k] = model.inputs()(i, static_cast<Eigen::Index>(k));
    inputs.push_back(row);
  }
  j["inputs"] = inputs;
  j["targets"] = std::vector<double>(model.targets().data(), model.targets().data() + model.targets().size());
  return j.dump() + "\n";
}

GpModel load(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    KernelConfig kc;
    kc.family = kernel_family_from_string(j.at("family").get<std::string>());
    kc.lengthscales = j.at("lengthscales").get<std::vector<double>>();
    kc.signal_variance = j.at("signal_variance").get<double>();
    kc.noise_variance = j.at("noise_variance").get<double>();
    const double mean = j.at("target_mean").get<double>();
    const double std = j.at("target_std").get<double>();
    const auto rows = j.at("inputs").get<std::vector<std::vector<double>>>();
    const auto targets = j.at("targets").get<std::vector<double>>();
    if (rows.empty() || rows.size() != targets.size()) throw SchemaError("GP dump has inconsistent data");
    Eigen::MatrixXd x(rows.size(), kc.lengthscales.size());
    Eigen::VectorXd y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != kc.lengthscales.size()) throw SchemaError("GP dump input has wrong dimension");
      for (std::size_t k = 0; k < rows[i].size(); ++k) x(i, k) = rows[i][k];
      y(i) = targets[i];
    }
    return GpModel::from_standardized(std::move(x), std::move(y), std::move(kc), mean, std);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("GP dump: ") + e.what());
  }
}

}  // namespace qcp::gp
