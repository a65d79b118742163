#include "qcopilot/sampling/lhs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "qcopilot/error.hpp"
#include "qcopilot/io/csv.hpp"
#include "qcopilot/rng.hpp"

namespace qcp::sampling {

namespace {

constexpr double kPhiExponent = 15.0;

double sq_distance(const Eigen::MatrixXd& x, Eigen::Index a, Eigen::Index b) {
  return (x.row(a) - x.row(b)).squaredNorm();
}

}  // namespace

double maximin_distance(const Eigen::MatrixXd& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < x.rows(); ++a)
    for (Eigen::Index b = a + 1; b < x.rows(); ++b) best = std::min(best, sq_distance(x, a, b));
  return std::sqrt(best);
}

bool is_stratified(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    std::vector<char> hit(n, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = x(i, j);
      if (!(v >= 0.0 && v <= 1.0)) return false;
      const auto s = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(v * n)), n - 1);
      if (hit[s]) return false;
      hit[s] = 1;
    }
  }
  return true;
}

Design latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ArityError("latin_hypercube needs n >= 1 and d >= 1");
  Rng rng = make_rng(seed, {0x4c4853});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Design out;
  out.seed = seed;
  out.points.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      // Stratum (perm + u) / n lands in [perm/n, (perm+1)/n); clamp guards the top edge.
      const double v = (static_cast<double>(perm[i]) + unif(rng)) / static_cast<double>(n);
      out.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::min(v, std::nextafter((static_cast<double>(perm[i]) + 1.0) / static_cast<double>(n), 0.0));
    }
  }
  out.maximin_distance = maximin_distance(out.points);
  return out;
}

Design optimize_maximin(const Design& design, std::size_t iterations, std::uint64_t seed, AnnealStats* stats) {
  Design out = design;
  out.maximin_distance = maximin_distance(out.points);
  const Eigen::Index n = out.points.rows(), d = out.points.cols();
  AnnealStats local;
  if (iterations == 0 || n < 3) {
    if (stats) *stats = local;
    return out;
  }
  Eigen::MatrixXd& x = out.points;
  Eigen::MatrixXd d2(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    d2(a, a) = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = a + 1; b < n; ++b) d2(a, b) = d2(b, a) = sq_distance(x, a, b);
  }
  // phi_p = (sum d^-p)^(1/p); we track the sum.
  auto pair_term = [](double sq) { return std::pow(sq, -0.5 * kPhiExponent); };
  double phi_sum = 0.0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) phi_sum += pair_term(d2(a, b));
  double min_sq = d2.minCoeff();

  Rng rng = make_rng(seed, {0x414e4e});
  std::uniform_int_distribution<Eigen::Index> pick_row(0, n - 1), pick_col(0, d - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double temperature = 0.1 * std::pow(phi_sum, 1.0 / kPhiExponent);
  std::vector<double> new_a(n), new_b(n);

  for (std::size_t it = 0; it < iterations; ++it) {
    if (it > 0 && it % 100 == 0) temperature *= 0.95;
    const Eigen::Index j = pick_col(rng);
    const Eigen::Index a = pick_row(rng);
    Eigen::Index b = pick_row(rng);
    while (b == a) b = pick_row(rng);
    ++local.proposals;

    std::swap(x(a, j), x(b, j));
    double delta = 0.0;
    double cand_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      new_a[k] = k == a ? std::numeric_limits<double>::infinity() : sq_distance(x, a, k);
      new_b[k] = k == b ? std::numeric_limits<double>::infinity() : sq_distance(x, b, k);
      if (k != a && k != b) {
        delta += pair_term(new_a[k]) - pair_term(d2(a, k)) + pair_term(new_b[k]) - pair_term(d2(b, k));
        cand_min = std::min({cand_min, new_a[k], new_b[k]});
      }
    }
    // Swapping one coordinate between a and b leaves their mutual distance unchanged.
    for (Eigen::Index p = 0; p < n; ++p) {
      if (p == a || p == b) continue;
      for (Eigen::Index q = p + 1; q < n; ++q)
        if (q != a && q != b) cand_min = std::min(cand_min, d2(p, q));
    }
    cand_min = std::min(cand_min, d2(a, b));

    const double phi_old = std::pow(phi_sum, 1.0 / kPhiExponent);
    const double phi_new = std::pow(std::max(phi_sum + delta, 0.0), 1.0 / kPhiExponent);
    const bool keeps_maximin = cand_min >= min_sq;
    const bool metropolis = phi_new <= phi_old || unif(rng) < std::exp(-(phi_new - phi_old) / temperature);
    if (keeps_maximin && metropolis) {
      ++local.accepted;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k != a) d2(a, k) = d2(k, a) = new_a[k];
        if (k != b) d2(b, k) = d2(k, b) = new_b[k];
      }
      phi_sum += delta;
      min_sq = cand_min;
    } else {
      std::swap(x(a, j), x(b, j));
    }
  }
  out.maximin_distance = std::sqrt(min_sq);
  if (stats) *stats = local;
  return out;
}

void write_design_csv(const Design& design, const std::filesystem::path& path) {
  io::CsvWriter csv(path);
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < design.points.cols(); ++j) header.push_back("x" + std::to_string(j + 1));
  csv.row(header);
  for (Eigen::Index i = 0; i < design.points.rows(); ++i) {
    std::vector<double> row(design.points.cols());
    for (Eigen::Index j = 0; j < design.points.cols(); ++j) row[j] = design.points(i, j);
    csv.row(row);
  }
}

}  // namespace qcp::sampling
