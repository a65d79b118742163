#include "qcopilot/uq/uq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qcopilot/error.hpp"
#include "qcopilot/io/csv.hpp"

namespace qcp::uq {

namespace {

constexpr std::size_t kGridPoints = 512;
constexpr std::size_t kMaxBins = 10000;

// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::size_t CorrelationMatrix::index_of(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw LookupError("no correlation label " + label);
  return static_cast<std::size_t>(it - labels.begin());
}

double CorrelationMatrix::at(const std::string& a, const std::string& b) const {
  return values(static_cast<Eigen::Index>(index_of(a)), static_cast<Eigen::Index>(index_of(b)));
}

CorrelationMatrix pearson_matrix(const std::vector<std::string>& labels, std::size_t input_count,
                                 const Eigen::MatrixXd& columns) {
  if (columns.rows() < 3) throw ArityError("pearson_matrix needs at least 3 records");
  if (static_cast<std::size_t>(columns.cols()) != labels.size() || input_count > labels.size())
    throw ArityError("pearson_matrix: label count does not match columns");
  CorrelationMatrix m;
  m.labels = labels;
  m.input_count = input_count;
  m.sample_count = static_cast<std::size_t>(columns.rows());
  const Eigen::Index k = columns.cols();
  Eigen::MatrixXd centered = columns.rowwise() - columns.colwise().mean();
  Eigen::VectorXd norms = centered.colwise().norm();
  m.degenerate.assign(static_cast<std::size_t>(k), false);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(norms(j) > 0.0)) {
      m.degenerate[static_cast<std::size_t>(j)] = true;
      centered.col(j).setZero();
    } else {
      centered.col(j) /= norms(j);
    }
  }
  m.values = (centered.transpose() * centered).cwiseMax(-1.0).cwiseMin(1.0);
  m.values = (0.5 * (m.values + m.values.transpose())).eval();
  m.values.diagonal().setOnes();
  return m;
}

std::vector<double> column_of(const std::vector<ExperimentRecord>& records, const ParameterSpace& space,
                              const std::string& symbol) {
  std::vector<double> out;
  out.reserve(records.size());
  if (const auto idx = space.index_of(symbol)) {
    for (const auto& r : records) {
      if (r.setting.values.size() != space.dimension()) throw ArityError("record setting has wrong length");
      out.push_back(r.setting.values[*idx]);
    }
    return out;
  }
  for (const auto& r : records) {
    const auto it = r.raw_observables.find(symbol);
    if (it == r.raw_observables.end()) throw LookupError("record lacks observable " + symbol);
    out.push_back(it->second);
  }
  return out;
}

CorrelationMatrix pearson_matrix(const std::vector<ExperimentRecord>& records, const ParameterSpace& space,
                                 const std::vector<std::string>& outputs) {
  if (records.size() < 3) throw ArityError("pearson_matrix needs at least 3 records");
  std::vector<std::string> labels = space.symbols();
  labels.insert(labels.end(), outputs.begin(), outputs.end());
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(labels.size()));
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const auto v = column_of(records, space, labels[j]);
    for (std::size_t i = 0; i < v.size(); ++i) cols(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i];
  }
  return pearson_matrix(labels, space.dimension(), cols);
}

std::string to_string(Subset s) { return s == Subset::all ? "all" : "accepted"; }

DistributionSummary summarize(const std::vector<double>& values, const std::string& symbol, Subset subset) {
  if (values.size() < 10 && subset == Subset::all) throw ArityError("distribution summary needs at least 10 values");
  DistributionSummary s;
  s.symbol = symbol;
  s.subset = subset;
  s.sample_count = values.size();
  if (values.empty()) {
    s.empty = true;
    return s;
  }
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("distribution summary: non-finite value");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front(), hi = sorted.back(), range = hi - lo;
  const auto n = static_cast<double>(values.size());
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);

  std::size_t bins = 1;
  if (range > 0.0) {
    if (iqr > 0.0)
      bins = static_cast<std::size_t>(std::ceil(range / (2.0 * iqr * std::cbrt(1.0 / n))));
    else
      bins = static_cast<std::size_t>(std::ceil(std::log2(n))) + 1;  // Sturges when the IQR collapses
    bins = std::clamp<std::size_t>(bins, 1, kMaxBins);
  }
  const double left = range > 0.0 ? lo : lo - 0.5, width = range > 0.0 ? range / static_cast<double>(bins) : 1.0;
  for (std::size_t i = 0; i <= bins; ++i) s.bin_edges.push_back(left + width * static_cast<double>(i));
  s.bin_edges.back() = range > 0.0 ? hi : lo + 0.5;
  s.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - left) / width);
    s.counts[std::min(b, bins - 1)] += 1;
  }

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  double bw = 0.9 * spread * std::pow(n, -0.2);
  // Identical values: a narrow spike scaled to the magnitude of the value.
  if (!(bw > 0.0)) bw = 1e-3 * std::max(1.0, std::abs(mean));
  s.bandwidth = bw;
  const double g0 = lo - 4.0 * bw, g1 = hi + 4.0 * bw;
  for (std::size_t i = 0; i < kGridPoints; ++i) {
    const double x = g0 + (g1 - g0) * static_cast<double>(i) / static_cast<double>(kGridPoints - 1);
    s.grid.push_back(x);
  }
  s.density.assign(kGridPoints, 0.0);
  const double norm = 1.0 / (n * bw * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t i = 0; i < kGridPoints; ++i) {
    double acc = 0.0;
    for (double v : sorted) {
      const double z = (s.grid[i] - v) / bw;
      if (std::abs(z) < 40.0) acc += std::exp(-0.5 * z * z);
    }
    s.density[i] = acc * norm;
  }
  return s;
}

DistributionPair distribution_summary(const std::vector<ExperimentRecord>& records, const ParameterSpace& space,
                                      const std::string& symbol, const std::optional<ObjectiveSpec>& filter) {
  const auto values = column_of(records, space, symbol);
  DistributionPair out;
  out.all = summarize(values, symbol, Subset::all);
  std::vector<double> kept;
  if (filter && filter->acceptance_threshold) {
    const auto judged = column_of(records, space, filter->name);
    for (std::size_t i = 0; i < values.size(); ++i)
      if (filter->accepts(judged[i])) kept.push_back(values[i]);
  } else {
    kept = values;
  }
  out.accepted = summarize(kept, symbol, Subset::accepted);
  return out;
}

double density_at(const DistributionSummary& s, double x) {
  if (s.empty || s.grid.empty()) return 0.0;
  if (x < s.grid.front() || x > s.grid.back()) return 0.0;
  const auto it = std::upper_bound(s.grid.begin(), s.grid.end(), x);
  if (it == s.grid.end()) return s.density.back();
  const auto i = static_cast<std::size_t>(it - s.grid.begin());
  const double t = (x - s.grid[i - 1]) / (s.grid[i] - s.grid[i - 1]);
  return s.density[i - 1] + t * (s.density[i] - s.density[i - 1]);
}

double shape_distance(const DistributionSummary& a, const DistributionSummary& b) {
  if (a.empty || b.empty) return 1.0;
  const double pa = *std::max_element(a.density.begin(), a.density.end());
  const double pb = *std::max_element(b.density.begin(), b.density.end());
  double worst = 0.0;
  auto probe = [&](double x) { worst = std::max(worst, std::abs(density_at(a, x) / pa - density_at(b, x) / pb)); };
  for (double x : a.grid) probe(x);
  for (double x : b.grid) probe(x);
  return worst;
}

std::vector<CorrelationDrop> compare_matrices(const CorrelationMatrix& baseline, const CorrelationMatrix& probe,
                                              const std::string& output_symbol) {
  if (baseline.labels != probe.labels || baseline.input_count != probe.input_count)
    throw SchemaError("compare_matrices: label sets differ");
  const std::size_t out = baseline.index_of(output_symbol);
  std::vector<CorrelationDrop> drops;
  for (std::size_t i = 0; i < baseline.input_count; ++i) {
    CorrelationDrop d;
    d.symbol = baseline.labels[i];
    const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(out);
    d.baseline_abs = std::abs(baseline.values(r, c));
    d.probe_abs = std::abs(probe.values(r, c));
    d.floored = d.baseline_abs < kCorrelationFloor || d.probe_abs < kCorrelationFloor;
    d.drop = std::log10(std::max(d.baseline_abs, kCorrelationFloor)) - std::log10(std::max(d.probe_abs, kCorrelationFloor));
    drops.push_back(d);
  }
  std::stable_sort(drops.begin(), drops.end(), [](const auto& a, const auto& b) { return a.drop > b.drop; });
  return drops;
}

void write_matrix_csv(const CorrelationMatrix& m, const std::filesystem::path& path) {
  io::CsvWriter csv(path);
  std::vector<std::string> header{"symbol"};
  header.insert(header.end(), m.labels.begin(), m.labels.end());
  csv.row(header);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    std::vector<std::string> row{m.labels[i]};
    for (std::size_t j = 0; j < m.labels.size(); ++j)
      row.push_back(io::format_double(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
    csv.row(row);
  }
}

CorrelationMatrix read_matrix_csv(const std::filesystem::path& path, std::size_t input_count) {
  const auto t = io::read_csv(path);
  if (t.header.empty() || t.header.front() != "symbol") throw SchemaError(path.string() + " is not a matrix CSV");
  CorrelationMatrix m;
  m.labels.assign(t.header.begin() + 1, t.header.end());
  const auto n = m.labels.size();
  if (t.rows.size() != n) throw SchemaError(path.string() + " is not square");
  if (input_count > n) throw SchemaError(path.string() + " has fewer labels than inputs");
  m.input_count = input_count;
  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (t.rows[i].front() != m.labels[i]) throw SchemaError(path.string() + ": row label '" + t.rows[i].front() + "' out of order");
    for (std::size_t j = 0; j < n; ++j)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = io::parse_double(t.rows[i][j + 1]);
  }
  m.degenerate.assign(n, false);
  return m;
}

void write_distribution_csv(const DistributionSummary& s, const std::filesystem::path& path) {
  io::CsvWriter csv(path);
  csv.row(std::vector<std::string>{"bin_left", "bin_right", "count", "density_grid", "density_value"});
  const std::size_t rows = std::max(s.counts.size(), s.grid.size());
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<std::string> row(5);
    if (i < s.counts.size()) {
      row[0] = io::format_double(s.bin_edges[i]);
      row[1] = io::format_double(s.bin_edges[i + 1]);
      row[2] = std::to_string(s.counts[i]);
    }
    if (i < s.grid.size()) {
      row[3] = io::format_double(s.grid[i]);
      row[4] = io::format_double(s.density[i]);
    }
    csv.row(row);
  }
}

}  // namespace qcp::uq
