#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "qcopilot/param_space.hpp"

namespace qcp::uq {

inline constexpr double kCorrelationFloor = 1e-6;

struct CorrelationMatrix {
  std::vector<std::string> labels;  // inputs first, then outputs
  std::size_t input_count = 0;
  Eigen::MatrixXd values;
  std::size_t sample_count = 0;
  std::vector<bool> degenerate;  // per label: zero variance, off-diagonal entries forced to 0

  std::size_t index_of(const std::string& label) const;  // LookupError
  double at(const std::string& a, const std::string& b) const;
};

// Columns are samples of each label. Throws ArityError with fewer than 3 rows.
CorrelationMatrix pearson_matrix(const std::vector<std::string>& labels, std::size_t input_count,
                                 const Eigen::MatrixXd& columns);
// Inputs are the setting values of `space`, outputs are raw observables (LookupError if missing).
CorrelationMatrix pearson_matrix(const std::vector<ExperimentRecord>& records, const ParameterSpace& space,
                                 const std::vector<std::string>& outputs);

// Values of a symbol across records: a parameter of `space` or a raw observable.
std::vector<double> column_of(const std::vector<ExperimentRecord>& records, const ParameterSpace& space,
                              const std::string& symbol);

enum class Subset { all, accepted };
std::string to_string(Subset s);

struct DistributionSummary {
  std::string symbol;
  Subset subset = Subset::all;
  std::size_t sample_count = 0;
  bool empty = false;  // accepted subset with no members
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

struct DistributionPair {
  DistributionSummary all;
  DistributionSummary accepted;
};

// Freedman-Diaconis histogram plus Silverman-bandwidth Gaussian KDE. Throws ArityError with
// fewer than 10 values.
DistributionSummary summarize(const std::vector<double>& values, const std::string& symbol, Subset subset);

// `filter` selects the accepted subset through its acceptance threshold; without a threshold the
// accepted subset equals the full set.
DistributionPair distribution_summary(const std::vector<ExperimentRecord>& records, const ParameterSpace& space,
                                      const std::string& symbol, const std::optional<ObjectiveSpec>& filter);

// KDE of the summary at x.
double density_at(const DistributionSummary& s, double x);
// Sup-norm distance of the two densities, each scaled to unit peak, over the union of their grids.
double shape_distance(const DistributionSummary& a, const DistributionSummary& b);

struct CorrelationDrop {
  std::string symbol;
  double baseline_abs = 0.0;
  double probe_abs = 0.0;
  double drop = 0.0;  // decades, log10(base) - log10(probe) after flooring
  bool floored = false;
};

// Per input symbol, sorted by drop descending. Throws SchemaError on label mismatch.
std::vector<CorrelationDrop> compare_matrices(const CorrelationMatrix& baseline, const CorrelationMatrix& probe,
                                              const std::string& output_symbol);

void write_matrix_csv(const CorrelationMatrix& m, const std::filesystem::path& path);
// Inverse of write_matrix_csv; sample count and degenerate flags are not stored.
CorrelationMatrix read_matrix_csv(const std::filesystem::path& path, std::size_t input_count);
// bin_left, bin_right, count, density_grid, density_value; short columns are left blank.
void write_distribution_csv(const DistributionSummary& s, const std::filesystem::path& path);

}  // namespace qcp::uq
