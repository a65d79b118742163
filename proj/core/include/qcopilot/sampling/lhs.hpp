#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>

namespace qcp::sampling {

struct Design {
  Eigen::MatrixXd points;  // n x d, unit cube
  std::uint64_t seed = 0;
  double maximin_distance = 0.0;
};

// Smallest pairwise Euclidean distance; +inf for fewer than two rows.
double maximin_distance(const Eigen::MatrixXd& points);

// True when every column has exactly one sample in each of the n strata [i/n, (i+1)/n)
// (the last stratum closed).
bool is_stratified(const Eigen::MatrixXd& points);

// Random permutation per column with uniform jitter inside each stratum.
// Throws ArityError on n < 1 or d < 1.
Design latin_hypercube(std::size_t n, std::size_t d, std::uint64_t seed);

struct AnnealStats {
  std::size_t proposals = 0;
  std::size_t accepted = 0;
};

// Column-wise swap annealing on the Morris-Mitchell phi_15 potential, restricted to swaps that
// do not lower the maximin distance. Temperature decays by 0.95 every 100 proposals.
Design optimize_maximin(const Design& design, std::size_t iterations, std::uint64_t seed,
                        AnnealStats* stats = nullptr);

// One row per sample, header x1..xd.
void write_design_csv(const Design& design, const std::filesystem::path& path);

}  // namespace qcp::sampling
