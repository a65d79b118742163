#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcopilot/agents/knowledge.hpp"
#include "qcopilot/param_space.hpp"
#include "qcopilot/sim/ccd.hpp"
#include "qcopilot/uq/uq.hpp"

namespace qcp::diag {

struct OutputStats {
  double mean = 0.0;
  double std = 0.0;
};

// Per observable, from runs at the fixed optimum.
using ReferenceStats = std::map<std::string, OutputStats>;

// Sample mean and (n - 1) std of each output. Throws ArityError with fewer than 2 records.
ReferenceStats reference_statistics(const std::vector<ExperimentRecord>& records,
                                    const std::vector<std::string>& outputs);

struct DeviationOptions {
  double k_sigma = 4.0;
  std::size_t window = 3;
};

struct DeviationResult {
  bool flagged = false;
  std::optional<std::size_t> flagged_at;  // index into `recent` of the run completing the window
  std::map<std::string, double> deficit;  // relative, (mean - value) / |mean|, averaged over the window
};

// A run is out of band when any referenced output lies outside mean +- k std; the flag rises on
// `window` consecutive out-of-band runs. Throws StateError when `reference` is missing or empty.
DeviationResult detect_deviation(const std::vector<ExperimentRecord>& recent, const std::optional<ReferenceStats>& reference,
                                 const DeviationOptions& options = {});

struct SubExperimentDiff {
  std::string sub_experiment;
  double normal_integral = 0.0;     // mean over the images of this sub-experiment
  double anomalous_integral = 0.0;
  double relative_deficit = 0.0;    // in [0, 1]
  double width_ratio = 1.0;         // anomalous / normal rms radius
  double score = 0.0;               // 1 - (1 - deficit) * min(r, 1/r)
};

struct ImageDiffReport {
  std::vector<SubExperimentDiff> entries;  // in order of first appearance
  const SubExperimentDiff& worst() const;
};

// Groups images by the exposure-tag prefix before '@'. Later sub-experiments are loaded from
// earlier ones, so their integrals are compared as a fraction of the preceding sub-experiment's
// integral in the same set; a fault upstream is then not double counted downstream.
// Throws ArityError on an empty side, SchemaError when the coverage differs.
ImageDiffReport compare_image_sets(const std::vector<sim::CcdImage>& normal, const std::vector<sim::CcdImage>& anomalous,
                                   double pixel_size, int border = 4);

// One probe shot. Throws any qcp::Error on failure.
using ProbeEvaluator = std::function<Observables(const Setting& setting, std::uint64_t seed)>;

struct LocalizeOptions {
  std::size_t n_probe = 50;
  double drop_threshold = 1.0;  // decades
  std::uint64_t seed = 0;
  int anneal_iterations = 2000;
  double max_failure_fraction = 0.2;
};

struct SuspectRanking {
  std::string output_symbol;
  std::vector<uq::CorrelationDrop> ranked;  // descending by drop
  std::vector<std::string> suspects;        // drop >= threshold, in rank order
  uq::CorrelationMatrix probe;
  std::vector<ExperimentRecord> probe_records;
  std::size_t failures = 0;
};

// Probes an optimized LHS design through `evaluate` (fault still active) and ranks inputs by the
// correlation drop against `baseline`. Throws InsufficientDataError when more than 20% of probes fail.
SuspectRanking localize_parameter(const ParameterSpace& space, const ProbeEvaluator& evaluate,
                                  const uq::CorrelationMatrix& baseline, const std::string& output_symbol,
                                  const LocalizeOptions& options = {});

enum class Confidence { retrieved, none_found };
std::string to_string(Confidence c);

struct RetrievedKnowledge {
  std::uint64_t id = 0;
  std::string text;
  double similarity = 0.0;
};

struct RootCauseHypothesis {
  std::string suspect;
  std::string query;
  std::vector<RetrievedKnowledge> entries;  // similarity descending
  Confidence confidence = Confidence::none_found;
};

inline constexpr double kMinRetrievalSimilarity = 0.2;

// Query is "<symbol> <parameter name> <sub-experiment> fault"; top 5 by similarity.
RootCauseHypothesis retrieve_root_causes(const agents::KnowledgeBase& kb, const std::string& suspect,
                                         const std::string& parameter_name, const std::string& sub_experiment);

struct DiagnosisReport {
  ImageDiffReport images;
  std::string sub_experiment;
  uq::CorrelationMatrix baseline;
  SuspectRanking ranking;
  std::vector<RootCauseHypothesis> hypotheses;

  bool unique_suspect() const { return ranking.suspects.size() == 1; }
};

std::string format_report(const DiagnosisReport& report);

}  // namespace qcp::diag
