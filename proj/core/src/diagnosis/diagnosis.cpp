#include "qcopilot/diagnosis/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "qcopilot/error.hpp"
#include "qcopilot/rng.hpp"
#include "qcopilot/sampling/lhs.hpp"
#include "qcopilot/sim/backend.hpp"

namespace qcp::diag {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Group {
  std::string name;
  double integral = 0.0;
  double width = 0.0;
  std::size_t count = 0;
};

std::vector<Group> group_images(const std::vector<sim::CcdImage>& images, double pixel_size, int border) {
  std::vector<Group> groups;
  for (const auto& img : images) {
    const std::string name = sim::sub_experiment_of(img.exposure_tag);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) { return g.name == name; });
    if (it == groups.end()) {
      groups.push_back({name});
      it = groups.end() - 1;
    }
    it->integral += sim::pixel_integral(img, border);
    it->width += sim::cloud_width(img, pixel_size, border);
    it->count += 1;
  }
  for (auto& g : groups) {
    g.integral /= static_cast<double>(g.count);
    g.width /= static_cast<double>(g.count);
  }
  return groups;
}

}  // namespace

ReferenceStats reference_statistics(const std::vector<ExperimentRecord>& records,
                                    const std::vector<std::string>& outputs) {
  if (records.size() < 2) throw ArityError("reference statistics need at least 2 records");
  ReferenceStats out;
  for (const auto& name : outputs) {
    double sum = 0.0;
    std::vector<double> v;
    for (const auto& r : records) {
      const auto it = r.raw_observables.find(name);
      if (it == r.raw_observables.end()) throw LookupError("record lacks observable " + name);
      v.push_back(it->second);
      sum += it->second;
    }
    const double mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    out[name] = {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
  }
  return out;
}

DeviationResult detect_deviation(const std::vector<ExperimentRecord>& recent, const std::optional<ReferenceStats>& reference,
                                 const DeviationOptions& options) {
  if (!reference || reference->empty()) throw StateError("deviation check needs reference statistics");
  if (options.window < 1) throw SpecError("deviation window must be >= 1");
  DeviationResult out;
  std::size_t run = 0;
  for (std::size_t i = 0; i < recent.size(); ++i) {
    bool outside = false;
    for (const auto& [name, st] : *reference) {
      const auto it = recent[i].raw_observables.find(name);
      if (it == recent[i].raw_observables.end()) throw LookupError("record lacks observable " + name);
      if (std::abs(it->second - st.mean) > options.k_sigma * st.std) outside = true;
    }
    run = outside ? run + 1 : 0;
    if (run >= options.window) {
      out.flagged = true;
      out.flagged_at = i;
      for (const auto& [name, st] : *reference) {
        double acc = 0.0;
        for (std::size_t j = i + 1 - options.window; j <= i; ++j) acc += recent[j].raw_observables.at(name);
        const double mean = acc / static_cast<double>(options.window);
        out.deficit[name] = st.mean != 0.0 ? (st.mean - mean) / std::abs(st.mean) : 0.0;
      }
      break;
    }
  }
  return out;
}

const SubExperimentDiff& ImageDiffReport::worst() const {
  if (entries.empty()) throw ArityError("empty image diff report");
  // First maximum wins, so upstream sub-experiments take ties.
  const SubExperimentDiff* best = &entries.front();
  for (const auto& e : entries)
    if (e.score > best->score) best = &e;
  return *best;
}

ImageDiffReport compare_image_sets(const std::vector<sim::CcdImage>& normal, const std::vector<sim::CcdImage>& anomalous,
                                   double pixel_size, int border) {
  if (normal.empty() || anomalous.empty()) throw ArityError("compare_image_sets needs images on both sides");
  const auto a = group_images(normal, pixel_size, border);
  const auto b = group_images(anomalous, pixel_size, border);
  if (a.size() != b.size()) throw SchemaError("image sets cover different sub-experiments");
  ImageDiffReport report;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name) throw SchemaError("image sets cover different sub-experiments");
    SubExperimentDiff d;
    d.sub_experiment = a[i].name;
    d.normal_integral = a[i].integral;
    d.anomalous_integral = b[i].integral;
    double n = a[i].integral, m = b[i].integral;
    if (i > 0) {
      n = a[i - 1].integral > 0.0 ? n / a[i - 1].integral : 0.0;
      m = b[i - 1].integral > 0.0 ? m / b[i - 1].integral : 0.0;
    }
    d.relative_deficit = n > 0.0 ? std::clamp((n - m) / n, 0.0, 1.0) : 0.0;
    d.width_ratio = (a[i].width > 0.0 && b[i].width > 0.0) ? b[i].width / a[i].width : 1.0;
    const double shape = std::min(d.width_ratio, 1.0 / d.width_ratio);
    d.score = std::clamp(1.0 - (1.0 - d.relative_deficit) * shape, 0.0, 1.0);
    report.entries.push_back(d);
  }
  return report;
}

SuspectRanking localize_parameter(const ParameterSpace& space, const ProbeEvaluator& evaluate,
                                  const uq::CorrelationMatrix& baseline, const std::string& output_symbol,
                                  const LocalizeOptions& options) {
  if (options.n_probe < 3) throw SpecError("localize_parameter needs at least 3 probes");
  const std::vector<std::string> outputs(baseline.labels.begin() + static_cast<std::ptrdiff_t>(baseline.input_count),
                                         baseline.labels.end());
  const auto design = sampling::optimize_maximin(
      sampling::latin_hypercube(options.n_probe, space.dimension(), derive_seed(options.seed, {0x6c})),
      static_cast<std::size_t>(options.anneal_iterations), derive_seed(options.seed, {0x61}));

  SuspectRanking out;
  out.output_symbol = output_symbol;
  for (Eigen::Index i = 0; i < design.points.rows(); ++i) {
    std::vector<double> unit(static_cast<std::size_t>(design.points.cols()));
    for (Eigen::Index j = 0; j < design.points.cols(); ++j) unit[static_cast<std::size_t>(j)] = design.points(i, j);
    ExperimentRecord r;
    r.sub_experiment_id = space.name();
    r.setting = denormalize_clamped(space, unit);
    r.stage = Stage::diagnosis;
    r.seed = derive_seed(options.seed, {0x70, static_cast<std::uint64_t>(i)});
    r.timestamp = static_cast<std::uint64_t>(i);
    try {
      r.raw_observables = evaluate(r.setting, r.seed);
    } catch (const Error&) {
      ++out.failures;
      continue;
    }
    out.probe_records.push_back(std::move(r));
  }
  if (static_cast<double>(out.failures) > options.max_failure_fraction * static_cast<double>(options.n_probe))
    throw InsufficientDataError("too many failed probes: " + std::to_string(out.failures) + " of " +
                                std::to_string(options.n_probe));
  out.probe = uq::pearson_matrix(out.probe_records, space, outputs);
  out.ranked = uq::compare_matrices(baseline, out.probe, output_symbol);
  for (const auto& d : out.ranked)
    if (d.drop >= options.drop_threshold) out.suspects.push_back(d.symbol);
  return out;
}

std::string to_string(Confidence c) { return c == Confidence::retrieved ? "retrieved" : "none_found"; }

RootCauseHypothesis retrieve_root_causes(const agents::KnowledgeBase& kb, const std::string& suspect,
                                         const std::string& parameter_name, const std::string& sub_experiment) {
  RootCauseHypothesis h;
  h.suspect = suspect;
  h.query = suspect + " " + parameter_name + " " + sub_experiment + " fault";
  for (const auto& hit : kb.search(h.query, 5)) h.entries.push_back({hit.entry->id, hit.entry->text, hit.similarity});
  h.confidence = !h.entries.empty() && h.entries.front().similarity >= kMinRetrievalSimilarity ? Confidence::retrieved
                                                                                               : Confidence::none_found;
  return h;
}

std::string format_report(const DiagnosisReport& r) {
  std::ostringstream out;
  out << "# diagnosis report\n\n";
  out << "## image comparison\n";
  out << "sub_experiment normal_integral anomalous_integral relative_deficit width_ratio score\n";
  for (const auto& e : r.images.entries)
    out << e.sub_experiment << " " << num(e.normal_integral) << " " << num(e.anomalous_integral) << " "
        << num(e.relative_deficit) << " " << num(e.width_ratio) << " " << num(e.score) << "\n";
  out << "faulty sub-experiment: " << r.sub_experiment << "\n\n";

  auto matrix = [&](const char* title, const uq::CorrelationMatrix& m) {
    out << "## " << title << " correlation (n=" << m.sample_count << ")\n";
    out << "symbol";
    for (const auto& l : m.labels) out << " " << l;
    out << "\n";
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      out << m.labels[i];
      for (std::size_t j = 0; j < m.labels.size(); ++j)
        out << " " << num(m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      out << "\n";
    }
    out << "\n";
  };
  matrix("baseline", r.baseline);
  matrix("probe", r.ranking.probe);

  out << "## suspects vs " << r.ranking.output_symbol << " (probe failures " << r.ranking.failures << ")\n";
  out << "rank symbol baseline_abs probe_abs drop_decades floored\n";
  for (std::size_t i = 0; i < r.ranking.ranked.size(); ++i) {
    const auto& d = r.ranking.ranked[i];
    out << i + 1 << " " << d.symbol << " " << num(d.baseline_abs) << " " << num(d.probe_abs) << " " << num(d.drop)
        << " " << (d.floored ? "yes" : "no") << "\n";
  }
  out << "suspect set:";
  for (const auto& s : r.ranking.suspects) out << " " << s;
  if (r.ranking.suspects.empty()) out << " (none)";
  out << "\nverdict: " << (r.unique_suspect() ? "unique suspect " + r.ranking.suspects.front() : std::string("needs human"))
      << "\n\n";

  out << "## root-cause hypotheses\n";
  for (const auto& h : r.hypotheses) {
    out << h.suspect << " [" << to_string(h.confidence) << "] query: " << h.query << "\n";
    for (const auto& e : h.entries) {
      std::string flat = e.text;
      std::replace(flat.begin(), flat.end(), '\n', ';');
      out << "  " << num(e.similarity) << " #" << e.id << " " << flat << "\n";
    }
  }
  return out.str();
}

}  // namespace qcp::diag
