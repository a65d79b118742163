#include <doctest.h>

#include <cmath>

#include "qcopilot/agents/knowledge.hpp"
#include "qcopilot/diagnosis/diagnosis.hpp"
#include "qcopilot/error.hpp"
#include "qcopilot/rng.hpp"
#include "qcopilot/sampling/lhs.hpp"
#include "qcopilot/sim/backend.hpp"
#include "qcopilot/spaces.hpp"

using namespace qcp;
using namespace qcp::diag;

namespace {

const Setting kMotBest{{36.0, 8.0, 16.0, 3.0, 5.0}};
const Setting kPgcSetting{{90.0, 0.1, 0.8, 2.0, 10.0, 8.0}};

ExperimentRecord pixel_record(double value) {
  ExperimentRecord r;
  r.sub_experiment_id = "MOT";
  r.setting = kMotBest;
  r.raw_observables = {{kPixelIntegral, value}};
  r.objectives = {value};
  return r;
}

std::vector<ExperimentRecord> runs_at_best(const sim::ColdAtomRig& rig, std::size_t n, std::uint64_t seed) {
  std::vector<ExperimentRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pixel_record(rig.shoot_mot(kMotBest, derive_seed(seed, {i})).observables.at(kPixelIntegral)));
  return out;
}

// Noisy baseline from a 100-point optimized LHS scan of the healthy rig.
uq::CorrelationMatrix healthy_baseline(const sim::ColdAtomRig& rig, std::uint64_t seed) {
  const auto d = sampling::latin_hypercube(100, 5, derive_seed(seed, {0xba}));
  std::vector<ExperimentRecord> recs;
  for (Eigen::Index i = 0; i < d.points.rows(); ++i) {
    std::vector<double> u(5);
    for (int k = 0; k < 5; ++k) u[k] = d.points(i, k);
    ExperimentRecord r;
    r.setting = denormalize(rig.mot(), u);
    r.raw_observables = rig.shoot_mot(r.setting, derive_seed(seed, {0xbb, static_cast<std::uint64_t>(i)})).observables;
    recs.push_back(r);
  }
  return uq::pearson_matrix(recs, rig.mot(), {kPixelIntegral});
}

}  // namespace

TEST_SUITE("diagnosis") {
  TEST_CASE("reference statistics") {
    const auto s = reference_statistics({pixel_record(1.0), pixel_record(3.0)}, {kPixelIntegral});
    CHECK(s.at(kPixelIntegral).mean == 2.0);
    CHECK(s.at(kPixelIntegral).std == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS_AS(reference_statistics({pixel_record(1.0)}, {kPixelIntegral}), ArityError);
  }

  TEST_CASE("detect_deviation examples") {
    const ReferenceStats ref{{kPixelIntegral, {100.0, 1.0}}};
    std::vector<ExperimentRecord> ok(10, pixel_record(100.5));
    CHECK_FALSE(detect_deviation(ok, ref).flagged);

    // Two consecutive outliers are not enough, three are.
    std::vector<ExperimentRecord> dip{pixel_record(100.0), pixel_record(90.0), pixel_record(90.0), pixel_record(100.0)};
    CHECK_FALSE(detect_deviation(dip, ref).flagged);
    dip.push_back(pixel_record(80.0));
    dip.push_back(pixel_record(80.0));
    dip.push_back(pixel_record(80.0));
    const auto r = detect_deviation(dip, ref);
    CHECK(r.flagged);
    CHECK(r.flagged_at == 6);
    CHECK(r.deficit.at(kPixelIntegral) == doctest::Approx(0.2));

    CHECK_THROWS_AS(detect_deviation(ok, std::nullopt), StateError);
    CHECK_THROWS_AS(detect_deviation(ok, ReferenceStats{}), StateError);
  }

  TEST_CASE("X3 clamp is flagged within five runs") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      sim::ColdAtomRig rig{sim::SimulatorConfig{}};
      const auto ref = reference_statistics(runs_at_best(rig, 10, derive_seed(seed, {1})), {kPixelIntegral});
      rig.set_faults({{"X3", sim::Clamp{4.0}}});
      const auto r = detect_deviation(runs_at_best(rig, 5, derive_seed(seed, {2})), ref);
      CHECK(r.flagged);
    }
  }

  TEST_CASE("compare_image_sets examples") {
    sim::CcdImage a{3, 3, std::vector<double>(9, 0.0), "MOT"};
    a.pixels[4] = 10.0;
    sim::CcdImage half = a;
    half.pixels[4] = 5.0;
    const auto r = compare_image_sets({a}, {half}, 1.0, 1);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.worst().sub_experiment == "MOT");
    CHECK(r.worst().relative_deficit == doctest::Approx(0.5));
    CHECK(r.worst().score == doctest::Approx(0.5));
    CHECK(compare_image_sets({a}, {a}, 1.0, 1).worst().score == doctest::Approx(0.0));
    CHECK_THROWS_AS(compare_image_sets({}, {a}, 1.0, 1), ArityError);
    sim::CcdImage other = a;
    other.exposure_tag = "PGC@5ms";
    CHECK_THROWS_AS(compare_image_sets({a}, {other}, 1.0, 1), SchemaError);
  }

  TEST_CASE("an upstream MOT fault scores MOT above PGC") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      sim::ColdAtomRig rig{sim::SimulatorConfig{}};
      auto images = [&](std::uint64_t s) {
        std::vector<sim::CcdImage> out{rig.shoot_mot(kMotBest, s).image};
        for (auto& f : rig.shoot_pgc(kMotBest, kPgcSetting, s + 1).frames) out.push_back(std::move(f));
        return out;
      };
      const auto normal = images(derive_seed(seed, {3}));
      rig.set_faults({{"X3", sim::Clamp{4.0}}});
      const auto bad = images(derive_seed(seed, {4}));
      const auto r = compare_image_sets(normal, bad, rig.config().ccd.pixel_size, rig.config().ccd.border);
      REQUIRE(r.entries.size() == 2);
      CHECK(r.entries[0].sub_experiment == "MOT");
      CHECK(r.entries[0].score > r.entries[1].score);
      CHECK(r.worst().sub_experiment == "MOT");
    }
  }

  TEST_CASE("localization is deterministic and flags the clamped knob") {
    sim::ColdAtomRig rig{sim::SimulatorConfig{}};
    const auto base = healthy_baseline(rig, 1);
    rig.set_faults({{"X3", sim::Clamp{4.0}}});
    const auto eval = [&](const Setting& s, std::uint64_t sd) { return rig.shoot_mot(s, sd).observables; };
    LocalizeOptions o;
    o.seed = 3;
    const auto a = localize_parameter(rig.mot(), eval, base, kPixelIntegral, o);
    const auto b = localize_parameter(rig.mot(), eval, base, kPixelIntegral, o);
    CHECK(a.probe.values == b.probe.values);
    CHECK(a.probe_records == b.probe_records);
    CHECK(a.ranked.front().symbol == "X3");
    CHECK(a.probe_records.size() == 50);
    for (std::size_t i = 1; i < a.ranked.size(); ++i) CHECK(a.ranked[i - 1].drop >= a.ranked[i].drop);
  }

  TEST_CASE("clamped knobs decorrelate from the output") {
    // 0.28 is the two-sided 95% null quantile of rho at n = 50.
    for (const char* sym : {"X3", "X4"}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        sim::ColdAtomRig rig{sim::SimulatorConfig{}};
        const auto base = healthy_baseline(rig, seed);
        const double mid = 0.5 * (rig.mot()[rig.mot().require_index(sym)].lower + rig.mot()[rig.mot().require_index(sym)].upper);
        rig.set_faults({{sym, sim::Clamp{mid}}});
        const auto eval = [&](const Setting& s, std::uint64_t sd) { return rig.shoot_mot(s, sd).observables; };
        LocalizeOptions o;
        o.seed = seed;
        const auto r = localize_parameter(rig.mot(), eval, base, kPixelIntegral, o);
        CAPTURE(sym);
        CAPTURE(seed);
        CHECK(std::abs(r.probe.at(sym, kPixelIntegral)) < 0.28);
      }
    }
  }

  TEST_CASE("too many failed probes") {
    sim::ColdAtomRig rig{sim::SimulatorConfig{}};
    const auto base = healthy_baseline(rig, 2);
    int calls = 0;
    const auto flaky = [&](const Setting& s, std::uint64_t sd) {
      if (++calls % 4 == 0) throw EvaluationError("shutter stuck");
      return rig.shoot_mot(s, sd).observables;
    };
    CHECK_THROWS_AS(localize_parameter(rig.mot(), flaky, base, kPixelIntegral), InsufficientDataError);
    calls = 0;
    const auto rare = [&](const Setting& s, std::uint64_t sd) {
      if (++calls % 10 == 0) throw EvaluationError("shutter stuck");
      return rig.shoot_mot(s, sd).observables;
    };
    const auto r = localize_parameter(rig.mot(), rare, base, kPixelIntegral);
    CHECK(r.failures == 5);
    CHECK(r.probe_records.size() == 45);
  }

  TEST_CASE("root cause retrieval") {
    agents::KnowledgeBase kb;
    agents::seed_knowledge_base(kb);
    const auto h = retrieve_root_causes(kb, "X3", "cooling light intensity", "MOT");
    CHECK(h.confidence == Confidence::retrieved);
    REQUIRE_FALSE(h.entries.empty());
    CHECK(h.entries.size() <= 5);
    CHECK(h.entries.front().text == "cooling light intensity drift: check AOM driver");
    for (std::size_t i = 1; i < h.entries.size(); ++i) CHECK(h.entries[i - 1].similarity >= h.entries[i].similarity);
    const auto again = retrieve_root_causes(kb, "X3", "cooling light intensity", "MOT");
    CHECK(again.query == h.query);
    REQUIRE(again.entries.size() == h.entries.size());
    for (std::size_t i = 0; i < h.entries.size(); ++i) CHECK(again.entries[i].id == h.entries[i].id);

    const agents::KnowledgeBase empty;
    const auto none = retrieve_root_causes(empty, "X3", "cooling light intensity", "MOT");
    CHECK(none.confidence == Confidence::none_found);
    CHECK(none.entries.empty());
  }

  TEST_CASE("report text names the suspect") {
    DiagnosisReport rep;
    rep.sub_experiment = "MOT";
    rep.ranking.output_symbol = kPixelIntegral;
    rep.ranking.suspects = {"X3"};
    RootCauseHypothesis h;
    h.suspect = "X3";
    h.confidence = Confidence::retrieved;
    h.entries = {{7, "cooling light intensity drift: check AOM driver", 0.6}};
    rep.hypotheses = {h};
    const auto text = format_report(rep);
    CHECK(text.find("faulty sub-experiment: MOT") != std::string::npos);
    CHECK(text.find("cooling light intensity drift: check AOM driver") != std::string::npos);
    CHECK(rep.unique_suspect());
  }
}
