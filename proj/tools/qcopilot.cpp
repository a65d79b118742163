#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qcopilot/agents/chat.hpp"
#include "qcopilot/agents/knowledge.hpp"
#include "qcopilot/agents/orchestrator.hpp"
#include "qcopilot/error.hpp"
#include "qcopilot/io/csv.hpp"
#include "qcopilot/record_store.hpp"
#include "qcopilot/sim/config.hpp"
#include "qcopilot/sim/lab.hpp"
#include "qcopilot/uq/uq.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit : int { ok = 0, missing_artifact = 1, usage = 2, ordering = 3, needs_human = 4 };

struct CliFailure {
  int code;
  std::string message;
};

struct Common {
  std::string config;  // simulator config; defaults when empty
  std::uint64_t seed = 0;
  std::string out = "qcp_out";
  std::string task;  // task spec JSON; falls back to <out>/task.json, then the MOT+PGC default
  std::string kb;    // knowledge base directory, <out>/kb by default
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliFailure{missing_artifact, "cannot read " + p.string()};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw qcp::IoError("cannot write " + p.string());
}

std::string default_task_json() {
  ojson j;
  j["sub_experiments"] = ojson::array();
  for (const auto& s : qcp::agents::default_task_spec().sub_experiments)
    j["sub_experiments"].push_back(
        {{"id", s.id}, {"space", s.space_name}, {"objectives", s.id == "MOT" ? "mot" : "pgc"}, {"requirement", s.requirement}});
  j["global_requirements"] = qcp::agents::default_task_spec().global_requirements;
  return j.dump(2) + "\n";
}

std::string task_text(const Common& c) {
  if (!c.task.empty()) return read_text(c.task);
  const fs::path saved = fs::path(c.out) / "task.json";
  if (fs::exists(saved)) return read_text(saved);
  return default_task_json();
}

qcp::sim::SimulatorConfig load_config(const Common& c) {
  if (c.config.empty()) return {};
  if (!fs::exists(c.config)) throw CliFailure{missing_artifact, "config " + c.config + " does not exist"};
  return qcp::sim::load_simulator_config(c.config);
}

qcp::agents::KnowledgeBase open_kb(const Common& c) {
  const fs::path dir = c.kb.empty() ? fs::path(c.out) / "kb" : fs::path(c.kb);
  auto kb = qcp::agents::KnowledgeBase::open(dir);
  if (kb.size() == 0) qcp::agents::seed_knowledge_base(kb);
  return kb;
}

// Remote planner and advisor only when QCP_LLM_URL is set.
struct RemoteClients {
  std::unique_ptr<qcp::agents::HttpChatClient> chat;
  qcp::agents::Clients clients() const { return {chat.get(), chat.get(), nullptr}; }
};

RemoteClients remote_clients() {
  RemoteClients r;
  if (auto s = qcp::agents::http_settings_from_env()) r.chat = std::make_unique<qcp::agents::HttpChatClient>(*s);
  return r;
}

ojson reference_to_json(const qcp::diag::ReferenceStats& ref) {
  ojson j = ojson::object();
  for (const auto& [k, v] : ref) j[k] = {{"mean", v.mean}, {"std", v.std}};
  return j;
}

std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "normal_%04zu.pgm", i);
  return buf;
}

struct Workspace {
  std::vector<qcp::agents::SubExperimentOutcome> outcomes;
  qcp::diag::ReferenceStats reference;
  std::vector<qcp::sim::CcdImage> normal_images;
};

// Everything the later commands need from optimize. Anything missing is an ordering violation.
void require_workspace(const qcp::agents::TaskSpec& spec, const fs::path& out) {
  std::vector<std::string> missing;
  std::vector<fs::path> needed{out / "best_parameters.json", out / "reference.json", out / "normal"};
  for (const auto& s : spec.sub_experiments) needed.push_back(out / ("corr_baseline_" + s.id + ".csv"));
  for (const auto& p : needed)
    if (!fs::exists(p)) missing.push_back(p.string());
  if (missing.empty()) return;
  std::string msg = "missing optimization artifacts (run optimize first):";
  for (const auto& m : missing) msg += "\n  " + m;
  throw CliFailure{ordering, msg};
}

Workspace load_workspace(const qcp::agents::TaskSpec& spec, const qcp::agents::KnowledgeBase& kb, const fs::path& out) {
  require_workspace(spec, out);
  const auto best_path = out / "best_parameters.json";
  const auto ref_path = out / "reference.json";
  const auto img_dir = out / "normal";
  Workspace w;
  const auto best = ojson::parse(read_text(best_path));
  for (const auto& s : spec.sub_experiments) {
    qcp::agents::SubExperimentOutcome o;
    o.spec = s;
    o.space = qcp::agents::lookup_hardware_bounds(kb, s.space_name);
    if (!best.contains(s.id)) throw CliFailure{ordering, "no fixed parameters for " + s.id + "; run optimize first"};
    qcp::Setting setting;
    for (const auto& sym : o.space.symbols()) setting.values.push_back(best.at(s.id).at(sym).get<double>());
    o.best = setting;
    o.baseline = qcp::uq::read_matrix_csv(out / ("corr_baseline_" + s.id + ".csv"), o.space.dimension());
    const auto rec = out / (s.id + "_records.jsonl");
    if (fs::exists(rec)) {
      o.history.records = qcp::read_records(rec);
      o.baseline->sample_count = o.history.records.size();
    }
    w.outcomes.push_back(std::move(o));
  }
  const auto ref = ojson::parse(read_text(ref_path));
  for (const auto& [k, v] : ref.items())
    w.reference[k] = {v.at("mean").get<double>(), v.at("std").get<double>()};
  std::vector<fs::path> images;
  for (const auto& e : fs::directory_iterator(img_dir))
    if (e.path().extension() == ".pgm") images.push_back(e.path());
  std::sort(images.begin(), images.end());
  if (images.empty()) throw CliFailure{ordering, "no calibration images in " + img_dir.string() + "; run optimize first"};
  for (const auto& p : images) w.normal_images.push_back(qcp::sim::read_pgm(p));
  return w;
}

void mkdirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw qcp::IoError("cannot create " + p.string());
}

// --- optimize ---------------------------------------------------------------------------------

struct OptimizeArgs {
  std::size_t budget = 100;
  std::size_t batch = 4;
  int repeats = 3;
  std::size_t calibration = 10;
};

int cmd_optimize(const Common& c, const OptimizeArgs& a) {
  if (a.budget == 0) throw CliFailure{usage, "--budget must be positive"};
  if (a.calibration < 2) throw CliFailure{usage, "--calibration needs at least 2 runs"};
  const fs::path out = c.out;
  mkdirs(out);
  const std::string task = task_text(c);
  auto spec = qcp::agents::task_spec_from_json(task);
  auto kb = open_kb(c);
  qcp::sim::SimulatedLab lab(load_config(c));
  auto remote = remote_clients();

  qcp::agents::OrchestratorConfig oc;
  oc.seed = c.seed;
  oc.default_budget = a.budget;
  oc.batch_size = a.batch;
  oc.repeats = a.repeats;
  oc.calibration_runs = a.calibration;
  qcp::agents::Orchestrator orch(spec, lab, kb, oc, remote.clients());
  orch.optimize();

  orch.write_artifacts(out);
  write_text(out / "task.json", task);
  write_text(out / "reference.json", reference_to_json(*orch.reference()).dump(2) + "\n");
  const fs::path img_dir = out / "normal";
  mkdirs(img_dir);
  for (const auto& e : fs::directory_iterator(img_dir))
    if (e.path().extension() == ".pgm") fs::remove(e.path());
  for (std::size_t i = 0; i < orch.normal_images().size(); ++i)
    qcp::sim::write_pgm(orch.normal_images()[i], img_dir / image_name(i));

  for (const auto& o : orch.outcomes()) {
    std::cout << o.spec.id << ": " << qcp::agents::to_string(o.method.method) << ", " << o.history.records.size()
              << " records, best_so_far " << qcp::io::format_double(o.history.best_so_far.back()) << "\n";
  }
  std::cout << "artifacts in " << out.string() << "\n";
  return ok;
}

// --- run / diagnose ---------------------------------------------------------------------------

struct StageArgs {
  std::size_t runs = 10;
  std::size_t reruns = 3;
  std::size_t probes = 50;
  double drop_threshold = 1.0;
};

qcp::agents::OrchestratorConfig stage_config(const Common& c, const StageArgs& a) {
  if (a.probes < 3) throw CliFailure{usage, "--probes needs at least 3 samples"};
  if (a.reruns == 0) throw CliFailure{usage, "--reruns must be positive"};
  qcp::agents::OrchestratorConfig oc;
  oc.seed = c.seed;
  oc.self_sustained_runs = a.runs;
  oc.rerun_count = a.reruns;
  oc.n_probe = a.probes;
  oc.drop_threshold = a.drop_threshold;
  return oc;
}

void print_verdict(const qcp::diag::DiagnosisReport& r) {
  std::cout << "anomalous sub-experiment: " << r.sub_experiment << "\n";
  std::cout << "suspects:";
  if (r.ranking.suspects.empty()) std::cout << " none";
  for (const auto& s : r.ranking.suspects) std::cout << " " << s;
  std::cout << "\n";
  if (r.unique_suspect() && !r.hypotheses.empty() && !r.hypotheses.front().entries.empty())
    std::cout << "top hypothesis: " << r.hypotheses.front().entries.front().text << "\n";
}

int cmd_run(const Common& c, const StageArgs& a) {
  if (a.runs == 0) throw CliFailure{usage, "--runs must be positive"};
  const fs::path out = c.out;
  auto spec = qcp::agents::task_spec_from_json(task_text(c));
  require_workspace(spec, out);
  auto kb = open_kb(c);
  auto ws = load_workspace(spec, kb, out);
  qcp::sim::SimulatedLab lab(load_config(c));
  auto remote = remote_clients();
  qcp::agents::Orchestrator orch(spec, lab, kb, stage_config(c, a), remote.clients());
  orch.restore(std::move(ws.outcomes), std::move(ws.reference), std::move(ws.normal_images));
  while (orch.runs_done() < a.runs && orch.state() == qcp::agents::State::self_sustained) orch.run_once();

  write_text(out / "run_trace.txt", orch.state_trace());
  write_text(out / "run_messages.jsonl", orch.bus().log_jsonl());
  qcp::write_records(out / "run_monitor.jsonl", orch.monitor_records());
  for (std::size_t k = 0; k < orch.diagnoses().size(); ++k) {
    write_text(out / ("run_diagnosis_" + std::to_string(k) + ".txt"), qcp::diag::format_report(orch.diagnoses()[k]));
    qcp::uq::write_matrix_csv(orch.diagnoses()[k].ranking.probe, out / ("run_corr_probe_" + std::to_string(k) + ".csv"));
  }
  std::cout << orch.state_trace();
  for (const auto& d : orch.diagnoses()) print_verdict(d);
  return orch.state() == qcp::agents::State::needs_human ? needs_human : ok;
}

int cmd_diagnose(const Common& c, const StageArgs& a) {
  const fs::path out = c.out;
  auto spec = qcp::agents::task_spec_from_json(task_text(c));
  require_workspace(spec, out);
  auto kb = open_kb(c);
  auto ws = load_workspace(spec, kb, out);
  qcp::sim::SimulatedLab lab(load_config(c));
  auto remote = remote_clients();
  qcp::agents::Orchestrator orch(spec, lab, kb, stage_config(c, a), remote.clients());
  orch.restore(std::move(ws.outcomes), std::move(ws.reference), std::move(ws.normal_images));
  const auto report = orch.diagnose();

  write_text(out / "diagnosis_report.txt", qcp::diag::format_report(report));
  qcp::uq::write_matrix_csv(report.baseline, out / "corr_baseline.csv");
  qcp::uq::write_matrix_csv(report.ranking.probe, out / "corr_probe.csv");
  qcp::write_records(out / "probe_records.jsonl", report.ranking.probe_records);
  print_verdict(report);
  if (report.unique_suspect()) return ok;
  std::cout << "needs human: " << report.ranking.suspects.size() << " suspects\n";
  return needs_human;
}

// --- inject-fault -----------------------------------------------------------------------------

struct FaultArgs {
  std::string param;
  std::optional<double> clamp;
  std::optional<double> scale;
};

int cmd_inject_fault(const Common& c, const FaultArgs& a) {
  if (c.config.empty()) throw CliFailure{usage, "inject-fault needs --config to write the fault into"};
  auto config = fs::exists(c.config) ? qcp::sim::load_simulator_config(c.config) : qcp::sim::SimulatorConfig{};
  qcp::sim::FaultSpec f;
  f.target_symbol = a.param;
  if (a.clamp)
    f.mode = qcp::sim::Clamp{*a.clamp};
  else
    f.mode = qcp::sim::Scale{*a.scale};
  try {
    qcp::sim::SimulatedLab probe(config);
    probe.arm_fault(f);
  } catch (const qcp::Error& e) {
    throw CliFailure{usage, e.what()};
  }
  qcp::sim::arm_fault(config, f);
  qcp::sim::save_simulator_config(config, c.config);
  std::cout << "armed " << a.param << (a.clamp ? " clamp " + qcp::io::format_double(*a.clamp)
                                               : " scale " + qcp::io::format_double(*a.scale))
            << " in " << c.config << "\n";
  return ok;
}

// --- report -----------------------------------------------------------------------------------

int cmd_report(const Common& c) {
  const fs::path out = c.out;
  std::vector<std::string> missing;
  if (!fs::exists(out)) throw CliFailure{missing_artifact, "missing artifact: " + out.string()};
  auto spec = qcp::agents::task_spec_from_json(task_text(c));
  auto kb = open_kb(c);

  qcp::io::CsvWriter trace(out / "best_trace.csv");
  trace.row(std::vector<std::string>{"sub_experiment", "iteration", "best_so_far"});
  bool wrote_pareto = false;
  for (const auto& s : spec.sub_experiments) {
    const auto hist = out / (s.id + "_history.csv");
    const auto rec = out / (s.id + "_records.jsonl");
    if (fs::exists(hist)) {
      const auto t = qcp::io::read_csv(hist);
      const auto it = t.column("iteration"), best = t.column("best_so_far");
      for (const auto& row : t.rows) trace.row(std::vector<std::string>{s.id, row[it], row[best]});
    } else {
      missing.push_back(hist.string());
    }
    if (!fs::exists(rec)) {
      missing.push_back(rec.string());
      continue;
    }
    qcp::opt::CampaignHistory h;
    h.records = qcp::read_records(rec);
    if (h.records.empty()) continue;
    const auto space = qcp::agents::lookup_hardware_bounds(kb, s.space_name);
    std::vector<std::string> outputs;
    std::optional<qcp::ObjectiveSpec> filter;
    for (const auto& o : s.objectives) {
      outputs.push_back(o.name);
      if (o.acceptance_threshold && !filter) filter = o;
    }
    if (h.records.size() >= 3)
      qcp::uq::write_matrix_csv(qcp::uq::pearson_matrix(h.records, space, outputs), out / ("corr_" + s.id + ".csv"));
    if (s.objectives.size() == 2 && !wrote_pareto) {
      qcp::opt::write_pareto_csv(h, out / "pareto.csv");
      wrote_pareto = true;
    }
    if (h.records.size() < 10) continue;
    auto symbols = space.symbols();
    symbols.insert(symbols.end(), outputs.begin(), outputs.end());
    for (const auto& sym : symbols) {
      const auto d = qcp::uq::distribution_summary(h.records, space, sym, filter);
      qcp::uq::write_distribution_csv(d.all, out / ("hist_" + s.id + "_" + sym + "_all.csv"));
      if (filter) qcp::uq::write_distribution_csv(d.accepted, out / ("hist_" + s.id + "_" + sym + "_accepted.csv"));
    }
  }
  // Diagnosis matrices are written by diagnose; only their presence is reported here.
  for (const char* f : {"corr_baseline.csv", "corr_probe.csv"})
    std::cout << f << (fs::exists(out / f) ? ": present" : ": not present (no diagnosis yet)") << "\n";
  if (!missing.empty()) {
    for (const auto& m : missing) std::cerr << "missing artifact: " << m << "\n";
    return missing_artifact;
  }
  std::cout << "plot data in " << out.string() << "\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qcopilot: closed-loop optimization and fault diagnosis on a simulated cold-atom rig"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "simulator config JSON");
  app.add_option("--seed", common.seed, "root seed");
  app.add_option("--out", common.out, "artifact directory")->capture_default_str();
  app.add_option("--task", common.task, "task spec JSON");
  app.add_option("--kb", common.kb, "knowledge base directory (default <out>/kb)");

  OptimizeArgs oa;
  auto* optimize = app.add_subcommand("optimize", "plan, run the campaigns, fix the optima and calibrate");
  optimize->add_option("--budget", oa.budget, "evaluations per sub-experiment")->capture_default_str();
  optimize->add_option("--batch", oa.batch, "batch size q")->capture_default_str();
  optimize->add_option("--repeats", oa.repeats, "shots averaged per evaluation")->capture_default_str();
  optimize->add_option("--calibration", oa.calibration, "reference runs at the optimum")->capture_default_str();

  StageArgs sa;
  auto* run = app.add_subcommand("run", "self-sustained runs at the fixed parameters");
  run->add_option("--runs", sa.runs, "number of runs")->capture_default_str();
  auto* diagnose = app.add_subcommand("diagnose", "rerun, compare images, localize the faulty parameter");
  for (auto* sub : {run, diagnose}) {
    sub->add_option("--reruns", sa.reruns, "anomalous pipeline reruns")->capture_default_str();
    sub->add_option("--probes", sa.probes, "LHS probe samples")->capture_default_str();
    sub->add_option("--drop-threshold", sa.drop_threshold, "suspect threshold in decades")->capture_default_str();
  }

  FaultArgs fa;
  auto* inject = app.add_subcommand("inject-fault", "arm a fault in the simulator config");
  inject->add_option("--param", fa.param, "target symbol")->required();
  auto* clamp = inject->add_option("--clamp", fa.clamp, "pin the applied value");
  auto* scale = inject->add_option("--scale", fa.scale, "multiply the applied value");
  clamp->excludes(scale);
  scale->excludes(clamp);
  inject->require_option(2);

  auto* report = app.add_subcommand("report", "emit plot-data CSVs from the artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return usage;
  }

  try {
    if (*optimize) return cmd_optimize(common, oa);
    if (*run) return cmd_run(common, sa);
    if (*diagnose) return cmd_diagnose(common, sa);
    if (*inject) return cmd_inject_fault(common, fa);
    if (*report) return cmd_report(common);
  } catch (const CliFailure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const qcp::SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return usage;
}
