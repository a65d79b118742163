#include "qcopilot/agents/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qcopilot/error.hpp"
#include "qcopilot/record_store.hpp"
#include "qcopilot/rng.hpp"

namespace qcp::agents {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string describe(const ParameterSpace& space, const Setting& s) {
  std::string out;
  for (std::size_t i = 0; i < space.dimension(); ++i) {
    if (i) out += ", ";
    out += space[i].symbol + "=" + num(s.values[i]);
  }
  return out;
}

std::string describe(const sim::FaultSpec& f) {
  if (const auto* c = std::get_if<sim::Clamp>(&f.mode)) return f.target_symbol + " clamp " + num(c->value);
  return f.target_symbol + " scale " + num(std::get<sim::Scale>(f.mode).factor);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

std::string to_string(State s) {
  switch (s) {
    case State::plan: return "Plan";
    case State::optimize: return "Optimize";
    case State::self_sustained: return "SelfSustained";
    case State::diagnose: return "Diagnose";
    case State::knowledge_update: return "KnowledgeUpdate";
    case State::needs_human: return "NeedsHuman";
  }
  return "Plan";
}

Setting best_setting(const opt::CampaignHistory& h, const std::vector<ObjectiveSpec>& objectives) {
  if (h.records.empty()) throw InsufficientDataError("campaign produced no records");
  std::optional<std::size_t> free_obj, gated_obj;
  for (std::size_t k = 0; k < objectives.size(); ++k) {
    if (objectives[k].acceptance_threshold) {
      if (!gated_obj) gated_obj = k;
    } else if (!free_obj) {
      free_obj = k;
    }
  }
  auto raw = [&](std::size_t i, std::size_t k) { return h.records[i].raw_observables.at(objectives[k].name); };
  auto better = [&](std::size_t k, double a, double b) {
    return objectives[k].direction == Direction::maximize ? a > b : a < b;
  };
  std::optional<std::size_t> best;
  if (free_obj) {
    for (std::size_t i = 0; i < h.records.size(); ++i) {
      bool pass = true;
      for (const auto& o : objectives)
        if (o.acceptance_threshold && !o.accepts(h.records[i].raw_observables.at(o.name))) pass = false;
      if (pass && (!best || better(*free_obj, raw(i, *free_obj), raw(*best, *free_obj)))) best = i;
    }
  }
  if (!best) {
    const std::size_t k = gated_obj ? *gated_obj : 0;
    best = 0;
    for (std::size_t i = 1; i < h.records.size(); ++i)
      if (better(k, raw(i, k), raw(*best, k))) best = i;
  }
  return h.records[*best].setting;
}

Orchestrator::Orchestrator(TaskSpec spec, sim::ExperimentBackend& backend, KnowledgeBase& kb, OrchestratorConfig config,
                           Clients clients)
    : spec_(std::move(spec)), backend_(backend), kb_(kb), config_(std::move(config)), clients_(clients) {
  check_task_spec(spec_);
  const auto subs = backend_.sub_experiments();
  for (const auto& s : spec_.sub_experiments)
    if (std::find(subs.begin(), subs.end(), s.id) == subs.end())
      throw SpecError("backend has no sub-experiment '" + s.id + "'");
  register_agents();
}

void Orchestrator::register_agents() {
  bus_.register_agent("experimenter", [this](const AgentMessage& m) -> std::string {
    const auto j = ojson::parse(m.payload);
    const auto action = j.at("action").get<std::string>();
    if (action == "optimize") return do_optimize(j.at("target").get<std::string>());
    if (action == "fix") return do_fix(j.at("target").get<std::string>());
    throw SpecError("experimenter cannot '" + action + "' through a plan");
  });
  bus_.register_agent("analyst", [this](const AgentMessage& m) -> std::string {
    const auto j = ojson::parse(m.payload);
    const auto action = j.at("action").get<std::string>();
    if (action == "analyze") return do_analyze();
    throw SpecError("analyst cannot '" + action + "' through a plan");
  });
  bus_.register_agent("recorder", [this](const AgentMessage& m) -> std::string {
    const auto j = ojson::parse(m.payload);
    const auto action = j.at("action").get<std::string>();
    if (action == "record") return do_record();
    if (action == "transition" || action == "note") return "ok";
    if (action == "update_knowledge") {
      const auto id = kb_.append(j.at("text").get<std::string>(), j.at("tags").get<std::vector<std::string>>(),
                                 source_from_string(j.value("source", std::string("experiment"))));
      return ojson{{"id", id}}.dump();
    }
    throw SpecError("recorder cannot '" + action + "'");
  });
  bus_.register_agent("web_searcher", [this](const AgentMessage& m) -> std::string {
    ojson out = ojson::array();
    if (!clients_.web) return out.dump();
    for (const auto& r : clients_.web->search(ojson::parse(m.payload).at("query").get<std::string>()))
      out.push_back({{"title", r.title}, {"snippet", r.snippet}, {"url", r.url}});
    return out.dump();
  });
}

void Orchestrator::transition(State to, const std::string& reason) {
  transitions_.push_back({runs_done_, state_, to, reason});
  bus_.call("decision_maker", "recorder",
            ojson{{"action", "transition"}, {"from", to_string(state_)}, {"to", to_string(to)}, {"reason", reason}}.dump());
  state_ = to;
}

SubExperimentOutcome& Orchestrator::outcome(const std::string& id) {
  for (auto& o : outcomes_)
    if (o.spec.id == id) return o;
  throw LookupError("no outcome for sub-experiment '" + id + "'");
}

std::vector<std::string> Orchestrator::all_outputs() const {
  std::vector<std::string> out;
  for (const auto& s : spec_.sub_experiments)
    for (const auto& o : s.objectives)
      if (std::find(out.begin(), out.end(), o.name) == out.end()) out.push_back(o.name);
  return out;
}

std::string Orchestrator::do_optimize(const std::string& id) {
  const auto it = std::find_if(spec_.sub_experiments.begin(), spec_.sub_experiments.end(),
                               [&](const auto& s) { return s.id == id; });
  if (it == spec_.sub_experiments.end()) throw LookupError("unknown sub-experiment '" + id + "'");
  SubExperimentOutcome o;
  o.spec = *it;
  o.space = lookup_hardware_bounds(kb_, it->space_name);
  if (o.space.symbols() != backend_.space(id).symbols())
    throw SpecError("hardware report for " + id + " does not match the backend knobs");
  o.method = select_method(it->requirement, it->objectives.size(), Stage::optimization, clients_.advisor);

  opt::CampaignConfig c;
  const auto b = config_.budgets.find(id);
  c.budget = b != config_.budgets.end() ? b->second : config_.default_budget;
  c.batch_size = config_.batch_size;
  c.repeats_per_setting = config_.repeats;
  c.acquisition = it->objectives.size() == 1 ? opt::Acquisition::log_ei : opt::Acquisition::ehvi;
  if (o.method.method == Method::lhs) c.initial_design = c.budget;
  c.seed = derive_seed(config_.seed, {0x6f, static_cast<std::uint64_t>(it - spec_.sub_experiments.begin())});
  c.sub_experiment_id = id;
  o.history = opt::run_campaign(
      [&](const Setting& s, std::uint64_t seed) { return backend_.evaluate(id, s, seed); }, o.space, it->objectives, c);
  ojson out{{"sub_experiment", id},
            {"method", to_string(o.method.method)},
            {"method_from_llm", o.method.from_llm},
            {"evaluations", o.history.records.size() + o.history.failures.size()},
            {"failures", o.history.failures.size()},
            {"best_so_far", o.history.best_so_far.empty() ? 0.0 : o.history.best_so_far.back()}};
  std::erase_if(outcomes_, [&](const auto& x) { return x.spec.id == id; });
  outcomes_.push_back(std::move(o));
  return out.dump();
}

std::string Orchestrator::do_fix(const std::string& id) {
  auto& o = outcome(id);
  o.best = best_setting(o.history, o.spec.objectives);
  backend_.fix(id, *o.best);
  return ojson{{"sub_experiment", id}, {"setting", o.best->values}}.dump();
}

std::string Orchestrator::do_analyze() {
  ojson out = ojson::object();
  for (auto& o : outcomes_) {
    std::vector<std::string> outputs;
    for (const auto& obj : o.spec.objectives) outputs.push_back(obj.name);
    o.baseline = uq::pearson_matrix(o.history.records, o.space, outputs);
    ojson col = ojson::object();
    const auto out_idx = static_cast<Eigen::Index>(o.baseline->index_of(outputs.front()));
    for (std::size_t i = 0; i < o.baseline->input_count; ++i)
      col[o.baseline->labels[i]] = o.baseline->values(static_cast<Eigen::Index>(i), out_idx);
    out[o.spec.id] = col;
  }
  return out.dump();
}

std::string Orchestrator::do_record() {
  ojson ids = ojson::array();
  for (const auto& o : outcomes_) {
    std::string text = o.spec.id + " optimization by " + to_string(o.method.method) + ": " +
                       std::to_string(o.history.records.size()) + " records";
    if (o.best) text += ", fixed at " + describe(o.space, *o.best);
    ids.push_back(kb_.append(text, {"experiment", o.spec.id}, Source::experiment));
  }
  return ids.dump();
}

void Orchestrator::optimize() {
  if (state_ != State::plan) throw StateError("optimize() runs once, from the Plan state");
  plan_ = decompose_task(spec_, clients_.planner);
  transition(State::optimize,
             plan_.from_llm ? "llm plan accepted" : (plan_.rejection.empty() ? "rule plan" : "rule plan; llm plan rejected: " + plan_.rejection));
  for (const auto& step : plan_.plan.steps)
    bus_.call("decision_maker", step.agent, ojson{{"action", step.action}, {"target", step.target}}.dump());

  const auto last = spec_.sub_experiments.back().id;
  std::vector<ExperimentRecord> calib;
  for (std::size_t i = 0; i < config_.calibration_runs; ++i) {
    const std::uint64_t seed = derive_seed(config_.seed, {0x63, i});
    auto run = backend_.run_pipeline(seed);
    ExperimentRecord r;
    r.sub_experiment_id = "calibration";
    r.setting = *backend_.fixed(last);
    r.raw_observables = run.observables;
    r.stage = Stage::optimization;
    r.seed = seed;
    r.timestamp = i;
    calib.push_back(std::move(r));
    for (auto& img : run.images) normal_images_.push_back(std::move(img));
  }
  reference_ = diag::reference_statistics(calib, all_outputs());
  transition(State::self_sustained, "calibrated on " + std::to_string(config_.calibration_runs) + " runs");
}

void Orchestrator::restore(std::vector<SubExperimentOutcome> outcomes, diag::ReferenceStats reference,
                           std::vector<sim::CcdImage> normal_images) {
  outcomes_ = std::move(outcomes);
  for (const auto& o : outcomes_)
    if (o.best) backend_.fix(o.spec.id, *o.best);
  reference_ = std::move(reference);
  normal_images_ = std::move(normal_images);
  state_ = State::self_sustained;
}

State Orchestrator::run_once() {
  if (state_ != State::self_sustained) throw StateError("self-sustained runs need the SelfSustained state");
  if (config_.fault && config_.fault->run == runs_done_) {
    backend_.arm_fault(config_.fault->fault);
    transitions_.push_back({runs_done_, state_, state_, "fault armed: " + describe(config_.fault->fault)});
  }
  const std::uint64_t seed = derive_seed(config_.seed, {0x73, runs_done_});
  auto run = backend_.run_pipeline(seed);
  ExperimentRecord r;
  r.sub_experiment_id = "pipeline";
  r.setting = *backend_.fixed(spec_.sub_experiments.back().id);
  r.raw_observables = run.observables;
  r.stage = Stage::self_sustained;
  r.seed = seed;
  r.timestamp = runs_done_;
  monitor_.push_back(std::move(r));
  ++runs_done_;

  const std::vector<ExperimentRecord> recent(monitor_.begin() + static_cast<std::ptrdiff_t>(watch_from_), monitor_.end());
  const auto dev = diag::detect_deviation(recent, reference_, config_.deviation);
  if (acknowledged_) {
    // Re-arm once a full window is back in band.
    const std::size_t w = config_.deviation.window;
    if (recent.size() >= w) {
      const std::vector<ExperimentRecord> tail(recent.end() - static_cast<std::ptrdiff_t>(w), recent.end());
      diag::DeviationOptions strict = config_.deviation;
      strict.window = 1;
      if (!diag::detect_deviation(tail, reference_, strict).flagged) {
        acknowledged_ = false;
        watch_from_ = monitor_.size();
        transitions_.push_back({runs_done_, state_, state_, "outputs back in band, monitor re-armed"});
      }
    }
    return state_;
  }
  if (!dev.flagged) return state_;

  std::string why = "deviation over the last " + std::to_string(config_.deviation.window) + " runs:";
  for (const auto& [k, v] : dev.deficit) why += " " + k + " deficit " + num(v);
  transition(State::diagnose, why);
  const auto& report = diagnose();
  if (!report.unique_suspect()) {
    transition(State::needs_human, report.ranking.suspects.empty()
                                       ? "no parameter passed the drop threshold"
                                       : std::to_string(report.ranking.suspects.size()) + " suspects remain");
    return state_;
  }
  const std::string suspect = report.ranking.suspects.front();
  transition(State::knowledge_update, "unique suspect " + suspect + " in " + report.sub_experiment);
  const auto& d = report.ranking.ranked.front();
  std::string text = "incident at run " + std::to_string(runs_done_ - 1) + ": " + report.sub_experiment +
                     " fault localized to " + suspect + " (" + outcome(report.sub_experiment).space[
                         outcome(report.sub_experiment).space.require_index(suspect)].name +
                     "), correlation drop " + num(d.drop) + " decades";
  bus_.call("decision_maker", "recorder",
            ojson{{"action", "update_knowledge"}, {"text", text}, {"tags", {"incident", suspect, report.sub_experiment}},
                  {"source", "experiment"}}
                .dump());
  if (clients_.web) {
    const auto hits = ojson::parse(bus_.call("decision_maker", "web_searcher", ojson{{"query", text}}.dump()));
    for (const auto& h : hits)
      bus_.call("decision_maker", "recorder",
                ojson{{"action", "update_knowledge"},
                      {"text", h.at("title").get<std::string>() + ": " + h.at("snippet").get<std::string>()},
                      {"tags", {"web", suspect}},
                      {"source", "web"}}
                    .dump());
  }
  acknowledged_ = true;
  watch_from_ = monitor_.size();
  transition(State::self_sustained, "incident acknowledged");
  return state_;
}

diag::DiagnosisReport Orchestrator::diagnose() {
  if (!reference_ || normal_images_.empty()) throw StateError("diagnosis needs calibration runs; optimize first");
  for (const auto& o : outcomes_)
    if (!o.baseline) throw StateError("diagnosis needs the baseline correlation matrix of " + o.spec.id);
  const auto index = static_cast<std::uint64_t>(diagnoses_.size());
  diag::DiagnosisReport report;

  std::vector<sim::CcdImage> anomalous;
  for (std::size_t i = 0; i < config_.rerun_count; ++i) {
    auto run = backend_.run_pipeline(derive_seed(config_.seed, {0x72, index, i}));
    for (auto& img : run.images) anomalous.push_back(std::move(img));
  }
  bus_.call("decision_maker", "recorder",
            ojson{{"action", "note"}, {"text", "reran " + std::to_string(config_.rerun_count) + " pipelines"}}.dump());
  report.images = diag::compare_image_sets(normal_images_, anomalous, backend_.pixel_size());
  report.sub_experiment = report.images.worst().sub_experiment;
  ojson scores = ojson::object();
  for (const auto& e : report.images.entries) scores[e.sub_experiment] = e.score;
  bus_.call("decision_maker", "recorder", ojson{{"action", "note"}, {"image_scores", scores}}.dump());

  auto& o = outcome(report.sub_experiment);
  report.baseline = *o.baseline;
  diag::LocalizeOptions lo;
  lo.n_probe = config_.n_probe;
  lo.drop_threshold = config_.drop_threshold;
  lo.seed = derive_seed(config_.seed, {0x64, index});
  const std::string sub = report.sub_experiment;
  report.ranking = diag::localize_parameter(
      o.space, [&](const Setting& s, std::uint64_t seed) { return backend_.evaluate(sub, s, seed); }, report.baseline,
      o.spec.objectives.front().name, lo);
  ojson ranked = ojson::array();
  for (const auto& d : report.ranking.ranked) ranked.push_back({{"symbol", d.symbol}, {"drop", d.drop}});
  bus_.call("decision_maker", "recorder", ojson{{"action", "note"}, {"ranking", ranked}}.dump());

  for (const auto& s : report.ranking.suspects)
    report.hypotheses.push_back(diag::retrieve_root_causes(kb_, s, o.space[o.space.require_index(s)].name, sub));
  diagnoses_.push_back(report);
  return diagnoses_.back();
}

State Orchestrator::run() {
  optimize();
  while (runs_done_ < config_.self_sustained_runs && state_ == State::self_sustained) run_once();
  return state_;
}

std::string Orchestrator::state_trace() const {
  std::string out;
  for (const auto& t : transitions_)
    out += "run " + std::to_string(t.run) + ": " + to_string(t.from) + " -> " + to_string(t.to) + " (" + t.reason + ")\n";
  out += "final: " + to_string(state_) + " after " + std::to_string(runs_done_) + " runs\n";
  return out;
}

void Orchestrator::write_artifacts(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string());
  write_text(dir / "state_trace.txt", state_trace());
  write_text(dir / "messages.jsonl", bus_.log_jsonl());
  write_text(dir / "plan.json", plan_to_json(plan_.plan) + "\n");
  ojson best = ojson::object();
  for (const auto& o : outcomes_) {
    opt::write_history_csv(o.history, o.space, o.spec.objectives, dir / (o.spec.id + "_history.csv"));
    if (o.spec.objectives.size() == 2) opt::write_pareto_csv(o.history, dir / (o.spec.id + "_pareto.csv"));
    if (o.baseline) uq::write_matrix_csv(*o.baseline, dir / ("corr_baseline_" + o.spec.id + ".csv"));
    write_records(dir / (o.spec.id + "_records.jsonl"), o.history.records);
    if (o.best) {
      ojson s = ojson::object();
      for (std::size_t i = 0; i < o.space.dimension(); ++i) s[o.space[i].symbol] = o.best->values[i];
      best[o.spec.id] = s;
    }
  }
  write_text(dir / "best_parameters.json", best.dump(2) + "\n");
  write_records(dir / "monitor.jsonl", monitor_);
  for (std::size_t k = 0; k < diagnoses_.size(); ++k) {
    write_text(dir / ("diagnosis_" + std::to_string(k) + ".txt"), diag::format_report(diagnoses_[k]));
    uq::write_matrix_csv(diagnoses_[k].ranking.probe, dir / ("corr_probe_" + std::to_string(k) + ".csv"));
  }
}

}  // namespace qcp::agents
