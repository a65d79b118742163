#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcopilot/agents/agents.hpp"
#include "qcopilot/agents/knowledge.hpp"
#include "qcopilot/diagnosis/diagnosis.hpp"
#include "qcopilot/opt/campaign.hpp"
#include "qcopilot/sim/lab.hpp"
#include "qcopilot/uq/uq.hpp"

namespace qcp::agents {

enum class State { plan, optimize, self_sustained, diagnose, knowledge_update, needs_human };
std::string to_string(State s);

struct Transition {
  std::size_t run = 0;  // self-sustained run index at the time, 0 before that stage
  State from = State::plan;
  State to = State::plan;
  std::string reason;
};

struct ScheduledFault {
  std::size_t run = 0;  // armed just before this self-sustained run
  sim::FaultSpec fault;
};

struct OrchestratorConfig {
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> budgets;  // per sub-experiment; default_budget otherwise
  std::size_t default_budget = 100;
  std::size_t batch_size = 4;
  int repeats = 3;
  std::size_t calibration_runs = 10;
  std::size_t rerun_count = 3;  // anomalous pipeline reruns for the image comparison
  std::size_t self_sustained_runs = 40;
  std::optional<ScheduledFault> fault;
  diag::DeviationOptions deviation;
  std::size_t n_probe = 50;
  double drop_threshold = 1.0;
};

struct Clients {
  ChatClient* planner = nullptr;
  ChatClient* advisor = nullptr;
  WebSearcher* web = nullptr;
};

struct SubExperimentOutcome {
  SubExperimentSpec spec;
  ParameterSpace space;
  MethodChoice method;
  opt::CampaignHistory history;
  std::optional<Setting> best;
  std::optional<uq::CorrelationMatrix> baseline;
};

// Optimize -> SelfSustained -> (deviation) Diagnose -> KnowledgeUpdate -> SelfSustained, with
// NeedsHuman as the halt for an inconclusive diagnosis. Every agent call goes through the bus.
// After a unique diagnosis the incident is acknowledged: the monitor stays quiet until the
// outputs have been back in band for one full window.
class Orchestrator {
 public:
  Orchestrator(TaskSpec spec, sim::ExperimentBackend& backend, KnowledgeBase& kb, OrchestratorConfig config,
               Clients clients = {});

  // Plan, campaigns, fixing, analysis, recording and the calibration runs.
  void optimize();
  // One self-sustained run (arming a scheduled fault first); may diagnose. Returns the state after.
  State run_once();
  // The whole loop: optimize, then self_sustained_runs runs or until NeedsHuman.
  State run();
  // Rerun, compare images, localize and retrieve. StateError without baseline or calibration.
  diag::DiagnosisReport diagnose();

  State state() const { return state_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const MessageBus& bus() const { return bus_; }
  const PlanResult& plan() const { return plan_; }
  const std::vector<SubExperimentOutcome>& outcomes() const { return outcomes_; }
  const std::optional<diag::ReferenceStats>& reference() const { return reference_; }
  const std::vector<sim::CcdImage>& normal_images() const { return normal_images_; }
  const std::vector<ExperimentRecord>& monitor_records() const { return monitor_; }
  const std::vector<diag::DiagnosisReport>& diagnoses() const { return diagnoses_; }
  std::size_t runs_done() const { return runs_done_; }

  // Restores state saved by an earlier process (CLI); skips optimize().
  void restore(std::vector<SubExperimentOutcome> outcomes, diag::ReferenceStats reference,
               std::vector<sim::CcdImage> normal_images);

  std::string state_trace() const;
  // state_trace.txt, messages.jsonl, plan.json, per sub-experiment history/pareto/baseline CSVs,
  // best_parameters.json, monitor.jsonl, diagnosis_<k>.txt with corr_probe_<k>.csv.
  void write_artifacts(const std::filesystem::path& dir) const;

 private:
  TaskSpec spec_;
  sim::ExperimentBackend& backend_;
  KnowledgeBase& kb_;
  OrchestratorConfig config_;
  Clients clients_;
  MessageBus bus_;
  PlanResult plan_;
  State state_ = State::plan;
  std::vector<Transition> transitions_;
  std::vector<SubExperimentOutcome> outcomes_;
  std::optional<diag::ReferenceStats> reference_;
  std::vector<sim::CcdImage> normal_images_;
  std::vector<ExperimentRecord> monitor_;
  std::size_t watch_from_ = 0;   // monitor index where the deviation check starts
  bool acknowledged_ = false;
  std::size_t runs_done_ = 0;
  std::vector<diag::DiagnosisReport> diagnoses_;

  void register_agents();
  void transition(State to, const std::string& reason);
  SubExperimentOutcome& outcome(const std::string& id);
  std::vector<std::string> all_outputs() const;
  std::string do_optimize(const std::string& id);
  std::string do_fix(const std::string& id);
  std::string do_analyze();
  std::string do_record();
};

// Best record of a campaign: the first objective without a threshold, among records that pass
// every threshold; with nothing passing, the record best on the first thresholded objective.
Setting best_setting(const opt::CampaignHistory& history, const std::vector<ObjectiveSpec>& objectives);

}  // namespace qcp::agents
