#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qcopilot/agents/chat.hpp"
#include "qcopilot/param_space.hpp"

namespace qcp::agents {

enum class MessageKind { request, result, error };
std::string to_string(MessageKind k);

struct AgentMessage {
  std::string from;
  std::string to;
  MessageKind kind = MessageKind::request;
  std::string payload;
  std::string correlation_id;
};

// Central bus: every agent call is a request routed here, answered by exactly one result or
// error carrying the request's correlation id.
class MessageBus {
 public:
  // Returns the result payload; a thrown qcp::Error becomes an error message.
  using Handler = std::function<std::string(const AgentMessage& request)>;

  void register_agent(const std::string& name, Handler handler);  // SpecError on duplicates
  bool has_agent(const std::string& name) const { return handlers_.contains(name); }

  // LookupError for an unregistered target. Never throws for handler failures.
  AgentMessage request(const std::string& from, const std::string& to, const std::string& payload);
  // Like request, but rethrows an error reply as StateError.
  std::string call(const std::string& from, const std::string& to, const std::string& payload);

  const std::vector<AgentMessage>& log() const { return log_; }
  std::string log_jsonl() const;

 private:
  std::map<std::string, Handler> handlers_;
  std::vector<AgentMessage> log_;
  std::uint64_t next_id_ = 1;
};

struct SubExperimentSpec {
  std::string id;
  std::string space_name;  // looked up in the knowledge base hardware reports
  std::vector<ObjectiveSpec> objectives;
  std::string requirement;
};

struct TaskSpec {
  std::vector<SubExperimentSpec> sub_experiments;  // execution order
  std::string global_requirements;
};

// SpecError on an empty list, duplicate ids or a sub-experiment without objectives.
void check_task_spec(const TaskSpec& spec);
// MOT (maximize pixel integral) then PGC (low temperature, high atom number).
TaskSpec default_task_spec();
// {"sub_experiments": [{"id", "space", "objectives": "mot"|"pgc", "requirement"}], "global_requirements"}
TaskSpec task_spec_from_json(const std::string& text);

struct PlanStep {
  std::string agent;
  std::string action;
  std::string target;  // sub-experiment id, empty for global steps
  std::string stage = "optimization";

  bool operator==(const PlanStep&) const = default;
};

struct Plan {
  std::vector<PlanStep> steps;
  bool operator==(const Plan&) const = default;
};

// Agent name -> allowed actions.
const std::map<std::string, std::vector<std::string>>& agent_registry();

// Per sub-experiment optimize then fix, then analyze and record.
Plan rule_based_plan(const TaskSpec& spec);
// Reason for rejection, or nullopt when the plan is executable for the spec.
std::optional<std::string> validate_plan(const TaskSpec& spec, const Plan& plan);
// Parses {"steps": [{"agent", "action", "target"}]}; SchemaError on malformed text.
Plan plan_from_json(const std::string& text);
std::string plan_to_json(const Plan& plan);

struct PlanResult {
  Plan plan;
  bool from_llm = false;
  std::string rejection;  // why the LLM plan was discarded
};

// With a planner, its reply is parsed and validated; anything invalid falls back to the rule plan.
PlanResult decompose_task(const TaskSpec& spec, ChatClient* planner = nullptr);

enum class Method { log_ei, ehvi, lhs };
std::string to_string(Method m);

struct MethodChoice {
  Method method = Method::log_ei;
  std::size_t lhs_samples = 50;
  bool from_llm = false;
  std::string rejection;
};

// 1 objective + optimization -> log_ei, 2 objectives -> ehvi, diagnosis -> 50-sample LHS.
// An advisor reply naming a compatible method overrides the table. UnsupportedError above two
// objectives, SpecError below one.
MethodChoice select_method(const std::string& requirement, std::size_t objective_count, Stage stage,
                           ChatClient* advisor = nullptr);

}  // namespace qcp::agents
