#include "qcopilot/agents/agents.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "qcopilot/error.hpp"
#include "qcopilot/spaces.hpp"

namespace qcp::agents {

using ojson = nlohmann::ordered_json;

std::string to_string(MessageKind k) {
  switch (k) {
    case MessageKind::request: return "request";
    case MessageKind::result: return "result";
    case MessageKind::error: return "error";
  }
  return "request";
}

void MessageBus::register_agent(const std::string& name, Handler handler) {
  if (handlers_.contains(name)) throw SpecError("agent '" + name + "' registered twice");
  handlers_[name] = std::move(handler);
}

AgentMessage MessageBus::request(const std::string& from, const std::string& to, const std::string& payload) {
  const auto it = handlers_.find(to);
  if (it == handlers_.end()) throw LookupError("no agent named '" + to + "'");
  char id[24];
  std::snprintf(id, sizeof id, "c%06llu", static_cast<unsigned long long>(next_id_++));
  AgentMessage req{from, to, MessageKind::request, payload, id};
  log_.push_back(req);
  AgentMessage reply{to, from, MessageKind::result, {}, id};
  try {
    reply.payload = it->second(req);
  } catch (const std::exception& e) {
    reply.kind = MessageKind::error;
    reply.payload = e.what();
  }
  log_.push_back(reply);
  return reply;
}

std::string MessageBus::call(const std::string& from, const std::string& to, const std::string& payload) {
  auto reply = request(from, to, payload);
  if (reply.kind == MessageKind::error) throw StateError(to + " failed: " + reply.payload);
  return reply.payload;
}

std::string MessageBus::log_jsonl() const {
  std::string out;
  for (const auto& m : log_) {
    ojson j;
    j["correlation_id"] = m.correlation_id;
    j["kind"] = to_string(m.kind);
    j["from"] = m.from;
    j["to"] = m.to;
    j["payload"] = m.payload;
    out += j.dump() + "\n";
  }
  return out;
}

void check_task_spec(const TaskSpec& spec) {
  if (spec.sub_experiments.empty()) throw SpecError("task spec has no sub-experiments");
  std::set<std::string> ids;
  for (const auto& s : spec.sub_experiments) {
    if (s.id.empty()) throw SpecError("sub-experiment id is empty");
    if (!ids.insert(s.id).second) throw SpecError("duplicate sub-experiment id '" + s.id + "'");
    if (s.objectives.empty()) throw SpecError("sub-experiment '" + s.id + "' has no objectives");
  }
}

TaskSpec default_task_spec() {
  TaskSpec t;
  t.sub_experiments.push_back({"MOT", "MOT", mot_objectives(), "maximize atom number"});
  t.sub_experiments.push_back({"PGC", "PGC", pgc_objectives(), "low temperature and high atom number"});
  t.global_requirements = "run MOT then PGC; keep the best MOT parameters fixed during PGC";
  return t;
}

TaskSpec task_spec_from_json(const std::string& text) {
  TaskSpec t;
  try {
    const auto j = ojson::parse(text);
    for (const auto& s : j.at("sub_experiments")) {
      SubExperimentSpec sub;
      sub.id = s.at("id").get<std::string>();
      sub.space_name = s.value("space", sub.id);
      const auto obj = s.at("objectives").get<std::string>();
      if (obj == "mot")
        sub.objectives = mot_objectives();
      else if (obj == "pgc")
        sub.objectives = pgc_objectives();
      else
        throw SchemaError("unknown objective set '" + obj + "'");
      sub.requirement = s.value("requirement", std::string());
      t.sub_experiments.push_back(std::move(sub));
    }
    t.global_requirements = j.value("global_requirements", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("bad task spec: ") + e.what());
  }
  check_task_spec(t);
  return t;
}

const std::map<std::string, std::vector<std::string>>& agent_registry() {
  static const std::map<std::string, std::vector<std::string>> r{
      {"decision_maker", {"plan", "transition"}},
      {"experimenter", {"optimize", "fix", "run", "rerun"}},
      {"analyst", {"analyze", "detect", "compare_images", "localize"}},
      {"recorder", {"record", "update_knowledge", "search", "transition", "note"}},
      {"web_searcher", {"search"}},
  };
  return r;
}

Plan rule_based_plan(const TaskSpec& spec) {
  check_task_spec(spec);
  Plan p;
  for (const auto& s : spec.sub_experiments) {
    p.steps.push_back({"experimenter", "optimize", s.id});
    p.steps.push_back({"experimenter", "fix", s.id});
  }
  p.steps.push_back({"analyst", "analyze", ""});
  p.steps.push_back({"recorder", "record", ""});
  return p;
}

std::optional<std::string> validate_plan(const TaskSpec& spec, const Plan& plan) {
  const auto& reg = agent_registry();
  std::map<std::string, int> phase;  // 0 none, 1 optimized, 2 fixed
  for (const auto& s : spec.sub_experiments) phase[s.id] = 0;
  std::size_t next_sub = 0;
  bool analyzed = false, recorded = false;
  for (const auto& st : plan.steps) {
    const auto it = reg.find(st.agent);
    if (it == reg.end()) return "unknown agent '" + st.agent + "'";
    if (std::find(it->second.begin(), it->second.end(), st.action) == it->second.end())
      return "agent '" + st.agent + "' has no action '" + st.action + "'";
    if (st.action == "optimize" || st.action == "fix") {
      if (!phase.contains(st.target)) return "unknown sub-experiment '" + st.target + "'";
      if (st.action == "optimize") {
        if (next_sub >= spec.sub_experiments.size() || spec.sub_experiments[next_sub].id != st.target)
          return "optimize steps are out of task order at '" + st.target + "'";
        if (next_sub > 0 && phase[spec.sub_experiments[next_sub - 1].id] != 2)
          return "'" + st.target + "' optimized before the previous stage was fixed";
        phase[st.target] = 1;
        ++next_sub;
      } else {
        if (phase[st.target] != 1) return "fix of '" + st.target + "' without a preceding optimize";
        phase[st.target] = 2;
      }
    } else if (st.action == "analyze") {
      analyzed = true;
    } else if (st.action == "record") {
      recorded = true;
    } else if (st.agent == "experimenter" || st.agent == "decision_maker") {
      return "action '" + st.action + "' is not allowed in a plan";
    }
  }
  for (const auto& [id, ph] : phase)
    if (ph != 2) return "sub-experiment '" + id + "' is not optimized and fixed";
  if (!analyzed || !recorded) return "plan lacks analyze or record";
  return std::nullopt;
}

Plan plan_from_json(const std::string& text) {
  Plan p;
  try {
    const auto j = ojson::parse(text);
    for (const auto& s : j.at("steps")) {
      PlanStep st;
      st.agent = s.at("agent").get<std::string>();
      st.action = s.at("action").get<std::string>();
      st.target = s.value("target", std::string());
      p.steps.push_back(std::move(st));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("plan is not valid JSON: ") + e.what());
  }
  return p;
}

std::string plan_to_json(const Plan& plan) {
  ojson j;
  j["steps"] = ojson::array();
  for (const auto& s : plan.steps)
    j["steps"].push_back({{"agent", s.agent}, {"action", s.action}, {"target", s.target}, {"stage", s.stage}});
  return j.dump();
}

PlanResult decompose_task(const TaskSpec& spec, ChatClient* planner) {
  check_task_spec(spec);
  PlanResult out;
  out.plan = rule_based_plan(spec);
  if (!planner) return out;

  ojson task;
  for (const auto& s : spec.sub_experiments)
    task["sub_experiments"].push_back({{"id", s.id}, {"space", s.space_name}, {"requirement", s.requirement}});
  task["global_requirements"] = spec.global_requirements;
  ojson agents;
  for (const auto& [name, actions] : agent_registry()) agents[name] = actions;
  const std::vector<ChatMessage> messages{
      {"system", "You plan laboratory workflows. Reply with JSON {\"steps\": [{\"agent\", \"action\", \"target\"}]} "
                 "using only these agents and actions: " + agents.dump()},
      {"user", task.dump()},
  };
  try {
    const auto reply = planner->send(messages, {});
    Plan candidate = plan_from_json(reply.text);
    if (auto why = validate_plan(spec, candidate)) {
      out.rejection = *why;
      return out;
    }
    out.plan = std::move(candidate);
    out.from_llm = true;
  } catch (const Error& e) {
    out.rejection = e.what();
  }
  return out;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::log_ei: return "log_ei";
    case Method::ehvi: return "ehvi";
    case Method::lhs: return "lhs";
  }
  return "log_ei";
}

MethodChoice select_method(const std::string& requirement, std::size_t objective_count, Stage stage,
                           ChatClient* advisor) {
  if (objective_count < 1) throw SpecError("method selection needs at least one objective");
  if (objective_count > 2) throw UnsupportedError("more than two objectives are not supported");
  MethodChoice c;
  if (stage == Stage::diagnosis)
    c.method = Method::lhs;
  else
    c.method = objective_count == 1 ? Method::log_ei : Method::ehvi;
  if (!advisor) return c;

  const std::vector<ChatMessage> messages{
      {"system", "Choose one optimization method for the requirement. Reply with exactly one of: log_ei, ehvi, lhs."},
      {"user", "requirement: " + requirement + "; objectives: " + std::to_string(objective_count) +
                   "; stage: " + to_string(stage)},
  };
  try {
    std::string text = advisor->send(messages, {}).text;
    text.erase(0, text.find_first_not_of(" \t\r\n"));
    text.erase(text.find_last_not_of(" \t\r\n") + 1);
    std::optional<Method> m;
    if (text == "log_ei") m = Method::log_ei;
    if (text == "ehvi") m = Method::ehvi;
    if (text == "lhs") m = Method::lhs;
    if (!m) {
      c.rejection = "unknown method '" + text + "'";
    } else if (stage == Stage::diagnosis && *m != Method::lhs) {
      c.rejection = "diagnosis probes must be space-filling";
    } else if ((*m == Method::log_ei && objective_count != 1) || (*m == Method::ehvi && objective_count != 2)) {
      c.rejection = to_string(*m) + " does not fit " + std::to_string(objective_count) + " objectives";
    } else {
      c.method = *m;
      c.from_llm = true;
    }
  } catch (const Error& e) {
    c.rejection = e.what();
  }
  return c;
}

}  // namespace qcp::agents
