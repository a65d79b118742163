#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "qcopilot/agents/agents.hpp"
#include "qcopilot/agents/chat.hpp"
#include "qcopilot/agents/knowledge.hpp"
#include "qcopilot/agents/orchestrator.hpp"
#include "qcopilot/error.hpp"
#include "qcopilot/sim/lab.hpp"
#include "qcopilot/spaces.hpp"

using namespace qcp;
using namespace qcp::agents;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qcp_agents_" + name);
  fs::remove_all(p);
  return p;
}

Orchestrator make_orchestrator(sim::SimulatedLab& lab, KnowledgeBase& kb, std::optional<ScheduledFault> fault,
                               Clients clients = {}) {
  OrchestratorConfig c;
  c.seed = 0;  // a seed whose probe set isolates X3; the success rate over seeds is an acceptance matter
  c.fault = fault;
  return Orchestrator(default_task_spec(), lab, kb, c, clients);
}

}  // namespace

TEST_SUITE("agents") {
  TEST_CASE("rule plan for the default task") {
    const auto plan = rule_based_plan(default_task_spec());
    const std::vector<PlanStep> expect{{"experimenter", "optimize", "MOT"}, {"experimenter", "fix", "MOT"},
                                       {"experimenter", "optimize", "PGC"}, {"experimenter", "fix", "PGC"},
                                       {"analyst", "analyze", ""},          {"recorder", "record", ""}};
    CHECK(plan.steps == expect);
    CHECK_FALSE(validate_plan(default_task_spec(), plan).has_value());
    CHECK(plan_from_json(plan_to_json(plan)) == plan);
  }

  TEST_CASE("invalid plans are rejected") {
    const auto spec = default_task_spec();
    auto swapped = rule_based_plan(spec);
    std::swap(swapped.steps[0], swapped.steps[2]);
    CHECK(validate_plan(spec, swapped).has_value());
    auto unknown = rule_based_plan(spec);
    unknown.steps[4].agent = "oracle";
    CHECK(validate_plan(spec, unknown).has_value());
    auto unfixed = rule_based_plan(spec);
    unfixed.steps.erase(unfixed.steps.begin() + 3);
    CHECK(validate_plan(spec, unfixed).has_value());
    CHECK_THROWS_AS(plan_from_json("{\"steps\": 3}"), SchemaError);
  }

  TEST_CASE("planner replies") {
    const auto spec = default_task_spec();
    ScriptedChatClient good({ChatReply{plan_to_json(rule_based_plan(spec)), std::nullopt}});
    const auto a = decompose_task(spec, &good);
    CHECK(a.from_llm);
    CHECK(good.calls() == 1);

    ScriptedChatClient garbage({ChatReply{"sure, here is a plan: optimize everything", std::nullopt}});
    const auto b = decompose_task(spec, &garbage);
    CHECK_FALSE(b.from_llm);
    CHECK_FALSE(b.rejection.empty());
    CHECK(b.plan == rule_based_plan(spec));

    ScriptedChatClient wrong_order({ChatReply{
        R"({"steps":[{"agent":"experimenter","action":"optimize","target":"PGC"},{"agent":"experimenter","action":"fix","target":"PGC"}]})",
        std::nullopt}});
    const auto c = decompose_task(spec, &wrong_order);
    CHECK_FALSE(c.from_llm);
    CHECK(c.plan == rule_based_plan(spec));
  }

  TEST_CASE("task spec parsing") {
    const auto t = task_spec_from_json(
        R"({"sub_experiments":[{"id":"MOT","space":"MOT","objectives":"mot","requirement":"load"}],"global_requirements":""})");
    REQUIRE(t.sub_experiments.size() == 1);
    CHECK(t.sub_experiments[0].objectives.size() == 1);
    CHECK_THROWS_AS(check_task_spec(TaskSpec{}), SpecError);
  }

  TEST_CASE("method selection table and overrides") {
    CHECK(select_method("", 1, Stage::optimization).method == Method::log_ei);
    CHECK(select_method("", 2, Stage::optimization).method == Method::ehvi);
    const auto d = select_method("", 1, Stage::diagnosis);
    CHECK(d.method == Method::lhs);
    CHECK(d.lhs_samples == 50);
    CHECK_THROWS_AS(select_method("", 3, Stage::optimization), UnsupportedError);
    CHECK_THROWS_AS(select_method("", 0, Stage::optimization), SpecError);

    ScriptedChatClient lhs({ChatReply{" lhs\n", std::nullopt}});
    const auto o = select_method("", 1, Stage::optimization, &lhs);
    CHECK(o.method == Method::lhs);
    CHECK(o.from_llm);
    ScriptedChatClient ehvi({ChatReply{"ehvi", std::nullopt}});
    const auto bad = select_method("", 1, Stage::optimization, &ehvi);
    CHECK(bad.method == Method::log_ei);
    CHECK_FALSE(bad.from_llm);
    CHECK_FALSE(bad.rejection.empty());
    ScriptedChatClient ei({ChatReply{"log_ei", std::nullopt}});
    CHECK(select_method("", 1, Stage::diagnosis, &ei).method == Method::lhs);
  }

  TEST_CASE("hardware bounds lookup") {
    KnowledgeBase kb;
    seed_knowledge_base(kb);
    const auto mot = lookup_hardware_bounds(kb, "MOT");
    CHECK(mot.symbols() == mot_space().symbols());
    for (std::size_t i = 0; i < mot.dimension(); ++i) {
      CHECK(mot[i].lower == mot_space()[i].lower);
      CHECK(mot[i].upper == mot_space()[i].upper);
    }
    const auto pgc = lookup_hardware_bounds(kb, "PGC");
    CHECK(pgc[4].integer);
    CHECK_THROWS_AS(lookup_hardware_bounds(kb, "MagneticTrap"), NotFoundError);
    CHECK_THROWS_AS(lookup_hardware_bounds(KnowledgeBase{}, "MOT"), NotFoundError);
  }

  TEST_CASE("knowledge base search") {
    KnowledgeBase kb;
    CHECK(kb.search("anything", 3).empty());
    const auto a = kb.append("repump shutter sticks when warm", {"fault_note"}, Source::manual);
    const auto b = kb.append("coil driver supply sags under load", {"fault_note"}, Source::experiment);
    const auto c = kb.append("repump shutter sticks when warm", {}, Source::web);
    CHECK(a == 1);
    CHECK(b == 2);
    CHECK(c == 3);
    const auto hits = kb.search("repump shutter sticks when warm", 5);
    REQUIRE(hits.size() == 3);
    CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(hits[0].entry->id == 3);  // identical texts tie, newer wins
    CHECK(hits[1].entry->id == 1);
    CHECK(kb.search("repump", 1).size() == 1);
    const auto tagged = kb.search_tagged("repump shutter", "fault_note", 5);
    REQUIRE(tagged.size() == 2);
    CHECK(tagged[0].entry->id == 1);
    CHECK(kb.search("", 2).front().similarity == 0.0);
  }

  TEST_CASE("knowledge base persistence") {
    const auto dir = scratch("kb");
    {
      auto kb = KnowledgeBase::open(dir);
      seed_knowledge_base(kb);
      kb.append("extra note about the OPLL", {"fault_note", "X1"}, Source::experiment);
    }
    auto kb = KnowledgeBase::open(dir);
    const auto n = kb.size();
    CHECK(n == 11);
    CHECK(kb.entries().back().source == Source::experiment);
    const auto before = kb.search("OPLL", 3);
    CHECK(before.front().entry->text == "extra note about the OPLL");

    // A torn final line is dropped and repaired on open.
    {
      std::ofstream out(dir / "entries.jsonl", std::ios::app | std::ios::binary);
      out << "{\"id\":99,\"text\":\"half wri";
    }
    auto torn = KnowledgeBase::open(dir);
    CHECK(torn.size() == n);
    CHECK(torn.append("after repair", {}, Source::manual) == n + 1);
    auto again = KnowledgeBase::open(dir);
    CHECK(again.size() == n + 1);
    for (std::size_t i = 1; i < again.entries().size(); ++i) CHECK(again.entries()[i].id > again.entries()[i - 1].id);
    fs::remove_all(dir);
  }

  TEST_CASE("bus replies carry the request correlation id") {
    MessageBus bus;
    bus.register_agent("echo", [](const AgentMessage& m) { return m.payload; });
    bus.register_agent("broken", [](const AgentMessage&) -> std::string { throw StateError("no camera"); });
    CHECK_THROWS_AS(bus.register_agent("echo", [](const AgentMessage&) { return std::string(); }), SpecError);
    const auto r1 = bus.request("user", "echo", "hi");
    const auto r2 = bus.request("user", "broken", "go");
    CHECK(r1.kind == MessageKind::result);
    CHECK(r1.payload == "hi");
    CHECK(r2.kind == MessageKind::error);
    CHECK_THROWS_AS(bus.call("user", "broken", "go"), StateError);
    CHECK_THROWS_AS(bus.request("user", "nobody", ""), LookupError);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < bus.log().size(); i += 2) {
      CHECK(bus.log()[i].kind == MessageKind::request);
      CHECK(bus.log()[i + 1].correlation_id == bus.log()[i].correlation_id);
      ids.insert(bus.log()[i].correlation_id);
    }
    CHECK(ids.size() == bus.log().size() / 2);
  }

  TEST_CASE("best_setting rule") {
    opt::CampaignHistory h;
    auto rec = [](double t, double n, double p1) {
      ExperimentRecord r;
      r.setting.values = {p1};
      r.raw_observables = {{kTemperature, t}, {kAtomNumber, n}};
      return r;
    };
    h.records = {rec(12.0, 9e7, 1.0), rec(8.0, 2e7, 2.0), rec(9.0, 3e7, 3.0)};
    CHECK(best_setting(h, pgc_objectives()).values == std::vector<double>{3.0});
    h.records = {rec(12.0, 9e7, 1.0), rec(11.0, 2e7, 2.0)};
    CHECK(best_setting(h, pgc_objectives()).values == std::vector<double>{2.0});
  }

  TEST_CASE("orchestrator without a fault stays self-sustained") {
    sim::SimulatedLab lab{sim::SimulatorConfig{}};
    KnowledgeBase kb;
    seed_knowledge_base(kb);
    auto o = make_orchestrator(lab, kb, std::nullopt);
    CHECK(o.run() == State::self_sustained);
    CHECK(o.runs_done() == 40);
    CHECK(o.diagnoses().empty());
    for (const auto& t : o.transitions()) CHECK(t.to != State::diagnose);
    CHECK(o.outcomes().size() == 2);
    for (const auto& out : o.outcomes()) {
      CHECK(out.best.has_value());
      CHECK(out.baseline.has_value());
    }
  }

  TEST_CASE("scheduled X3 clamp is diagnosed and recorded") {
    sim::SimulatedLab lab{sim::SimulatorConfig{}};
    KnowledgeBase kb;
    seed_knowledge_base(kb);
    const auto before = kb.size();
    auto o = make_orchestrator(lab, kb, ScheduledFault{20, {"X3", sim::Clamp{4.0}}});
    CHECK(o.run() == State::self_sustained);
    REQUIRE_FALSE(o.diagnoses().empty());
    const auto& d = o.diagnoses().front();
    CHECK(d.sub_experiment == "MOT");
    CHECK(d.ranking.suspects == std::vector<std::string>{"X3"});
    bool diagnosed = false, updated = false;
    for (const auto& t : o.transitions()) {
      if (t.to == State::diagnose) {
        diagnosed = true;
        CHECK(t.run >= 20);
        CHECK(t.run <= 25);
      }
      if (diagnosed && t.from == State::diagnose) {
        CHECK(t.to == State::knowledge_update);
        updated = true;
      }
    }
    CHECK(diagnosed);
    CHECK(updated);
    CHECK(kb.size() > before);
  }

  TEST_CASE("runs with the scripted double are reproducible") {
    auto once = [](const fs::path& dir) {
      sim::SimulatedLab lab{sim::SimulatorConfig{}};
      KnowledgeBase kb;
      seed_knowledge_base(kb);
      ScriptedChatClient planner({ChatReply{plan_to_json(rule_based_plan(default_task_spec())), std::nullopt}});
      ScriptedChatClient advisor([](const auto&, const auto&) { return ChatReply{"not sure", std::nullopt}; });
      auto o = make_orchestrator(lab, kb, ScheduledFault{5, {"X3", sim::Clamp{4.0}}}, {&planner, &advisor, nullptr});
      o.run();
      CHECK(o.plan().from_llm);
      o.write_artifacts(dir);
      return o.state_trace();
    };
    const auto a = scratch("rep_a"), b = scratch("rep_b");
    CHECK(once(a) == once(b));
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      return std::string(std::istreambuf_iterator<char>(in), {});
    };
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
      ++files;
    }
    CHECK(files > 5);
    fs::remove_all(a);
    fs::remove_all(b);
  }
}
