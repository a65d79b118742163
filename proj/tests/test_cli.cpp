#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "qcopilot/io/csv.hpp"

namespace fs = std::filesystem;

namespace {

int cli(const std::string& args) {
  const std::string cmd = std::string(QCP_CLI_PATH) + " " + args + " > cli_last.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t na = 0, nb = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++na;
    const auto other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) return false;
  }
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++nb;
  return na == nb;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kMotOnly =
    R"({"sub_experiments":[{"id":"MOT","space":"MOT","objectives":"mot","requirement":"maximize atom number"}],"global_requirements":""})";

// Full MOT + PGC workspace shared by the diagnosis cases.
const fs::path& workspace() {
  static const fs::path ws = [] {
    fs::remove_all("cli_ws");
    fs::remove("cli_ws.json");
    const int code = cli("optimize --out cli_ws --seed 2");
    REQUIRE(code == 0);
    return fs::path("cli_ws");
  }();
  return ws;
}

}  // namespace

TEST_CASE("cli: zero budget is a usage error") {
  fs::remove_all("cli_zero");
  CHECK(cli("optimize --budget 0 --out cli_zero") == 2);
  CHECK(cli("optimize --no-such-flag") == 2);
}

TEST_CASE("cli: MOT-only optimize is deterministic") {
  write("cli_mot_task.json", kMotOnly);
  for (const char* d : {"cli_mot_a", "cli_mot_b"}) {
    fs::remove_all(d);
    CHECK(cli(std::string("optimize --budget 100 --seed 9 --task cli_mot_task.json --out ") + d) == 0);
  }
  const auto h = qcp::io::read_csv("cli_mot_a/MOT_history.csv");
  CHECK(h.rows.size() == 100);
  const auto col = h.column("best_so_far");
  for (std::size_t i = 1; i < h.rows.size(); ++i)
    CHECK(qcp::io::parse_double(h.rows[i][col]) >= qcp::io::parse_double(h.rows[i - 1][col]));
  CHECK(same_tree("cli_mot_a", "cli_mot_b"));
}

TEST_CASE("cli: diagnose without artifacts is an ordering error") {
  fs::remove_all("cli_empty");
  CHECK(cli("diagnose --out cli_empty") == 3);
  CHECK_FALSE(fs::exists("cli_empty"));
  CHECK(cli("run --out cli_empty") == 3);
}

TEST_CASE("cli: injected X3 clamp is localized") {
  const auto& ws = workspace();
  fs::remove("cli_x3.json");
  REQUIRE(cli("inject-fault --config cli_x3.json --param X3 --clamp 4") == 0);
  CHECK(cli("inject-fault --config cli_x3.json --param Q7 --clamp 4") == 2);
  CHECK(cli("inject-fault --config cli_x3.json --param X3 --clamp 4 --scale 0.5") == 2);
  CHECK(cli("diagnose --config cli_x3.json --out " + ws.string()) == 0);
  const auto report = slurp(ws / "diagnosis_report.txt");
  CHECK(report.find("verdict: unique suspect X3") != std::string::npos);
  std::istringstream lines(report);
  std::string line;
  bool ranked_first = false;
  while (std::getline(lines, line))
    if (line.rfind("1 X3 ", 0) == 0) ranked_first = true;
  CHECK(ranked_first);
  CHECK(report.find("check AOM driver") != std::string::npos);

  // Both matrix exports have the same layout.
  CHECK(cli("report --out " + ws.string()) == 0);
  const auto base = qcp::io::read_csv(ws / "corr_baseline.csv");
  const auto probe = qcp::io::read_csv(ws / "corr_probe.csv");
  CHECK(base.header == probe.header);
  CHECK(base.rows.size() == probe.rows.size());
}

TEST_CASE("cli: a fault without a correlation signature needs a human") {
  const auto& ws = workspace();
  fs::remove("cli_x1.json");
  REQUIRE(cli("inject-fault --config cli_x1.json --param X1 --clamp 38.6") == 0);
  CHECK(cli("diagnose --config cli_x1.json --out " + ws.string()) == 4);
}

TEST_CASE("cli: report outputs") {
  const auto& ws = workspace();
  REQUIRE(cli("report --out " + ws.string()) == 0);
  const auto trace = qcp::io::read_csv(ws / "best_trace.csv");
  CHECK(trace.header == std::vector<std::string>{"sub_experiment", "iteration", "best_so_far"});
  std::map<std::string, double> last;
  for (const auto& r : trace.rows) {
    const double v = qcp::io::parse_double(r[2]);
    if (last.contains(r[0])) CHECK(v >= last[r[0]]);
    last[r[0]] = v;
  }
  CHECK(last.size() == 2);

  const auto par = qcp::io::read_csv(ws / "pareto.csv");
  std::vector<std::array<double, 2>> front;
  for (const auto& r : par.rows)
    if (r[2] == "1") front.push_back({qcp::io::parse_double(r[0]), qcp::io::parse_double(r[1])});
  REQUIRE_FALSE(front.empty());
  for (const auto& a : front)
    for (const auto& b : front) CHECK_FALSE((b[0] <= a[0] && b[1] <= a[1] && (b[0] < a[0] || b[1] < a[1])));

  // With a history file gone the report is a missing-artifact failure.
  fs::remove_all("cli_broken");
  fs::copy(ws, "cli_broken", fs::copy_options::recursive);
  fs::remove("cli_broken/MOT_history.csv");
  CHECK(cli("report --out cli_broken") == 1);
}
