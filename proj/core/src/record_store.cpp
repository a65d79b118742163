#include "qcopilot/record_store.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "qcopilot/error.hpp"

namespace qcp {

using ojson = nlohmann::ordered_json;

namespace {

const std::set<std::string>& record_keys() {
  static const std::set<std::string> keys{"sub_experiment_id", "setting", "raw_observables", "objectives",
                                          "repeats",           "stage",   "seed",            "timestamp"};
  return keys;
}

}  // namespace

std::string record_to_json_line(const ExperimentRecord& r) {
  ojson j;
  j["sub_experiment_id"] = r.sub_experiment_id;
  j["setting"] = r.setting.values;
  ojson obs = ojson::object();
  for (const auto& [k, v] : r.raw_observables) obs[k] = v;
  j["raw_observables"] = obs;
  j["objectives"] = r.objectives;
  j["repeats"] = r.repeats;
  j["stage"] = to_string(r.stage);
  j["seed"] = r.seed;
  j["timestamp"] = r.timestamp;
  return j.dump();
}

ExperimentRecord record_from_json_line(const std::string& line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("record line is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("record line is not an object");
  for (const auto& [k, v] : j.items())
    if (!record_keys().contains(k)) throw SchemaError("unexpected record key '" + k + "'");
  for (const auto& k : record_keys())
    if (!j.contains(k)) throw SchemaError("record is missing key '" + k + "'");
  try {
    ExperimentRecord r;
    r.sub_experiment_id = j.at("sub_experiment_id").get<std::string>();
    r.setting.values = j.at("setting").get<std::vector<double>>();
    for (const auto& [k, v] : j.at("raw_observables").items()) r.raw_observables[k] = v.get<double>();
    r.objectives = j.at("objectives").get<std::vector<double>>();
    r.repeats = j.at("repeats").get<int>();
    r.stage = stage_from_string(j.at("stage").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.timestamp = j.at("timestamp").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed record: ") + e.what());
  }
}

void write_records(const std::filesystem::path& path, std::span<const ExperimentRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json_line(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void append_record(const std::filesystem::path& path, const ExperimentRecord& record) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << record_to_json_line(record) << '\n';
  if (!out) throw IoError("append failed for " + path.string());
}

std::vector<ExperimentRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<ExperimentRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(record_from_json_line(line));
  }
  return out;
}

}  // namespace qcp
