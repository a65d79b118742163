#include "qcopilot/sim/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "qcopilot/error.hpp"
#include "qcopilot/sim/tof.hpp"

namespace qcp::sim {

using json = nlohmann::ordered_json;

namespace {

// Reads named fields from an object and rejects anything unlisted.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw SchemaError(where_ + " must be an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw SchemaError("unknown key '" + k + "' in " + where_);
  }
  void real(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number()) throw SchemaError(where_ + "." + key + " must be a number");
    out = j_[key].get<double>();
  }
  void integer(const char* key, int& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_[key].is_number_integer()) throw SchemaError(where_ + "." + key + " must be an integer");
    out = j_[key].get<int>();
  }
  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_[key] : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json fault_to_json(const FaultSpec& f) {
  json j;
  j["param"] = f.target_symbol;
  if (const auto* c = std::get_if<Clamp>(&f.mode)) {
    j["clamp"] = c->value;
  } else {
    j["scale"] = std::get<Scale>(f.mode).factor;
  }
  j["active"] = f.active;
  return j;
}

FaultSpec fault_from_json(const json& j) {
  if (!j.is_object() || !j.contains("param") || !j["param"].is_string())
    throw SchemaError("fault entries need a string 'param'");
  for (const auto& [k, v] : j.items())
    if (k != "param" && k != "clamp" && k != "scale" && k != "active")
      throw SchemaError("unknown key '" + k + "' in fault");
  FaultSpec f;
  f.target_symbol = j["param"].get<std::string>();
  const bool has_clamp = j.contains("clamp"), has_scale = j.contains("scale");
  if (has_clamp == has_scale) throw SchemaError("fault needs exactly one of 'clamp' or 'scale'");
  if (has_clamp) {
    f.mode = Clamp{j["clamp"].get<double>()};
  } else {
    f.mode = Scale{j["scale"].get<double>()};
  }
  if (j.contains("active")) f.active = j["active"].get<bool>();
  check_fault(f);
  return f;
}

}  // namespace

SimulatorConfig::SimulatorConfig() : tof_times(kDefaultTofTimes) {}

SimulatorConfig simulator_config_from_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("simulator config is not valid JSON: ") + e.what());
  }
  SimulatorConfig cfg;
  try {
    Fields top(root, "config");
    if (const json* c = top.sub("constants")) {
      Fields f(*c, "constants");
      auto& k = cfg.constants;
      f.real("hbar_k", k.hbar_k);
      f.real("gamma", k.gamma);
      f.real("i_sat", k.i_sat);
      f.real("mu_b", k.mu_b);
      f.real("g_factor", k.g_factor);
      f.real("mass", k.mass);
      f.real("k", k.k);
      f.real("kb", k.kb);
    }
    if (const json* m = top.sub("mot")) {
      Fields f(*m, "mot");
      auto& mot = cfg.mot;
      if (const json* d = f.sub("detuning_map")) {
        Fields g(*d, "mot.detuning_map");
        g.real("offset_mhz", mot.detuning_map.offset_mhz);
        g.real("per_x1", mot.detuning_map.per_x1);
        g.real("per_x2", mot.detuning_map.per_x2);
      }
      if (const json* d = f.sub("gradient_map")) {
        Fields g(*d, "mot.gradient_map");
        g.real("offset", mot.gradient_map.offset);
        g.real("per_volt", mot.gradient_map.per_volt);
      }
      f.real("capture_scale", mot.capture_scale);
      f.real("capture_width", mot.capture_width);
      f.real("trap_floor", mot.trap_floor);
      f.real("cooling_center", mot.cooling_center);
      f.real("cooling_width", mot.cooling_width);
      f.real("repump_scale", mot.repump_scale);
      f.real("saturation_level", mot.saturation_level);
      f.real("noise_rel", mot.noise_rel);
      f.real("sigma_ref", mot.sigma_ref);
      f.real("brightness_per_atom", mot.brightness_per_atom);
    }
    if (const json* p = top.sub("pgc")) {
      Fields f(*p, "pgc");
      auto& pgc = cfg.pgc;
      f.real("temperature_floor", pgc.temperature_floor);
      f.real("heating", pgc.heating);
      f.real("cold_loss", pgc.cold_loss);
      f.real("cold_scale", pgc.cold_scale);
      f.real("hot_loss", pgc.hot_loss);
      f.real("relight_loss", pgc.relight_loss);
      f.real("relight_optimum", pgc.relight_optimum);
      f.real("power_loss", pgc.power_loss);
      f.real("power_reference", pgc.power_reference);
      f.real("step_loss", pgc.step_loss);
      f.real("loss_time", pgc.loss_time);
      f.real("noise_rel", pgc.noise_rel);
    }
    if (const json* c = top.sub("ccd")) {
      Fields f(*c, "ccd");
      f.integer("width", cfg.ccd.width);
      f.integer("height", cfg.ccd.height);
      f.real("pixel_size", cfg.ccd.pixel_size);
      f.integer("border", cfg.ccd.border);
      f.real("background", cfg.ccd.background);
    }
    if (const json* t = top.sub("tof_times_ms")) {
      if (!t->is_array()) throw SchemaError("tof_times_ms must be an array");
      cfg.tof_times.clear();
      for (const auto& v : *t) cfg.tof_times.push_back(v.get<double>() * 1e-3);
    }
    if (const json* fs = top.sub("faults")) {
      if (!fs->is_array()) throw SchemaError("faults must be an array");
      for (const auto& f : *fs) cfg.faults.push_back(fault_from_json(f));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("simulator config: ") + e.what());
  }
  cfg.mot.constants = cfg.constants;
  cfg.pgc.constants = cfg.constants;
  return cfg;
}

std::string simulator_config_to_text(const SimulatorConfig& cfg) {
  json root;
  const auto& k = cfg.constants;
  root["constants"] = {{"hbar_k", k.hbar_k}, {"gamma", k.gamma}, {"i_sat", k.i_sat}, {"mu_b", k.mu_b},
                       {"g_factor", k.g_factor}, {"mass", k.mass}, {"k", k.k}, {"kb", k.kb}};
  const auto& m = cfg.mot;
  root["mot"] = {
      {"detuning_map",
       {{"offset_mhz", m.detuning_map.offset_mhz}, {"per_x1", m.detuning_map.per_x1}, {"per_x2", m.detuning_map.per_x2}}},
      {"gradient_map", {{"offset", m.gradient_map.offset}, {"per_volt", m.gradient_map.per_volt}}},
      {"capture_scale", m.capture_scale},
      {"capture_width", m.capture_width},
      {"trap_floor", m.trap_floor},
      {"cooling_center", m.cooling_center},
      {"cooling_width", m.cooling_width},
      {"repump_scale", m.repump_scale},
      {"saturation_level", m.saturation_level},
      {"noise_rel", m.noise_rel},
      {"sigma_ref", m.sigma_ref},
      {"brightness_per_atom", m.brightness_per_atom}};
  const auto& p = cfg.pgc;
  root["pgc"] = {{"temperature_floor", p.temperature_floor},
                 {"heating", p.heating},
                 {"cold_loss", p.cold_loss},
                 {"cold_scale", p.cold_scale},
                 {"hot_loss", p.hot_loss},
                 {"relight_loss", p.relight_loss},
                 {"relight_optimum", p.relight_optimum},
                 {"power_loss", p.power_loss},
                 {"power_reference", p.power_reference},
                 {"step_loss", p.step_loss},
                 {"loss_time", p.loss_time},
                 {"noise_rel", p.noise_rel}};
  root["ccd"] = {{"width", cfg.ccd.width},
                 {"height", cfg.ccd.height},
                 {"pixel_size", cfg.ccd.pixel_size},
                 {"border", cfg.ccd.border},
                 {"background", cfg.ccd.background}};
  json times = json::array();
  for (double t : cfg.tof_times) times.push_back(t * 1e3);
  root["tof_times_ms"] = times;
  json faults = json::array();
  for (const auto& f : cfg.faults) faults.push_back(fault_to_json(f));
  root["faults"] = faults;
  return root.dump(2) + "\n";
}

SimulatorConfig load_simulator_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read simulator config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return simulator_config_from_text(text.str());
}

void save_simulator_config(const SimulatorConfig& config, const std::filesystem::path& path) {
  const std::string text = simulator_config_to_text(config);
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text)) throw IoError("cannot write simulator config " + path.string());
}

void arm_fault(SimulatorConfig& config, const FaultSpec& fault) {
  check_fault(fault);
  std::erase_if(config.faults, [&](const FaultSpec& f) { return f.target_symbol == fault.target_symbol; });
  config.faults.push_back(fault);
}

}  // namespace qcp::sim
