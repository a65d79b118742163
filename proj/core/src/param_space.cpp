#include "qcopilot/param_space.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "qcopilot/error.hpp"

namespace qcp {

ParameterSpace::ParameterSpace(std::string name, std::vector<ParameterSpec> specs)
    : name_(std::move(name)), specs_(std::move(specs)) {
  if (specs_.empty()) throw SpecError("parameter space '" + name_ + "' has no parameters");
  std::set<std::string> seen;
  for (const auto& s : specs_) {
    if (!std::isfinite(s.lower) || !std::isfinite(s.upper) || !(s.lower < s.upper))
      throw SpecError("parameter '" + s.symbol + "' needs finite lower < upper");
    if (s.unit.empty()) throw SpecError("parameter '" + s.symbol + "' has no unit");
    if (s.symbol.empty()) throw SpecError("parameter '" + s.name + "' has no symbol");
    if (!seen.insert(s.symbol).second) throw SpecError("duplicate symbol '" + s.symbol + "'");
  }
}

std::optional<std::size_t> ParameterSpace::index_of(std::string_view symbol) const {
  for (std::size_t i = 0; i < specs_.size(); ++i)
    if (specs_[i].symbol == symbol) return i;
  return std::nullopt;
}

std::size_t ParameterSpace::require_index(std::string_view symbol) const {
  auto i = index_of(symbol);
  if (!i) throw LookupError("unknown parameter symbol '" + std::string(symbol) + "' in space '" + name_ + "'");
  return *i;
}

std::vector<std::string> ParameterSpace::symbols() const {
  std::vector<std::string> out;
  out.reserve(specs_.size());
  for (const auto& s : specs_) out.push_back(s.symbol);
  return out;
}

bool ObjectiveSpec::accepts(double raw_value) const {
  if (!acceptance_threshold) return true;
  return direction == Direction::minimize ? raw_value < acceptance_threshold->value
                                          : raw_value > acceptance_threshold->value;
}

std::vector<Violation> validate_setting(const ParameterSpace& space, const Setting& setting) {
  std::vector<Violation> out;
  if (setting.values.size() != space.dimension()) {
    std::ostringstream msg;
    msg << "expected " << space.dimension() << " values, got " << setting.values.size();
    out.push_back({Violation::Kind::length_mismatch, 0, msg.str()});
    return out;
  }
  for (std::size_t i = 0; i < setting.values.size(); ++i) {
    const double v = setting.values[i];
    const auto& spec = space[i];
    if (!std::isfinite(v)) {
      out.push_back({Violation::Kind::not_finite, i, spec.symbol + " is not finite"});
    } else if (v < spec.lower) {
      out.push_back({Violation::Kind::below_lower, i, spec.symbol + " below lower bound"});
    } else if (v > spec.upper) {
      out.push_back({Violation::Kind::above_upper, i, spec.symbol + " above upper bound"});
    }
  }
  return out;
}

std::vector<double> normalize(const ParameterSpace& space, const Setting& setting) {
  if (setting.values.size() != space.dimension()) throw ArityError("setting length does not match space");
  std::vector<double> u(space.dimension());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto& s = space[i];
    u[i] = (setting.values[i] - s.lower) / (s.upper - s.lower);
  }
  return u;
}

Setting denormalize(const ParameterSpace& space, std::span<const double> unit) {
  if (unit.size() != space.dimension()) throw ArityError("unit vector length does not match space");
  Setting out;
  out.values.resize(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) {
    if (!(unit[i] >= 0.0 && unit[i] <= 1.0))
      throw RangeError("unit-cube component " + std::to_string(i) + " outside [0,1]");
    const auto& s = space[i];
    out.values[i] = s.lower + unit[i] * (s.upper - s.lower);
  }
  return out;
}

Setting denormalize_clamped(const ParameterSpace& space, std::span<const double> unit) {
  std::vector<double> u(unit.begin(), unit.end());
  for (auto& v : u) v = std::clamp(std::isfinite(v) ? v : 0.5, 0.0, 1.0);
  return denormalize(space, u);
}

Setting applied_setting(const ParameterSpace& space, const Setting& setting) {
  Setting out = setting;
  for (std::size_t i = 0; i < out.values.size() && i < space.dimension(); ++i)
    if (space[i].integer) out.values[i] = std::clamp(std::round(out.values[i]), space[i].lower, space[i].upper);
  return out;
}

double sign_for(const ObjectiveSpec& spec, SignMode mode) {
  if (mode == SignMode::single_max) return spec.direction == Direction::minimize ? -1.0 : 1.0;
  return spec.direction == Direction::maximize ? -1.0 : 1.0;
}

std::vector<double> apply_sign_convention(const Observables& raw, std::span<const ObjectiveSpec> specs,
                                          SignMode mode) {
  std::vector<double> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    auto it = raw.find(spec.name);
    if (it == raw.end()) throw LookupError("missing observable '" + spec.name + "'");
    out.push_back(sign_for(spec, mode) * it->second);
  }
  return out;
}

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::optimization: return "optimization";
    case Stage::self_sustained: return "self_sustained";
    case Stage::diagnosis: return "diagnosis";
  }
  return "optimization";
}

Stage stage_from_string(std::string_view text) {
  if (text == "optimization") return Stage::optimization;
  if (text == "self_sustained") return Stage::self_sustained;
  if (text == "diagnosis") return Stage::diagnosis;
  throw SchemaError("unknown stage '" + std::string(text) + "'");
}

void check_record(const ExperimentRecord& record, std::size_t objective_count) {
  if (record.repeats < 1) throw SchemaError("record repeats must be >= 1");
  if (record.objectives.size() != objective_count) throw SchemaError("record objective count mismatch");
  for (const auto& [k, v] : record.raw_observables)
    if (!std::isfinite(v)) throw SchemaError("observable '" + k + "' is not finite");
}

Observables average_observables(std::span<const Observables> shots) {
  if (shots.empty()) throw ArityError("cannot average zero shots");
  Observables out;
  for (const auto& [k, v] : shots.front()) {
    double sum = 0.0;
    for (const auto& shot : shots) {
      auto it = shot.find(k);
      if (it == shot.end()) throw SchemaError("shot is missing observable '" + k + "'");
      sum += it->second;
    }
    out[k] = sum / static_cast<double>(shots.size());
  }
  return out;
}

}  // namespace qcp
