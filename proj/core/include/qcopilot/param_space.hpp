#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qcp {

struct ParameterSpec {
  std::string name;
  std::string symbol;
  std::string unit;
  double lower = 0.0;
  double upper = 1.0;
  // Integer-like knobs are searched as reals and rounded when applied.
  bool integer = false;
};

// Ordered, immutable collection of parameter specs. Index i always maps to the same symbol.
class ParameterSpace {
 public:
  ParameterSpace() = default;
  // Throws SpecError when a spec is malformed or symbols collide.
  ParameterSpace(std::string name, std::vector<ParameterSpec> specs);

  const std::string& name() const { return name_; }
  std::size_t dimension() const { return specs_.size(); }
  const std::vector<ParameterSpec>& specs() const { return specs_; }
  const ParameterSpec& operator[](std::size_t i) const { return specs_[i]; }

  std::optional<std::size_t> index_of(std::string_view symbol) const;
  // Throws LookupError on unknown symbol.
  std::size_t require_index(std::string_view symbol) const;
  std::vector<std::string> symbols() const;

 private:
  std::string name_;
  std::vector<ParameterSpec> specs_;
};

enum class Direction { maximize, minimize };

struct Threshold {
  double value = 0.0;
  std::string unit;
  // An observation is accepted when it lies strictly on the good side of value.
};

struct ObjectiveSpec {
  std::string name;  // key into raw observables
  Direction direction = Direction::maximize;
  std::optional<Threshold> acceptance_threshold;

  bool accepts(double raw_value) const;
};

struct Setting {
  std::vector<double> values;

  bool operator==(const Setting&) const = default;
};

struct Violation {
  enum class Kind { length_mismatch, below_lower, above_upper, not_finite };
  Kind kind;
  std::size_t index = 0;  // parameter index, unused for length_mismatch
  std::string message;
};

std::vector<Violation> validate_setting(const ParameterSpace& space, const Setting& setting);

// Affine per-dimension maps between a space and the unit cube.
std::vector<double> normalize(const ParameterSpace& space, const Setting& setting);
// Throws RangeError when a component is outside [0, 1].
Setting denormalize(const ParameterSpace& space, std::span<const double> unit);
// Clamps into the unit cube before mapping; for optimizer output with round-off.
Setting denormalize_clamped(const ParameterSpace& space, std::span<const double> unit);

// The setting actually applied to hardware: integer-like knobs rounded.
Setting applied_setting(const ParameterSpace& space, const Setting& setting);

enum class SignMode {
  single_max,  // flip minimize-objectives so that larger is better
  multi_min,   // flip maximize-objectives so that smaller is better
};

using Observables = std::map<std::string, double>;

// Throws LookupError when an objective has no raw observable.
std::vector<double> apply_sign_convention(const Observables& raw,
                                          std::span<const ObjectiveSpec> specs, SignMode mode);
double sign_for(const ObjectiveSpec& spec, SignMode mode);

enum class Stage { optimization, self_sustained, diagnosis };

std::string to_string(Stage stage);
// Throws SchemaError.
Stage stage_from_string(std::string_view text);

struct ExperimentRecord {
  std::string sub_experiment_id;
  Setting setting;
  Observables raw_observables;
  std::vector<double> objectives;
  int repeats = 1;
  Stage stage = Stage::optimization;
  std::uint64_t seed = 0;
  std::uint64_t timestamp = 0;

  bool operator==(const ExperimentRecord&) const = default;
};

// Throws SchemaError when record invariants do not hold for the given objective count.
void check_record(const ExperimentRecord& record, std::size_t objective_count);

// Averages a set of single shots into one record's raw observables.
Observables average_observables(std::span<const Observables> shots);

}  // namespace qcp
