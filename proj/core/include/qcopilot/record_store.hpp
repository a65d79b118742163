#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qcopilot/param_space.hpp"

namespace qcp {

// One ExperimentRecord per line, JSON with a fixed key set.
std::string record_to_json_line(const ExperimentRecord& record);
// Throws SchemaError on missing or extra keys.
ExperimentRecord record_from_json_line(const std::string& line);

void write_records(const std::filesystem::path& path, std::span<const ExperimentRecord> records);
void append_record(const std::filesystem::path& path, const ExperimentRecord& record);
// Throws IoError when the file cannot be opened.
std::vector<ExperimentRecord> read_records(const std::filesystem::path& path);

}  // namespace qcp
