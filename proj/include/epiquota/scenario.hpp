#pragma once

#include "epiquota/core.hpp"

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace epiquota {

// Reads and fully validates a scenario file. Errors name the offending field.
Scenario load_scenario(const std::filesystem::path& path);
Scenario scenario_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

nlohmann::json scenario_to_json(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

// SHA-256 over the canonical scenario JSON and, for a CSV demand source, the
// bytes of that file.
std::string scenario_hash(const Scenario& scenario);

}  // namespace epiquota
