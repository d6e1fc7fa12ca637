#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace mdiff::app {

// Compiler, build type and source revision, fixed at configure time.
std::string build_id();

// Creates <root>/<command>-YYYYmmdd-HHMMSS, appending -2, -3, ... until the
// name is unused. An existing directory is never reused.
std::filesystem::path create_run_dir(const std::filesystem::path& root, const std::string& command);

// run_manifest.json: command, build id, seed (null when none is consumed), the
// fully resolved settings and argv. Holds no timestamps, so two runs with equal
// manifests are expected to produce equal outputs.
void write_run_manifest(const std::filesystem::path& run_dir, const std::string& command,
                        std::optional<std::uint64_t> seed, const nlohmann::ordered_json& settings,
                        const std::vector<std::string>& argv);

}  // namespace mdiff::app
