#include "mdiff/app/run_context.hpp"

#include <ctime>

#include "mdiff/errors.hpp"
#include "mdiff/motion/motion_io.hpp"

#ifndef MDIFF_BUILD_ID
#define MDIFF_BUILD_ID "unknown"
#endif

namespace mdiff::app {

namespace fs = std::filesystem;

std::string build_id() { return MDIFF_BUILD_ID; }

fs::path create_run_dir(const fs::path& root, const std::string& command) {
  const std::time_t now = std::time(nullptr);
  std::tm local{};
  localtime_r(&now, &local);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &local);
  const std::string base = command + "-" + stamp;

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error("cannot create output root '" + root.string() + "': " + ec.message());
  for (int n = 1;; ++n) {
    const fs::path dir = root / (n == 1 ? base : base + "-" + std::to_string(n));
    // create_directory reports false when the directory already exists.
    if (fs::create_directory(dir, ec)) return dir;
    if (ec) throw Error("cannot create run directory '" + dir.string() + "': " + ec.message());
  }
}

void write_run_manifest(const fs::path& run_dir, const std::string& command, std::optional<std::uint64_t> seed,
                        const nlohmann::ordered_json& settings, const std::vector<std::string>& argv) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["build_id"] = build_id();
  m["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json(nullptr);
  m["config"] = settings;
  m["argv"] = argv;
  motion::write_file_bytes(run_dir / "run_manifest.json", m.dump(2) + "\n");
}

}  // namespace mdiff::app
