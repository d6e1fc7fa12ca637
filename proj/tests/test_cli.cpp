#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"
#include "mdiff/app/commands.hpp"
#include "mdiff/app/sample_io.hpp"
#include "mdiff/metrics/metrics.hpp"
#include "mdiff/motion/motion_io.hpp"
#include "mdiff/numerics/random.hpp"
#include "mdiff/training/checkpoint.hpp"

using namespace mdiff;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"mdiff"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = app::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path run_dir(const Result& r) {
  const std::string key = "run directory: ";
  const auto at = r.out.rfind(key);
  REQUIRE_MESSAGE(at != std::string::npos, r.out, r.err);
  return fs::path(r.out.substr(at + key.size(), r.out.find('\n', at) - at - key.size()));
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mdiff_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return motion::read_file_bytes(p); }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

// A small dataset and a briefly trained toy model, built once.
struct Fixture {
  fs::path root;
  std::string manifest;
  std::string checkpoint;
  std::string test_manifest;

  static const Fixture& get() {
    static const Fixture f = [] {
      Fixture x;
      x.root = scratch("fixture");
      const Result s = run({"synth", "--n_joints", "2", "--n_sequences", "5", "--frames", "30", "--seed", "4", "--out",
                            x.root.string()});
      REQUIRE(s.code == 0);
      x.manifest = (run_dir(s) / "data" / "manifest.json").string();
      const Result t = run({"train", "--data", x.manifest, "--preset", "toy", "--iterations", "30", "--log_every", "10",
                            "--out", x.root.string()});
      REQUIRE_MESSAGE(t.code == 0, t.err);
      x.checkpoint = (run_dir(t) / "checkpoint.ckpt").string();
      x.test_manifest = (run_dir(t) / "test_manifest.json").string();
      return x;
    }();
    return f;
  }
};

std::vector<fs::path> ssets(const fs::path& run) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(run / "samples")) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

TEST_CASE("exit codes") {
  const fs::path out = scratch("exit");
  CHECK(run({}).code == 2);
  CHECK(run({"fly"}).code == 2);
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"synth", "--help"}).code == 0);
  CHECK(run({"synth", "--no_such_flag", "1", "--out", out.string()}).code == 2);
  CHECK(run({"synth", "--n_joints", "many", "--out", out.string()}).code == 2);

  const Result bad_action = run({"synth", "--actions", "walk,jog", "--out", out.string()});
  CHECK(bad_action.code == 2);
  CHECK(bad_action.err.find("actions") != std::string::npos);
  CHECK(bad_action.err.find("jog") != std::string::npos);

  const Result missing = run({"train", "--data", (out / "absent.json").string(), "--out", out.string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("absent.json") != std::string::npos);

  motion::write_file_bytes(out / "extra.cfg", "iterations = 3\nwidth = 9\n");
  CHECK(run({"train", "--config", (out / "extra.cfg").string(), "--out", out.string()}).code == 2);

  CHECK(run({"sample", "--mode", "stochstic", "--out", out.string()}).code == 2);

  motion::write_file_bytes(out / "junk.ckpt", "not a checkpoint");
  const Result junk = run({"sample", "--checkpoint", (out / "junk.ckpt").string(), "--data", "x", "--out", out.string()});
  CHECK(junk.code == 1);

  // Nothing but the two files written above: failed commands leave no run directories.
  CHECK(std::distance(fs::directory_iterator(out), fs::directory_iterator()) == 2);
}

TEST_CASE("the installed binary reports usage errors with exit code 2") {
  const fs::path out = scratch("binary");
  const std::string cmd = std::string(MDIFF_CLI_PATH) + " synth --actions walk,jog --out " + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 2);
}

TEST_CASE("synth is deterministic per seed and lists every sequence") {
  const fs::path out = scratch("synth");
  const std::vector<std::string> args{"synth", "--n_sequences", "4", "--frames", "50", "--seed", "11", "--out", out.string()};
  const fs::path a = run_dir(run(args));
  const fs::path b = run_dir(run(args));
  CHECK(a != b);
  const auto files = motion::load_manifest(a / "data" / "manifest.json");
  CHECK(files.size() == 4);
  for (const auto& f : files) CHECK(slurp(f) == slurp(b / "data" / f.filename()));

  auto other = args;
  other[6] = "12";
  const fs::path c = run_dir(run(other));
  CHECK(slurp(a / "data" / "seq_0000.mseq") != slurp(c / "data" / "seq_0000.mseq"));

  const auto m = nlohmann::json::parse(slurp(a / "run_manifest.json"));
  CHECK(m["command"] == "synth");
  CHECK(m["seed"] == 11);
  CHECK(m["config"]["n_sequences"] == 4);
  CHECK(m["config"]["fps"] == 25.0);
  CHECK(m.contains("build_id"));
}

TEST_CASE("seed precedence: flag, config file, MD_SEED, default") {
  const fs::path out = scratch("seed");
  motion::write_file_bytes(out / "s.cfg", "# seed from file\nseed = 21\nn_sequences = 2\n");
  const auto seed_of = [&](const std::vector<std::string>& extra) {
    std::vector<std::string> args{"synth", "--frames", "40", "--out", out.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    const Result r = run(args);
    REQUIRE(r.code == 0);
    return nlohmann::json::parse(slurp(run_dir(r) / "run_manifest.json"))["seed"].get<int>();
  };
  ::unsetenv("MD_SEED");
  CHECK(seed_of({}) == 0);
  ::setenv("MD_SEED", "33", 1);
  CHECK(seed_of({}) == 33);
  CHECK(seed_of({"--config", (out / "s.cfg").string()}) == 21);
  CHECK(seed_of({"--config", (out / "s.cfg").string(), "--seed", "5"}) == 5);
  ::unsetenv("MD_SEED");
}

TEST_CASE("deterministic sampling ignores the seed") {
  const auto& f = Fixture::get();
  const fs::path out = scratch("det");
  const auto sample = [&](const std::string& seed) {
    return run_dir(run({"sample", "--checkpoint", f.checkpoint, "--data", f.manifest, "--mode", "deterministic", "--seed",
                        seed, "--max_tasks", "3", "--out", out.string()}));
  };
  const fs::path a = sample("1"), b = sample("2");
  const auto fa = ssets(a), fb = ssets(b);
  REQUIRE(fa.size() == 3);
  for (std::size_t i = 0; i < fa.size(); ++i) CHECK(slurp(fa[i]) == slurp(fb[i]));
  const auto s = app::load_samples(fa[0]);
  CHECK(s.set.count() == 1);
  CHECK_FALSE(s.seed.has_value());
  CHECK(nlohmann::json::parse(slurp(a / "run_manifest.json"))["seed"].is_null());
}

TEST_CASE("stochastic sample i does not depend on N") {
  const auto& f = Fixture::get();
  const fs::path out = scratch("stoch");
  const auto sample = [&](const std::string& n) {
    return run_dir(run({"sample", "--checkpoint", f.checkpoint, "--data", f.manifest, "--n", n, "--seed", "8",
                        "--max_tasks", "2", "--out", out.string()}));
  };
  const auto one = ssets(sample("1")), fifty = ssets(sample("50"));
  REQUIRE(one.size() == 2);
  for (std::size_t t = 0; t < one.size(); ++t) {
    const auto a = app::load_samples(one[t]), b = app::load_samples(fifty[t]);
    CHECK(a.task == b.task);
    CHECK(b.set.samples.shape() == num::Shape{50, 5, 6});
    CHECK(b.set.ground_truth->shape() == num::Shape{5, 6});
    for (std::size_t i = 0; i < 30; ++i) CHECK(a.set.samples[i] == b.set.samples[i]);
  }
}

TEST_CASE("eval: ground truth as every sample scores zero, rows average, reruns match") {
  const fs::path out = scratch("eval");
  const fs::path dir = out / "in";
  fs::create_directories(dir);
  num::Rng rng(6);
  for (int t = 0; t < 3; ++t) {
    app::SampleFile f;
    f.task = "task" + std::to_string(t);
    f.mode = "stochastic";
    f.seed = 1;
    f.set.ground_truth = rng.normal_array({7, 6});
    f.set.samples = rng.normal_array({50, 7, 6});
    if (t == 0) {
      for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t j = 0; j < 42; ++j) f.set.samples[i * 42 + j] = (*f.set.ground_truth)[j];
      }
    }
    app::save_samples(dir / (f.task + ".sset"), f);
  }
  const Result r1 = run({"eval", "--samples", dir.string(), "--out", out.string()});
  REQUIRE_MESSAGE(r1.code == 0, r1.err);
  const Result r2 = run({"eval", "--samples", dir.string(), "--out", out.string()});
  const std::string csv = slurp(run_dir(r1) / "metrics.csv");
  CHECK(csv == slurp(run_dir(r2) / "metrics.csv"));

  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == std::vector<std::string>{"task", "APD", "mDE", "aDE", "sDE", "mFDE", "aFDE", "sFDE"});
  CHECK(rows[1][0] == "task0");
  CHECK(std::stod(rows[1][1]) == 0.0);
  CHECK(std::stod(rows[1][2]) == 0.0);
  CHECK(rows[4][0] == "mean");
  for (std::size_t c = 1; c < 8; ++c) {
    double sum = 0.0;
    for (std::size_t t = 1; t <= 3; ++t) sum += std::stod(rows[t][c]);
    CHECK(std::abs(std::stod(rows[4][c]) - sum / 3.0) <= 1e-12);
  }
}

TEST_CASE("eval writes euler MSE for single predictions and names a task with mismatched truth") {
  const fs::path out = scratch("eval2");
  const fs::path dir = out / "in";
  fs::create_directories(dir);
  num::Rng rng(7);
  app::SampleFile f;
  f.task = "walk_07";
  f.mode = "deterministic";
  f.set.samples = rng.normal_array({1, 20, 6});
  f.set.ground_truth = rng.normal_array({20, 6});
  app::save_samples(dir / "a.sset", f);
  const Result ok = run({"eval", "--samples", dir.string(), "--out", out.string()});
  REQUIRE(ok.code == 0);
  const auto rows = csv_rows(slurp(run_dir(ok) / "euler_mse.csv"));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"task", "80", "160", "320", "400", "560", "1000"});
  const num::DenseArray pred = f.set.samples.reshaped({20, 6});
  const auto expect = metrics::euler_mse(pred, *f.set.ground_truth, 25.0, metrics::kDefaultHorizonsMs);
  CHECK(std::stod(rows[1][1]) == expect.at(80));
  CHECK(std::stod(rows[1][5]) == expect.at(560));
  CHECK(rows[1][6].empty());

  f.task = "run_03";
  f.set.ground_truth = rng.normal_array({19, 6});
  app::save_samples(dir / "b.sset", f);
  const Result bad = run({"eval", "--samples", dir.string(), "--out", out.string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("run_03") != std::string::npos);
}

TEST_CASE("resume through the command line matches an uninterrupted run") {
  const auto& f = Fixture::get();
  const fs::path out = scratch("resume");
  const std::vector<std::string> base{"train", "--data", f.manifest, "--preset", "toy", "--log_every", "5", "--seed", "3",
                                      "--out", out.string()};
  auto part = base, full = base;
  part.insert(part.end(), {"--iterations", "10"});
  full.insert(full.end(), {"--iterations", "20"});
  const fs::path a = run_dir(run(part));
  const Result resumed = run({"train", "--data", f.manifest, "--resume", (a / "checkpoint.ckpt").string(),
                              "--iterations", "20", "--log_every", "5", "--out", out.string()});
  REQUIRE_MESSAGE(resumed.code == 0, resumed.err);
  const fs::path b = run_dir(run(full));
  CHECK(slurp(run_dir(resumed) / "checkpoint.ckpt") == slurp(b / "checkpoint.ckpt"));
  CHECK(slurp(run_dir(resumed) / "loss_log.csv") == slurp(b / "loss_log.csv"));

  const Result changed = run({"train", "--data", f.manifest, "--resume", (a / "checkpoint.ckpt").string(),
                              "--iterations", "20", "--lr", "0.5", "--out", out.string()});
  CHECK(changed.code == 2);
}

TEST_CASE("divergence exits 1 and keeps the last good checkpoint") {
  const auto& f = Fixture::get();
  const fs::path out = scratch("diverge");
  const Result r = run({"train", "--data", f.manifest, "--preset", "toy", "--iterations", "60", "--lr", "10000",
                        "--out", out.string()});
  REQUIRE(r.code == 1);
  CHECK(r.err.find("diverged") != std::string::npos);
  const auto ck = training::load_checkpoint(run_dir(r) / "last_good.ckpt");
  for (const auto& [name, p] : ck.params) CHECK(p.all_finite());
}

TEST_CASE("export flattens samples and loss history") {
  const auto& f = Fixture::get();
  const fs::path out = scratch("export");
  const fs::path s = run_dir(run({"sample", "--checkpoint", f.checkpoint, "--data", f.test_manifest, "--n", "3",
                                  "--max_tasks", "2", "--out", out.string()}));
  const Result r = run({"export", "--samples", s.string(), "--checkpoint", f.checkpoint, "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(csv_rows(slurp(run_dir(r) / "samples_long.csv")).size() == 1 + 2 * 3 * 5 * 6);
  CHECK(csv_rows(slurp(run_dir(r) / "loss_history.csv")).size() == 31);
  CHECK(run({"export", "--out", out.string()}).code == 2);
}

TEST_CASE("gradcheck passes and reports the worst error per check") {
  const fs::path out = scratch("gradcheck");
  const Result r = run({"gradcheck", "--out", out.string()});
  CHECK(r.code == 0);
  const auto rows = csv_rows(slurp(run_dir(r) / "gradcheck.csv"));
  REQUIRE(rows.size() == 20);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(std::stod(rows[i][2]) < 1e-4);
    CHECK(rows[i][3] == "1");
  }
}

TEST_CASE("both variants finish the smoke settings within five minutes") {
  const fs::path out = scratch("smoke");
  const Result s = run({"synth", "--out", out.string()});
  REQUIRE(s.code == 0);
  const std::string manifest = (run_dir(s) / "data" / "manifest.json").string();
  for (const char* variant : {"series", "parallel"}) {
    const auto t0 = std::chrono::steady_clock::now();
    const Result r = run({"train", "--data", manifest, "--preset", "smoke", "--variant", variant, "--out", out.string()});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    INFO(variant, " took ", secs, " s");
    CHECK(r.code == 0);
    CHECK(secs < 300.0);
    CHECK(training::load_checkpoint(run_dir(r) / "checkpoint.ckpt").iteration == 200);
  }
}

TEST_CASE("import turns CSV pose arrays into a dataset train accepts") {
  const fs::path out = scratch("import");
  const fs::path in = out / "csv";
  fs::create_directories(in);
  num::Rng rng(12);
  for (const char* name : {"subject_a", "subject_b", "subject_c"}) {
    std::string csv = "# frame rows, 6 columns\n";
    for (int f = 0; f < 20; ++f) {
      for (int d = 0; d < 6; ++d) csv += (d ? "," : "") + std::to_string(0.1 * rng.normal());
      csv += "\n";
    }
    motion::write_file_bytes(in / (std::string(name) + ".csv"), csv);
  }
  const Result r = run({"import", "--input", in.string(), "--fps", "50", "--repr", "xyz", "--out", out.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const fs::path manifest = run_dir(r) / "data" / "manifest.json";
  const auto files = motion::load_manifest(manifest);
  REQUIRE(files.size() == 3);
  const auto seq = motion::load_motion_file(files[1]);
  CHECK(files[1].filename() == "subject_b.mseq");
  CHECK(seq.frames.shape() == num::Shape{20, 6});
  CHECK(seq.fps == 50.0);
  CHECK(seq.representation == motion::Representation::xyz);

  const Result t = run({"train", "--data", manifest.string(), "--preset", "toy", "--iterations", "3", "--log_every", "1",
                        "--out", out.string()});
  CHECK_MESSAGE(t.code == 0, t.err);

  motion::write_file_bytes(in / "broken.csv", "1,2,3\n4,5\n");
  const Result bad = run({"import", "--input", in.string(), "--out", out.string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("broken.csv") != std::string::npos);
}
