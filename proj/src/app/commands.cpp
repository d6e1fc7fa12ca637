#include "mdiff/app/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mdiff/app/run_context.hpp"
#include "mdiff/app/sample_io.hpp"
#include "mdiff/diffusion/sampler.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/metrics/report.hpp"
#include "mdiff/motion/motion_io.hpp"
#include "mdiff/motion/synth.hpp"
#include "mdiff/motion/windowing.hpp"
#include "mdiff/training/checkpoint.hpp"
#include "mdiff/training/gradcheck_suite.hpp"
#include "mdiff/training/trainer.hpp"

namespace mdiff::app {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using Preset = std::map<std::string, std::string>;

// Settings a preset changes relative to the built-in (desk) defaults.
const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> table{
      {"desk", {}},
      {"smoke", {{"batch_size", "16"}, {"iterations", "200"}}},
      {"toy",
       {{"model_dim", "32"}, {"n_heads", "2"}, {"obs_frames", "4"}, {"future_frames", "5"}, {"steps", "5"},
        {"batch_size", "16"}}},
      {"paper",
       {{"model_dim", "512"}, {"n_heads", "8"}, {"obs_frames", "50"}, {"future_frames", "25"}, {"batch_size", "512"},
        {"iterations", "50000"}}},
  };
  return table;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, values] : presets()) names.push_back(name);
  return names;
}

// Flags bound to variables, remembered so presets can fill the ones left unset
// and the manifest can record every resolved value.
class Settings {
 public:
  explicit Settings(CLI::App& app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& key, T& var, const std::string& help) {
    CLI::Option* opt = app_.add_option("--" + key, var, help)->capture_default_str();
    entries_.push_back({key, opt,
                        [&var, key](const std::string& text) {
                          if (!CLI::detail::lexical_cast(text, var)) {
                            throw ConfigError(key + ": cannot use preset value '" + text + "'");
                          }
                        },
                        [&var] { return ordered_json(var); }});
    return opt;
  }

  // True when the flag or the config file set the key (or MD_SEED set the seed).
  bool given(const std::string& key) const { return find(key).option->count() > 0; }

  void apply_preset(const Preset& preset) const {
    for (const auto& [key, value] : preset) {
      if (!given(key)) find(key).assign(value);
    }
  }

  ordered_json resolved() const {
    ordered_json j = ordered_json::object();
    for (const auto& e : entries_) j[e.key] = e.get();
    return j;
  }

 private:
  struct Entry {
    std::string key;
    CLI::Option* option;
    std::function<void(const std::string&)> assign;
    std::function<ordered_json()> get;
  };

  const Entry& find(const std::string& key) const {
    for (const auto& e : entries_) {
      if (e.key == key) return e;
    }
    throw ContractError("no setting named '" + key + "'");
  }

  CLI::App& app_;
  std::vector<Entry> entries_;
};

struct Invocation {
  int argc;
  const char* const* argv;  // argv[0] is the subcommand name
  std::vector<std::string> words;
  std::ostream& out;
  std::ostream& err;
};

class Command {
 public:
  Command(const std::string& name, const std::string& description) : name_(name), app_(description, name) {
    app_.set_config("--config", "", "settings file with one `key = value` per line, # for comments");
    app_.allow_config_extras(CLI::config_extras_mode::error);
    settings_.add("out", out_root_, "directory that receives the timestamped run directory");
  }

  Settings& settings() { return settings_; }
  CLI::App& app() { return app_; }

  // False when help was requested and printed.
  bool parse(const Invocation& inv) {
    try {
      app_.parse(inv.argc, inv.argv);
    } catch (const CLI::Success&) {
      inv.out << app_.help();
      return false;
    }
    return true;
  }

  fs::path start_run(const Invocation& inv, std::optional<std::uint64_t> seed, const ordered_json& resolved) const {
    const fs::path dir = create_run_dir(out_root_, name_);
    write_run_manifest(dir, name_, seed, resolved, inv.words);
    return dir;
  }

 private:
  std::string name_;
  CLI::App app_;
  Settings settings_{app_};
  std::string out_root_ = "runs";
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    std::string item = text.substr(start, comma - start);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) items.push_back(item);
    start = comma + 1;
  }
  return items;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string require_path(const std::string& key, const std::string& value) {
  if (value.empty()) throw ConfigError(key + ": a path is required");
  return value;
}

struct NamedSequence {
  fs::path file;
  motion::MotionSequence seq;
};

std::vector<NamedSequence> load_named(const std::string& manifest) {
  std::vector<NamedSequence> out;
  for (const auto& file : motion::load_manifest(require_path("data", manifest))) {
    out.push_back({file, motion::load_motion_file(file)});
  }
  if (out.empty()) throw ConfigError("data: manifest '" + manifest + "' lists no sequences");
  for (const auto& s : out) {
    if (s.seq.pose_dim() != out.front().seq.pose_dim()) {
      throw ConfigError("data: sequences disagree on the pose dimension (" + s.file.string() + ")");
    }
  }
  return out;
}

void save_path_list(const fs::path& path, const std::vector<NamedSequence>& seqs, const std::vector<std::size_t>& idx) {
  std::vector<std::string> files;
  for (std::size_t i : idx) files.push_back(fs::absolute(seqs[i].file).lexically_normal().string());
  motion::save_manifest(path, files);
}

std::vector<fs::path> sample_files(const std::string& where) {
  fs::path dir = require_path("samples", where);
  if (fs::is_directory(dir / "samples")) dir /= "samples";
  if (!fs::is_directory(dir)) throw ConfigError("samples: '" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".sset") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("samples: no .sset files in '" + dir.string() + "'");
  return files;
}

// Sample i of an [N, L, D] array as L x D.
num::DenseArray sample_at(const num::DenseArray& samples, std::size_t i) {
  const std::size_t l = samples.extent(1), d = samples.extent(2);
  return num::slice_rows(samples.reshaped({samples.extent(0) * l, d}), i * l, l);
}

int cmd_synth(const Invocation& inv) {
  Command cmd("synth", "Generate a synthetic euler-angle motion dataset.");
  motion::SynthConfig cfg;
  std::string actions = "walk,idle,wave";
  Settings& s = cmd.settings();
  s.add("n_joints", cfg.n_joints, "joints per skeleton (pose dimension 3n)");
  s.add("n_sequences", cfg.n_sequences, "number of sequences");
  s.add("frames", cfg.frames_per_sequence, "frames per sequence");
  s.add("fps", cfg.fps, "frame rate");
  s.add("actions", actions, "comma-separated action mix from walk, idle, wave");
  s.add("amplitude", cfg.amplitude, "summed sinusoid amplitude per pose parameter (rad)");
  s.add("drift", cfg.drift, "largest linear drift rate (rad/s)");
  s.add("seed", cfg.seed, "generator seed")->envname("MD_SEED");
  if (!cmd.parse(inv)) return kExitOk;

  cfg.action_mix = split_list(actions);
  for (const auto& a : cfg.action_mix) {
    try {
      motion::parse_action(a);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("actions: ") + e.what());
    }
  }
  const auto seqs = motion::synth_dataset(cfg);

  const fs::path dir = cmd.start_run(inv, cfg.seed, s.resolved());
  const fs::path data = dir / "data";
  fs::create_directory(data);
  std::vector<std::string> files;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "seq_%04zu.mseq", i);
    motion::save_motion_file(data / name, seqs[i]);
    files.push_back(name);
  }
  motion::save_manifest(data / "manifest.json", files);
  inv.out << "wrote " << seqs.size() << " sequences, manifest " << (data / "manifest.json").string() << "\n";
  inv.out << "run directory: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_import(const Invocation& inv) {
  Command cmd("import", "Convert preprocessed CSV pose arrays (one frame per row) into a dataset.");
  std::string input, repr = "euler", label;
  double fps = 25.0;
  Settings& s = cmd.settings();
  s.add("input", input, "a .csv file or a directory of them");
  s.add("fps", fps, "frame rate of the arrays");
  s.add("repr", repr, "pose representation")->check(CLI::IsMember({"euler", "axis-angle", "xyz"}));
  s.add("label", label, "action label for every sequence, empty for none");
  if (!cmd.parse(inv)) return kExitOk;

  const fs::path in = require_path("input", input);
  std::vector<fs::path> files;
  if (fs::is_directory(in)) {
    for (const auto& e : fs::directory_iterator(in)) {
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(in)) {
    files.push_back(in);
  }
  if (files.empty()) throw ConfigError("input: no .csv files at '" + in.string() + "'");

  std::vector<motion::MotionSequence> seqs;
  for (const auto& f : files) {
    motion::MotionSequence seq;
    try {
      seq.frames = motion::parse_csv_matrix(motion::read_file_bytes(f));
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ": " + e.what(), e.offset());
    }
    seq.fps = fps;
    seq.representation = motion::parse_representation(repr);
    if (!label.empty()) seq.action_label = label;
    if (seq.pose_dim() % 3 != 0) {
      throw ConfigError("input: " + f.string() + " has " + std::to_string(seq.pose_dim()) +
                        " columns, not three per joint");
    }
    seq.validate();
    seqs.push_back(std::move(seq));
  }

  const fs::path dir = cmd.start_run(inv, std::nullopt, s.resolved());
  const fs::path data = dir / "data";
  fs::create_directory(data);
  std::vector<std::string> names;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    names.push_back(files[i].stem().string() + ".mseq");
    motion::save_motion_file(data / names.back(), seqs[i]);
  }
  motion::save_manifest(data / "manifest.json", names);
  inv.out << "imported " << seqs.size() << " sequences, manifest " << (data / "manifest.json").string() << "\n";
  inv.out << "run directory: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const Invocation& inv) {
  Command cmd("train", "Train a denoiser on a dataset manifest.");
  std::string data, resume, preset = "desk", variant = "series";
  double train_fraction = 0.8;
  std::size_t stride = 10;
  denoiser::DenoiserConfig mc;
  diffusion::ScheduleParams sp;
  training::TrainConfig tc;
  Settings& s = cmd.settings();
  s.add("data", data, "dataset manifest (JSON list of .mseq files)");
  s.add("preset", preset, "base settings: desk, smoke, toy or paper")->check(CLI::IsMember(preset_names()));
  s.add("variant", variant, "denoiser layout: series or parallel")->check(CLI::IsMember({"series", "parallel"}));
  s.add("model_dim", mc.model_dim, "attention width");
  s.add("n_heads", mc.n_heads, "attention heads");
  s.add("obs_frames", mc.obs_frames, "observed frames T");
  s.add("future_frames", mc.future_frames, "predicted frames L");
  s.add("stride", stride, "window stride in frames");
  s.add("train_fraction", train_fraction, "share of sequences used for training");
  s.add("steps", sp.steps, "diffusion steps K");
  s.add("beta_min", sp.beta_min, "first noise variance");
  s.add("beta_max", sp.beta_max, "last noise variance");
  s.add("batch_size", tc.batch_size, "items per iteration");
  s.add("iterations", tc.iterations, "total iterations");
  s.add("lr", tc.adam.lr, "Adam learning rate");
  s.add("beta1", tc.adam.beta1, "Adam first-moment decay");
  s.add("beta2", tc.adam.beta2, "Adam second-moment decay");
  s.add("adam_eps", tc.adam.eps, "Adam epsilon");
  s.add("clip_norm", tc.clip_norm, "global gradient-norm cap, 0 disables");
  s.add("checkpoint_every", tc.checkpoint_every, "intermediate checkpoint period, 0 disables");
  s.add("log_every", tc.log_every, "loss log window");
  s.add("seed", tc.seed, "seed for the split, initialization and batches")->envname("MD_SEED");
  s.add("resume", resume, "checkpoint to continue from");
  if (!cmd.parse(inv)) return kExitOk;
  s.apply_preset(presets().at(preset));

  std::optional<training::Checkpoint> from;
  if (!resume.empty()) {
    from = training::load_checkpoint(resume);
    // Anything not set explicitly continues as stored.
    const auto keep = [&](const char* key, auto& field, const auto& stored) {
      if (!s.given(key)) field = stored;
    };
    const auto& m = from->model_config;
    keep("variant", variant, std::string(denoiser::to_string(m.variant)));
    keep("model_dim", mc.model_dim, m.model_dim);
    keep("n_heads", mc.n_heads, m.n_heads);
    keep("obs_frames", mc.obs_frames, m.obs_frames);
    keep("future_frames", mc.future_frames, m.future_frames);
    keep("steps", sp.steps, from->schedule.steps);
    keep("beta_min", sp.beta_min, from->schedule.beta_min);
    keep("beta_max", sp.beta_max, from->schedule.beta_max);
    keep("batch_size", tc.batch_size, from->train.batch_size);
    keep("lr", tc.adam.lr, from->train.adam.lr);
    keep("beta1", tc.adam.beta1, from->train.adam.beta1);
    keep("beta2", tc.adam.beta2, from->train.adam.beta2);
    keep("adam_eps", tc.adam.eps, from->train.adam.eps);
    keep("clip_norm", tc.clip_norm, from->train.clip_norm);
    keep("seed", tc.seed, from->train.seed);
  }

  const auto seqs = load_named(data);
  mc.variant = denoiser::parse_variant(variant);
  mc.pose_dim = seqs.front().seq.pose_dim();
  mc.n_steps = sp.steps;
  mc.validate();
  tc.validate();
  if (stride == 0) throw ConfigError("stride: must be positive");
  if (from) training::require_compatible(*from, mc, sp);

  const motion::IndexSplit split = motion::split_indices(seqs.size(), train_fraction, tc.seed);
  std::vector<motion::PredictionTask> tasks;
  for (std::size_t i : split.train) {
    for (auto& t : motion::window_split(seqs[i].seq, mc.obs_frames, mc.future_frames, stride)) tasks.push_back(std::move(t));
  }
  if (tasks.empty()) {
    throw ConfigError("data: no training sequence is longer than obs_frames + future_frames = " +
                      std::to_string(mc.frames()));
  }

  std::optional<training::Trainer> trainer;
  if (from) {
    trainer.emplace(tasks, *from, tc);
  } else {
    trainer.emplace(tasks, mc, sp, motion::Normalizer::fit(tasks), tc);
  }

  ordered_json resolved = s.resolved();
  resolved["pose_dim"] = mc.pose_dim;
  resolved["training_windows"] = tasks.size();
  const fs::path dir = cmd.start_run(inv, tc.seed, resolved);
  save_path_list(dir / "train_manifest.json", seqs, split.train);
  save_path_list(dir / "test_manifest.json", seqs, split.test);
  inv.out << "training " << variant << " on " << tasks.size() << " windows from " << split.train.size()
          << " sequences, " << denoiser::DenoiserModel::parameter_count(mc) << " parameters\n";

  try {
    trainer->run([&](const training::Trainer& t) {
      const std::int64_t it = t.iteration();
      if (it % tc.log_every == 0) {
        const auto& l = t.losses();
        const double mean = std::accumulate(l.end() - tc.log_every, l.end(), 0.0) / static_cast<double>(tc.log_every);
        inv.out << "iteration " << it << " loss " << format_double(mean) << "\n";
      }
      if (tc.checkpoint_every > 0 && it % tc.checkpoint_every == 0 && it < tc.iterations) {
        training::save_checkpoint(dir / ("checkpoint-" + std::to_string(it) + ".ckpt"), t.checkpoint());
      }
    });
  } catch (const training::TrainingDivergedError& e) {
    const fs::path saved = dir / "last_good.ckpt";
    training::save_checkpoint(saved, e.last_good());
    motion::write_file_bytes(dir / "loss_log.csv", training::format_loss_log(e.last_good().losses, tc.log_every));
    inv.err << "error: training diverged at iteration " << e.iteration() << ": " << e.what() << "\n"
            << "last good state saved to " << saved.string() << "\n";
    inv.out << "run directory: " << dir.string() << "\n";
    return kExitFailure;
  }

  training::save_checkpoint(dir / "checkpoint.ckpt", trainer->checkpoint());
  motion::write_file_bytes(dir / "loss_log.csv", training::format_loss_log(trainer->losses(), tc.log_every));
  inv.out << "checkpoint " << (dir / "checkpoint.ckpt").string() << "\n";
  inv.out << "run directory: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_sample(const Invocation& inv) {
  Command cmd("sample", "Predict futures for every window of a dataset.");
  std::string checkpoint, data, mode = "stochastic";
  std::size_t n = 50, stride = 10, max_tasks = 0;
  std::uint64_t seed = 0;
  Settings& s = cmd.settings();
  s.add("checkpoint", checkpoint, "trained checkpoint");
  s.add("data", data, "dataset manifest to cut windows from");
  s.add("mode", mode, "stochastic or deterministic")->check(CLI::IsMember({"stochastic", "deterministic"}));
  s.add("n", n, "samples per task in stochastic mode");
  s.add("seed", seed, "sampling seed (stochastic mode only)")->envname("MD_SEED");
  s.add("stride", stride, "window stride in frames");
  s.add("max_tasks", max_tasks, "stop after this many windows, 0 for all");
  if (!cmd.parse(inv)) return kExitOk;

  const bool stochastic = mode == "stochastic";
  if (stochastic && n < 1) throw ConfigError("n: must be at least 1");
  if (stride == 0) throw ConfigError("stride: must be positive");
  const training::Checkpoint ck = training::load_checkpoint(require_path("checkpoint", checkpoint));
  const denoiser::DenoiserModel model = training::model_from(ck);
  const auto sched = diffusion::NoiseSchedule::linear(ck.schedule);
  const auto& mc = ck.model_config;

  struct NamedTask {
    std::string name;
    motion::PredictionTask task;
    double fps;
  };
  std::vector<NamedTask> tasks;
  for (const auto& ns : load_named(data)) {
    if (ns.seq.pose_dim() != mc.pose_dim) {
      throw ConfigError("data: pose dimension " + std::to_string(ns.seq.pose_dim()) + " does not match the checkpoint's " +
                        std::to_string(mc.pose_dim));
    }
    const auto windows = motion::window_split(ns.seq, mc.obs_frames, mc.future_frames, stride);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "_f%05zu", w * stride);
      tasks.push_back({ns.file.stem().string() + suffix, windows[w], ns.seq.fps});
    }
  }
  if (max_tasks > 0 && tasks.size() > max_tasks) tasks.resize(max_tasks);
  if (tasks.empty()) throw ConfigError("data: no sequence is longer than " + std::to_string(mc.frames()) + " frames");

  ordered_json resolved = s.resolved();
  std::optional<std::uint64_t> used_seed;
  if (stochastic) {
    used_seed = seed;
  } else {
    resolved["n"] = 1;
    resolved["seed"] = nullptr;
  }
  const fs::path dir = cmd.start_run(inv, used_seed, resolved);
  fs::create_directory(dir / "samples");

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    const num::DenseArray obs = ck.normalizer.apply(t.task.p_obs);
    num::DenseArray raw;
    if (stochastic) {
      raw = diffusion::sample_stochastic(model, obs, mc.future_frames, n, num::derive_seed(seed, i), sched);
    } else {
      raw = diffusion::sample_deterministic(model, obs, mc.future_frames, sched).reshaped({1, mc.future_frames, mc.pose_dim});
    }
    const num::Shape shape = raw.shape();
    SampleFile file;
    file.task = t.name;
    file.mode = mode;
    file.seed = used_seed;
    file.set.samples = ck.normalizer.invert(raw.reshaped({shape[0] * shape[1], shape[2]})).reshaped(shape);
    file.set.ground_truth = t.task.p_gt;
    file.set.fps = t.fps;
    save_samples(dir / "samples" / (t.name + ".sset"), file);
  }
  inv.out << "wrote " << tasks.size() << " sample sets (" << (stochastic ? n : 1) << " per task)\n";
  inv.out << "run directory: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Invocation& inv) {
  Command cmd("eval", "Score sample sets against their ground truth.");
  std::string samples;
  Settings& s = cmd.settings();
  s.add("samples", samples, "directory of .sset files, or a sample run directory");
  if (!cmd.parse(inv)) return kExitOk;

  std::vector<metrics::TaskMetrics> stochastic;
  std::vector<metrics::TaskEulerMse> deterministic;
  for (const auto& path : sample_files(samples)) {
    SampleFile f = load_samples(path);
    if (!f.set.ground_truth) throw ContractError("task '" + f.task + "': no ground truth stored");
    try {
      f.set.validate();
    } catch (const DimensionError& e) {
      throw ContractError("task '" + f.task + "': " + e.what());
    }
    if (f.set.count() >= 2) {
      stochastic.push_back({f.task, metrics::evaluate(f.set)});
    } else {
      deterministic.push_back(
          {f.task, metrics::euler_mse(sample_at(f.set.samples, 0), *f.set.ground_truth, f.set.fps, metrics::kDefaultHorizonsMs)});
    }
  }

  const fs::path dir = cmd.start_run(inv, std::nullopt, s.resolved());
  if (!stochastic.empty()) {
    motion::write_file_bytes(dir / "metrics.csv", metrics::format_metrics_csv(stochastic));
    const auto m = metrics::mean_report(stochastic);
    inv.out << stochastic.size() << " stochastic tasks: APD " << m.apd << " aDE " << m.ade << " aFDE " << m.afde
            << "\n";
  }
  if (!deterministic.empty()) {
    motion::write_file_bytes(dir / "euler_mse.csv",
                             metrics::format_euler_csv(deterministic, metrics::kDefaultHorizonsMs));
    inv.out << deterministic.size() << " deterministic tasks scored by euler MSE\n";
  }
  inv.out << "run directory: " << dir.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Invocation& inv) {
  Command cmd("gradcheck", "Finite-difference check of every tape op and both denoiser variants.");
  std::uint64_t seed = 0;
  double tolerance = training::kGradCheckTolerance;
  Settings& s = cmd.settings();
  s.add("seed", seed, "seed for inputs and probes")->envname("MD_SEED");
  s.add("tolerance", tolerance, "largest accepted relative error");
  if (!cmd.parse(inv)) return kExitOk;

  const auto results = training::run_gradcheck_suite(seed, tolerance);
  const fs::path dir = cmd.start_run(inv, seed, s.resolved());
  std::string csv = "check,probes,worst_rel_error,passed\n";
  bool all = true;
  for (const auto& r : results) {
    csv += r.name + "," + std::to_string(r.probes) + "," + format_double(r.worst_rel_error) + "," +
           (r.passed ? "1" : "0") + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %3zu probes  worst rel err %.3e  %s\n", r.name.c_str(), r.probes,
                  r.worst_rel_error, r.passed ? "ok" : "FAILED");
    inv.out << line;
    all = all && r.passed;
  }
  motion::write_file_bytes(dir / "gradcheck.csv", csv);
  inv.out << (all ? "all checks passed" : "gradient check FAILED") << "\n";
  inv.out << "run directory: " << dir.string() << "\n";
  return all ? kExitOk : kExitFailure;
}

int cmd_export(const Invocation& inv) {
  Command cmd("export", "Write sample sets or a checkpoint's loss history as plain CSV.");
  std::string samples, checkpoint;
  Settings& s = cmd.settings();
  s.add("samples", samples, "directory of .sset files to flatten");
  s.add("checkpoint", checkpoint, "checkpoint whose per-iteration losses to write");
  if (!cmd.parse(inv)) return kExitOk;
  if (samples.empty() && checkpoint.empty()) throw ConfigError("export needs --samples or --checkpoint");

  std::vector<fs::path> files;
  if (!samples.empty()) files = sample_files(samples);
  std::optional<training::Checkpoint> ck;
  if (!checkpoint.empty()) ck = training::load_checkpoint(checkpoint);

  const fs::path dir = cmd.start_run(inv, std::nullopt, s.resolved());
  if (!files.empty()) {
    std::string csv = "task,sample,frame,dim,value\n";
    for (const auto& path : files) {
      const SampleFile f = load_samples(path);
      const auto& x = f.set.samples;
      const std::size_t l = f.set.frames(), d = f.set.pose_dim();
      for (std::size_t i = 0; i < f.set.count(); ++i) {
        for (std::size_t t = 0; t < l; ++t) {
          for (std::size_t j = 0; j < d; ++j) {
            csv += f.task + "," + std::to_string(i) + "," + std::to_string(t + 1) + "," + std::to_string(j) + "," +
                   format_double(x[(i * l + t) * d + j]) + "\n";
          }
        }
      }
    }
    motion::write_file_bytes(dir / "samples_long.csv", csv);
    inv.out << "exported " << files.size() << " sample sets\n";
  }
  if (ck) {
    std::string csv = "iteration,loss\n";
    for (std::size_t i = 0; i < ck->losses.size(); ++i) csv += std::to_string(i + 1) + "," + format_double(ck->losses[i]) + "\n";
    motion::write_file_bytes(dir / "loss_history.csv", csv);
    inv.out << "exported " << ck->losses.size() << " losses\n";
  }
  inv.out << "run directory: " << dir.string() << "\n";
  return kExitOk;
}

const std::map<std::string, int (*)(const Invocation&)>& commands() {
  static const std::map<std::string, int (*)(const Invocation&)> table{
      {"synth", cmd_synth},   {"import", cmd_import},       {"train", cmd_train}, {"sample", cmd_sample},
      {"eval", cmd_eval},     {"gradcheck", cmd_gradcheck}, {"export", cmd_export},
  };
  return table;
}

void usage(std::ostream& os) {
  os << "usage: mdiff <command> [--config FILE] [--key value ...]\n"
        "commands:\n"
        "  synth      generate a synthetic motion dataset\n"
        "  import     convert CSV pose arrays into a dataset\n"
        "  train      train a denoiser\n"
        "  sample     draw stochastic or deterministic predictions\n"
        "  eval       score sample sets (metrics.csv, euler_mse.csv)\n"
        "  gradcheck  finite-difference gradient checks\n"
        "  export     flatten samples or loss history to CSV\n"
        "run `mdiff <command> --help` for the settings of a command\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (argc < 2) {
    usage(err);
    return kExitUsage;
  }
  const std::string name = argv[1];
  if (name == "--help" || name == "-h" || name == "help") {
    usage(out);
    return kExitOk;
  }
  const auto it = commands().find(name);
  if (it == commands().end()) {
    err << "error: unknown command '" << name << "'\n";
    usage(err);
    return kExitUsage;
  }

  Invocation inv{argc - 1, argv + 1, std::vector<std::string>(argv + 1, argv + argc), out, err};
  try {
    return it->second(inv);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace mdiff::app
