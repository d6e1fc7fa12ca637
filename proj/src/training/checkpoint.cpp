#include "mdiff/training/checkpoint.hpp"

#include <zlib.h>

#include "json.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/motion/motion_io.hpp"

namespace mdiff::training {
namespace {

using json = nlohmann::ordered_json;

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large blobs in pieces.
  while (!bytes.empty()) {
    const std::size_t n = std::min<std::size_t>(bytes.size(), 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n));
    bytes.remove_prefix(n);
  }
  return static_cast<std::uint32_t>(crc);
}

json model_json(const denoiser::DenoiserConfig& c) {
  return json{{"variant", denoiser::to_string(c.variant)},
              {"model_dim", c.model_dim},
              {"n_heads", c.n_heads},
              {"obs_frames", c.obs_frames},
              {"future_frames", c.future_frames},
              {"pose_dim", c.pose_dim},
              {"n_steps", c.n_steps}};
}

json train_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size}, {"iterations", c.iterations},   {"lr", c.adam.lr},
              {"beta1", c.adam.beta1},      {"beta2", c.adam.beta2},        {"eps", c.adam.eps},
              {"seed", c.seed},             {"checkpoint_every", c.checkpoint_every},
              {"clip_norm", c.clip_norm},   {"log_every", c.log_every}};
}

template <typename T>
T field(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) throw ParseError(std::string("CKPT1 manifest lacks \"") + key + "\"", 0);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("CKPT1 manifest field \"") + key + "\" has the wrong type", 0);
  }
}

struct Entry {
  std::string name;
  num::DenseArray value;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  std::vector<Entry> entries;
  for (const auto& [name, v] : ck.params) entries.push_back({"param/" + name, v});
  for (const auto& [name, v] : ck.adam.m) entries.push_back({"adam.m/" + name, v});
  for (const auto& [name, v] : ck.adam.v) entries.push_back({"adam.v/" + name, v});
  entries.push_back({"normalizer/mean", ck.normalizer.mean()});
  entries.push_back({"normalizer/std", ck.normalizer.std()});
  entries.push_back({"train/losses", num::DenseArray({ck.losses.size()}, ck.losses)});

  std::string blobs;
  json index = json::array();
  for (const Entry& e : entries) {
    const std::size_t offset = blobs.size();
    motion::append_f64_le(blobs, e.value.values());
    const std::string_view blob(blobs.data() + offset, blobs.size() - offset);
    index.push_back(json{{"name", e.name},
                         {"shape", e.value.shape()},
                         {"offset", offset},
                         {"length", blob.size()},
                         {"crc32", crc32_of(blob)}});
  }

  const json manifest{{"format", "CKPT1"},
                      {"version", kCheckpointVersion},
                      {"model", model_json(ck.model_config)},
                      {"schedule",
                       {{"steps", ck.schedule.steps}, {"beta_min", ck.schedule.beta_min}, {"beta_max", ck.schedule.beta_max}}},
                      {"train", train_json(ck.train)},
                      {"iteration", ck.iteration},
                      {"adam_step", ck.adam.step},
                      {"rng_state", ck.rng_state},
                      {"tensors", index}};
  return manifest.dump() + "\n" + blobs;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  const std::size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw ParseError("CKPT1 manifest is not newline-terminated", bytes.size());
  json m;
  try {
    m = json::parse(bytes.substr(0, newline));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("CKPT1 manifest is not valid JSON: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  if (field<std::string>(m, "format") != "CKPT1") throw ParseError("not a CKPT1 file", 0);
  const int version = field<int>(m, "version");
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }

  Checkpoint ck;
  const json mo = field<json>(m, "model");
  ck.model_config.variant = denoiser::parse_variant(field<std::string>(mo, "variant"));
  ck.model_config.model_dim = field<std::size_t>(mo, "model_dim");
  ck.model_config.n_heads = field<std::size_t>(mo, "n_heads");
  ck.model_config.obs_frames = field<std::size_t>(mo, "obs_frames");
  ck.model_config.future_frames = field<std::size_t>(mo, "future_frames");
  ck.model_config.pose_dim = field<std::size_t>(mo, "pose_dim");
  ck.model_config.n_steps = field<int>(mo, "n_steps");
  ck.model_config.validate();

  const json sc = field<json>(m, "schedule");
  ck.schedule = {field<int>(sc, "steps"), field<double>(sc, "beta_min"), field<double>(sc, "beta_max")};

  const json tr = field<json>(m, "train");
  ck.train.batch_size = field<std::int64_t>(tr, "batch_size");
  ck.train.iterations = field<std::int64_t>(tr, "iterations");
  ck.train.adam = {field<double>(tr, "lr"), field<double>(tr, "beta1"), field<double>(tr, "beta2"), field<double>(tr, "eps")};
  ck.train.seed = field<std::uint64_t>(tr, "seed");
  ck.train.checkpoint_every = field<std::int64_t>(tr, "checkpoint_every");
  ck.train.clip_norm = field<double>(tr, "clip_norm");
  ck.train.log_every = field<std::int64_t>(tr, "log_every");

  ck.iteration = field<std::int64_t>(m, "iteration");
  ck.adam.step = field<std::int64_t>(m, "adam_step");
  ck.rng_state = field<std::string>(m, "rng_state");

  const std::string_view blobs = bytes.substr(newline + 1);
  std::size_t covered = 0;
  num::DenseArray norm_mean, norm_std;
  bool have_losses = false;
  for (const json& t : field<json>(m, "tensors")) {
    const auto name = field<std::string>(t, "name");
    const auto shape = field<num::Shape>(t, "shape");
    const auto offset = field<std::size_t>(t, "offset");
    const auto length = field<std::size_t>(t, "length");
    const auto crc = field<std::uint32_t>(t, "crc32");
    if (length != 8 * num::shape_size(shape)) {
      throw IntegrityError("tensor '" + name + "' length " + std::to_string(length) + " does not match shape " +
                           num::shape_string(shape));
    }
    if (offset > blobs.size() || length > blobs.size() - offset) {
      throw IntegrityError("tensor '" + name + "' extends past the end of the file (truncated?)");
    }
    const std::string_view blob = blobs.substr(offset, length);
    if (crc32_of(blob) != crc) throw IntegrityError("checksum mismatch in tensor '" + name + "'");
    covered += length;

    std::vector<double> values(length / 8);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = motion::read_f64_le(blob.data() + 8 * i);
    num::DenseArray value(shape, std::move(values));

    const auto slash = name.find('/');
    const std::string group = name.substr(0, slash);
    const std::string key = slash == std::string::npos ? "" : name.substr(slash + 1);
    if (group == "param") {
      ck.params.emplace(key, std::move(value));
    } else if (group == "adam.m") {
      ck.adam.m.emplace(key, std::move(value));
    } else if (group == "adam.v") {
      ck.adam.v.emplace(key, std::move(value));
    } else if (name == "normalizer/mean") {
      norm_mean = std::move(value);
    } else if (name == "normalizer/std") {
      norm_std = std::move(value);
    } else if (name == "train/losses") {
      ck.losses.assign(value.values().begin(), value.values().end());
      have_losses = true;
    } else {
      throw ParseError("unknown tensor '" + name + "' in CKPT1 manifest", 0);
    }
  }
  if (covered != blobs.size()) {
    throw IntegrityError("checkpoint holds " + std::to_string(blobs.size()) + " blob bytes, manifest accounts for " +
                         std::to_string(covered));
  }
  if (norm_mean.empty() || norm_std.empty() || !have_losses) throw ParseError("CKPT1 file lacks required tensors", 0);
  ck.normalizer = motion::Normalizer(std::move(norm_mean), std::move(norm_std));
  // Validates parameter names and shapes against the model config.
  (void)denoiser::DenoiserModel(ck.model_config, ck.params);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  motion::write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(motion::read_file_bytes(path)); }

void require_compatible(const Checkpoint& ck, const denoiser::DenoiserConfig& model,
                        const diffusion::ScheduleParams& schedule) {
  const denoiser::DenoiserConfig& c = ck.model_config;
  auto differ = [](const char* key, const std::string& have, const std::string& want) {
    throw ConfigError(std::string("checkpoint ") + key + " is " + have + " but the run asks for " + want);
  };
  if (c.variant != model.variant) differ("variant", denoiser::to_string(c.variant), denoiser::to_string(model.variant));
  if (c.model_dim != model.model_dim) differ("model_dim", std::to_string(c.model_dim), std::to_string(model.model_dim));
  if (c.n_heads != model.n_heads) differ("n_heads", std::to_string(c.n_heads), std::to_string(model.n_heads));
  if (c.obs_frames != model.obs_frames) differ("obs_frames", std::to_string(c.obs_frames), std::to_string(model.obs_frames));
  if (c.future_frames != model.future_frames) {
    differ("future_frames", std::to_string(c.future_frames), std::to_string(model.future_frames));
  }
  if (c.pose_dim != model.pose_dim) differ("pose_dim", std::to_string(c.pose_dim), std::to_string(model.pose_dim));
  if (c.n_steps != model.n_steps) differ("n_steps", std::to_string(c.n_steps), std::to_string(model.n_steps));
  auto describe = [](const diffusion::ScheduleParams& s) {
    return "(K=" + std::to_string(s.steps) + ", beta " + std::to_string(s.beta_min) + ".." + std::to_string(s.beta_max) + ")";
  };
  if (!(ck.schedule == schedule)) differ("noise schedule", describe(ck.schedule), describe(schedule));
}

denoiser::DenoiserModel model_from(const Checkpoint& ckpt) { return denoiser::DenoiserModel(ckpt.model_config, ckpt.params); }

}  // namespace mdiff::training
