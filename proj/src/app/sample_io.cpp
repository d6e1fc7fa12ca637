#include "mdiff/app/sample_io.hpp"

#include <cmath>

#include "json.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/motion/motion_io.hpp"

namespace mdiff::app {

namespace {

std::size_t positive_extent(const nlohmann::json& header, const char* key) {
  if (!header.contains(key) || !header.at(key).is_number_integer() || header.at(key).get<long long>() < 1) {
    throw ParseError(std::string("SSET1 header field \"") + key + "\" must be a positive integer", 0);
  }
  return static_cast<std::size_t>(header.at(key).get<long long>());
}

num::DenseArray read_block(std::string_view bytes, std::size_t& at, num::Shape shape) {
  const std::size_t count = num::shape_size(shape);
  if (bytes.size() < at + 8 * count) throw ParseError("SSET1 payload truncated", bytes.size());
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i, at += 8) {
    values[i] = motion::read_f64_le(bytes.data() + at);
    if (!std::isfinite(values[i])) throw ParseError("SSET1 payload holds a non-finite value", at);
  }
  return num::DenseArray(std::move(shape), std::move(values));
}

}  // namespace

std::string encode_samples(const SampleFile& file) {
  const auto& s = file.set;
  if (s.samples.rank() != 3) throw ContractError("samples of task '" + file.task + "' are not [N, L, D]");
  nlohmann::ordered_json header;
  header["format"] = "SSET1";
  header["version"] = 1;
  header["task"] = file.task;
  header["mode"] = file.mode;
  header["seed"] = file.seed ? nlohmann::ordered_json(*file.seed) : nlohmann::ordered_json(nullptr);
  header["N"] = s.count();
  header["L"] = s.frames();
  header["D"] = s.pose_dim();
  header["fps"] = s.fps;
  header["gt_shape"] = s.ground_truth ? nlohmann::ordered_json(s.ground_truth->shape()) : nlohmann::ordered_json(nullptr);
  std::string out = header.dump();
  out.push_back('\n');
  motion::append_f64_le(out, s.samples.values());
  if (s.ground_truth) motion::append_f64_le(out, s.ground_truth->values());
  return out;
}

SampleFile decode_samples(std::string_view bytes) {
  const std::size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw ParseError("SSET1 header is not newline-terminated", bytes.size());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("SSET1 header is not valid JSON: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!header.is_object() || header.value("format", "") != "SSET1") throw ParseError("not an SSET1 file", 0);
  if (header.value("version", 0) != 1) throw ParseError("unsupported SSET1 version", 0);

  SampleFile file;
  try {
    file.task = header.at("task").get<std::string>();
    file.mode = header.at("mode").get<std::string>();
    if (!header.at("seed").is_null()) file.seed = header.at("seed").get<std::uint64_t>();
    file.set.fps = header.at("fps").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("SSET1 header is incomplete: ") + e.what(), 0);
  }
  const std::size_t n = positive_extent(header, "N");
  const std::size_t l = positive_extent(header, "L");
  const std::size_t d = positive_extent(header, "D");

  std::size_t at = newline + 1;
  file.set.samples = read_block(bytes, at, {n, l, d});
  if (!header.contains("gt_shape")) throw ParseError("SSET1 header lacks \"gt_shape\"", 0);
  if (!header["gt_shape"].is_null()) {
    num::Shape gt_shape;
    try {
      gt_shape = header["gt_shape"].get<num::Shape>();
    } catch (const nlohmann::json::exception&) {
      throw ParseError("SSET1 gt_shape must be a list of extents", 0);
    }
    file.set.ground_truth = read_block(bytes, at, gt_shape);
  }
  if (at != bytes.size()) throw ParseError("SSET1 payload has trailing bytes", at);
  return file;
}

void save_samples(const std::filesystem::path& path, const SampleFile& file) {
  motion::write_file_bytes(path, encode_samples(file));
}

SampleFile load_samples(const std::filesystem::path& path) {
  try {
    return decode_samples(motion::read_file_bytes(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

}  // namespace mdiff::app
