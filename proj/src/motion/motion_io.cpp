#include "mdiff/motion/motion_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

#include "json.hpp"
#include "mdiff/errors.hpp"

namespace mdiff::motion {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

template <typename T>
T require_field(const nlohmann::json& header, const char* key, std::size_t offset) {
  if (!header.contains(key)) throw ParseError(std::string("MSEQ1 header lacks \"") + key + "\"", offset);
  const auto& field = header.at(key);
  if constexpr (std::is_integral_v<T>) {
    if (!field.is_number_integer()) {
      throw ParseError(std::string("MSEQ1 header field \"") + key + "\" must be an integer", offset);
    }
  }
  try {
    return field.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(std::string("MSEQ1 header field \"") + key + "\" has the wrong type", offset);
  }
}

}  // namespace

void append_f64_le(std::string& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + 8 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(out.data() + start + 8 * i, &bits, 8);
  }
}

double read_f64_le(const char* bytes) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, bytes, 8);
  return std::bit_cast<double>(to_little_endian(bits));
}

std::string encode_motion(const MotionSequence& seq) {
  seq.validate();
  ordered_json header;
  header["version"] = 1;
  header["F"] = seq.frame_count();
  header["D"] = seq.pose_dim();
  header["fps"] = seq.fps;
  header["repr"] = std::string(to_string(seq.representation));
  header["label"] = seq.action_label ? ordered_json(*seq.action_label) : ordered_json(nullptr);
  std::string out = header.dump();
  out.push_back('\n');
  append_f64_le(out, seq.frames.values());
  return out;
}

MotionSequence decode_motion(std::string_view bytes) {
  const std::size_t newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw ParseError("MSEQ1 header is not newline-terminated", bytes.size());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("MSEQ1 header is not valid JSON: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  }
  if (!header.is_object()) throw ParseError("MSEQ1 header is not a JSON object", 0);

  if (require_field<long long>(header, "version", 0) != 1) throw ParseError("unsupported MSEQ1 version", 0);
  const auto frames = require_field<long long>(header, "F", 0);
  const auto dim = require_field<long long>(header, "D", 0);
  const auto fps = require_field<double>(header, "fps", 0);
  const auto repr = require_field<std::string>(header, "repr", 0);
  if (frames < 1) throw ParseError("MSEQ1 header F must be at least 1", 0);
  if (dim < 3 || dim % 3 != 0) throw ParseError("MSEQ1 header D=" + std::to_string(dim) + " is not a positive multiple of 3", 0);
  if (!(fps > 0.0) || !std::isfinite(fps)) throw ParseError("MSEQ1 header fps must be positive", 0);
  Representation representation;
  try {
    representation = parse_representation(repr);
  } catch (const ConfigError&) {
    throw ParseError("MSEQ1 header repr '" + repr + "' is unknown", 0);
  }
  std::optional<std::string> label;
  if (!header.contains("label")) throw ParseError("MSEQ1 header lacks \"label\"", 0);
  if (header["label"].is_string()) {
    label = header["label"].get<std::string>();
  } else if (!header["label"].is_null()) {
    throw ParseError("MSEQ1 header label must be a string or null", 0);
  }

  const std::size_t payload_start = newline + 1;
  const std::size_t count = static_cast<std::size_t>(frames) * static_cast<std::size_t>(dim);
  const std::size_t expected = payload_start + 8 * count;
  if (bytes.size() < expected) {
    throw ParseError("MSEQ1 payload truncated: expected " + std::to_string(8 * count) + " bytes", bytes.size());
  }
  if (bytes.size() > expected) throw ParseError("MSEQ1 payload has trailing bytes", expected);

  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t at = payload_start + 8 * i;
    values[i] = read_f64_le(bytes.data() + at);
    if (!std::isfinite(values[i])) throw ParseError("MSEQ1 payload holds a non-finite value", at);
  }
  return MotionSequence{num::DenseArray(num::Shape{static_cast<std::size_t>(frames), static_cast<std::size_t>(dim)},
                                        std::move(values)),
                        fps, representation, std::move(label)};
}

num::DenseArray parse_csv_matrix(std::string_view text) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    std::string_view line = text.substr(line_start, line_end - line_start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::size_t first = line.find_first_not_of(" \t");
    if (first != std::string_view::npos && line[first] != '#') {
      std::size_t n = 0, cell_start = 0;
      while (true) {
        const std::size_t comma = std::min(line.find(',', cell_start), line.size());
        std::string_view cell = line.substr(cell_start, comma - cell_start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
        const std::size_t at = line_start + cell_start;
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
          throw ParseError("CSV cell '" + std::string(cell) + "' on data row " + std::to_string(rows + 1) +
                               " is not a finite number",
                           at);
        }
        values.push_back(v);
        ++n;
        if (comma == line.size()) break;
        cell_start = comma + 1;
      }
      if (rows == 0) cols = n;
      if (n != cols) {
        throw ParseError("CSV data row " + std::to_string(rows + 1) + " has " + std::to_string(n) + " values, expected " +
                             std::to_string(cols),
                         line_start);
      }
      ++rows;
    }
    line_start = line_end + 1;
  }
  if (rows == 0) throw ParseError("CSV holds no data rows", text.size());
  return num::DenseArray(num::Shape{rows, cols}, std::move(values));
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

void save_motion_file(const std::filesystem::path& path, const MotionSequence& seq) {
  write_file_bytes(path, encode_motion(seq));
}

MotionSequence load_motion_file(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  try {
    return decode_motion(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void save_manifest(const std::filesystem::path& path, const std::vector<std::string>& files) {
  write_file_bytes(path, nlohmann::json(files).dump(2) + "\n");
}

std::vector<std::filesystem::path> load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("dataset manifest '" + path.string() + "' does not exist");
  nlohmann::json list;
  try {
    list = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("manifest '" + path.string() + "' is not valid JSON", e.byte);
  }
  if (!list.is_array()) throw ParseError("manifest '" + path.string() + "' is not a JSON list", 0);
  std::vector<std::filesystem::path> out;
  for (const auto& entry : list) {
    if (!entry.is_string()) throw ParseError("manifest entries must be strings", 0);
    std::filesystem::path p = entry.get<std::string>();
    out.push_back(p.is_relative() ? path.parent_path() / p : p);
  }
  return out;
}

std::vector<MotionSequence> load_dataset(const std::filesystem::path& manifest) {
  std::vector<MotionSequence> out;
  for (const auto& file : load_manifest(manifest)) out.push_back(load_motion_file(file));
  return out;
}

}  // namespace mdiff::motion
