#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdiff/motion/motion_sequence.hpp"

namespace mdiff::motion {

// MSEQ1 layout: one JSON header line
//   {"version":1,"F":<int>,"D":<int>,"fps":<float>,"repr":"euler|axis-angle|xyz","label":<string|null>}
// followed by F*D little-endian float64 values in row-major order.
std::string encode_motion(const MotionSequence& seq);
// Throws ParseError (with byte offset) on any malformed input; never returns a partial sequence.
MotionSequence decode_motion(std::string_view bytes);

void save_motion_file(const std::filesystem::path& path, const MotionSequence& seq);
MotionSequence load_motion_file(const std::filesystem::path& path);

// Dataset manifest: a JSON list of motion file paths. Relative entries are
// resolved against the manifest's directory on load.
void save_manifest(const std::filesystem::path& path, const std::vector<std::string>& files);
std::vector<std::filesystem::path> load_manifest(const std::filesystem::path& path);
std::vector<MotionSequence> load_dataset(const std::filesystem::path& manifest);

// Preprocessed real data: one frame per line, D comma-separated numbers per
// frame, blank lines and lines starting with '#' ignored. Throws ParseError at
// the first malformed cell or ragged row.
num::DenseArray parse_csv_matrix(std::string_view text);

// Whole-file helpers shared by the binary formats.
std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

// Little-endian float64 (de)serialization.
void append_f64_le(std::string& out, std::span<const double> values);
double read_f64_le(const char* bytes);

}  // namespace mdiff::motion
