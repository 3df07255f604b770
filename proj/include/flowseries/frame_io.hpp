#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowseries/raster.hpp"

namespace flowseries {

struct FrameSequence {
  std::vector<Frame> frames;
  std::string source_id;
  std::optional<std::string> object_tag;

  std::size_t size() const noexcept { return frames.size(); }
  int width() const { return frames.front().width(); }
  int height() const { return frames.front().height(); }
};

// ITU-R BT.601 luma, rounded to nearest.
std::uint8_t to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept;

// Reads a PGM (P2/P5), PPM (P3/P6) or PNG file as 8-bit grayscale.
ByteRaster read_image(const std::filesystem::path& path);

// Binary P5 output. Reading the file back yields identical pixels.
void write_pgm(const std::filesystem::path& path, const ByteRaster& image);

/// Loads every file in `directory` whose name matches the glob `pattern`,
/// ordered by the first integer run in the filename. A `frames.txt` manifest
/// in the directory (one path per line, relative to the directory) takes
/// precedence over the glob and fixes the order explicitly. An optional
/// `meta.json` ({"source_id": str, "object_tag": str}) supplies the video's
/// identifiers; otherwise source_id is the directory name and no tag is set.
///
/// Throws Error("frame-io", ...) on fewer than two frames ("no frames"),
/// mixed dimensions ("dimension mismatch"), duplicate indices, or unreadable
/// files (message names the file).
FrameSequence load_frame_sequence(const std::filesystem::path& directory,
                                  const std::string& pattern = "*");

// First run of decimal digits in a filename stem, if any.
std::optional<long long> filename_index(const std::string& filename);

}  // namespace flowseries
