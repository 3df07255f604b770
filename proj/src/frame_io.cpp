#include "flowseries/frame_io.hpp"

#include <fnmatch.h>
#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include <nlohmann/json.hpp>

#include "flowseries/error.hpp"

namespace flowseries {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error("frame-io", msg); }

// Netpbm header token reader; skips whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

int parse_header_int(std::istream& in, const fs::path& path) {
  const std::string tok = next_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail("malformed header in " + path.string());
  }
}

ByteRaster read_netpbm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path.string());
  const std::string magic = next_token(in);
  const bool color = magic == "P6" || magic == "P3";
  const bool ascii = magic == "P2" || magic == "P3";
  if (magic != "P5" && magic != "P6" && magic != "P2" && magic != "P3")
    fail("unsupported netpbm variant '" + magic + "' in " + path.string());
  const int w = parse_header_int(in, path);
  const int h = parse_header_int(in, path);
  const int maxval = parse_header_int(in, path);
  if (maxval > 255) fail("16-bit netpbm not supported: " + path.string());

  const std::size_t channels = color ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  std::vector<unsigned> samples(count);
  if (ascii) {
    for (auto& s : samples) {
      if (!(in >> s)) fail("truncated pixel data in " + path.string());
    }
  } else {
    std::vector<unsigned char> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
      fail("truncated pixel data in " + path.string());
    std::copy(raw.begin(), raw.end(), samples.begin());
  }

  auto scale = [maxval](unsigned v) -> std::uint8_t {
    if (maxval == 255) return static_cast<std::uint8_t>(std::min(v, 255u));
    return static_cast<std::uint8_t>(std::lround(255.0 * std::min<unsigned>(v, maxval) / maxval));
  };

  ByteRaster out(w, h);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (color) {
      out.data[i] = to_grayscale(scale(samples[3 * i]), scale(samples[3 * i + 1]),
                                 scale(samples[3 * i + 2]));
    } else {
      out.data[i] = scale(samples[i]);
    }
  }
  return out;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};

ByteRaster read_png(const fs::path& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) fail("cannot open " + path.string());

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&image, file.get()))
    fail("cannot decode " + path.string() + ": " + image.message);
  // Decode as RGB and apply the same luma weights as the netpbm path, rather
  // than libpng's own (linear-light) gray conversion.
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> rgb(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgb.data(), 0, nullptr)) {
    png_image_free(&image);
    fail("cannot decode " + path.string() + ": " + image.message);
  }
  ByteRaster out(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data[i] = to_grayscale(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  return out;
}

std::string lower_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

FloatRaster to_float(const ByteRaster& r) {
  FloatRaster out(r.width, r.height);
  std::transform(r.data.begin(), r.data.end(), out.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

std::uint8_t to_grayscale(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  const double y = 0.299 * r + 0.587 * g + 0.114 * b;
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(y), 0, 255));
}

ByteRaster read_image(const fs::path& path) {
  if (!fs::is_regular_file(path)) fail("cannot read " + path.string());
  if (lower_ext(path) == ".png") return read_png(path);
  return read_netpbm(path);
}

void write_pgm(const fs::path& path, const ByteRaster& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
  if (!out) fail("write failed: " + path.string());
}

std::optional<long long> filename_index(const std::string& filename) {
  auto it = std::find_if(filename.begin(), filename.end(),
                         [](unsigned char c) { return std::isdigit(c); });
  if (it == filename.end()) return std::nullopt;
  auto end = std::find_if(it, filename.end(), [](unsigned char c) { return !std::isdigit(c); });
  return std::stoll(std::string(it, end));
}

FrameSequence load_frame_sequence(const fs::path& directory, const std::string& pattern) {
  if (!fs::is_directory(directory)) fail("not a directory: " + directory.string());

  std::vector<fs::path> files;
  const fs::path manifest = directory / "frames.txt";
  if (fs::is_regular_file(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      fs::path p(line);
      files.push_back(p.is_absolute() ? p : directory / p);
    }
  } else {
    std::map<long long, fs::path> ordered;
    for (const auto& entry : fs::directory_iterator(directory)) {
      if (!entry.is_regular_file()) continue;
      const std::string name = entry.path().filename().string();
      if (name == "frames.txt") continue;
      if (fnmatch(pattern.c_str(), name.c_str(), 0) != 0) continue;
      const auto idx = filename_index(name);
      if (!idx) continue;
      auto [pos, inserted] = ordered.emplace(*idx, entry.path());
      if (!inserted)
        fail("duplicate frame index " + std::to_string(*idx) + ": " + pos->second.string() +
             " and " + entry.path().string());
    }
    for (auto& [idx, p] : ordered) files.push_back(std::move(p));
  }

  if (files.size() < 2)
    fail("no frames: need at least 2 frames in " + directory.string() + " matching '" +
         pattern + "', found " + std::to_string(files.size()));

  FrameSequence seq;
  seq.source_id = directory.filename().string();
  if (seq.source_id.empty()) seq.source_id = directory.parent_path().filename().string();
  seq.frames.reserve(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    Frame f{read_image(files[i]), static_cast<int>(i)};
    if (!seq.frames.empty() && !f.pixels.same_shape(seq.frames.front().pixels))
      fail("dimension mismatch: " + files[i].string() + " is " + std::to_string(f.width()) +
           "x" + std::to_string(f.height()) + ", expected " +
           std::to_string(seq.frames.front().width()) + "x" +
           std::to_string(seq.frames.front().height()));
    seq.frames.push_back(std::move(f));
  }

  const fs::path meta = directory / "meta.json";
  if (fs::is_regular_file(meta)) {
    try {
      std::ifstream in(meta);
      const auto j = nlohmann::json::parse(in);
      if (j.contains("source_id")) seq.source_id = j.at("source_id").get<std::string>();
      if (j.contains("object_tag") && !j.at("object_tag").is_null())
        seq.object_tag = j.at("object_tag").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail("bad metadata in " + meta.string() + ": " + e.what());
    }
  }
  return seq;
}

}  // namespace flowseries
