#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <png.h>

#include "flowseries/error.hpp"
#include "flowseries/frame_io.hpp"
#include "test_support.hpp"

using namespace flowseries;
using flowseries::testing::TempDir;

namespace {

ByteRaster gradient_image(int w, int h, int salt) {
  ByteRaster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) r.at(x, y) = static_cast<std::uint8_t>((x * 3 + y * 5 + salt) % 256);
  return r;
}

}  // namespace

TEST_CASE("to_grayscale uses BT.601 weights") {
  CHECK(to_grayscale(255, 255, 255) == 255);
  CHECK(to_grayscale(0, 0, 0) == 0);
  CHECK(to_grayscale(255, 0, 0) == 76);  // round(76.245)
  CHECK(to_grayscale(0, 255, 0) == 150);  // round(149.685)
  CHECK(to_grayscale(0, 0, 255) == 29);   // round(29.07)
}

TEST_CASE("to_grayscale is monotone per channel and permutation sensitive") {
  for (int base = 0; base < 255; base += 17) {
    for (int v = 0; v < 255; ++v) {
      const auto b = static_cast<std::uint8_t>(base);
      const auto a = static_cast<std::uint8_t>(v);
      const auto a1 = static_cast<std::uint8_t>(v + 1);
      CHECK(to_grayscale(a, b, b) <= to_grayscale(a1, b, b));
      CHECK(to_grayscale(b, a, b) <= to_grayscale(b, a1, b));
      CHECK(to_grayscale(b, b, a) <= to_grayscale(b, b, a1));
    }
  }
  CHECK(to_grayscale(200, 10, 10) != to_grayscale(10, 200, 10));
}

TEST_CASE("frames load in filename-index order") {
  TempDir dir;
  for (int i : {3, 1, 2}) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.pgm", i);
    write_pgm(dir / name, gradient_image(64, 64, i));
  }
  const auto seq = load_frame_sequence(dir.path(), "*.pgm");
  REQUIRE(seq.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(seq.frames[i].index == i);
    CHECK(seq.frames[i].pixels == gradient_image(64, 64, i + 1));
  }
}

TEST_CASE("numeric ordering, not lexicographic") {
  TempDir dir;
  write_pgm(dir / "f10.pgm", gradient_image(16, 16, 10));
  write_pgm(dir / "f9.pgm", gradient_image(16, 16, 9));
  const auto seq = load_frame_sequence(dir.path(), "f*.pgm");
  CHECK(seq.frames[0].pixels == gradient_image(16, 16, 9));
}

TEST_CASE("load errors") {
  SUBCASE("single frame") {
    TempDir dir;
    write_pgm(dir / "0001.pgm", gradient_image(8, 8, 0));
    CHECK_THROWS_WITH_AS(load_frame_sequence(dir.path(), "*.pgm"), doctest::Contains("no frames"),
                         Error);
  }
  SUBCASE("empty match") {
    TempDir dir;
    CHECK_THROWS_WITH_AS(load_frame_sequence(dir.path(), "*.pgm"), doctest::Contains("no frames"),
                         Error);
  }
  SUBCASE("mixed dimensions") {
    TempDir dir;
    write_pgm(dir / "0001.pgm", gradient_image(64, 64, 0));
    write_pgm(dir / "0002.pgm", gradient_image(32, 32, 0));
    CHECK_THROWS_WITH_AS(load_frame_sequence(dir.path(), "*.pgm"),
                         doctest::Contains("dimension mismatch"), Error);
  }
  SUBCASE("duplicate index") {
    TempDir dir;
    write_pgm(dir / "a_01.pgm", gradient_image(8, 8, 0));
    write_pgm(dir / "b_1.pgm", gradient_image(8, 8, 0));
    CHECK_THROWS_WITH_AS(load_frame_sequence(dir.path(), "*.pgm"), doctest::Contains("duplicate"),
                         Error);
  }
  SUBCASE("unreadable file is named") {
    TempDir dir;
    write_pgm(dir / "0001.pgm", gradient_image(8, 8, 0));
    std::ofstream(dir / "0002.pgm") << "P5\n8 8\n255\nshort";
    CHECK_THROWS_WITH_AS(load_frame_sequence(dir.path(), "*.pgm"), doctest::Contains("0002.pgm"),
                         Error);
  }
}

TEST_CASE("frames.txt manifest overrides glob ordering") {
  TempDir dir;
  write_pgm(dir / "0001.pgm", gradient_image(16, 16, 1));
  write_pgm(dir / "0002.pgm", gradient_image(16, 16, 2));
  write_pgm(dir / "0003.pgm", gradient_image(16, 16, 3));
  std::ofstream(dir / "frames.txt") << "0003.pgm\n0001.pgm\n";
  const auto seq = load_frame_sequence(dir.path(), "*.pgm");
  REQUIRE(seq.size() == 2);
  CHECK(seq.frames[0].pixels == gradient_image(16, 16, 3));
  CHECK(seq.frames[1].pixels == gradient_image(16, 16, 1));
  CHECK(seq.frames[1].index == 1);
}

TEST_CASE("PGM round trip is byte exact") {
  TempDir dir;
  Rng rng(5);
  ByteRaster img(37, 23);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.uniform() * 256.0);
  write_pgm(dir / "a.pgm", img);
  CHECK(read_image(dir / "a.pgm") == img);
  write_pgm(dir / "b.pgm", read_image(dir / "a.pgm"));
  std::ifstream a(dir / "a.pgm", std::ios::binary), b(dir / "b.pgm", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("color PPM is converted to grayscale") {
  TempDir dir;
  {
    std::ofstream out(dir / "c.ppm", std::ios::binary);
    out << "P6\n# comment\n2 1\n255\n";
    const unsigned char px[] = {255, 0, 0, 0, 0, 255};
    out.write(reinterpret_cast<const char*>(px), sizeof px);
  }
  const auto img = read_image(dir / "c.ppm");
  REQUIRE(img.width == 2);
  CHECK(img.at(0, 0) == 76);
  CHECK(img.at(1, 0) == 29);
}

TEST_CASE("PNG input, color and gray") {
  TempDir dir;
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 3;
  image.height = 1;
  image.format = PNG_FORMAT_RGB;
  const png_byte rgb[] = {255, 0, 0, 0, 255, 0, 10, 20, 30};
  REQUIRE(png_image_write_to_file(&image, (dir / "c.png").c_str(), 0, rgb, 0, nullptr));
  const auto img = read_image(dir / "c.png");
  CHECK(img.at(0, 0) == 76);
  CHECK(img.at(1, 0) == 150);
  CHECK(img.at(2, 0) == to_grayscale(10, 20, 30));

  png_image gray{};
  gray.version = PNG_IMAGE_VERSION;
  gray.width = 2;
  gray.height = 2;
  gray.format = PNG_FORMAT_GRAY;
  const png_byte g[] = {0, 64, 128, 255};
  REQUIRE(png_image_write_to_file(&gray, (dir / "g.png").c_str(), 0, g, 0, nullptr));
  const auto gi = read_image(dir / "g.png");
  CHECK(gi.data == std::vector<std::uint8_t>{0, 64, 128, 255});
}

TEST_CASE("filename_index takes the first digit run") {
  CHECK(filename_index("frame_0012_v3.pgm") == 12);
  CHECK_FALSE(filename_index("frame.pgm").has_value());
}

TEST_CASE("meta.json supplies source and object identifiers") {
  flowseries::testing::TempDir d;
  for (int i = 0; i < 3; ++i)
    flowseries::write_pgm(d / ("f" + std::to_string(i) + ".pgm"), flowseries::ByteRaster(4, 4, 9));
  auto seq = flowseries::load_frame_sequence(d.path(), "*.pgm");
  CHECK(!seq.object_tag.has_value());
  std::ofstream(d / "meta.json") << R"({"source_id": "clip7", "object_tag": "horse"})";
  seq = flowseries::load_frame_sequence(d.path(), "*.pgm");
  CHECK(seq.source_id == "clip7");
  CHECK(seq.object_tag == std::optional<std::string>("horse"));
  std::ofstream(d / "meta.json") << "{broken";
  CHECK_THROWS_AS(flowseries::load_frame_sequence(d.path(), "*.pgm"), flowseries::Error);
}
