#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "flowseries/error.hpp"
#include "flowseries/mog2.hpp"
#include "test_support.hpp"

using namespace flowseries;

namespace {

// Single-pixel, single-component replay of the matched-update rule, used to
// predict the variance after a constant burn-in.
double predicted_variance_after(int frames, double alpha, double var_init, double var_min) {
  double w = 1.0, var = var_init;
  for (int i = 1; i < frames; ++i) {  // frame 0 seeds
    w = (1.0 - alpha) * w + alpha;
    const double rho = alpha / w;
    var = std::max(var_min, var + rho * (0.0 - var));
  }
  return var;
}

std::size_t count_fg(const ForegroundMask& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += v ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("first frame seeds the model and is background") {
  PixelMixtureModel model(16, 12);
  ByteRaster img(16, 12);
  for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 7);
  const auto mask = model.update_and_classify(img);
  CHECK(count_fg(mask) == 0);
  const auto c = model.components(3, 2);
  REQUIRE(c.size() == 1);
  CHECK(c[0].weight == 1.0);
  CHECK(c[0].mean == img.at(3, 2));
}

TEST_CASE("static sequence stays background") {
  PixelMixtureModel model(20, 20);
  ByteRaster img(20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) img.at(x, y) = static_cast<std::uint8_t>((x * 13 + y * 7) % 256);
  for (int i = 0; i < 50; ++i) model.update_and_classify(img);
  CHECK(count_fg(model.update_and_classify(img)) == 0);
}

TEST_CASE("step change after burn-in is foreground") {
  const Mog2Params p;
  PixelMixtureModel model(10, 10, p);
  ByteRaster img(10, 10, 50);
  for (int i = 0; i < 50; ++i) model.update_and_classify(img);

  const double var = predicted_variance_after(50, p.alpha, p.var_init, p.var_min);
  CHECK(var <= 60.0 * 60.0);
  CHECK(150.0 > p.match_sigmas * std::sqrt(var));
  CHECK(model.components(4, 4)[0].var == doctest::Approx(var));

  img.at(4, 4) = 200;
  const auto mask = model.update_and_classify(img);
  CHECK(mask.at(4, 4) == 1);
  CHECK(count_fg(mask) == 1);
}

TEST_CASE("alpha must lie in (0, 1)") {
  PixelMixtureModel model(4, 4);
  ByteRaster img(4, 4, 1);
  CHECK_THROWS_AS(model.update_and_classify(img, 0.0), Error);
  CHECK_THROWS_AS(model.update_and_classify(img, 1.0), Error);
  CHECK_THROWS_AS(model.update_and_classify(img, -0.1), Error);
  Mog2Params bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(PixelMixtureModel(4, 4, bad), Error);
  CHECK_THROWS_AS(model.update_and_classify(ByteRaster(5, 4, 0)), Error);
}

TEST_CASE("mixture invariants hold on noisy multimodal input") {
  Mog2Params p;
  p.alpha = 0.05;
  PixelMixtureModel model(6, 6, p);
  Rng rng(3);
  ByteRaster img(6, 6);
  for (int f = 0; f < 300; ++f) {
    for (auto& v : img.data) {
      const double mode = rng.uniform() < 0.5 ? 40.0 : 180.0;
      v = static_cast<std::uint8_t>(std::clamp(mode + 6.0 * rng.normal() + (rng.uniform() < 0.05 ? 70 : 0), 0.0, 255.0));
    }
    model.update_and_classify(img);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) {
        const auto c = model.components(x, y);
        REQUIRE(!c.empty());
        REQUIRE(c.size() <= 5);
        double sum = 0.0;
        for (std::size_t k = 0; k < c.size(); ++k) {
          sum += c[k].weight;
          REQUIRE(c[k].var >= p.var_min);
          REQUIRE(c[k].weight >= 0.0);
          if (k) REQUIRE(c[k - 1].weight / std::sqrt(c[k - 1].var) >= c[k].weight / std::sqrt(c[k].var));
        }
        REQUIRE(std::abs(sum - 1.0) <= 1e-6);
      }
  }
}

TEST_CASE("a new static value is absorbed within 2/alpha frames") {
  Mog2Params p;
  PixelMixtureModel model(8, 8, p);
  for (int i = 0; i < 10; ++i) model.update_and_classify(ByteRaster(8, 8, 50));
  const int budget = static_cast<int>(2.0 / p.alpha);
  int absorbed_at = -1;
  for (int i = 0; i < budget; ++i) {
    const auto mask = model.update_and_classify(ByteRaster(8, 8, 120));
    if (i == 0) CHECK(count_fg(mask) == 64);
    if (count_fg(mask) == 0 && absorbed_at < 0) absorbed_at = i;
  }
  CHECK(absorbed_at > 0);
  CHECK(absorbed_at < budget);
}

TEST_CASE("apply_mask") {
  Frame f{ByteRaster(4, 4, 100), 0};
  CHECK(apply_mask(f, ForegroundMask(4, 4, 1)).pixels == f.pixels);
  CHECK(apply_mask(f, ForegroundMask(4, 4, 0)).pixels == ByteRaster(4, 4, 0));
  ForegroundMask checker(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) checker.at(x, y) = (x + y) % 2;
  const auto out = apply_mask(f, checker);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(out.pixels.at(x, y) == ((x + y) % 2 ? 100 : 0));
  CHECK_THROWS_AS(apply_mask(f, ForegroundMask(3, 4, 1)), Error);
}

TEST_CASE("majority cleanup removes isolated pixels and keeps blobs") {
  ForegroundMask m(9, 9, 0);
  m.at(1, 1) = 1;
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 8; ++x) m.at(x, y) = 1;
  const auto c = majority_filter3(m);
  CHECK(c.at(1, 1) == 0);
  CHECK(c.at(5, 5) == 1);
  CHECK(c.at(6, 6) == 1);

  Mog2Params p;
  p.mask_cleanup = true;
  PixelMixtureModel model(9, 9, p);
  ByteRaster img(9, 9, 50);
  for (int i = 0; i < 40; ++i) model.update_and_classify(img);
  img.at(2, 2) = 220;
  CHECK(count_fg(model.update_and_classify(img)) == 0);
}
