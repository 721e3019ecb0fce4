#include <doctest.h>

#include <random>

#include "bahop/errors.hpp"
#include "bahop/imaging.hpp"
#include "bahop/pnm.hpp"

using namespace bahop;

namespace {

RasterImage gray(int w, int h, std::vector<std::uint8_t> v) { return RasterImage(w, h, 1, std::move(v)); }

RasterImage random_image(std::mt19937& g, int w, int h, int ch) {
  std::vector<std::uint8_t> d(static_cast<std::size_t>(w * h * ch));
  for (auto& x : d) x = static_cast<std::uint8_t>(g() & 0xff);
  return RasterImage(w, h, ch, std::move(d));
}

BitMask random_mask(std::mt19937& g, int w, int h, unsigned density = 2) {
  BitMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, g() % density == 0);
  return m;
}

}  // namespace

TEST_CASE("saturation of single pixels") {
  CHECK(saturation_of(255, 0, 0) == 255);
  CHECK(saturation_of(100, 100, 100) == 0);
  CHECK(saturation_of(200, 50, 100) == 191);
  CHECK(saturation_of(0, 0, 0) == 0);
  RasterImage rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 200;
  rgb.at(0, 0, 1) = 50;
  rgb.at(0, 0, 2) = 100;
  CHECK(saturation_channel(rgb).at(0, 0) == 191);
  CHECK_THROWS_AS(saturation_channel(gray(1, 1, {3})), InvalidInput);
}

TEST_CASE("binary threshold is strict") {
  CHECK(binary_threshold(RasterImage(4, 4, 1), 0).count() == 0);
  CHECK_FALSE(binary_threshold(gray(1, 1, {8}), 8).at(0, 0));
  CHECK(binary_threshold(gray(1, 1, {9}), 8).at(0, 0));
  const BitMask m = binary_threshold(gray(2, 2, {0, 10, 20, 30}), 15);
  CHECK_FALSE(m.at(0, 0));
  CHECK_FALSE(m.at(1, 0));
  CHECK(m.at(0, 1));
  CHECK(m.at(1, 1));
  CHECK_THROWS_AS(binary_threshold(RasterImage(2, 2, 3), 1), InvalidInput);
}

TEST_CASE("median blur") {
  std::mt19937 g(3);
  const RasterImage img = random_image(g, 9, 7, 1);
  CHECK(median_blur(img, 1) == img);

  RasterImage outlier(3, 3, 1, 7);
  outlier.at(1, 1) = 200;
  CHECK(median_blur(outlier, 3).at(1, 1) == 7);

  RasterImage corner(3, 3, 1, 0);
  corner.at(2, 2) = 255;
  CHECK(median_blur(corner, 3).at(0, 0) == 0);
  // Four in-bounds samples {0,0,0,255} at (2,2): lower median is 0.
  CHECK(median_blur(corner, 3).at(2, 2) == 0);

  CHECK_THROWS_AS(median_blur(img, 2), InvalidParameter);
  CHECK_THROWS_AS(median_blur(img, 9), InvalidParameter);
}

TEST_CASE("closing examples") {
  std::mt19937 g(5);
  const BitMask m = random_mask(g, 12, 10);
  CHECK(morph_close(m, 1) == m);

  BitMask gap(3, 1);
  gap.set(0, 0, true);
  gap.set(2, 0, true);
  const BitMask closed = morph_close(gap, 3);
  CHECK(closed.count() == 3);
  CHECK_THROWS_AS(morph_close(m, 0), InvalidParameter);
}

TEST_CASE("closing is extensive and idempotent on random masks") {
  std::mt19937 g(11);
  for (int trial = 0; trial < 60; ++trial) {
    const BitMask m = random_mask(g, 16, 16, 2 + trial % 4);
    for (int k : {1, 2, 3, 4, 5}) {
      const BitMask c = morph_close(m, k);
      CHECK(m.subset_of(dilate(m, k)));
      CHECK(m.subset_of(c));
      CHECK(morph_close(c, k) == c);
    }
  }
}

TEST_CASE("threshold antitonicity") {
  std::mt19937 g(13);
  for (int trial = 0; trial < 40; ++trial) {
    const RasterImage img = random_image(g, 16, 16, 1);
    const int t1 = static_cast<int>(g() % 256);
    const int t2 = t1 + static_cast<int>(g() % (256 - t1));
    CHECK(binary_threshold(img, t2).subset_of(binary_threshold(img, t1)));
  }
}

TEST_CASE("downsample") {
  std::mt19937 g(17);
  const RasterImage img = random_image(g, 8, 4, 3);
  CHECK(downsample(img, 1) == img);
  CHECK(downsample(gray(2, 2, {10, 20, 30, 40}), 2).at(0, 0) == 25);
  const RasterImage flat(128, 128, 3, 77);
  const RasterImage d = downsample(flat, 64);
  CHECK(d.width() == 2);
  CHECK(d.height() == 2);
  CHECK(d == RasterImage(2, 2, 3, 77));
  // 10.5 rounds half-up
  CHECK(downsample(RasterImage(2, 2, 1, std::vector<std::uint8_t>{10, 11, 10, 11}), 2).at(0, 0) == 11);
  CHECK_THROWS_AS(downsample(img, 3), InvalidParameter);
}

TEST_CASE("downsample then replicate stays within the block range") {
  std::mt19937 g(19);
  for (int trial = 0; trial < 20; ++trial) {
    const int f = 1 << (trial % 4);
    const RasterImage img = random_image(g, 4 * f, 2 * f, 1 + 2 * (trial % 2));
    const RasterImage back = upsample_nearest(downsample(img, f), f);
    REQUIRE(back.same_geometry(img));
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        for (int c = 0; c < img.channels(); ++c) {
          int lo = 255, hi = 0;
          for (int yy = (y / f) * f; yy < (y / f + 1) * f; ++yy)
            for (int xx = (x / f) * f; xx < (x / f + 1) * f; ++xx) {
              lo = std::min<int>(lo, img.at(xx, yy, c));
              hi = std::max<int>(hi, img.at(xx, yy, c));
            }
          CHECK(std::abs(back.at(x, y, c) - img.at(x, y, c)) <= hi - lo);
        }
      }
    }
  }
}

TEST_CASE("operations preserve geometry and are pure") {
  std::mt19937 g(23);
  const RasterImage img = random_image(g, 13, 9, 1);
  CHECK(median_blur(img, 5).same_geometry(img));
  CHECK(median_blur(img, 5) == median_blur(img, 5));
  const BitMask m = random_mask(g, 13, 9);
  CHECK(morph_close(m, 3).same_geometry(m));
}

TEST_CASE("pnm round trip is bit exact") {
  std::mt19937 g(29);
  const RasterImage rgb = random_image(g, 7, 5, 3);
  const RasterImage gr = random_image(g, 6, 3, 1);
  CHECK(pnm::decode(pnm::encode(rgb)) == rgb);
  CHECK(pnm::decode(pnm::encode(gr)) == gr);
  CHECK(pnm::encode(rgb).rfind("P6\n7 5\n255\n", 0) == 0);
  CHECK(pnm::encode(gr).rfind("P5\n", 0) == 0);
  CHECK_THROWS_AS(pnm::decode("P6\n2 2\n255\nabc"), InvalidInput);

  const BitMask m = random_mask(g, 9, 4);
  CHECK(image_to_mask(mask_to_image(m)) == m);
}
