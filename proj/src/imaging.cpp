#include "bahop/imaging.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "bahop/errors.hpp"

namespace bahop {

namespace {

void require_channels(const RasterImage& img, int channels, const char* op) {
  if (img.channels() != channels) {
    throw InvalidInput(std::string(op) + ": expected " + std::to_string(channels) +
                       "-channel image, got " + std::to_string(img.channels()));
  }
}

// Inclusive offsets of a k-wide window anchored on the pixel.
struct Window {
  int lo;
  int hi;
};

Window window_for(int k) { return {-(k - 1) / 2, k / 2}; }

// Separable OR/AND over a clipped window. `any` selects dilation (OR) vs
// erosion (AND); out-of-bounds samples are ignored either way.
BitMask sweep(const BitMask& in, Window w, bool any) {
  const int W = in.width();
  const int H = in.height();
  std::vector<std::uint8_t> tmp(in.size());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int x0 = std::max(0, x + w.lo);
      const int x1 = std::min(W - 1, x + w.hi);
      bool acc = !any;
      for (int xx = x0; xx <= x1; ++xx) {
        const bool b = in.at(xx, y);
        if (any ? b : !b) {
          acc = any;
          break;
        }
      }
      tmp[static_cast<std::size_t>(y) * W + x] = acc ? 1 : 0;
    }
  }
  std::vector<std::uint8_t> out(in.size());
  for (int y = 0; y < H; ++y) {
    const int y0 = std::max(0, y + w.lo);
    const int y1 = std::min(H - 1, y + w.hi);
    for (int x = 0; x < W; ++x) {
      bool acc = !any;
      for (int yy = y0; yy <= y1; ++yy) {
        const bool b = tmp[static_cast<std::size_t>(yy) * W + x] != 0;
        if (any ? b : !b) {
          acc = any;
          break;
        }
      }
      out[static_cast<std::size_t>(y) * W + x] = acc ? 1 : 0;
    }
  }
  return BitMask(W, H, std::move(out));
}

}  // namespace

RasterImage::RasterImage(int width, int height, int channels, std::uint8_t fill)
    : RasterImage(width, height, channels,
                  std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                                static_cast<std::size_t>(std::max(height, 0)) *
                                                static_cast<std::size_t>(std::max(channels, 0)),
                                            fill)) {}

RasterImage::RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width < 1 || height < 1) throw InvalidInput("RasterImage: dimensions must be >= 1");
  if (channels != 1 && channels != 3) throw InvalidInput("RasterImage: channels must be 1 or 3");
  if (data_.size() != pixel_count() * static_cast<std::size_t>(channels)) {
    throw InvalidInput("RasterImage: data length != width*height*channels");
  }
}

BitMask::BitMask(int width, int height, bool fill)
    : BitMask(width, height,
              std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(width, 0)) *
                                            static_cast<std::size_t>(std::max(height, 0)),
                                        fill ? 1 : 0)) {}

BitMask::BitMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width < 1 || height < 1) throw InvalidInput("BitMask: dimensions must be >= 1");
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidInput("BitMask: bits length != width*height");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BitMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BitMask::subset_of(const BitMask& o) const {
  if (!same_geometry(o)) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !o.bits_[i]) return false;
  }
  return true;
}

std::uint8_t saturation_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int mx = std::max({r, g, b});
  const int mn = std::min({r, g, b});
  if (mx == 0) return 0;
  // round_half_up(255 * (mx - mn) / mx) in integer arithmetic
  return static_cast<std::uint8_t>((2 * 255 * (mx - mn) + mx) / (2 * mx));
}

RasterImage saturation_channel(const RasterImage& rgb) {
  require_channels(rgb, 3, "saturation_channel");
  RasterImage out(rgb.width(), rgb.height(), 1);
  auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < rgb.pixel_count(); ++i) {
    dst[i] = saturation_of(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
  }
  return out;
}

BitMask binary_threshold(const RasterImage& gray, int thresh) {
  require_channels(gray, 1, "binary_threshold");
  if (thresh < 0 || thresh > 255) throw InvalidParameter("binary_threshold: thresh outside 0..255");
  std::vector<std::uint8_t> bits(gray.pixel_count());
  auto src = gray.data();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = src[i] > thresh ? 1 : 0;
  return BitMask(gray.width(), gray.height(), std::move(bits));
}

RasterImage median_blur(const RasterImage& gray, int k) {
  require_channels(gray, 1, "median_blur");
  if (k < 1 || k % 2 == 0) {
    throw InvalidParameter("median_blur: kernel must be odd and >= 1, got " + std::to_string(k));
  }
  if (k > std::min(gray.width(), gray.height())) {
    throw InvalidParameter("median_blur: kernel larger than image");
  }
  if (k == 1) return gray;
  const int r = k / 2;
  const int W = gray.width();
  const int H = gray.height();
  RasterImage out(W, H, 1);
  std::vector<std::uint8_t> window;
  window.reserve(static_cast<std::size_t>(k) * k);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      window.clear();
      for (int yy = std::max(0, y - r); yy <= std::min(H - 1, y + r); ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(W - 1, x + r); ++xx) {
          window.push_back(gray.at(xx, yy));
        }
      }
      const auto mid = window.begin() + static_cast<std::ptrdiff_t>((window.size() - 1) / 2);
      std::nth_element(window.begin(), mid, window.end());
      out.at(x, y) = *mid;
    }
  }
  return out;
}

BitMask dilate(const BitMask& mask, int k) {
  if (k < 1) throw InvalidParameter("dilate: kernel must be >= 1");
  return sweep(mask, window_for(k), true);
}

BitMask erode(const BitMask& mask, int k) {
  if (k < 1) throw InvalidParameter("erode: kernel must be >= 1");
  const Window w = window_for(k);
  return sweep(mask, {-w.hi, -w.lo}, false);
}

BitMask morph_close(const BitMask& mask, int k) {
  if (k < 1) throw InvalidParameter("morph_close: kernel must be >= 1, got " + std::to_string(k));
  if (k == 1) return mask;
  return erode(dilate(mask, k), k);
}

RasterImage downsample(const RasterImage& img, int factor) {
  if (factor < 1) throw InvalidParameter("downsample: factor must be >= 1");
  if (img.width() % factor != 0 || img.height() % factor != 0) {
    throw InvalidParameter("downsample: factor " + std::to_string(factor) +
                           " does not divide " + std::to_string(img.width()) + "x" +
                           std::to_string(img.height()));
  }
  if (factor == 1) return img;
  const int C = img.channels();
  const int ow = img.width() / factor;
  const int oh = img.height() / factor;
  const std::uint64_t n = static_cast<std::uint64_t>(factor) * factor;
  RasterImage out(ow, oh, C);
  std::vector<std::uint64_t> sums(static_cast<std::size_t>(ow) * C);
  auto src = img.data();
  for (int by = 0; by < oh; ++by) {
    std::fill(sums.begin(), sums.end(), 0);
    for (int y = by * factor; y < (by + 1) * factor; ++y) {
      const std::uint8_t* row = src.data() + static_cast<std::size_t>(y) * img.width() * C;
      for (int x = 0; x < img.width(); ++x) {
        const std::size_t bx = static_cast<std::size_t>(x / factor);
        for (int c = 0; c < C; ++c) sums[bx * C + c] += row[static_cast<std::size_t>(x) * C + c];
      }
    }
    for (int bx = 0; bx < ow; ++bx) {
      for (int c = 0; c < C; ++c) {
        out.at(bx, by, c) = static_cast<std::uint8_t>((2 * sums[static_cast<std::size_t>(bx) * C + c] + n) / (2 * n));
      }
    }
  }
  return out;
}

RasterImage upsample_nearest(const RasterImage& img, int factor) {
  if (factor < 1) throw InvalidParameter("upsample_nearest: factor must be >= 1");
  RasterImage out(img.width() * factor, img.height() * factor, img.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(x, y, c) = img.at(x / factor, y / factor, c);
    }
  }
  return out;
}

RasterImage mask_to_image(const BitMask& mask) {
  std::vector<std::uint8_t> data(mask.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = mask[i] ? 255 : 0;
  return RasterImage(mask.width(), mask.height(), 1, std::move(data));
}

BitMask image_to_mask(const RasterImage& gray) {
  require_channels(gray, 1, "image_to_mask");
  std::vector<std::uint8_t> bits(gray.pixel_count());
  auto src = gray.data();
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = src[i] != 0 ? 1 : 0;
  return BitMask(gray.width(), gray.height(), std::move(bits));
}

}  // namespace bahop
