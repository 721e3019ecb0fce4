#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bahop {

/// Row-major 8-bit raster with 1 (grayscale) or 3 (RGB) interleaved channels.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int width, int height, int channels, std::uint8_t fill = 0);
  RasterImage(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return data_.empty(); }

  std::uint8_t at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
  std::uint8_t& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

  std::span<const std::uint8_t> data() const { return data_; }
  std::span<std::uint8_t> data() { return data_; }

  bool same_geometry(const RasterImage& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Row-major binary mask; true marks tissue / foreground.
class BitMask {
 public:
  BitMask() = default;
  BitMask(int width, int height, bool fill = false);
  BitMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const;
  bool subset_of(const BitMask& o) const;
  bool same_geometry(const BitMask& o) const {
    return width_ == o.width_ && height_ == o.height_;
  }
  bool matches(const RasterImage& img) const {
    return width_ == img.width() && height_ == img.height();
  }

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// HSV saturation scaled to 0..255: round_half_up(255*(max-min)/max), 0 for black.
std::uint8_t saturation_of(std::uint8_t r, std::uint8_t g, std::uint8_t b);

RasterImage saturation_channel(const RasterImage& rgb);

/// bit = sample > thresh (strict).
BitMask binary_threshold(const RasterImage& gray, int thresh);

/// k x k median with the window clipped to the image; even-sized windows
/// take the lower median. Requires odd k <= min(width, height).
RasterImage median_blur(const RasterImage& gray, int k);

BitMask dilate(const BitMask& mask, int k);
BitMask erode(const BitMask& mask, int k);

/// Dilation then erosion by a k x k square, neighborhoods clipped to the
/// image. For even k the erosion window is the reflection of the dilation
/// window so the pair stays an adjunction (extensive and idempotent).
BitMask morph_close(const BitMask& mask, int k);

/// Block-mean pooling per channel, rounded half-up.
RasterImage downsample(const RasterImage& img, int factor);

/// Pixel replication; inverse-shaped companion of downsample.
RasterImage upsample_nearest(const RasterImage& img, int factor);

/// Renders a mask as a single-channel image with samples 0 / 255.
RasterImage mask_to_image(const BitMask& mask);
BitMask image_to_mask(const RasterImage& gray);

}  // namespace bahop
