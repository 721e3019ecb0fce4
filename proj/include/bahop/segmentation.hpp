#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bahop/imaging.hpp"

namespace bahop {

/// Downsample factor between a level-0 slide and its working-resolution
/// thumbnail. Segmentation and component filtering happen at this scale.
inline constexpr int kThumbFactor = 64;

/// The six preprocessing knobs. Areas are in working-resolution px^2.
struct PreprocParams {
  int seg_thresh = 8;       // saturation threshold, 0..255
  int blur_k = 7;           // median kernel, odd
  int close_k = 4;          // closing kernel, >= 1
  int area_tissue_min = 100;
  int area_hole_min = 16;
  int max_holes = 8;

  static constexpr std::size_t kAxes = 6;

  std::array<int, kAxes> values() const {
    return {seg_thresh, blur_k, close_k, area_tissue_min, area_hole_min, max_holes};
  }
  static PreprocParams from_values(const std::array<int, kAxes>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }

  // Throws InvalidParameter naming the first out-of-range field.
  void validate() const;

  friend bool operator==(const PreprocParams&, const PreprocParams&) = default;
};

/// Field names in axis order, as used in config files and ledgers.
extern const std::array<const char*, PreprocParams::kAxes> kParamNames;

enum class ComponentKind { tissue, hole };

struct Component {
  int label = 0;
  std::vector<int> pixels;  // linear indices y*width + x
  bool touches_border = false;
  ComponentKind kind = ComponentKind::tissue;

  std::size_t area() const { return pixels.size(); }
};

/// Labels connected regions of pixels whose mask value equals `value`.
/// Labels are assigned 1.. in raster order of each component's first pixel.
/// `connectivity` is 4 or 8.
std::vector<Component> label_components(const BitMask& mask, bool value, int connectivity);

/// Enclosed background regions (4-connected, not touching the border) paired
/// with the label of the enclosing 8-connected tissue component.
struct Hole {
  Component component;
  int enclosing_tissue = 0;
};
std::vector<Hole> find_holes(const BitMask& mask);

/// Area-based filtering of tissue components and holes on a closed mask.
BitMask filter_components(const BitMask& mask, int area_tissue_min, int area_hole_min,
                          int max_holes);

/// The full pipeline from a level-0 RGB slide.
BitMask segment(const RasterImage& slide, const PreprocParams& p);

/// Pipeline entry points that skip stages already computed by the caller.
/// `thumb` is the 64x-downsampled RGB slide; `blurred` is its median-blurred
/// saturation channel for p.blur_k.
BitMask segment_downsampled(const RasterImage& thumb, const PreprocParams& p);
BitMask segment_blurred(const RasterImage& blurred, const PreprocParams& p);

struct PatchCoord {
  int row = 0;
  int col = 0;
  friend auto operator<=>(const PatchCoord&, const PatchCoord&) = default;
};

/// Non-overlapping level-0 patch grid restricted to retained patches.
struct PatchGrid {
  int patch_size = 0;
  int rows = 0;
  int cols = 0;
  std::vector<PatchCoord> kept;  // row-major order
};

/// A patch is kept iff the centre pixel of its working-resolution footprint
/// is tissue. patch_size must be a positive multiple of kThumbFactor.
PatchGrid extract_patches(const BitMask& mask, int patch_size);

/// 64x downsample with non-tissue pixels zeroed.
RasterImage render_thumbnail(const RasterImage& slide, const BitMask& mask);
RasterImage render_thumbnail_downsampled(const RasterImage& thumb, const BitMask& mask);

}  // namespace bahop
