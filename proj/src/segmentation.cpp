#include "bahop/segmentation.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "bahop/errors.hpp"

namespace bahop {

const std::array<const char*, PreprocParams::kAxes> kParamNames = {
    "seg_thresh", "blur_k", "close_k", "area_tissue_min", "area_hole_min", "max_holes"};

void PreprocParams::validate() const {
  auto fail = [](const char* name, int v) {
    throw InvalidParameter(std::string("PreprocParams.") + name + " out of range: " +
                           std::to_string(v));
  };
  if (seg_thresh < 0 || seg_thresh > 255) fail("seg_thresh", seg_thresh);
  if (blur_k < 1 || blur_k % 2 == 0) fail("blur_k", blur_k);
  if (close_k < 1) fail("close_k", close_k);
  if (area_tissue_min < 0) fail("area_tissue_min", area_tissue_min);
  if (area_hole_min < 0) fail("area_hole_min", area_hole_min);
  if (max_holes < 0) fail("max_holes", max_holes);
}

namespace {

// Labels every pixel with mask value `value`; returns per-pixel label map
// (0 = not in any component) alongside the components.
std::vector<Component> label_into(const BitMask& mask, bool value, int connectivity,
                                  std::vector<int>& labels) {
  const int W = mask.width();
  const int H = mask.height();
  labels.assign(mask.size(), 0);
  std::vector<Component> comps;
  std::vector<int> stack;
  static constexpr int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int nn = connectivity == 8 ? 8 : 4;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    if (labels[static_cast<std::size_t>(start)] != 0 || mask[static_cast<std::size_t>(start)] != value) continue;
    Component c;
    c.label = static_cast<int>(comps.size()) + 1;
    labels[static_cast<std::size_t>(start)] = c.label;
    stack.assign(1, start);
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      c.pixels.push_back(i);
      const int x = i % W;
      const int y = i / W;
      if (x == 0 || y == 0 || x == W - 1 || y == H - 1) c.touches_border = true;
      for (int d = 0; d < nn; ++d) {
        const int nx = x + dx8[d];
        const int ny = y + dy8[d];
        if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * W + nx;
        if (labels[j] == 0 && mask[j] == value) {
          labels[j] = c.label;
          stack.push_back(static_cast<int>(j));
        }
      }
    }
    std::sort(c.pixels.begin(), c.pixels.end());
    c.kind = value ? ComponentKind::tissue : ComponentKind::hole;
    comps.push_back(std::move(c));
  }
  return comps;
}

void paint(std::vector<std::uint8_t>& bits, const Component& c, bool v) {
  for (int i : c.pixels) bits[static_cast<std::size_t>(i)] = v ? 1 : 0;
}

}  // namespace

std::vector<Component> label_components(const BitMask& mask, bool value, int connectivity) {
  if (connectivity != 4 && connectivity != 8) {
    throw InvalidParameter("label_components: connectivity must be 4 or 8");
  }
  std::vector<int> labels;
  return label_into(mask, value, connectivity, labels);
}

std::vector<Hole> find_holes(const BitMask& mask) {
  std::vector<int> tissue_labels;
  label_into(mask, true, 8, tissue_labels);
  std::vector<int> bg_labels;
  auto background = label_into(mask, false, 4, bg_labels);
  std::vector<Hole> holes;
  for (auto& c : background) {
    if (c.touches_border) continue;
    // The pixel above the first (raster-order) hole pixel cannot be
    // background of the same 4-component and cannot be off-image, so it
    // belongs to the outermost tissue ring around this hole.
    const int first = c.pixels.front();
    const int above = first - mask.width();
    Hole h;
    h.enclosing_tissue = tissue_labels[static_cast<std::size_t>(above)];
    h.component = std::move(c);
    holes.push_back(std::move(h));
  }
  return holes;
}

BitMask filter_components(const BitMask& mask, int area_tissue_min, int area_hole_min,
                          int max_holes) {
  std::vector<std::uint8_t> bits(mask.bits().begin(), mask.bits().end());
  for (const auto& c : label_components(mask, true, 8)) {
    if (c.area() < static_cast<std::size_t>(area_tissue_min)) paint(bits, c, false);
  }

  // Filling a hole can merge an island into its enclosing component and so
  // raise that component's hole count; repeat until no hole is filled.
  BitMask current(mask.width(), mask.height(), bits);
  for (;;) {
    auto holes = find_holes(current);
    std::map<int, std::vector<const Hole*>> by_tissue;
    bool changed = false;
    for (const auto& h : holes) {
      if (h.component.area() < static_cast<std::size_t>(area_hole_min)) {
        paint(bits, h.component, true);
        changed = true;
      } else {
        by_tissue[h.enclosing_tissue].push_back(&h);
      }
    }
    for (auto& [tissue, list] : by_tissue) {
      std::sort(list.begin(), list.end(), [](const Hole* a, const Hole* b) {
        if (a->component.area() != b->component.area()) return a->component.area() > b->component.area();
        return a->component.label < b->component.label;
      });
      for (std::size_t i = static_cast<std::size_t>(max_holes); i < list.size(); ++i) {
        paint(bits, list[i]->component, true);
        changed = true;
      }
    }
    if (!changed) break;
    current = BitMask(mask.width(), mask.height(), bits);
  }
  return current;
}

BitMask segment_blurred(const RasterImage& blurred, const PreprocParams& p) {
  p.validate();
  BitMask m = binary_threshold(blurred, p.seg_thresh);
  m = morph_close(m, p.close_k);
  return filter_components(m, p.area_tissue_min, p.area_hole_min, p.max_holes);
}

BitMask segment_downsampled(const RasterImage& thumb, const PreprocParams& p) {
  p.validate();
  return segment_blurred(median_blur(saturation_channel(thumb), p.blur_k), p);
}

BitMask segment(const RasterImage& slide, const PreprocParams& p) {
  if (slide.channels() != 3) throw InvalidInput("segment: slide must be RGB");
  return segment_downsampled(downsample(slide, kThumbFactor), p);
}

PatchGrid extract_patches(const BitMask& mask, int patch_size) {
  if (patch_size < kThumbFactor || patch_size % kThumbFactor != 0) {
    throw InvalidParameter("extract_patches: patch_size must be a positive multiple of " +
                           std::to_string(kThumbFactor));
  }
  const int foot = patch_size / kThumbFactor;
  PatchGrid g;
  g.patch_size = patch_size;
  g.rows = mask.height() / foot;
  g.cols = mask.width() / foot;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (mask.at(c * foot + foot / 2, r * foot + foot / 2)) g.kept.push_back({r, c});
    }
  }
  return g;
}

RasterImage render_thumbnail_downsampled(const RasterImage& thumb, const BitMask& mask) {
  if (thumb.channels() != 3) throw InvalidInput("render_thumbnail: slide must be RGB");
  if (!mask.matches(thumb)) {
    throw InvalidInput("render_thumbnail: mask geometry must equal slide geometry / 64");
  }
  RasterImage out = thumb;
  auto d = out.data();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) d[3 * i] = d[3 * i + 1] = d[3 * i + 2] = 0;
  }
  return out;
}

RasterImage render_thumbnail(const RasterImage& slide, const BitMask& mask) {
  if (slide.channels() != 3) throw InvalidInput("render_thumbnail: slide must be RGB");
  if (slide.width() != mask.width() * kThumbFactor || slide.height() != mask.height() * kThumbFactor) {
    throw InvalidInput("render_thumbnail: mask geometry must equal slide geometry / 64");
  }
  return render_thumbnail_downsampled(downsample(slide, kThumbFactor), mask);
}

}  // namespace bahop
