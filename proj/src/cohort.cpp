#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bahop/errors.hpp"
#include "bahop/oracle.hpp"
#include "bahop/rng.hpp"

namespace bahop {

const char* to_string(SlideLabel l) { return l == SlideLabel::tumor ? "tumor" : "normal"; }

const char* to_string(CohortVariant v) { return v == CohortVariant::A ? "A" : "B"; }

CohortVariant parse_variant(const std::string& s) {
  if (s == "A" || s == "a") return CohortVariant::A;
  if (s == "B" || s == "b") return CohortVariant::B;
  throw InvalidParameter("unknown cohort variant '" + s + "'");
}

const char* to_string(RegionKind k) {
  switch (k) {
    case RegionKind::background: return "background";
    case RegionKind::tissue: return "tissue";
    case RegionKind::pale: return "pale";
    case RegionKind::rim: return "rim";
    case RegionKind::tumor: return "tumor";
    case RegionKind::debris: return "debris";
  }
  return "?";
}

void CohortSettings::validate() const {
  if (slides < 8) throw InvalidParameter("cohort: slide count must be >= 8");
  if (width < kThumbFactor || height < kThumbFactor || width % kThumbFactor != 0 ||
      height % kThumbFactor != 0) {
    throw InvalidParameter("cohort: slide dimensions must be positive multiples of 64");
  }
  if (patch_size < kThumbFactor || patch_size % kThumbFactor != 0 || width % patch_size != 0 ||
      height % patch_size != 0) {
    throw InvalidParameter("cohort: patch_size must be a multiple of 64 dividing the slide");
  }
}

bool Region::contains(double x, double y) const {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double dx = x - cx;
  const double dy = y - cy;
  const double u = (c * dx + s * dy) / rx;
  const double v = (-s * dx + c * dy) / ry;
  return u * u + v * v <= 1.0;
}

std::size_t SyntheticCohort::tumor_count() const {
  return static_cast<std::size_t>(std::count_if(slides.begin(), slides.end(), [](const Slide& s) {
    return s.label == SlideLabel::tumor;
  }));
}

std::vector<std::string> SyntheticCohort::slide_ids() const {
  std::vector<std::string> ids;
  for (const auto& s : slides) ids.push_back(s.id);
  return ids;
}

namespace {

// Layout constants are in working-resolution blocks (64 level-0 px) on a
// 32-block-wide reference slide, scaled to the actual slide size.
struct Layout {
  double bx;
  double by;
  double unit;  // level-0 px per reference block
};

constexpr int kBackgroundNoise = 2;
constexpr int kTissueNoise = 6;
constexpr int kPaleNoise = 3;
constexpr int kTexturedNoise = 45;

// Colour whose HSV saturation (0..255 scale) is `sat`.
std::array<std::uint8_t, 3> colour_with_saturation(Rng& rng, int rmin, int rmax, int sat) {
  const int r0 = rng.between(rmin, rmax);
  for (int dr = 0; dr <= rmax - rmin; ++dr) {
    const int r = rmin + (r0 - rmin + dr) % (rmax - rmin + 1);
    const int g = r - static_cast<int>(std::lround(sat * r / 255.0));
    // Stay well inside the rounding interval so block averaging of noise
    // cannot move the saturation to a neighbouring value.
    if (std::abs(255.0 * (r - g) / r - sat) > 0.25) continue;
    const int b = g + static_cast<int>(std::lround((r - g) * rng.uniform(0.3, 0.7)));
    return {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
  }
  throw std::logic_error("cohort: no colour with the requested saturation");
}

std::array<std::uint8_t, 3> tissue_colour(Rng& rng) {
  return colour_with_saturation(rng, 185, 205, rng.between(120, 200));
}

std::array<std::uint8_t, 3> pale_colour(Rng& rng, int sat) { return colour_with_saturation(rng, 216, 230, sat); }

std::array<std::uint8_t, 3> rim_colour(Rng& rng, int sat) { return colour_with_saturation(rng, 244, 252, sat); }

constexpr double kRimWidth = 2.5;

Region ellipse(RegionKind kind, const Layout& L, double cx, double cy, double rx, double ry,
               double angle, std::array<std::uint8_t, 3> rgb, int noise) {
  Region r;
  r.kind = kind;
  r.cx = cx * L.unit;
  r.cy = cy * L.unit;
  r.rx = rx * L.unit;
  r.ry = ry * L.unit;
  r.angle = angle;
  r.rgb = rgb;
  r.noise = noise;
  return r;
}

double any_angle(Rng& rng) { return rng.uniform(0.0, std::numbers::pi); }

// Slide recipes. Each one places a main tissue blob and at most one feature
// whose fate under the pipeline decides the slide's prediction.
enum class Recipe {
  core,        // tumour core inside the main blob
  core_pale,   // core plus a large pale inclusion
  inclusion,   // textured low-saturation inclusion inside the main blob
  lump,        // separate textured blob beside a plain main blob
  pale,        // pale inclusion
  plain,
};

// Inclusion radius and its centre's offset inside a block; the hole the
// pipeline leaves depends on both.
struct Inclusion {
  double r;
  double ox;
  double oy;
};
constexpr Inclusion kMidInclusion{4.72, 0.5, 0.5};
constexpr Inclusion kBigInclusion{5.05, 0.25, 0.25};
constexpr Inclusion kWideInclusion{5.3, 0.5, 0.5};

struct RecipeEntry {
  Recipe recipe;
  int sat = 0;
  Inclusion inc{};
  double lump_r = 0.0;
};

const std::vector<RecipeEntry>& tumour_recipes() {
  static const std::vector<RecipeEntry> r = {
      {Recipe::inclusion, 6, kMidInclusion}, {Recipe::inclusion, 7, kWideInclusion},
      {Recipe::inclusion, 11, kWideInclusion}, {Recipe::lump, 0, {}, 6.0},
      {Recipe::core_pale, 8, {5.7, 0.0, 0.0}}, {Recipe::core}, {Recipe::core}, {Recipe::core}, {Recipe::core}, {Recipe::core}, {Recipe::core},
      {Recipe::core}, {Recipe::core}, {Recipe::core}, {Recipe::core}, {Recipe::core},
  };
  return r;
}

const std::vector<RecipeEntry>& normal_recipes() {
  static const std::vector<RecipeEntry> r = {
      {Recipe::inclusion, 6, kBigInclusion}, {Recipe::inclusion, 9, kWideInclusion},
      {Recipe::inclusion, 10, kWideInclusion}, {Recipe::lump, 0, {}, 4.9},
      {Recipe::pale, 6, kBigInclusion}, {Recipe::pale, 6, kBigInclusion},
      {Recipe::plain}, {Recipe::plain}, {Recipe::plain}, {Recipe::plain}, {Recipe::plain},
      {Recipe::plain}, {Recipe::plain}, {Recipe::plain}, {Recipe::plain}, {Recipe::plain},
  };
  return r;
}

std::vector<Region> layout_slide(Rng& rng, const Layout& L, const RecipeEntry& e, SlideLabel label) {
  std::vector<Region> out;
  const RegionKind textured = label == SlideLabel::tumor ? RegionKind::tumor : RegionKind::debris;
  const double cx = L.bx / 2.0;
  const double cy = L.by / 2.0;
  const auto colour = tissue_colour(rng);
  auto main_blob = [&](double x, double y, double rx, double ry, double angle) {
    out.push_back(ellipse(RegionKind::tissue, L, x, y, rx, ry, angle, colour, kTissueNoise));
  };
  // Inclusion with a bright near-white rim of the same saturation, so rim and
  // core fall below the threshold together and the rim shields the margin.
  auto add_inclusion = [&](double x, double y, double r, int sat, RegionKind core_kind) {
    const double a = any_angle(rng);
    const double rr = r * rng.uniform(0.99, 1.01);
    out.push_back(ellipse(RegionKind::rim, L, x, y, r, rr, a, rim_colour(rng, sat), kPaleNoise));
    const bool pale = core_kind == RegionKind::pale;
    out.push_back(ellipse(core_kind, L, x, y, r - kRimWidth, rr - kRimWidth, a,
                          pale ? pale_colour(rng, sat) : colour_with_saturation(rng, 185, 205, sat),
                          pale ? kPaleNoise : kTexturedNoise));
  };
  auto add_core = [&](double x, double y) {
    const double r = rng.uniform(1.3, 1.8);
    out.push_back(ellipse(RegionKind::tumor, L, x, y, r, r * rng.uniform(0.85, 1.15), any_angle(rng), colour,
                          kTexturedNoise));
  };

  switch (e.recipe) {
    case Recipe::core: {
      const double mr = rng.uniform(7.0, 8.5);
      const double x = cx + rng.uniform(-1.0, 1.0);
      const double y = cy + rng.uniform(-1.0, 1.0);
      main_blob(x, y, mr, rng.uniform(7.0, 8.5), any_angle(rng));
      const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double rho = (mr - 3.5) * std::sqrt(rng.uniform());
      add_core(x + rho * std::cos(t), y + rho * std::sin(t));
      break;
    }
    case Recipe::plain:
      main_blob(cx + rng.uniform(-1.0, 1.0), cy + rng.uniform(-1.0, 1.0), rng.uniform(7.0, 8.5),
                rng.uniform(7.0, 8.5), any_angle(rng));
      break;
    case Recipe::core_pale: {
      const double mr = rng.uniform(9.2, 10.0);
      main_blob(cx, cy, mr, mr * rng.uniform(0.98, 1.02), any_angle(rng));
      const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
      add_inclusion(cx + 1.5 * std::cos(t), cy + 1.5 * std::sin(t), e.inc.r, e.sat,
                    RegionKind::pale);
      const double d = mr - 2.6;
      add_core(cx - d * std::cos(t), cy - d * std::sin(t));
      break;
    }
    case Recipe::inclusion:
    case Recipe::pale: {
      const double mr = rng.uniform(9.3, 9.8);
      main_blob(cx, cy, mr, mr * rng.uniform(0.98, 1.02), any_angle(rng));
      add_inclusion(cx + e.inc.ox, cy + e.inc.oy, e.inc.r, e.sat,
                    e.recipe == Recipe::pale ? RegionKind::pale : textured);
      break;
    }
    case Recipe::lump: {
      main_blob(9.0 + rng.uniform(-0.3, 0.3), cy + rng.uniform(-1.0, 1.0), rng.uniform(5.0, 5.4),
                rng.uniform(8.5, 9.5), rng.uniform(-0.1, 0.1));
      const double r = e.lump_r;
      out.push_back(ellipse(textured, L, 24.5 + rng.uniform(-0.3, 0.3), cy + rng.uniform(-1.0, 1.0), r,
                            r * rng.uniform(0.98, 1.02), any_angle(rng), tissue_colour(rng), kTexturedNoise));
      break;
    }
  }
  return out;
}

RasterImage paint(const std::vector<Region>& regions, int width, int height, std::uint64_t noise_seed) {
  // Topmost region index per pixel; 0 = background.
  std::vector<std::uint8_t> top(static_cast<std::size_t>(width) * height, 0);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& r = regions[i];
    const double ext = std::max(r.rx, r.ry);
    const int x0 = std::max(0, static_cast<int>(std::floor(r.cx - ext)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(r.cx + ext)));
    const int y0 = std::max(0, static_cast<int>(std::floor(r.cy - ext)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(r.cy + ext)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (r.contains(x + 0.5, y + 0.5)) top[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(i + 1);
      }
    }
  }
  RasterImage img(width, height, 3);
  auto d = img.data();
  const std::array<std::uint8_t, 3> bg = {242, 242, 242};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const std::uint8_t t = top[i];
      const auto& rgb = t ? regions[t - 1].rgb : bg;
      const int amp = t ? regions[t - 1].noise : kBackgroundNoise;
      const std::uint64_t h = mix64(noise_seed ^ (static_cast<std::uint64_t>(y) << 32 | static_cast<std::uint32_t>(x)));
      const int n = static_cast<int>(h % static_cast<std::uint64_t>(2 * amp + 1)) - amp;
      for (int c = 0; c < 3; ++c) d[3 * i + c] = static_cast<std::uint8_t>(std::clamp(rgb[c] + n, 0, 255));
    }
  }
  return img;
}

}  // namespace

SyntheticCohort generate_cohort(const CohortSettings& settings) {
  settings.validate();
  SyntheticCohort cohort;
  cohort.settings = settings;

  Rng label_rng(mix64(settings.seed ^ 0x6c6162656c73ULL));
  std::vector<SlideLabel> labels(static_cast<std::size_t>(settings.slides), SlideLabel::normal);
  const auto n_tumor = static_cast<std::size_t>(settings.slides / 2);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_tumor), SlideLabel::tumor);
  for (std::size_t i = labels.size(); i-- > 1;) {
    std::swap(labels[i], labels[label_rng.below(i + 1)]);
  }

  const Layout L{32.0, 32.0 * settings.height / settings.width, settings.width / 32.0};
  // Recipe decks, dealt in a seeded order to the tumour and normal slides.
  std::vector<std::size_t> tumour_deck(tumour_recipes().size());
  std::vector<std::size_t> normal_deck(normal_recipes().size());
  for (std::size_t i = 0; i < tumour_deck.size(); ++i) tumour_deck[i] = i;
  for (std::size_t i = 0; i < normal_deck.size(); ++i) normal_deck[i] = i;
  for (auto* deck : {&tumour_deck, &normal_deck}) {
    for (std::size_t i = deck->size(); i-- > 1;) std::swap((*deck)[i], (*deck)[label_rng.below(i + 1)]);
  }
  std::size_t next_tumour = 0;
  std::size_t next_normal = 0;
  for (int i = 0; i < settings.slides; ++i) {
    const std::uint64_t slide_seed = mix64(settings.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(i) + 1);
    Rng rng(slide_seed);
    Slide s;
    char buf[32];
    std::snprintf(buf, sizeof buf, "slide_%03d", i);
    s.id = buf;
    s.label = labels[static_cast<std::size_t>(i)];
    const RecipeEntry& e = s.label == SlideLabel::tumor
                               ? tumour_recipes()[tumour_deck[next_tumour++ % tumour_deck.size()]]
                               : normal_recipes()[normal_deck[next_normal++ % normal_deck.size()]];
    s.regions = layout_slide(rng, L, e, s.label);
    s.raster = paint(s.regions, settings.width, settings.height, mix64(slide_seed ^ 0x6e6f697365ULL));
    cohort.slides.push_back(std::move(s));
  }
  return cohort;
}

}  // namespace bahop
