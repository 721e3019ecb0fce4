#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "bahop/imaging.hpp"
#include "bahop/ledger.hpp"
#include "bahop/segmentation.hpp"
#include "bahop/similarity.hpp"

namespace bahop {

enum class SlideLabel { normal, tumor };
const char* to_string(SlideLabel l);

/// A: pale regions are neutral to the scorer. B: retained pale patches push
/// the scorer towards a tumor call (false positives on normal slides).
enum class CohortVariant { A, B };
const char* to_string(CohortVariant v);
CohortVariant parse_variant(const std::string& s);

struct CohortSettings {
  std::uint64_t seed = 1;
  int slides = 32;
  int width = 2048;
  int height = 2048;
  int patch_size = 128;
  CohortVariant variant = CohortVariant::A;

  void validate() const;
};

enum class RegionKind : std::uint8_t { background, tissue, pale, rim, tumor, debris };
const char* to_string(RegionKind k);

/// Rotated ellipse in level-0 pixel coordinates with its fill.
struct Region {
  RegionKind kind = RegionKind::tissue;
  double cx = 0, cy = 0, rx = 1, ry = 1, angle = 0;
  std::array<std::uint8_t, 3> rgb{};
  int noise = 0;  // luminance noise amplitude, uniform in [-noise, noise]

  bool contains(double x, double y) const;
};

struct Slide {
  std::string id;
  SlideLabel label = SlideLabel::normal;
  std::vector<Region> regions;  // painted in order over the background
  RasterImage raster;
};

struct SyntheticCohort {
  CohortSettings settings;
  std::vector<Slide> slides;

  std::size_t tumor_count() const;
  std::vector<std::string> slide_ids() const;
};

/// Deterministic in (seed, settings). The variant is recorded but does not
/// influence pixels.
SyntheticCohort generate_cohort(const CohortSettings& settings);

inline constexpr std::size_t kFeatureDim = 8;
using FeatureVector = std::array<double, kFeatureDim>;

// mean R, G, B; variance R, G, B; mean saturation; mean |horizontal gradient|
enum FeatureIndex : std::size_t {
  kMeanR, kMeanG, kMeanB, kVarR, kVarG, kVarB, kSatMean, kTexture
};

struct PatchFeatures {
  PatchCoord coord;
  FeatureVector values{};
};

struct FeatureSet {
  std::vector<std::string> slide_ids;
  std::vector<std::vector<PatchFeatures>> per_slide;

  std::size_t patch_count() const;
};

FeatureVector patch_statistics(const RasterImage& slide, int x0, int y0, int size);
std::vector<PatchFeatures> extract_features(const RasterImage& slide, const PatchGrid& grid);

/// Simulated minutes charged per extracted patch.
inline constexpr double kMinutesPerPatch = 0.0002;

struct CostDelta {
  std::uint64_t patches = 0;
  double latency_minutes = 0.0;
  std::uint64_t feature_bytes = 0;
};
CostDelta extraction_cost(std::uint64_t patches);

/// Frozen max-pooling MIL scorer. Patch score = texture_weight * texture +
/// pale_weight * pale(patch); slide is called tumor iff the max patch score
/// exceeds threshold.
struct ScorerParams {
  double texture_weight = 1.0;
  double pale_weight = 0.0;
  double threshold = 12.0;

  static ScorerParams for_variant(CohortVariant v);
};

bool is_pale_patch(const FeatureVector& f);
double patch_score(const FeatureVector& f, const ScorerParams& s);

/// Accuracy over the cohort. Throws InvalidInput on unknown or missing slides.
double infer(const FeatureSet& features, const SyntheticCohort& cohort, const ScorerParams& s);
double infer(const FeatureSet& features, const SyntheticCohort& cohort, CohortVariant v);

struct Evaluation {
  double objective = 0.0;
  ThumbnailSet thumbnails;
  CostDelta cost;
  std::vector<BitMask> masks;
  std::vector<PatchGrid> grids;
};

/// Memoising front-end over a cohort. Working-resolution thumbnails and the
/// per-patch statistics of every grid cell are computed once; evaluate()
/// then selects rows. Results are bit-identical to the direct path.
class Evaluator {
 public:
  Evaluator(std::shared_ptr<const SyntheticCohort> cohort, CohortVariant variant);
  Evaluator(std::shared_ptr<const SyntheticCohort> cohort, CohortVariant variant, ScorerParams scorer);

  const SyntheticCohort& cohort() const { return *cohort_; }
  CohortVariant variant() const { return variant_; }
  const ScorerParams& scorer() const { return scorer_; }

  std::vector<BitMask> masks(const PreprocParams& p) const;
  ThumbnailSet thumbnails(const PreprocParams& p) const;
  ThumbnailSet thumbnails(const std::vector<BitMask>& masks) const;
  FeatureSet features(const std::vector<PatchGrid>& grids) const;

  /// Full composition: segment, patch, thumbnail, extract, infer.
  Evaluation evaluate(const PreprocParams& p) const;

  /// Cheap path: masks and thumbnails only.
  ThumbnailRenderer renderer() const;

 private:
  const RasterImage& blurred(std::size_t slide, int k) const;

  std::shared_ptr<const SyntheticCohort> cohort_;
  CohortVariant variant_;
  ScorerParams scorer_;
  std::vector<RasterImage> thumbs_;
  std::vector<RasterImage> saturation_;
  std::vector<std::vector<FeatureVector>> cell_features_;  // row-major full grid
  int grid_rows_ = 0;
  int grid_cols_ = 0;
  mutable std::mutex blur_mutex_;
  mutable std::map<int, std::vector<RasterImage>> blurred_;
};

}  // namespace bahop
