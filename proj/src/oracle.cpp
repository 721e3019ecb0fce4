#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "bahop/errors.hpp"
#include "bahop/oracle.hpp"

namespace bahop {

std::size_t FeatureSet::patch_count() const {
  std::size_t n = 0;
  for (const auto& s : per_slide) n += s.size();
  return n;
}

FeatureVector patch_statistics(const RasterImage& slide, int x0, int y0, int size) {
  if (slide.channels() != 3) throw InvalidInput("patch_statistics: slide must be RGB");
  if (x0 < 0 || y0 < 0 || x0 + size > slide.width() || y0 + size > slide.height()) {
    throw InvalidInput("patch_statistics: patch outside slide");
  }
  std::array<std::uint64_t, 3> sum{};
  std::array<std::uint64_t, 3> sum_sq{};
  std::uint64_t sat_sum = 0;
  std::uint64_t grad_sum = 0;
  for (int y = y0; y < y0 + size; ++y) {
    for (int x = x0; x < x0 + size; ++x) {
      const std::uint8_t r = slide.at(x, y, 0);
      const std::uint8_t g = slide.at(x, y, 1);
      const std::uint8_t b = slide.at(x, y, 2);
      for (int c = 0; c < 3; ++c) {
        const std::uint64_t v = slide.at(x, y, c);
        sum[static_cast<std::size_t>(c)] += v;
        sum_sq[static_cast<std::size_t>(c)] += v * v;
        if (x + 1 < x0 + size) grad_sum += static_cast<std::uint64_t>(std::abs(static_cast<int>(slide.at(x + 1, y, c)) - static_cast<int>(v)));
      }
      sat_sum += saturation_of(r, g, b);
    }
  }
  const double n = static_cast<double>(size) * size;
  FeatureVector f{};
  for (std::size_t c = 0; c < 3; ++c) {
    const double mean = static_cast<double>(sum[c]) / n;
    f[kMeanR + c] = mean;
    f[kVarR + c] = std::max(0.0, static_cast<double>(sum_sq[c]) / n - mean * mean);
  }
  f[kSatMean] = static_cast<double>(sat_sum) / n;
  const double pairs = size > 1 ? static_cast<double>(size) * (size - 1) * 3.0 : 1.0;
  f[kTexture] = static_cast<double>(grad_sum) / pairs;
  return f;
}

std::vector<PatchFeatures> extract_features(const RasterImage& slide, const PatchGrid& grid) {
  std::vector<PatchFeatures> out;
  out.reserve(grid.kept.size());
  for (const auto& pc : grid.kept) {
    out.push_back({pc, patch_statistics(slide, pc.col * grid.patch_size, pc.row * grid.patch_size,
                                        grid.patch_size)});
  }
  return out;
}

CostDelta extraction_cost(std::uint64_t patches) {
  return {patches, static_cast<double>(patches) * kMinutesPerPatch,
          patches * kFeatureDim * sizeof(float)};
}

ScorerParams ScorerParams::for_variant(CohortVariant v) {
  ScorerParams s;
  s.pale_weight = v == CohortVariant::B ? 20.0 : 0.0;
  return s;
}

bool is_pale_patch(const FeatureVector& f) {
  const double brightness = (f[kMeanR] + f[kMeanG] + f[kMeanB]) / 3.0;
  const double var = std::max({f[kVarR], f[kVarG], f[kVarB]});
  return f[kSatMean] < 40.0 && brightness < 235.0 && var < 150.0;
}

double patch_score(const FeatureVector& f, const ScorerParams& s) {
  return s.texture_weight * f[kTexture] + (is_pale_patch(f) ? s.pale_weight : 0.0);
}

double infer(const FeatureSet& features, const SyntheticCohort& cohort, const ScorerParams& s) {
  if (features.slide_ids.size() != features.per_slide.size()) {
    throw InvalidInput("infer: malformed feature set");
  }
  std::vector<int> seen(cohort.slides.size(), 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < features.slide_ids.size(); ++i) {
    const auto it = std::find_if(cohort.slides.begin(), cohort.slides.end(),
                                 [&](const Slide& sl) { return sl.id == features.slide_ids[i]; });
    if (it == cohort.slides.end()) throw InvalidInput("infer: unknown slide id " + features.slide_ids[i]);
    const auto idx = static_cast<std::size_t>(it - cohort.slides.begin());
    if (seen[idx]++) throw InvalidInput("infer: slide " + it->id + " listed twice");
    double best = -INFINITY;
    for (const auto& pf : features.per_slide[i]) best = std::max(best, patch_score(pf.values, s));
    // No patches: max over an empty set, predicted normal.
    const bool tumor = !features.per_slide[i].empty() && best > s.threshold;
    if (tumor == (it->label == SlideLabel::tumor)) ++correct;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw InvalidInput("infer: features missing slide " + cohort.slides[i].id);
  }
  return static_cast<double>(correct) / static_cast<double>(cohort.slides.size());
}

double infer(const FeatureSet& features, const SyntheticCohort& cohort, CohortVariant v) {
  return infer(features, cohort, ScorerParams::for_variant(v));
}

Evaluator::Evaluator(std::shared_ptr<const SyntheticCohort> cohort, CohortVariant variant)
    : Evaluator(cohort, variant, ScorerParams::for_variant(variant)) {}

Evaluator::Evaluator(std::shared_ptr<const SyntheticCohort> cohort, CohortVariant variant,
                     ScorerParams scorer)
    : cohort_(std::move(cohort)), variant_(variant), scorer_(scorer) {
  if (!cohort_ || cohort_->slides.empty()) throw InvalidInput("Evaluator: empty cohort");
  const int ps = cohort_->settings.patch_size;
  grid_rows_ = cohort_->settings.height / ps;
  grid_cols_ = cohort_->settings.width / ps;
  for (const auto& s : cohort_->slides) {
    thumbs_.push_back(downsample(s.raster, kThumbFactor));
    saturation_.push_back(saturation_channel(thumbs_.back()));
    std::vector<FeatureVector> cells;
    cells.reserve(static_cast<std::size_t>(grid_rows_) * grid_cols_);
    for (int r = 0; r < grid_rows_; ++r) {
      for (int c = 0; c < grid_cols_; ++c) cells.push_back(patch_statistics(s.raster, c * ps, r * ps, ps));
    }
    cell_features_.push_back(std::move(cells));
  }
}

const RasterImage& Evaluator::blurred(std::size_t slide, int k) const {
  std::lock_guard lock(blur_mutex_);
  auto it = blurred_.find(k);
  if (it == blurred_.end()) {
    std::vector<RasterImage> v;
    for (const auto& s : saturation_) v.push_back(median_blur(s, k));
    it = blurred_.emplace(k, std::move(v)).first;
  }
  return it->second[slide];
}

std::vector<BitMask> Evaluator::masks(const PreprocParams& p) const {
  p.validate();
  std::vector<BitMask> out;
  out.reserve(thumbs_.size());
  for (std::size_t i = 0; i < thumbs_.size(); ++i) out.push_back(segment_blurred(blurred(i, p.blur_k), p));
  return out;
}

ThumbnailSet Evaluator::thumbnails(const std::vector<BitMask>& masks) const {
  ThumbnailSet t;
  t.factor = kThumbFactor;
  t.slide_ids = cohort_->slide_ids();
  for (std::size_t i = 0; i < thumbs_.size(); ++i) {
    t.images.push_back(render_thumbnail_downsampled(thumbs_[i], masks.at(i)));
  }
  return t;
}

ThumbnailSet Evaluator::thumbnails(const PreprocParams& p) const { return thumbnails(masks(p)); }

FeatureSet Evaluator::features(const std::vector<PatchGrid>& grids) const {
  FeatureSet fs;
  fs.slide_ids = cohort_->slide_ids();
  for (std::size_t i = 0; i < grids.size(); ++i) {
    std::vector<PatchFeatures> pf;
    pf.reserve(grids[i].kept.size());
    for (const auto& pc : grids[i].kept) {
      pf.push_back({pc, cell_features_[i][static_cast<std::size_t>(pc.row) * grid_cols_ + pc.col]});
    }
    fs.per_slide.push_back(std::move(pf));
  }
  return fs;
}

Evaluation Evaluator::evaluate(const PreprocParams& p) const {
  Evaluation e;
  e.masks = masks(p);
  e.thumbnails = thumbnails(e.masks);
  for (const auto& m : e.masks) e.grids.push_back(extract_patches(m, cohort_->settings.patch_size));
  const FeatureSet fs = features(e.grids);
  e.cost = extraction_cost(fs.patch_count());
  e.objective = infer(fs, *cohort_, scorer_);
  return e;
}

ThumbnailRenderer Evaluator::renderer() const {
  return [this](const PreprocParams& p) { return thumbnails(p); };
}

}  // namespace bahop
