#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bahop/imaging.hpp"
#include "bahop/segmentation.hpp"

namespace bahop {

/// Peak signal-to-noise ratio in decibels. Identical inputs yield the
/// distinguished infinite value, which compares greater than every finite one.
class Psnr {
 public:
  static Psnr infinite() { return Psnr(true, 0.0); }
  static Psnr finite(double db) { return Psnr(false, db); }
  /// 10*log10(255^2 / mse); infinite when mse == 0.
  static Psnr from_mse(double mse);

  bool is_infinite() const { return infinite_; }
  /// Decibels; only meaningful when finite.
  double db() const { return db_; }

  /// Gate test: strictly above a finite threshold. Infinite always passes.
  bool exceeds(double tau) const { return infinite_ || db_ > tau; }

  /// Ledger text form: 4 fractional digits, or "inf".
  std::string to_string() const;
  static Psnr parse(const std::string& s);

  friend bool operator==(const Psnr& a, const Psnr& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.db_ == b.db_);
  }
  friend bool operator<(const Psnr& a, const Psnr& b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.db_ < b.db_;
  }

 private:
  Psnr(bool inf, double db) : infinite_(inf), db_(db) {}
  bool infinite_;
  double db_;
};

/// Masked thumbnails keyed by slide id, all at the same downsample factor.
struct ThumbnailSet {
  int factor = kThumbFactor;
  std::vector<std::string> slide_ids;
  std::vector<RasterImage> images;

  std::size_t size() const { return images.size(); }
};

/// Sum of squared differences and sample count; accumulated in integers so
/// pooled results do not depend on summation order.
struct SquaredError {
  std::uint64_t sum = 0;
  std::uint64_t samples = 0;
};

SquaredError squared_error(const RasterImage& a, const RasterImage& b);

Psnr psnr(const RasterImage& a, const RasterImage& b);

/// One PSNR from the MSE pooled over every slide pair. Slide ids must match
/// pairwise in order.
Psnr set_psnr(const ThumbnailSet& a, const ThumbnailSet& b);

/// Gate threshold in decibels; always finite and positive.
struct SimilarityThreshold {
  double tau = 30.0;
};

inline constexpr double kFallbackTau = 30.0;

/// Renders the cohort's thumbnails for a parameter vector.
using ThumbnailRenderer = std::function<ThumbnailSet(const PreprocParams&)>;

/// tau = min over the representable seg_thresh +-1 neighbours of
/// set_psnr(thumbs(p0), thumbs(neighbour)), ignoring infinite comparisons;
/// kFallbackTau if every neighbour is infinite.
SimilarityThreshold calibrate_tau(const ThumbnailRenderer& render, const PreprocParams& p0);

}  // namespace bahop
