#include "bahop/similarity.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "bahop/errors.hpp"

namespace bahop {

Psnr Psnr::from_mse(double mse) {
  if (mse <= 0.0) return infinite();
  return finite(10.0 * std::log10(255.0 * 255.0 / mse));
}

std::string Psnr::to_string() const {
  if (infinite_) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", db_);
  return buf;
}

Psnr Psnr::parse(const std::string& s) {
  if (s == "inf") return infinite();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidInput("psnr: cannot parse '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw InvalidInput("psnr: cannot parse '" + s + "'");
  return finite(v);
}

SquaredError squared_error(const RasterImage& a, const RasterImage& b) {
  if (!a.same_geometry(b)) throw InvalidInput("psnr: geometry or channel mismatch");
  SquaredError e;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const std::int64_t d = static_cast<std::int64_t>(da[i]) - db[i];
    e.sum += static_cast<std::uint64_t>(d * d);
  }
  e.samples = da.size();
  return e;
}

Psnr psnr(const RasterImage& a, const RasterImage& b) {
  const auto e = squared_error(a, b);
  return Psnr::from_mse(static_cast<double>(e.sum) / static_cast<double>(e.samples));
}

Psnr set_psnr(const ThumbnailSet& a, const ThumbnailSet& b) {
  if (a.slide_ids != b.slide_ids || a.images.size() != b.images.size() ||
      a.images.size() != a.slide_ids.size()) {
    throw InvalidInput("set_psnr: slide ids differ between thumbnail sets");
  }
  if (a.factor != b.factor) throw InvalidInput("set_psnr: downsample factors differ");
  if (a.images.empty()) throw InvalidInput("set_psnr: empty thumbnail set");
  SquaredError total;
  for (std::size_t i = 0; i < a.images.size(); ++i) {
    const auto e = squared_error(a.images[i], b.images[i]);
    total.sum += e.sum;
    total.samples += e.samples;
  }
  return Psnr::from_mse(static_cast<double>(total.sum) / static_cast<double>(total.samples));
}

SimilarityThreshold calibrate_tau(const ThumbnailRenderer& render, const PreprocParams& p0) {
  p0.validate();
  const ThumbnailSet base = render(p0);
  if (base.size() == 0) throw InvalidInput("calibrate_tau: empty cohort");
  std::optional<double> tau;
  for (int delta : {-1, +1}) {
    const int t = p0.seg_thresh + delta;
    if (t < 0 || t > 255) continue;
    PreprocParams q = p0;
    q.seg_thresh = t;
    const Psnr s = set_psnr(base, render(q));
    if (s.is_infinite()) continue;
    if (!tau || s.db() < *tau) tau = s.db();
  }
  // PSNR <= 0 needs MSE >= 255^2; tau must stay positive.
  if (!tau || *tau <= 0.0) return {kFallbackTau};
  return {*tau};
}

}  // namespace bahop
