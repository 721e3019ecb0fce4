#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bahop/rng.hpp"
#include "bahop/segmentation.hpp"

namespace bahop {

/// Discrete hyperparameter space: one strictly increasing value grid per
/// PreprocParams field.
class ParamSpace {
 public:
  using Axes = std::array<std::vector<int>, PreprocParams::kAxes>;

  ParamSpace() = default;
  /// Validates the grids; throws InvalidParameter.
  explicit ParamSpace(Axes axes);

  /// 10*4*6*4*4*4 = 15,360 configurations.
  static ParamSpace desk();
  /// 6*3*3*4*3*2 = 1,296 configurations; enumerable per test.
  static ParamSpace small();
  static PreprocParams default_start() { return PreprocParams{8, 7, 4, 100, 16, 8}; }

  const Axes& axes() const { return axes_; }
  const std::vector<int>& axis(std::size_t i) const { return axes_[i]; }
  std::uint64_t size() const;

  bool contains(const PreprocParams& p) const;
  /// Position of p's value on each axis; throws InvalidInput if p is off-grid.
  std::array<std::size_t, PreprocParams::kAxes> coords(const PreprocParams& p) const;
  PreprocParams at_coords(const std::array<std::size_t, PreprocParams::kAxes>& c) const;

  /// Lexicographic rank (first axis most significant) and its inverse.
  std::uint64_t index_of(const PreprocParams& p) const;
  PreprocParams at(std::uint64_t index) const;

  /// Per-axis position scaled to [0, 1].
  std::array<double, PreprocParams::kAxes> normalized(const PreprocParams& p) const;

  /// Configurations at L0 grid distance 1.
  std::vector<PreprocParams> neighbors(const PreprocParams& p) const;

  friend bool operator==(const ParamSpace&, const ParamSpace&) = default;

 private:
  Axes axes_;
};

/// "x1:x2:x3:x4:x5:x6".
std::string canonical_key(const PreprocParams& p);
PreprocParams parse_key(const std::string& key);

/// Moves one grid step along one uniformly chosen movable axis. The
/// direction is a fair coin except at a grid edge, where the only legal
/// direction is taken.
PreprocParams perturb(const PreprocParams& p, const ParamSpace& space, Rng& rng);

/// Every configuration in lexicographic order.
std::vector<PreprocParams> enumerate(const ParamSpace& space);

}  // namespace bahop
