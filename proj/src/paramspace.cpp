#include "bahop/paramspace.hpp"

#include <algorithm>
#include <sstream>

#include "bahop/errors.hpp"

namespace bahop {

namespace {

std::vector<int> range(int lo, int hi, int step) {
  std::vector<int> v;
  for (int x = lo; x <= hi; x += step) v.push_back(x);
  return v;
}

}  // namespace

ParamSpace::ParamSpace(Axes axes) : axes_(std::move(axes)) {
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    const auto& g = axes_[a];
    const std::string name = kParamNames[a];
    if (g.empty()) throw InvalidParameter("ParamSpace: axis " + name + " is empty");
    for (std::size_t i = 1; i < g.size(); ++i) {
      if (g[i] <= g[i - 1]) throw InvalidParameter("ParamSpace: axis " + name + " not strictly increasing");
    }
    // Reuse the field-range checks by validating each extreme against a
    // known-good base.
    for (int v : {g.front(), g.back()}) {
      auto vals = default_start().values();
      vals[a] = v;
      PreprocParams::from_values(vals).validate();
    }
    if (a == 1) {
      for (int v : g) {
        if (v % 2 == 0) throw InvalidParameter("ParamSpace: blur_k axis must contain only odd values");
      }
    }
  }
  if (size() <= 1) throw InvalidParameter("ParamSpace: space must contain more than one configuration");
}

ParamSpace ParamSpace::desk() {
  return ParamSpace(Axes{range(4, 13, 1), {3, 5, 7, 9}, range(1, 6, 1), {40, 70, 100, 130},
                         {4, 8, 16, 32}, {0, 2, 4, 8}});
}

ParamSpace ParamSpace::small() {
  return ParamSpace(Axes{range(6, 11, 1), {5, 7, 9}, {2, 4, 6}, {40, 70, 100, 130}, {8, 16, 32},
                         {0, 8}});
}

std::uint64_t ParamSpace::size() const {
  std::uint64_t n = 1;
  for (const auto& g : axes_) n *= g.size();
  return n;
}

bool ParamSpace::contains(const PreprocParams& p) const {
  const auto v = p.values();
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    if (!std::binary_search(axes_[a].begin(), axes_[a].end(), v[a])) return false;
  }
  return true;
}

std::array<std::size_t, PreprocParams::kAxes> ParamSpace::coords(const PreprocParams& p) const {
  std::array<std::size_t, PreprocParams::kAxes> c{};
  const auto v = p.values();
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    auto it = std::lower_bound(axes_[a].begin(), axes_[a].end(), v[a]);
    if (it == axes_[a].end() || *it != v[a]) {
      throw InvalidInput("ParamSpace: " + canonical_key(p) + " is not on the grid (" +
                         kParamNames[a] + ")");
    }
    c[a] = static_cast<std::size_t>(it - axes_[a].begin());
  }
  return c;
}

PreprocParams ParamSpace::at_coords(const std::array<std::size_t, PreprocParams::kAxes>& c) const {
  std::array<int, PreprocParams::kAxes> v{};
  for (std::size_t a = 0; a < axes_.size(); ++a) v[a] = axes_[a].at(c[a]);
  return PreprocParams::from_values(v);
}

std::uint64_t ParamSpace::index_of(const PreprocParams& p) const {
  const auto c = coords(p);
  std::uint64_t idx = 0;
  for (std::size_t a = 0; a < axes_.size(); ++a) idx = idx * axes_[a].size() + c[a];
  return idx;
}

PreprocParams ParamSpace::at(std::uint64_t index) const {
  if (index >= size()) throw InvalidInput("ParamSpace: index out of range");
  std::array<std::size_t, PreprocParams::kAxes> c{};
  for (std::size_t a = axes_.size(); a-- > 0;) {
    c[a] = static_cast<std::size_t>(index % axes_[a].size());
    index /= axes_[a].size();
  }
  return at_coords(c);
}

std::array<double, PreprocParams::kAxes> ParamSpace::normalized(const PreprocParams& p) const {
  const auto c = coords(p);
  std::array<double, PreprocParams::kAxes> out{};
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    const auto n = axes_[a].size();
    out[a] = n > 1 ? static_cast<double>(c[a]) / static_cast<double>(n - 1) : 0.0;
  }
  return out;
}

std::vector<PreprocParams> ParamSpace::neighbors(const PreprocParams& p) const {
  std::vector<PreprocParams> out;
  const auto c = coords(p);
  for (std::size_t a = 0; a < axes_.size(); ++a) {
    if (c[a] > 0) {
      auto d = c;
      --d[a];
      out.push_back(at_coords(d));
    }
    if (c[a] + 1 < axes_[a].size()) {
      auto u = c;
      ++u[a];
      out.push_back(at_coords(u));
    }
  }
  return out;
}

std::string canonical_key(const PreprocParams& p) {
  const auto v = p.values();
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ':';
    s += std::to_string(v[i]);
  }
  return s;
}

PreprocParams parse_key(const std::string& key) {
  std::array<int, PreprocParams::kAxes> v{};
  std::istringstream in(key);
  std::string part;
  std::size_t i = 0;
  while (std::getline(in, part, ':')) {
    if (i >= v.size()) throw InvalidInput("parse_key: too many fields in '" + key + "'");
    try {
      std::size_t used = 0;
      v[i] = std::stoi(part, &used);
      if (used != part.size()) throw InvalidInput("");
    } catch (const std::exception&) {
      throw InvalidInput("parse_key: bad field in '" + key + "'");
    }
    ++i;
  }
  if (i != v.size()) throw InvalidInput("parse_key: expected 6 fields in '" + key + "'");
  return PreprocParams::from_values(v);
}

PreprocParams perturb(const PreprocParams& p, const ParamSpace& space, Rng& rng) {
  auto c = space.coords(p);
  std::vector<std::size_t> movable;
  for (std::size_t a = 0; a < PreprocParams::kAxes; ++a) {
    if (space.axis(a).size() > 1) movable.push_back(a);
  }
  const std::size_t a = movable[rng.below(movable.size())];
  const std::size_t last = space.axis(a).size() - 1;
  const bool up = c[a] == 0 ? true : (c[a] == last ? false : rng.coin());
  c[a] = up ? c[a] + 1 : c[a] - 1;
  return space.at_coords(c);
}

std::vector<PreprocParams> enumerate(const ParamSpace& space) {
  std::vector<PreprocParams> out;
  out.reserve(static_cast<std::size_t>(space.size()));
  for (std::uint64_t i = 0; i < space.size(); ++i) out.push_back(space.at(i));
  return out;
}

}  // namespace bahop
