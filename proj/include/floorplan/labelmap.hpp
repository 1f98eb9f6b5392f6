#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/tensor.hpp"

namespace floorplan {

// Dense per-pixel class ids, row-major.
struct LabelMap {
  int h = 0, w = 0;
  std::vector<std::uint8_t> v;

  LabelMap() = default;
  LabelMap(int h_, int w_, std::uint8_t fill = 0)
      : h(h_), w(w_), v(static_cast<std::size_t>(check(h_, w_)), fill) {}

  static std::int64_t check(int h, int w) {
    if (h < 0 || w < 0)
      throw ShapeError("negative label map extent (" + std::to_string(h) + "," +
                       std::to_string(w) + ")");
    return static_cast<std::int64_t>(h) * w;
  }

  std::uint8_t& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  bool operator==(const LabelMap&) const = default;
};

inline void require_same_extent(const LabelMap& a, const LabelMap& b) {
  if (a.h != b.h || a.w != b.w)
    throw ShapeError("label maps differ in extent: (" + std::to_string(a.h) + "," +
                     std::to_string(a.w) + ") vs (" + std::to_string(b.h) + "," +
                     std::to_string(b.w) + ")");
}

// Per-pixel argmax over the channel axis of one batch entry; ties resolve to
// the smallest channel id.
template <typename S>
LabelMap argmax_channels(const TensorT<S>& t, int batch = 0) {
  LabelMap m(t.shape.h, t.shape.w);
  for (int y = 0; y < t.shape.h; ++y)
    for (int x = 0; x < t.shape.w; ++x) {
      int best = 0;
      S bv = t.at(batch, 0, y, x);
      for (int c = 1; c < t.shape.c; ++c)
        if (t.at(batch, c, y, x) > bv) {
          bv = t.at(batch, c, y, x);
          best = c;
        }
      m.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return m;
}

// Pixel count of each class id in [0, num_classes).
inline std::vector<std::int64_t> class_pixel_counts(const LabelMap& m, int num_classes) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (std::uint8_t label : m.v) {
    if (label >= num_classes)
      throw DataError("label id " + std::to_string(int(label)) + " out of range [0," +
                      std::to_string(num_classes) + ")");
    ++counts[label];
  }
  return counts;
}

}  // namespace floorplan
