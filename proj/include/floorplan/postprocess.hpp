#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/labelmap.hpp"

namespace floorplan {

// True where the predicted class is any room-boundary element (wall, door,
// window) — i.e. anything but the background class at id 0.
inline std::vector<std::uint8_t> boundary_mask(const LabelMap& boundary_pred) {
  std::vector<std::uint8_t> mask(boundary_pred.v.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = boundary_pred.v[i] != 0;
  return mask;
}

// Decomposition of the non-boundary pixels into 4-connected regions. Region
// ids are assigned in first-encounter scan order, 1..count; id 0 marks
// boundary pixels.
struct RegionMap {
  int h = 0, w = 0;
  std::vector<std::int32_t> id;
  int count = 0;
  std::vector<std::vector<std::int32_t>> pixels;  // flat indices per region
  std::vector<std::uint8_t> touches_border;       // per region
};

inline RegionMap connected_regions(const std::vector<std::uint8_t>& mask, int h, int w) {
  if (h < 0 || w < 0 || mask.size() != static_cast<std::size_t>(h) * w)
    throw ShapeError("connected_regions: mask size does not match extent");
  RegionMap rm;
  rm.h = h;
  rm.w = w;
  rm.id.assign(mask.size(), 0);
  std::vector<std::int32_t> stack;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = static_cast<std::size_t>(y0) * w + x0;
      if (mask[start] || rm.id[start] != 0) continue;
      const std::int32_t region = ++rm.count;
      rm.pixels.emplace_back();
      rm.touches_border.push_back(0);
      rm.id[start] = region;
      stack.push_back(static_cast<std::int32_t>(start));
      while (!stack.empty()) {
        const std::int32_t i = stack.back();
        stack.pop_back();
        rm.pixels.back().push_back(i);
        const int y = i / w, x = i % w;
        if (y == 0 || y == h - 1 || x == 0 || x == w - 1) rm.touches_border.back() = 1;
        auto visit = [&](int yy, int xx) {
          const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
          if (!mask[j] && rm.id[j] == 0) {
            rm.id[j] = region;
            stack.push_back(static_cast<std::int32_t>(j));
          }
        };
        if (y > 0) visit(y - 1, x);
        if (y + 1 < h) visit(y + 1, x);
        if (x > 0) visit(y, x - 1);
        if (x + 1 < w) visit(y, x + 1);
      }
    }
  return rm;
}

struct PostprocessOptions {
  bool border_to_outside = true;   // regions touching the canvas border
  std::uint8_t outside_class = 0;  // class forced onto those regions
};

// Re-label every region with its most frequent predicted room class (ties to
// the smallest class id). Boundary pixels pass through unchanged; regions
// touching the border are forced to the outside class unless disabled.
inline LabelMap vote_room_types(const RegionMap& regions, const LabelMap& room_pred,
                                const PostprocessOptions& opts = {}) {
  if (regions.h != room_pred.h || regions.w != room_pred.w)
    throw ShapeError("vote_room_types: extents differ");
  LabelMap out = room_pred;
  std::vector<std::int64_t> histogram;
  for (int r = 0; r < regions.count; ++r) {
    const auto& px = regions.pixels[static_cast<std::size_t>(r)];
    std::uint8_t winner;
    if (opts.border_to_outside && regions.touches_border[static_cast<std::size_t>(r)]) {
      winner = opts.outside_class;
    } else {
      histogram.assign(256, 0);
      for (std::int32_t i : px) ++histogram[room_pred.v[static_cast<std::size_t>(i)]];
      int best = 0;
      for (int c = 1; c < 256; ++c)
        if (histogram[static_cast<std::size_t>(c)] > histogram[static_cast<std::size_t>(best)])
          best = c;  // strict > keeps the smallest id on ties
      winner = static_cast<std::uint8_t>(best);
    }
    for (std::int32_t i : px) out.v[static_cast<std::size_t>(i)] = winner;
  }
  return out;
}

// Full testing-time refinement: find regions bounded by the predicted
// boundary pixels, then majority-vote each region's room type.
inline LabelMap postprocess_rooms(const LabelMap& boundary_pred, const LabelMap& room_pred,
                                  const PostprocessOptions& opts = {}) {
  require_same_extent(boundary_pred, room_pred);
  const RegionMap rm =
      connected_regions(boundary_mask(boundary_pred), boundary_pred.h, boundary_pred.w);
  return vote_room_types(rm, room_pred, opts);
}

}  // namespace floorplan
