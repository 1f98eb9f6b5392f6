#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/image.hpp"
#include "floorplan/labelmap.hpp"
#include "floorplan/palette.hpp"

namespace floorplan {

// Class ids matching Palette::defaults() line order.
namespace cls {
constexpr std::uint8_t b_background = 0, b_wall = 1, b_door = 2, b_window = 3;
constexpr std::uint8_t r_outside = 0, r_closet = 1, r_bathroom = 2, r_living = 3,
                       r_bedroom = 4, r_hall = 5, r_balcony = 6, r_other = 7,
                       r_inside_bg = 8;
}  // namespace cls

struct Sample {
  std::string id;
  GrayImage image;
  LabelMap boundary_labels;
  LabelMap room_labels;
  bool operator==(const Sample&) const = default;
};

struct GenSpec {
  std::uint64_t seed = 1;
  int canvas = 64;
  int rooms_min = 3, rooms_max = 6;
  int min_room_size = 12;
  int wall_thickness_min = 2, wall_thickness_max = 3;
  int door_width_min = 3, door_width_max = 5;
  double window_density = 0.3;
  bool irregular = false;

  void validate() const {
    if (canvas < 8) throw DataError("gen spec: canvas too small");
    if (rooms_min < 1 || rooms_min > rooms_max) throw DataError("gen spec: empty room range");
    if (wall_thickness_min < 1 || wall_thickness_min > wall_thickness_max)
      throw DataError("gen spec: empty wall thickness range");
    if (door_width_min < 1 || door_width_min > door_width_max)
      throw DataError("gen spec: empty door width range");
    if (min_room_size <= 2 * wall_thickness_max)
      throw DataError("gen spec: min room size must exceed twice the max wall thickness");
    if (!(window_density >= 0.0 && window_density <= 1.0))
      throw DataError("gen spec: window density outside [0,1]");
  }
};

// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct RectI {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
  long long area() const { return static_cast<long long>(w()) * h(); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  bool operator==(const RectI&) const = default;
};

struct RoomInfo {
  RectI rect;
  int area = 0;  // interior pixels (rect minus walls)
  std::uint8_t room_class = 0;
};

// Generator self-report, used by validation tests.
struct GenMeta {
  int wall_thickness = 0;
  int target_rooms = 0;
  std::vector<RectI> footprint;       // 1 part, or 2 when the outline is L-shaped
  std::vector<RectI> internal_walls;  // one strip per partition edge
  std::vector<RoomInfo> rooms;        // final partition leaves, creation order
};

namespace detail {

// Intensity levels the image is synthesized from; class separation is much
// larger than the +/-3 noise so labels stay recoverable.
constexpr int kLevelOutside = 250, kLevelFloor = 218, kLevelWall = 40, kLevelDoor = 140,
              kLevelWindow = 90;

inline bool inside_footprint(const std::vector<RectI>& parts, int x, int y) {
  for (const RectI& r : parts)
    if (r.contains(x, y)) return true;
  return false;
}

// Fixed geometry rule mapping each partition leaf to a room class: narrow
// leaves become halls, the rest are ranked by interior area. Deterministic,
// so the class is learnable from shape alone.
inline void assign_room_classes(std::vector<RoomInfo>& rooms) {
  constexpr std::uint8_t by_rank[] = {cls::r_living, cls::r_bedroom, cls::r_bathroom,
                                      cls::r_closet, cls::r_balcony, cls::r_other};
  std::vector<std::size_t> ranked;
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    const RectI& r = rooms[i].rect;
    const double aspect =
        static_cast<double>(std::max(r.w(), r.h())) / std::max(1, std::min(r.w(), r.h()));
    if (aspect >= 2.5)
      rooms[i].room_class = cls::r_hall;
    else
      ranked.push_back(i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
    return rooms[a].area > rooms[b].area;
  });
  for (std::size_t k = 0; k < ranked.size(); ++k)
    rooms[ranked[k]].room_class = by_rank[std::min(k, std::size(by_rank) - 1)];
}

}  // namespace detail

// Deterministic synthetic floor plan: binary-space-partition of the building
// footprint into rooms, partition edges rasterized as wall strips, one door
// gap per internal wall, window strips on exterior walls, and a grayscale
// image synthesized from the labels plus mild noise.
inline Sample generate_synthetic(const GenSpec& spec, GenMeta* meta_out = nullptr) {
  spec.validate();
  Rng rng(spec.seed);
  const int S = spec.canvas;
  const int tau = rng.uniform_int(spec.wall_thickness_min, spec.wall_thickness_max);
  int target = rng.uniform_int(spec.rooms_min, spec.rooms_max);
  const int min_leaf = spec.min_room_size;
  const int min_part = min_leaf + 2 * tau;  // a part must host >= 1 walled room

  const int margin = tau + std::max(2, S / 32);
  const RectI building{margin, margin, S - margin, S - margin};
  if (building.w() < min_part || building.h() < min_part)
    throw DataError("gen spec infeasible: canvas " + std::to_string(S) +
                    " cannot fit a room of size " + std::to_string(min_leaf));

  struct Split {
    RectI wall;  // rasterized strip
  };
  std::vector<Split> splits;
  const int half = tau / 2;

  std::vector<RectI> parts{building};
  if (spec.irregular) {
    if (building.w() < 2 * min_part || building.h() < 2 * min_part || spec.rooms_max < 2)
      throw DataError("gen spec infeasible: L-shaped outline needs space for two rooms");
    const int corner = rng.uniform_int(0, 3);
    const int cut_w = rng.uniform_int(min_part, building.w() - min_part);
    const int cut_h = rng.uniform_int(min_part, building.h() - min_part);
    const bool right = corner == 1 || corner == 3;
    const bool bottom = corner >= 2;
    const int cx0 = right ? building.x1 - cut_w : building.x0;
    const int cy0 = bottom ? building.y1 - cut_h : building.y0;
    // Column beside the cut spans full height; the rest of the cut column
    // keeps only the uncut rows.
    const RectI col{right ? building.x0 : building.x0 + cut_w, building.y0,
                    right ? building.x1 - cut_w : building.x1, building.y1};
    const RectI rest{cx0, bottom ? building.y0 : building.y0 + cut_h, cx0 + cut_w,
                     bottom ? building.y1 - cut_h : building.y1};
    parts = {col, rest};
    target = std::max(target, 2);
    // The two parts are separate rooms, so their shared edge is a partition
    // edge and gets a wall (and later a door) like any split.
    const int cx = right ? building.x1 - cut_w : building.x0 + cut_w;
    splits.push_back({RectI{cx - half, rest.y0, cx - half + tau, rest.y1}});
  }

  // Recursive partition: always split the largest splittable leaf.
  std::vector<RectI> leaves = parts;
  while (static_cast<int>(leaves.size()) < target) {
    std::size_t pick = leaves.size();
    long long best = -1;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const RectI& r = leaves[i];
      if (std::max(r.w(), r.h()) >= 2 * min_leaf && r.area() > best) {
        best = r.area();
        pick = i;
      }
    }
    if (pick == leaves.size()) {
      if (static_cast<int>(leaves.size()) >= spec.rooms_min) break;
      throw DataError("gen spec infeasible: cannot fit " + std::to_string(spec.rooms_min) +
                      " rooms of size " + std::to_string(min_leaf) + " on canvas " +
                      std::to_string(S));
    }
    RectI r = leaves[pick];
    if (r.w() >= r.h()) {
      const int c = r.x0 + rng.uniform_int(min_leaf, r.w() - min_leaf);
      splits.push_back({RectI{c - half, r.y0, c - half + tau, r.y1}});
      leaves[pick] = RectI{r.x0, r.y0, c, r.y1};
      leaves.push_back(RectI{c, r.y0, r.x1, r.y1});
    } else {
      const int c = r.y0 + rng.uniform_int(min_leaf, r.h() - min_leaf);
      splits.push_back({RectI{r.x0, c - half, r.x1, c - half + tau}});
      leaves[pick] = RectI{r.x0, r.y0, r.x1, c};
      leaves.push_back(RectI{r.x0, c, r.x1, r.y1});
    }
  }

  LabelMap boundary(S, S, cls::b_background);
  LabelMap room(S, S, cls::r_outside);

  // Exterior walls: footprint pixels within Chebyshev distance tau of the
  // outside. Handles the L-shaped outline's corners uniformly.
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      if (!detail::inside_footprint(parts, x, y)) continue;
      bool near_outside = false;
      for (int dy = -tau; dy <= tau && !near_outside; ++dy)
        for (int dx = -tau; dx <= tau && !near_outside; ++dx)
          if (!detail::inside_footprint(parts, x + dx, y + dy)) near_outside = true;
      if (near_outside) boundary.at(y, x) = cls::b_wall;
    }

  for (const Split& s : splits)
    for (int y = std::max(0, s.wall.y0); y < std::min(S, s.wall.y1); ++y)
      for (int x = std::max(0, s.wall.x0); x < std::min(S, s.wall.x1); ++x)
        if (detail::inside_footprint(parts, x, y)) boundary.at(y, x) = cls::b_wall;

  // One door gap per internal wall, inset tau from the segment ends so the
  // gap clears crossing walls. The gap keeps full wall thickness.
  for (const Split& s : splits) {
    const bool vertical = s.wall.h() >= s.wall.w();
    const int len = vertical ? s.wall.h() : s.wall.w();
    const int usable = len - 2 * tau;
    int width = rng.uniform_int(spec.door_width_min, spec.door_width_max);
    if (usable < 1) continue;
    width = std::min(width, usable);
    const int off = tau + rng.uniform_int(0, usable - width);
    for (int t = 0; t < width; ++t)
      for (int u = 0; u < tau; ++u) {
        const int x = vertical ? s.wall.x0 + u : s.wall.x0 + off + t;
        const int y = vertical ? s.wall.y0 + off + t : s.wall.y0 + u;
        if (x >= 0 && x < S && y >= 0 && y < S && boundary.at(y, x) == cls::b_wall)
          boundary.at(y, x) = cls::b_door;
      }
  }

  // Window strips along exterior wall runs, spread to cover roughly
  // window_density of each run's usable length.
  auto place_windows = [&](int fixed, int lo, int hi, bool horizontal, int out_step) {
    // Probe one pixel beyond the wall face; a run is exterior where the probe
    // leaves the footprint.
    int run_start = -1;
    auto flush = [&](int run_end) {
      if (run_start < 0) return;
      const int len = run_end - run_start;
      const int inset = tau + 1;
      const int usable = len - 2 * inset;
      run_start = -1;
      if (usable < spec.door_width_min) return;
      int seg = rng.uniform_int(spec.door_width_min, spec.door_width_max);
      seg = std::min(seg, usable);
      const int count =
          static_cast<int>(std::floor(spec.window_density * usable / seg + 1e-12));
      for (int i = 0; i < count; ++i) {
        const double center = run_start + inset + (i + 0.5) * (double(usable) / count);
        const int start = static_cast<int>(std::lround(center - seg / 2.0));
        for (int t = 0; t < seg; ++t)
          for (int u = 0; u < tau; ++u) {
            const int x = horizontal ? start + t : fixed + (out_step > 0 ? u : -u);
            const int y = horizontal ? fixed + (out_step > 0 ? u : -u) : start + t;
            if (x >= 0 && x < S && y >= 0 && y < S && boundary.at(y, x) == cls::b_wall)
              boundary.at(y, x) = cls::b_window;
          }
      }
    };
    for (int p = lo; p < hi; ++p) {
      const int px = horizontal ? p : fixed - out_step;
      const int py = horizontal ? fixed - out_step : p;
      const bool exterior = !detail::inside_footprint(parts, px, py);
      if (exterior && run_start < 0) run_start = p;
      if (!exterior) flush(p);
    }
    flush(hi);
  };
  for (const RectI& part : parts) {
    place_windows(part.y0, part.x0, part.x1, true, +1);       // top side, wall grows down
    place_windows(part.y1 - 1, part.x0, part.x1, true, -1);   // bottom side
    place_windows(part.x0, part.y0, part.y1, false, +1);      // left side
    place_windows(part.x1 - 1, part.y0, part.y1, false, -1);  // right side
  }

  // Room interiors: leaf pixels not claimed by any wall.
  std::vector<RoomInfo> rooms(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    rooms[i].rect = leaves[i];
    int area = 0;
    for (int y = leaves[i].y0; y < leaves[i].y1; ++y)
      for (int x = leaves[i].x0; x < leaves[i].x1; ++x)
        if (boundary.at(y, x) == cls::b_background &&
            detail::inside_footprint(parts, x, y))
          ++area;
    rooms[i].area = area;
  }
  detail::assign_room_classes(rooms);
  for (const RoomInfo& ri : rooms)
    for (int y = ri.rect.y0; y < ri.rect.y1; ++y)
      for (int x = ri.rect.x0; x < ri.rect.x1; ++x)
        if (boundary.at(y, x) == cls::b_background &&
            detail::inside_footprint(parts, x, y))
          room.at(y, x) = ri.room_class;
  for (int i = 0; i < S * S; ++i)
    if (boundary.v[static_cast<std::size_t>(i)] != cls::b_background)
      room.v[static_cast<std::size_t>(i)] = cls::r_inside_bg;

  // Image synthesized from the labels; every room class shares one floor
  // intensity so room type is only recoverable from geometry.
  GrayImage image(S, S);
  for (int y = 0; y < S; ++y)
    for (int x = 0; x < S; ++x) {
      int level = detail::kLevelOutside;
      switch (boundary.at(y, x)) {
        case cls::b_wall: level = detail::kLevelWall; break;
        case cls::b_door: level = detail::kLevelDoor; break;
        case cls::b_window: level = detail::kLevelWindow; break;
        default:
          if (room.at(y, x) != cls::r_outside) level = detail::kLevelFloor;
      }
      const int noise = static_cast<int>(rng.next_u64() % 7) - 3;
      image.at(y, x) = static_cast<std::uint8_t>(std::clamp(level + noise, 0, 255));
    }

  Sample s;
  s.id = "plan_" + std::to_string(spec.seed);
  s.image = std::move(image);
  s.boundary_labels = std::move(boundary);
  s.room_labels = std::move(room);
  if (meta_out) {
    meta_out->wall_thickness = tau;
    meta_out->target_rooms = target;
    meta_out->footprint = parts;
    meta_out->internal_walls.clear();
    for (const Split& sp : splits) meta_out->internal_walls.push_back(sp.wall);
    meta_out->rooms = rooms;
  }
  return s;
}

// Structural checks every sample must satisfy: shared extents, ids in range,
// boundary pixels carrying only outside/inside background room labels, each
// interior region a single room class, and every room region fully enclosed
// by boundary-class pixels (flood fill from the canvas border).
inline void validate_sample(const Sample& s, int boundary_classes = 4, int room_classes = 9) {
  const int h = s.boundary_labels.h, w = s.boundary_labels.w;
  if (s.room_labels.h != h || s.room_labels.w != w || s.image.h != h || s.image.w != w)
    throw DataError("sample '" + s.id + "': layer extents differ");
  const std::uint8_t inside_bg = static_cast<std::uint8_t>(room_classes - 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::uint8_t b = s.boundary_labels.at(y, x), r = s.room_labels.at(y, x);
      if (b >= boundary_classes || r >= room_classes)
        throw DataError("sample '" + s.id + "': label out of range at (" + std::to_string(x) +
                        "," + std::to_string(y) + ")");
      if (b != cls::b_background && r != cls::r_outside && r != inside_bg)
        throw DataError("sample '" + s.id + "': boundary pixel at (" + std::to_string(x) + "," +
                        std::to_string(y) + ") has room class " + std::to_string(int(r)));
    }

  // Flood fill over non-boundary pixels from the border: reachable pixels
  // must be outside; unreached non-boundary pixels are room interiors whose
  // regions must be single-class.
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<int> stack;
  auto push = [&](int y, int x) {
    const std::size_t i = static_cast<std::size_t>(y) * w + x;
    if (!seen[i] && s.boundary_labels.v[i] == cls::b_background) {
      seen[i] = 1;
      stack.push_back(static_cast<int>(i));
    }
  };
  for (int x = 0; x < w; ++x) {
    push(0, x);
    push(h - 1, x);
  }
  for (int y = 0; y < h; ++y) {
    push(y, 0);
    push(y, w - 1);
  }
  auto drain = [&](bool outside_pass, std::uint8_t region_class) {
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      const int y = i / w, x = i % w;
      const std::uint8_t r = s.room_labels.v[static_cast<std::size_t>(i)];
      if (outside_pass && r != cls::r_outside)
        throw DataError("sample '" + s.id + "': room region leaks to the border at (" +
                        std::to_string(x) + "," + std::to_string(y) + ")");
      if (!outside_pass && r != region_class)
        throw DataError("sample '" + s.id + "': mixed room classes in one region at (" +
                        std::to_string(x) + "," + std::to_string(y) + ")");
      if (y > 0) push(y - 1, x);
      if (y + 1 < h) push(y + 1, x);
      if (x > 0) push(y, x - 1);
      if (x + 1 < w) push(y, x + 1);
    }
  };
  drain(true, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!seen[i] && s.boundary_labels.v[i] == cls::b_background) {
        push(y, x);
        drain(false, s.room_labels.v[i]);
      }
    }
}

// Number of 4-connected components of room-class pixels (used to check the
// generator's self-reported room count).
inline int count_room_regions(const Sample& s, int room_classes = 9) {
  const int h = s.room_labels.h, w = s.room_labels.w;
  const std::uint8_t inside_bg = static_cast<std::uint8_t>(room_classes - 1);
  auto is_room = [&](std::size_t i) {
    const std::uint8_t r = s.room_labels.v[i];
    return r != cls::r_outside && r != inside_bg;
  };
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(h) * w, 0);
  std::vector<int> stack;
  int regions = 0;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      const std::size_t start = static_cast<std::size_t>(y0) * w + x0;
      if (seen[start] || !is_room(start)) continue;
      ++regions;
      seen[start] = 1;
      stack.push_back(static_cast<int>(start));
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int y = i / w, x = i % w;
        auto push = [&](int yy, int xx) {
          const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
          if (!seen[j] && is_room(j)) {
            seen[j] = 1;
            stack.push_back(static_cast<int>(j));
          }
        };
        if (y > 0) push(y - 1, x);
        if (y + 1 < h) push(y + 1, x);
        if (x > 0) push(y, x - 1);
        if (x + 1 < w) push(y, x + 1);
      }
    }
  return regions;
}

struct Corpus {
  std::vector<Sample> train, test;
  std::string manifest;  // UTF-8 lines "id,seed,split"
};

namespace detail {

inline std::string sample_id(const char* split, int index, int total) {
  int width = 3, v = total > 0 ? total - 1 : 0;
  for (int d = 1000; v >= d; d *= 10) ++width;
  std::ostringstream os;
  os << split << '_' << std::setw(width) << std::setfill('0') << index;
  return os.str();
}

}  // namespace detail

// Deterministic corpus: sample k (train first, then test) uses seed
// spec.seed + 1 + k, so splits never share a seed and regeneration from the
// manifest reproduces every sample bitwise.
inline Corpus make_corpus(const GenSpec& spec, int n_train, int n_test) {
  if (n_train < 1 || n_test < 1) throw DataError("corpus: need at least one sample per split");
  Corpus c;
  std::ostringstream manifest;
  std::uint64_t next_seed = spec.seed + 1;
  auto emit = [&](const char* split, int n, std::vector<Sample>& out) {
    for (int i = 0; i < n; ++i) {
      GenSpec g = spec;
      g.seed = next_seed++;
      Sample s = generate_synthetic(g);
      validate_sample(s);
      s.id = detail::sample_id(split, i, n);
      manifest << s.id << ',' << g.seed << ',' << split << '\n';
      out.push_back(std::move(s));
    }
  };
  emit("train", n_train, c.train);
  emit("test", n_test, c.test);
  c.manifest = manifest.str();
  return c;
}

// Rebuild a corpus from its manifest; geometry settings come from the base
// spec, per-sample seeds from the manifest lines.
inline Corpus corpus_from_manifest(const GenSpec& base, const std::string& manifest) {
  Corpus c;
  c.manifest = manifest;
  std::istringstream is(manifest);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw DataError("manifest line " + std::to_string(lineno) + ": expected id,seed,split");
    const std::string id = line.substr(0, c1);
    const std::string seed_text = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string split = line.substr(c2 + 1);
    std::uint64_t seed = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(seed_text, &used);
      if (used != seed_text.size()) throw std::invalid_argument(seed_text);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + ": bad seed '" + seed_text +
                      "'");
    }
    if (split != "train" && split != "test")
      throw DataError("manifest line " + std::to_string(lineno) + ": unknown split '" + split +
                      "'");
    GenSpec g = base;
    g.seed = seed;
    Sample s = generate_synthetic(g);
    s.id = id;
    (split == "train" ? c.train : c.test).push_back(std::move(s));
  }
  return c;
}

}  // namespace floorplan
