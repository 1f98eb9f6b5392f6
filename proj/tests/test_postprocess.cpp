#include <catch2/catch_amalgamated.hpp>
#include <numeric>

#include "floorplan/postprocess.hpp"
#include "floorplan/synthetic.hpp"

using namespace floorplan;

namespace {

// Independent union-find region decomposition, relabeled to first-encounter
// scan order so it must match connected_regions exactly.
struct Dsu {
  std::vector<int> parent;
  explicit Dsu(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

std::vector<std::int32_t> oracle_regions(const std::vector<std::uint8_t>& mask, int h, int w,
                                         int& count) {
  Dsu dsu(h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (mask[static_cast<std::size_t>(i)]) continue;
      if (x + 1 < w && !mask[static_cast<std::size_t>(i + 1)]) dsu.unite(i, i + 1);
      if (y + 1 < h && !mask[static_cast<std::size_t>(i + w)]) dsu.unite(i, i + w);
    }
  std::vector<std::int32_t> ids(static_cast<std::size_t>(h) * w, 0);
  std::vector<int> label(static_cast<std::size_t>(h) * w, 0);
  count = 0;
  for (int i = 0; i < h * w; ++i) {
    if (mask[static_cast<std::size_t>(i)]) continue;
    const int root = dsu.find(i);
    if (label[static_cast<std::size_t>(root)] == 0) label[static_cast<std::size_t>(root)] = ++count;
    ids[static_cast<std::size_t>(i)] = label[static_cast<std::size_t>(root)];
  }
  return ids;
}

LabelMap map_of(int h, int w, std::initializer_list<int> rows) {
  LabelMap m(h, w);
  auto it = rows.begin();
  for (int i = 0; i < h * w; ++i) m.v[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(*it++);
  return m;
}

}  // namespace

TEST_CASE("boundary mask marks every non-background class") {
  LabelMap all_bg(3, 4, 0);
  for (auto v : boundary_mask(all_bg)) REQUIRE(v == 0);

  LabelMap all_wall(3, 4, 1);
  for (auto v : boundary_mask(all_wall)) REQUIRE(v == 1);

  Rng rng(5);
  LabelMap mixed(6, 7);
  for (auto& v : mixed.v) v = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
  const auto mask = boundary_mask(mixed);
  for (std::size_t i = 0; i < mask.size(); ++i)
    REQUIRE(mask[i] == (mixed.v[i] != 0 ? 1 : 0));
}

TEST_CASE("connected regions: degenerate and simple layouts") {
  SECTION("no boundary pixels: one region covering the map") {
    const auto rm = connected_regions(std::vector<std::uint8_t>(12, 0), 3, 4);
    REQUIRE(rm.count == 1);
    REQUIRE(rm.pixels[0].size() == 12);
    for (auto id : rm.id) REQUIRE(id == 1);
    REQUIRE(rm.touches_border[0] == 1);
  }
  SECTION("all boundary: zero regions") {
    const auto rm = connected_regions(std::vector<std::uint8_t>(12, 1), 3, 4);
    REQUIRE(rm.count == 0);
    for (auto id : rm.id) REQUIRE(id == 0);
  }
  SECTION("full-height wall column splits the map in two") {
    std::vector<std::uint8_t> mask(5 * 5, 0);
    for (int y = 0; y < 5; ++y) mask[static_cast<std::size_t>(y) * 5 + 2] = 1;
    const auto rm = connected_regions(mask, 5, 5);
    REQUIRE(rm.count == 2);
    REQUIRE(rm.id[0] == 1);   // left of the wall
    REQUIRE(rm.id[3] == 2);   // right of the wall
    REQUIRE(rm.id[2] == 0);   // the wall itself
    REQUIRE(rm.pixels[0].size() == 10);
    REQUIRE(rm.pixels[1].size() == 10);
  }
  SECTION("size mismatch rejected") {
    REQUIRE_THROWS_AS(connected_regions(std::vector<std::uint8_t>(11, 0), 3, 4), ShapeError);
  }
}

TEST_CASE("connected regions match the union-find oracle on all 4x4 masks") {
  for (int bits = 0; bits < 65536; ++bits) {
    std::vector<std::uint8_t> mask(16);
    for (int i = 0; i < 16; ++i) mask[static_cast<std::size_t>(i)] = (bits >> i) & 1;
    int oracle_count = 0;
    const auto oracle_ids = oracle_regions(mask, 4, 4, oracle_count);
    const auto rm = connected_regions(mask, 4, 4);
    if (rm.count != oracle_count || !(rm.id == oracle_ids)) {
      CAPTURE(bits);
      REQUIRE(rm.count == oracle_count);
      REQUIRE(rm.id == oracle_ids);
    }
  }
}

TEST_CASE("region bookkeeping: scan-order ids, partition, border flags") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int h = 9, w = 11;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w);
    for (auto& v : mask) v = rng.bernoulli(0.35) ? 1 : 0;
    const auto rm = connected_regions(mask, h, w);

    REQUIRE(rm.pixels.size() == static_cast<std::size_t>(rm.count));
    REQUIRE(rm.touches_border.size() == static_cast<std::size_t>(rm.count));

    // Ids are assigned in scan order of each region's first pixel.
    std::vector<std::int32_t> first(static_cast<std::size_t>(rm.count));
    for (int r = 0; r < rm.count; ++r) {
      auto px = rm.pixels[static_cast<std::size_t>(r)];
      first[static_cast<std::size_t>(r)] = *std::min_element(px.begin(), px.end());
    }
    for (int r = 1; r < rm.count; ++r)
      REQUIRE(first[static_cast<std::size_t>(r - 1)] < first[static_cast<std::size_t>(r)]);

    // Pixel lists partition the non-boundary pixels and agree with the map.
    std::vector<int> seen(static_cast<std::size_t>(h) * w, 0);
    for (int r = 0; r < rm.count; ++r) {
      bool border = false;
      for (auto i : rm.pixels[static_cast<std::size_t>(r)]) {
        REQUIRE(rm.id[static_cast<std::size_t>(i)] == r + 1);
        REQUIRE(mask[static_cast<std::size_t>(i)] == 0);
        ++seen[static_cast<std::size_t>(i)];
        const int y = i / w, x = i % w;
        border |= y == 0 || y == h - 1 || x == 0 || x == w - 1;
      }
      REQUIRE(int(rm.touches_border[static_cast<std::size_t>(r)]) == int(border));
    }
    for (std::size_t i = 0; i < mask.size(); ++i)
      REQUIRE(seen[i] == (mask[i] ? 0 : 1));
  }
}

TEST_CASE("majority vote relabels regions") {
  // 1x10 strip, interior region of 10 pixels; no walls. Make it border-free
  // by disabling the border rule where noted.
  LabelMap room = map_of(1, 10, {4, 4, 4, 4, 4, 4, 5, 5, 5, 5});
  const auto rm = connected_regions(std::vector<std::uint8_t>(10, 0), 1, 10);

  SECTION("60/40 majority wins") {
    PostprocessOptions opts;
    opts.border_to_outside = false;
    const LabelMap out = vote_room_types(rm, room, opts);
    for (auto v : out.v) REQUIRE(v == 4);
  }
  SECTION("uniform region unchanged") {
    PostprocessOptions opts;
    opts.border_to_outside = false;
    const LabelMap uniform(1, 10, 7);
    REQUIRE(vote_room_types(rm, uniform, opts) == uniform);
  }
  SECTION("exact tie prefers the smaller class id") {
    PostprocessOptions opts;
    opts.border_to_outside = false;
    const LabelMap tie = map_of(1, 10, {5, 5, 5, 5, 5, 3, 3, 3, 3, 3});
    const LabelMap out = vote_room_types(rm, tie, opts);
    for (auto v : out.v) REQUIRE(v == 3);
  }
  SECTION("border-touching regions forced outside by default") {
    const LabelMap out = vote_room_types(rm, room);
    for (auto v : out.v) REQUIRE(v == 0);
  }
  SECTION("extent mismatch rejected") {
    REQUIRE_THROWS_AS(vote_room_types(rm, LabelMap(2, 2, 0)), ShapeError);
  }
}

TEST_CASE("voting keeps boundary pixels and interior regions intact") {
  // 5x5 with a window-frame wall: one interior pixel region, outside ring.
  LabelMap bpred(5, 5, 0);
  for (int y = 1; y <= 3; ++y)
    for (int x = 1; x <= 3; ++x)
      if (y == 1 || y == 3 || x == 1 || x == 3) bpred.at(y, x) = 1;
  LabelMap rpred(5, 5, 3);
  rpred.at(2, 2) = 6;  // interior region: single pixel, class 6

  const LabelMap out = postprocess_rooms(bpred, rpred);
  REQUIRE(out.at(2, 2) == 6);            // interior keeps its majority class
  REQUIRE(out.at(0, 0) == 0);            // border region forced outside
  REQUIRE(out.at(1, 1) == rpred.at(1, 1));  // boundary pixel passes through
}

TEST_CASE("postprocess is idempotent and conserves extent") {
  GenSpec spec;
  Rng rng(77);
  for (std::uint64_t seed : {3ull, 12ull, 21ull}) {
    spec.seed = seed;
    const Sample s = generate_synthetic(spec);
    LabelMap noisy = s.room_labels;
    for (auto& v : noisy.v)
      if (rng.bernoulli(0.25)) v = static_cast<std::uint8_t>(rng.uniform_int(0, 8));

    const LabelMap once = postprocess_rooms(s.boundary_labels, noisy);
    const LabelMap twice = postprocess_rooms(s.boundary_labels, once);
    REQUIRE(once == twice);
    REQUIRE(once.h == noisy.h);
    REQUIRE(once.w == noisy.w);
  }
}

TEST_CASE("majority vote recovers planted room types under 30% noise") {
  GenSpec spec;
  for (std::uint64_t seed : {5ull, 8ull, 13ull}) {
    spec.seed = seed;
    spec.irregular = (seed % 2) == 1;
    const Sample s = generate_synthetic(spec);

    // Corrupt exactly 30% of each region's pixels (per-region quota keeps the
    // true class in the majority), then postprocess with the GT boundaries.
    const auto rm =
        connected_regions(boundary_mask(s.boundary_labels), s.boundary_labels.h,
                          s.boundary_labels.w);
    LabelMap noisy = s.room_labels;
    Rng rng(1000 + seed);
    for (int r = 0; r < rm.count; ++r) {
      const auto& px = rm.pixels[static_cast<std::size_t>(r)];
      const auto quota = static_cast<std::size_t>(px.size() * 3 / 10);
      for (std::size_t k = 0; k < quota; ++k) {
        const auto i = static_cast<std::size_t>(px[k * px.size() / std::max<std::size_t>(quota, 1) % px.size()]);
        std::uint8_t wrong = static_cast<std::uint8_t>(rng.uniform_int(0, 8));
        if (wrong == s.room_labels.v[i]) wrong = (wrong + 1) % 9;
        noisy.v[i] = wrong;
      }
    }
    REQUIRE(postprocess_rooms(s.boundary_labels, noisy) == s.room_labels);
  }
}
