#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <set>

#include "floorplan/image.hpp"
#include "floorplan/palette.hpp"
#include "floorplan/synthetic.hpp"

using namespace floorplan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("floorplan_test_" + std::to_string(Catch::rngSeed()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

LabelMap random_ids(Rng& rng, int h, int w, int classes) {
  LabelMap m(h, w);
  for (auto& v : m.v) v = static_cast<std::uint8_t>(rng.uniform_int(0, classes - 1));
  return m;
}

}  // namespace

TEST_CASE("default palette is well formed and text form round-trips") {
  const Palette p = Palette::defaults();
  REQUIRE_NOTHROW(p.validate());
  REQUIRE(p.boundary.size() == 4);
  REQUIRE(p.room.size() == 9);
  REQUIRE(p.boundary[0].name == "background");
  REQUIRE(p.room[0].name == "outside");
  REQUIRE(p.room.back().name == "background_inside");

  const std::string text = palette_to_text(p);
  REQUIRE(palette_from_text(text) == p);
}

TEST_CASE("palette validation rejects duplicates and malformed text") {
  Palette p = Palette::defaults();
  p.room[2].rgb = p.boundary[1].rgb;
  REQUIRE_THROWS_AS(p.validate(), DataError);

  REQUIRE_THROWS_AS(palette_from_text("kitchen,foo,1,2,3\n"), DataError);
  REQUIRE_THROWS_AS(palette_from_text("boundary,foo,1,2\n"), DataError);
  REQUIRE_THROWS_AS(palette_from_text("boundary,foo,1,2,999\n"), DataError);
  REQUIRE_THROWS_AS(palette_from_text("boundary,foo,1,2,x\n"), DataError);
}

TEST_CASE("label encode/decode is a bijection on random id maps") {
  const Palette p = Palette::defaults();
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const LabelMap b = random_ids(rng, 13, 17, static_cast<int>(p.boundary.size()));
    const LabelMap r = random_ids(rng, 13, 17, static_cast<int>(p.room.size()));
    REQUIRE(decode_label_image(encode_label_image(b, p.boundary), p.boundary) == b);
    REQUIRE(decode_label_image(encode_label_image(r, p.room), p.room) == r);
  }
}

TEST_CASE("all-white image decodes to background for either task") {
  const Palette p = Palette::defaults();
  RgbImage img(6, 7);
  std::fill(img.v.begin(), img.v.end(), std::uint8_t(255));
  for (const auto* classes : {&p.boundary, &p.room}) {
    const LabelMap m = decode_label_image(img, *classes);
    for (auto v : m.v) REQUIRE(v == 0);
  }
}

TEST_CASE("off-palette color is rejected naming the color and pixel") {
  const Palette p = Palette::defaults();
  RgbImage img(4, 4);
  std::fill(img.v.begin(), img.v.end(), std::uint8_t(255));
  img.px(2, 3)[0] = 1;
  img.px(2, 3)[1] = 2;
  img.px(2, 3)[2] = 3;
  REQUIRE_THROWS_WITH(decode_label_image(img, p.room),
                      Catch::Matchers::ContainsSubstring("(1,2,3)") &&
                          Catch::Matchers::ContainsSubstring("(3,2)"));
}

TEST_CASE("encoding an id beyond the palette is rejected") {
  const Palette p = Palette::defaults();
  LabelMap m(3, 3, 0);
  m.at(1, 1) = static_cast<std::uint8_t>(p.boundary.size());
  REQUIRE_THROWS_AS(encode_label_image(m, p.boundary), DataError);
}

TEST_CASE("png files round-trip bitwise and encode deterministically") {
  TempDir dir;
  Rng rng(3);

  GrayImage g(9, 11);
  for (auto& v : g.v) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  write_png(dir.file("g.png"), g);
  REQUIRE(read_png_gray(dir.file("g.png")) == g);

  RgbImage c(9, 11);
  for (auto& v : c.v) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  write_png(dir.file("c.png"), c);
  REQUIRE(read_png_rgb(dir.file("c.png")) == c);

  write_png(dir.file("g2.png"), g);
  REQUIRE(slurp(dir.file("g.png")) == slurp(dir.file("g2.png")));

  // Grayscale files are readable through the RGB path (channels replicated).
  const RgbImage expanded = read_png_rgb(dir.file("g.png"));
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      REQUIRE(expanded.px(y, x)[0] == g.at(y, x));
      REQUIRE(expanded.px(y, x)[1] == g.at(y, x));
      REQUIRE(expanded.px(y, x)[2] == g.at(y, x));
    }

  // A color file cannot be read as grayscale, and garbage is not a PNG.
  REQUIRE_THROWS_AS(read_png_gray(dir.file("c.png")), DataError);
  std::ofstream(dir.file("junk.png"), std::ios::binary) << "not a png";
  REQUIRE_THROWS_AS(read_png_rgb(dir.file("junk.png")), DataError);
  REQUIRE_THROWS_AS(read_png_gray(dir.file("missing.png")), DataError);
}

TEST_CASE("label maps survive a png round trip") {
  TempDir dir;
  const Palette p = Palette::defaults();
  const Sample s = generate_synthetic(GenSpec{});
  encode_label_png(dir.file("b.png"), s.boundary_labels, p.boundary);
  encode_label_png(dir.file("r.png"), s.room_labels, p.room);
  REQUIRE(decode_label_png(dir.file("b.png"), p.boundary) == s.boundary_labels);
  REQUIRE(decode_label_png(dir.file("r.png"), p.room) == s.room_labels);
}

TEST_CASE("generator is deterministic per seed") {
  GenSpec spec;
  spec.seed = 42;
  const Sample a = generate_synthetic(spec);
  const Sample b = generate_synthetic(spec);
  REQUIRE(a == b);

  spec.seed = 43;
  REQUIRE(!(generate_synthetic(spec) == a));
}

TEST_CASE("generated samples pass structural validation across seeds") {
  GenSpec spec;
  for (std::uint64_t seed : {1ull, 7ull, 19ull, 577ull, 90210ull}) {
    spec.seed = seed;
    spec.irregular = (seed % 2) == 1;
    GenMeta meta;
    const Sample s = generate_synthetic(spec, &meta);
    REQUIRE_NOTHROW(validate_sample(s));

    // Self-reported room count matches the label map and stays in range.
    const int rooms = static_cast<int>(meta.rooms.size());
    REQUIRE(rooms >= spec.rooms_min);
    REQUIRE(rooms <= spec.rooms_max);
    REQUIRE(count_room_regions(s) == rooms);

    // Boundary and room label sets are disjoint.
    for (std::size_t i = 0; i < s.boundary_labels.v.size(); ++i) {
      const std::uint8_t b = s.boundary_labels.v[i], r = s.room_labels.v[i];
      if (b != cls::b_background)
        REQUIRE((r == cls::r_outside || r == cls::r_inside_bg));
      if (r != cls::r_outside && r != cls::r_inside_bg) REQUIRE(b == cls::b_background);
    }

    // Wall thickness within spec: sampled value and rasterized strips agree.
    REQUIRE(meta.wall_thickness >= spec.wall_thickness_min);
    REQUIRE(meta.wall_thickness <= spec.wall_thickness_max);
    for (const RectI& wallr : meta.internal_walls) {
      REQUIRE(std::min(wallr.w(), wallr.h()) == meta.wall_thickness);
      int door_pixels = 0;
      for (int y = wallr.y0; y < wallr.y1; ++y)
        for (int x = wallr.x0; x < wallr.x1; ++x) {
          const std::uint8_t b = s.boundary_labels.at(y, x);
          REQUIRE(b != cls::b_background);  // strips rasterize solid
          door_pixels += b == cls::b_door;
        }
      REQUIRE(door_pixels > 0);  // one door gap per internal wall
    }

    // Each room interior is one class and at least the minimum size in area.
    for (const RoomInfo& ri : meta.rooms) {
      REQUIRE(ri.area > 0);
      REQUIRE(ri.room_class >= 1);
      REQUIRE(ri.room_class <= 7);
      REQUIRE(ri.rect.w() >= spec.min_room_size);
      REQUIRE(ri.rect.h() >= spec.min_room_size);
    }
  }
}

TEST_CASE("irregular outline carves an outside notch into the bounding box") {
  GenSpec spec;
  spec.seed = 11;
  spec.irregular = true;
  GenMeta meta;
  const Sample s = generate_synthetic(spec, &meta);
  REQUIRE(meta.footprint.size() == 2);

  // Bounding box of the footprint contains outside pixels (the notch).
  int x0 = spec.canvas, y0 = spec.canvas, x1 = 0, y1 = 0;
  for (const RectI& r : meta.footprint) {
    x0 = std::min(x0, r.x0);
    y0 = std::min(y0, r.y0);
    x1 = std::max(x1, r.x1);
    y1 = std::max(y1, r.y1);
  }
  int outside_in_bbox = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      outside_in_bbox += s.room_labels.at(y, x) == cls::r_outside &&
                         s.boundary_labels.at(y, x) == cls::b_background;
  REQUIRE(outside_in_bbox > 0);
}

TEST_CASE("image intensities reflect the labels with bounded noise") {
  const Sample s = generate_synthetic(GenSpec{});
  int floor_px = 0, window_px = 0;
  for (int y = 0; y < s.image.h; ++y)
    for (int x = 0; x < s.image.w; ++x) {
      const int v = s.image.at(y, x);
      switch (s.boundary_labels.at(y, x)) {
        case cls::b_wall: REQUIRE(std::abs(v - 40) <= 3); break;
        case cls::b_door: REQUIRE(std::abs(v - 140) <= 3); break;
        case cls::b_window:
          REQUIRE(std::abs(v - 90) <= 3);
          ++window_px;
          break;
        default:
          if (s.room_labels.at(y, x) == cls::r_outside)
            REQUIRE(std::abs(v - 250) <= 3);
          else {
            REQUIRE(std::abs(v - 218) <= 3);
            ++floor_px;
          }
      }
    }
  REQUIRE(floor_px > 0);
  REQUIRE(window_px > 0);  // default density places windows

  const auto t = to_input_tensor(s.image);
  REQUIRE(t.shape == Shape4{1, 1, s.image.h, s.image.w});
  for (float v : t.data) {
    REQUIRE(v >= 0.0f);
    REQUIRE(v <= 1.0f);
  }
}

TEST_CASE("window density zero removes all window pixels") {
  GenSpec spec;
  spec.window_density = 0.0;
  const Sample s = generate_synthetic(spec);
  for (auto b : s.boundary_labels.v) REQUIRE(b != cls::b_window);
}

TEST_CASE("invalid and infeasible generator specs are rejected") {
  GenSpec spec;

  SECTION("min room size must exceed twice the wall thickness") {
    spec.min_room_size = 6;
    spec.wall_thickness_max = 3;
    REQUIRE_THROWS_AS(generate_synthetic(spec), DataError);
  }
  SECTION("empty ranges") {
    spec.rooms_min = 5;
    spec.rooms_max = 4;
    REQUIRE_THROWS_AS(generate_synthetic(spec), DataError);
  }
  SECTION("window density outside [0,1]") {
    spec.window_density = 1.5;
    REQUIRE_THROWS_AS(generate_synthetic(spec), DataError);
  }
  SECTION("canvas too small for one room") {
    spec.canvas = 20;
    REQUIRE_THROWS_AS(generate_synthetic(spec), DataError);
  }
  SECTION("too many rooms for the canvas") {
    spec.rooms_min = 40;
    spec.rooms_max = 40;
    REQUIRE_THROWS_AS(generate_synthetic(spec), DataError);
  }
  SECTION("irregular outline needs room for two parts") {
    spec.canvas = 40;
    spec.min_room_size = 13;
    spec.irregular = true;
    REQUIRE_THROWS_AS(generate_synthetic(spec), DataError);
  }
}

TEST_CASE("corpus generation yields disjoint ids and bitwise regeneration") {
  GenSpec spec;
  spec.seed = 500;
  const Corpus c = make_corpus(spec, 4, 2);
  REQUIRE(c.train.size() == 4);
  REQUIRE(c.test.size() == 2);

  std::set<std::string> ids;
  for (const auto* split : {&c.train, &c.test})
    for (const Sample& s : *split) ids.insert(s.id);
  REQUIRE(ids.size() == 6);
  REQUIRE(c.train[0].id == "train_000");
  REQUIRE(c.test[1].id == "test_001");

  // Manifest lines: id,seed,split in emission order.
  std::istringstream is(c.manifest);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) lines.push_back(line);
  REQUIRE(lines.size() == 6);
  REQUIRE(lines[0] == "train_000,501,train");
  REQUIRE(lines[5] == "test_001,506,test");

  const Corpus r = corpus_from_manifest(spec, c.manifest);
  REQUIRE(r.train == c.train);
  REQUIRE(r.test == c.test);

  for (const auto* split : {&c.train, &c.test})
    for (const Sample& s : *split) REQUIRE_NOTHROW(validate_sample(s));
}

TEST_CASE("corpus requires at least one sample per split and a sane manifest") {
  REQUIRE_THROWS_AS(make_corpus(GenSpec{}, 0, 2), DataError);
  REQUIRE_THROWS_AS(make_corpus(GenSpec{}, 2, 0), DataError);
  REQUIRE_THROWS_AS(corpus_from_manifest(GenSpec{}, "only_one_field\n"), DataError);
  REQUIRE_THROWS_AS(corpus_from_manifest(GenSpec{}, "id,notanumber,train\n"), DataError);
  REQUIRE_THROWS_AS(corpus_from_manifest(GenSpec{}, "id,5,validation\n"), DataError);
}

TEST_CASE("validator catches broken samples") {
  Sample s = generate_synthetic(GenSpec{});

  SECTION("extent mismatch") {
    s.room_labels = LabelMap(8, 8, 0);
    REQUIRE_THROWS_AS(validate_sample(s), DataError);
  }
  SECTION("room class on a boundary pixel") {
    for (int i = 0; i < s.boundary_labels.h * s.boundary_labels.w; ++i)
      if (s.boundary_labels.v[static_cast<std::size_t>(i)] == cls::b_wall) {
        s.room_labels.v[static_cast<std::size_t>(i)] = cls::r_bedroom;
        break;
      }
    REQUIRE_THROWS_AS(validate_sample(s), DataError);
  }
  SECTION("breached enclosure leaks a room to the border") {
    // Cut a full-height vertical channel through everything at mid-canvas.
    const int x = s.boundary_labels.w / 2;
    for (int y = 0; y < s.boundary_labels.h; ++y)
      s.boundary_labels.at(y, x) = cls::b_background;
    REQUIRE_THROWS_AS(validate_sample(s), DataError);
  }
  SECTION("label beyond palette range") {
    s.room_labels.v[0] = 9;
    REQUIRE_THROWS_AS(validate_sample(s), DataError);
  }
}
