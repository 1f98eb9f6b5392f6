#pragma once

// On-disk corpus and prediction trees plus the composite visualizations the
// command-line tools emit. Corpus layout under one root:
//   images/<id>.png           grayscale input
//   labels_boundary/<id>.png  palette-encoded boundary classes
//   labels_room/<id>.png      palette-encoded room classes
//   manifest.csv              one "id,seed,split" line per sample
//   palette.txt               class-color table used by the label PNGs

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "floorplan/palette.hpp"
#include "floorplan/runconfig.hpp"
#include "floorplan/synthetic.hpp"

namespace floorplan {

inline void save_corpus(const Corpus& corpus, const std::string& dir, const Palette& pal) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "labels_boundary");
  fs::create_directories(fs::path(dir) / "labels_room");
  const auto save_split = [&](const std::vector<Sample>& split) {
    for (const Sample& s : split) {
      const std::string name = s.id + ".png";
      write_png((fs::path(dir) / "images" / name).string(), s.image);
      encode_label_png((fs::path(dir) / "labels_boundary" / name).string(),
                       s.boundary_labels, pal.boundary);
      encode_label_png((fs::path(dir) / "labels_room" / name).string(), s.room_labels,
                       pal.room);
    }
  };
  save_split(corpus.train);
  save_split(corpus.test);
  write_text_file((fs::path(dir) / "manifest.csv").string(), corpus.manifest);
  write_text_file((fs::path(dir) / "palette.txt").string(), palette_to_text(pal));
}

struct LoadedCorpus {
  Corpus corpus;
  Palette palette;
};

inline LoadedCorpus load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedCorpus out;
  out.palette = palette_from_text(read_text_file((fs::path(dir) / "palette.txt").string()));
  out.corpus.manifest = read_text_file((fs::path(dir) / "manifest.csv").string());
  std::istringstream is(out.corpus.manifest);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos)
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": expected id,seed,split");
    Sample s;
    s.id = line.substr(0, c1);
    const std::string split = line.substr(c2 + 1);
    const std::string name = s.id + ".png";
    s.image = read_png_gray((fs::path(dir) / "images" / name).string());
    s.boundary_labels = decode_label_png(
        (fs::path(dir) / "labels_boundary" / name).string(), out.palette.boundary);
    s.room_labels = decode_label_png((fs::path(dir) / "labels_room" / name).string(),
                                     out.palette.room);
    if (split == "train")
      out.corpus.train.push_back(std::move(s));
    else if (split == "test")
      out.corpus.test.push_back(std::move(s));
    else
      throw DataError("manifest line " + std::to_string(line_no) + ": unknown split '" +
                      split + "'");
  }
  if (out.corpus.train.empty() && out.corpus.test.empty())
    throw DataError("corpus at '" + dir + "' has no samples");
  return out;
}

// Samples named by eval.split: "train", "test", or "all" (train then test).
inline std::vector<Sample> select_split(const Corpus& corpus, const std::string& split) {
  std::vector<Sample> out;
  if (split == "train" || split == "all")
    out.insert(out.end(), corpus.train.begin(), corpus.train.end());
  if (split == "test" || split == "all")
    out.insert(out.end(), corpus.test.begin(), corpus.test.end());
  if (out.empty()) throw DataError("split '" + split + "' selected no samples");
  return out;
}

inline RgbImage gray_to_rgb(const GrayImage& g) {
  RgbImage out(g.h, g.w);
  for (int y = 0; y < g.h; ++y)
    for (int x = 0; x < g.w; ++x) {
      const std::uint8_t v = g.at(y, x);
      out.px(y, x)[0] = v;
      out.px(y, x)[1] = v;
      out.px(y, x)[2] = v;
    }
  return out;
}

// Boundary classes drawn over room classes: boundary wins wherever it is not
// its background class 0.
inline RgbImage composite_labels(const LabelMap& boundary, const LabelMap& room,
                                 const Palette& pal) {
  require_same_extent(boundary, room);
  const RgbImage rooms = encode_label_image(room, pal.room);
  const RgbImage walls = encode_label_image(boundary, pal.boundary);
  RgbImage out = rooms;
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      if (boundary.at(y, x) != 0)
        for (int c = 0; c < 3; ++c) out.px(y, x)[c] = walls.px(y, x)[c];
  return out;
}

// Horizontal concatenation with a 1-pixel white separator between panels.
inline RgbImage side_by_side(const std::vector<RgbImage>& panels) {
  if (panels.empty()) throw DataError("side_by_side: no panels");
  int w = static_cast<int>(panels.size()) - 1;
  const int h = panels[0].h;
  for (const RgbImage& p : panels) {
    if (p.h != h) throw ShapeError("side_by_side: panel heights differ");
    w += p.w;
  }
  RgbImage out(h, w);
  std::fill(out.v.begin(), out.v.end(), std::uint8_t{255});
  int x0 = 0;
  for (const RgbImage& p : panels) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < p.w; ++x)
        for (int c = 0; c < 3; ++c) out.px(y, x0 + x)[c] = p.px(y, x)[c];
    x0 += p.w + 1;
  }
  return out;
}

// Sorted basenames (without extension) of the .png files directly in dir.
inline std::vector<std::string> list_png_ids(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("'" + dir + "' is not a directory");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      ids.push_back(entry.path().stem().string());
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw DataError("no .png files in '" + dir + "'");
  return ids;
}

}  // namespace floorplan
