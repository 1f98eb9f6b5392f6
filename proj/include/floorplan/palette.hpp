#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/image.hpp"
#include "floorplan/labelmap.hpp"

namespace floorplan {

using Rgb = std::array<std::uint8_t, 3>;

struct PaletteEntry {
  std::string name;
  Rgb rgb{};
  bool operator==(const PaletteEntry&) const = default;
};

// Class catalog for both prediction tasks. Class ids are positions within
// each task's list; position 0 is that task's background class.
struct Palette {
  std::vector<PaletteEntry> boundary;
  std::vector<PaletteEntry> room;

  void validate() const {
    if (boundary.size() < 2 || room.size() < 2)
      throw DataError("palette: each task needs a background plus at least one class");
    std::map<Rgb, std::string> seen;
    auto check = [&](const std::vector<PaletteEntry>& list, const char* task) {
      for (const auto& e : list) {
        if (e.name.empty()) throw DataError("palette: empty class name");
        auto [it, fresh] = seen.emplace(e.rgb, e.name);
        if (!fresh)
          throw DataError("palette: color of '" + std::string(task) + "/" + e.name +
                          "' already used by '" + it->second + "'");
      }
    };
    check(boundary, "boundary");
    check(room, "room");
  }

  static Palette defaults() {
    Palette p;
    p.boundary = {
        {"background", {255, 255, 255}},
        {"wall", {0, 0, 0}},
        {"door", {192, 64, 64}},
        {"window", {64, 64, 192}},
    };
    p.room = {
        {"outside", {224, 224, 224}},
        {"closet", {128, 64, 0}},
        {"bathroom", {0, 160, 160}},
        {"living_dining", {255, 160, 96}},
        {"bedroom", {128, 0, 128}},
        {"hall", {255, 255, 0}},
        {"balcony", {0, 128, 0}},
        {"other_room", {160, 160, 255}},
        {"background_inside", {64, 64, 64}},
    };
    return p;
  }

  bool operator==(const Palette&) const = default;
};

// Text form shipped alongside generated corpora: one "task,name,r,g,b" line
// per class, '#' comments and blank lines ignored.
inline std::string palette_to_text(const Palette& p) {
  std::ostringstream os;
  os << "# task,name,r,g,b  (ids are per-task line order; first line of a task"
        " is its background)\n";
  auto dump = [&](const std::vector<PaletteEntry>& list, const char* task) {
    for (const auto& e : list)
      os << task << ',' << e.name << ',' << int(e.rgb[0]) << ',' << int(e.rgb[1]) << ','
         << int(e.rgb[2]) << '\n';
  };
  dump(p.boundary, "boundary");
  dump(p.room, "room");
  return os.str();
}

inline Palette palette_from_text(const std::string& text) {
  Palette p;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::array<std::string, 5> field;
    std::size_t pos = 0;
    for (int i = 0; i < 5; ++i) {
      const std::size_t comma = line.find(',', pos);
      if (i < 4 && comma == std::string::npos)
        throw DataError("palette line " + std::to_string(lineno) + ": expected task,name,r,g,b");
      field[static_cast<std::size_t>(i)] =
          line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      pos = comma + 1;
    }
    auto byte_of = [&](const std::string& s) {
      std::size_t used = 0;
      int value = -1;
      try {
        value = std::stoi(s, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != s.size() || value < 0 || value > 255)
        throw DataError("palette line " + std::to_string(lineno) + ": bad byte '" + s + "'");
      return static_cast<std::uint8_t>(value);
    };
    PaletteEntry e{field[1], {byte_of(field[2]), byte_of(field[3]), byte_of(field[4])}};
    if (field[0] == "boundary")
      p.boundary.push_back(std::move(e));
    else if (field[0] == "room")
      p.room.push_back(std::move(e));
    else
      throw DataError("palette line " + std::to_string(lineno) + ": unknown task '" +
                      field[0] + "'");
  }
  p.validate();
  return p;
}

// Class-id map -> color image using one task's class list.
inline RgbImage encode_label_image(const LabelMap& m, const std::vector<PaletteEntry>& classes) {
  RgbImage img(m.h, m.w);
  for (int y = 0; y < m.h; ++y)
    for (int x = 0; x < m.w; ++x) {
      const std::uint8_t id = m.at(y, x);
      if (id >= classes.size())
        throw DataError("label id " + std::to_string(int(id)) + " at pixel (" +
                        std::to_string(x) + "," + std::to_string(y) + ") exceeds palette size " +
                        std::to_string(classes.size()));
      const Rgb& c = classes[id].rgb;
      std::uint8_t* px = img.px(y, x);
      px[0] = c[0];
      px[1] = c[1];
      px[2] = c[2];
    }
  return img;
}

// Color image -> class-id map. Every pixel must match a palette color
// exactly; an all-white image is accepted as "everything background".
inline LabelMap decode_label_image(const RgbImage& img, const std::vector<PaletteEntry>& classes) {
  std::map<Rgb, std::uint8_t> ids;
  for (std::size_t i = 0; i < classes.size(); ++i)
    ids[classes[i].rgb] = static_cast<std::uint8_t>(i);
  LabelMap m(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const std::uint8_t* px = img.px(y, x);
      const Rgb c{px[0], px[1], px[2]};
      if (auto it = ids.find(c); it != ids.end()) {
        m.at(y, x) = it->second;
      } else if (c == Rgb{255, 255, 255}) {
        m.at(y, x) = 0;  // blank scans mean background for either task
      } else {
        throw DataError("unknown color (" + std::to_string(int(c[0])) + "," +
                        std::to_string(int(c[1])) + "," + std::to_string(int(c[2])) +
                        ") at pixel (" + std::to_string(x) + "," + std::to_string(y) +
                        ") not in palette");
      }
    }
  return m;
}

inline void encode_label_png(const std::string& path, const LabelMap& m,
                             const std::vector<PaletteEntry>& classes) {
  write_png(path, encode_label_image(m, classes));
}

inline LabelMap decode_label_png(const std::string& path,
                                 const std::vector<PaletteEntry>& classes) {
  return decode_label_image(read_png_rgb(path), classes);
}

}  // namespace floorplan
