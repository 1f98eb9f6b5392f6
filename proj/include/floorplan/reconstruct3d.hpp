#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/labelmap.hpp"
#include "floorplan/synthetic.hpp"

namespace floorplan {

struct Mesh {
  std::vector<std::array<double, 3>> vertices;   // meters
  std::vector<std::array<int, 3>> triangles;     // vertex indices, 0-based
  bool operator==(const Mesh&) const = default;
};

// Greedy row-major cover of the set pixels by axis-aligned rectangles: each
// unconsumed pixel starts a horizontal run, which extends downward while the
// rows below repeat the same unconsumed span. Covers every set pixel exactly
// once.
inline std::vector<RectI> mask_rectangles(const LabelMap& mask) {
  std::vector<std::uint8_t> consumed(mask.v.size(), 0);
  auto set_at = [&](int y, int x) {
    return mask.at(y, x) != 0 && !consumed[static_cast<std::size_t>(y) * mask.w + x];
  };
  std::vector<RectI> rects;
  for (int y = 0; y < mask.h; ++y)
    for (int x = 0; x < mask.w; ++x) {
      if (!set_at(y, x)) continue;
      int x1 = x;
      while (x1 + 1 < mask.w && set_at(y, x1 + 1)) ++x1;
      int y1 = y;
      for (; y1 + 1 < mask.h; ++y1) {
        bool whole_row = true;
        for (int xx = x; xx <= x1 && whole_row; ++xx) whole_row = set_at(y1 + 1, xx);
        if (!whole_row) break;
      }
      for (int yy = y; yy <= y1; ++yy)
        for (int xx = x; xx <= x1; ++xx)
          consumed[static_cast<std::size_t>(yy) * mask.w + xx] = 1;
      rects.push_back(RectI{x, y, x1 + 1, y1 + 1});
    }
  return rects;
}

// Extrude every set pixel of a wall mask into cuboids of the given height.
// One cuboid per merged rectangle: 8 vertices, 12 triangles, outward winding.
// Abutting cuboids keep their shared faces (simplicity over watertightness).
inline Mesh extrude_walls(const LabelMap& wall_mask, double cell_size, double height) {
  if (!(cell_size > 0.0) || !(height > 0.0))
    throw DataError("extrude_walls: cell size and height must be positive");
  Mesh mesh;
  for (const RectI& r : mask_rectangles(wall_mask)) {
    const double x0 = r.x0 * cell_size, x1 = r.x1 * cell_size;
    const double y0 = r.y0 * cell_size, y1 = r.y1 * cell_size;
    const int base = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back({x0, y0, 0.0});     // 0
    mesh.vertices.push_back({x1, y0, 0.0});     // 1
    mesh.vertices.push_back({x1, y1, 0.0});     // 2
    mesh.vertices.push_back({x0, y1, 0.0});     // 3
    mesh.vertices.push_back({x0, y0, height});  // 4
    mesh.vertices.push_back({x1, y0, height});  // 5
    mesh.vertices.push_back({x1, y1, height});  // 6
    mesh.vertices.push_back({x0, y1, height});  // 7
    constexpr int kFaces[12][3] = {
        {0, 2, 1}, {0, 3, 2},  // bottom (-z)
        {4, 5, 6}, {4, 6, 7},  // top (+z)
        {0, 1, 5}, {0, 5, 4},  // y = y0 (-y)
        {1, 2, 6}, {1, 6, 5},  // x = x1 (+x)
        {2, 3, 7}, {2, 7, 6},  // y = y1 (+y)
        {3, 0, 4}, {3, 4, 7},  // x = x0 (-x)
    };
    for (const auto& f : kFaces)
      mesh.triangles.push_back({base + f[0], base + f[1], base + f[2]});
  }
  return mesh;
}

// Wavefront OBJ text: header comment, "v x y z" lines (6-decimal fixed), then
// "f a b c" lines with 1-based indices. LF line endings, byte-stable.
inline std::string mesh_to_obj(const Mesh& mesh) {
  for (const auto& t : mesh.triangles) {
    for (int i : t)
      if (i < 0 || i >= static_cast<int>(mesh.vertices.size()))
        throw DataError("mesh triangle index " + std::to_string(i) + " out of range");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw DataError("mesh contains a degenerate triangle");
  }
  std::ostringstream os;
  os << "# wall extrusion\n";
  os << std::fixed << std::setprecision(6);
  for (const auto& v : mesh.vertices) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& t : mesh.triangles)
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  return os.str();
}

inline void write_obj(const Mesh& mesh, const std::string& path) {
  const std::string text = mesh_to_obj(mesh);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("write failed for '" + path + "'");
}

}  // namespace floorplan
