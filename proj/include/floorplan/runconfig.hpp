#pragma once

// Run configuration shared by every command-line pipeline: one flat key=value
// text format covering model, training, generation, paths, and tool settings.
// Unknown keys are rejected so typos fail loudly, and every run can archive
// its fully resolved configuration for byte-identical reruns.

#include <fstream>
#include <sstream>
#include <string>

#include "floorplan/synthetic.hpp"
#include "floorplan/training.hpp"

namespace floorplan {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  GenSpec gen;
  int n_train = 4;           // gen-data corpus sizes
  int n_test = 2;
  std::string split = "test";  // which corpus split eval/infer read: train|test|all
  bool postprocess = false;    // refine room predictions before scoring/saving
  double cell_size = 0.05;     // reconstruction: metres per pixel
  double wall_height = 2.8;    // reconstruction: extrusion height in metres
  int wall_class = 1;          // boundary label id treated as wall
  std::string data_dir;        // corpus tree root
  std::string checkpoint;      // model file path
  std::string input;           // single-file input (reconstruct)
  std::string palette_file;    // class-color table; empty = built-in defaults

  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
};

namespace detail {

inline bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw DataError("bad boolean for " + what + ": '" + s + "'");
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  const auto as_int = [&] { return static_cast<int>(detail::parse_int(value, key)); };
  const auto as_double = [&] { return detail::parse_double(value, key); };
  const auto as_bool = [&] { return detail::parse_bool(value, key); };

  if (key.rfind("model.", 0) == 0) {
    model_config_set(model, key.substr(6), value);
  } else if (key == "train.learning_rate") {
    train.learning_rate = as_double();
  } else if (key == "train.iterations") {
    train.iterations = as_int();
  } else if (key == "train.beta1") {
    train.beta1 = as_double();
  } else if (key == "train.beta2") {
    train.beta2 = as_double();
  } else if (key == "train.epsilon") {
    train.epsilon = as_double();
  } else if (key == "train.seed") {
    train.seed = static_cast<std::uint64_t>(detail::parse_int(value, key));
  } else if (key == "train.eval_every") {
    train.eval_every = as_int();
  } else if (key == "train.mean_over_pixels") {
    train.mean_over_pixels = as_bool();
  } else if (key == "train.count_channels") {
    train.count_channels = as_bool();
  } else if (key == "gen.seed") {
    gen.seed = static_cast<std::uint64_t>(detail::parse_int(value, key));
  } else if (key == "gen.canvas") {
    gen.canvas = as_int();
  } else if (key == "gen.rooms_min") {
    gen.rooms_min = as_int();
  } else if (key == "gen.rooms_max") {
    gen.rooms_max = as_int();
  } else if (key == "gen.min_room_size") {
    gen.min_room_size = as_int();
  } else if (key == "gen.wall_thickness_min") {
    gen.wall_thickness_min = as_int();
  } else if (key == "gen.wall_thickness_max") {
    gen.wall_thickness_max = as_int();
  } else if (key == "gen.door_width_min") {
    gen.door_width_min = as_int();
  } else if (key == "gen.door_width_max") {
    gen.door_width_max = as_int();
  } else if (key == "gen.window_density") {
    gen.window_density = as_double();
  } else if (key == "gen.irregular") {
    gen.irregular = as_bool();
  } else if (key == "gen.n_train") {
    n_train = as_int();
  } else if (key == "gen.n_test") {
    n_test = as_int();
  } else if (key == "eval.split") {
    if (value != "train" && value != "test" && value != "all")
      throw DataError("eval.split must be train, test, or all, got '" + value + "'");
    split = value;
  } else if (key == "eval.postprocess") {
    postprocess = as_bool();
  } else if (key == "recon.cell_size") {
    cell_size = as_double();
  } else if (key == "recon.wall_height") {
    wall_height = as_double();
  } else if (key == "recon.wall_class") {
    wall_class = as_int();
  } else if (key == "paths.data") {
    data_dir = value;
  } else if (key == "paths.checkpoint") {
    checkpoint = value;
  } else if (key == "paths.input") {
    input = value;
  } else if (key == "paths.palette") {
    palette_file = value;
  } else {
    throw DataError("unknown config key '" + key + "'");
  }
}

inline std::string RunConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  {
    std::istringstream ms(model_config_to_text(model));
    std::string line;
    while (std::getline(ms, line)) os << "model." << line << "\n";
  }
  os << "train.learning_rate=" << train.learning_rate << "\n";
  os << "train.iterations=" << train.iterations << "\n";
  os << "train.beta1=" << train.beta1 << "\n";
  os << "train.beta2=" << train.beta2 << "\n";
  os << "train.epsilon=" << train.epsilon << "\n";
  os << "train.seed=" << train.seed << "\n";
  os << "train.eval_every=" << train.eval_every << "\n";
  os << "train.mean_over_pixels=" << (train.mean_over_pixels ? 1 : 0) << "\n";
  os << "train.count_channels=" << (train.count_channels ? 1 : 0) << "\n";
  os << "gen.seed=" << gen.seed << "\n";
  os << "gen.canvas=" << gen.canvas << "\n";
  os << "gen.rooms_min=" << gen.rooms_min << "\n";
  os << "gen.rooms_max=" << gen.rooms_max << "\n";
  os << "gen.min_room_size=" << gen.min_room_size << "\n";
  os << "gen.wall_thickness_min=" << gen.wall_thickness_min << "\n";
  os << "gen.wall_thickness_max=" << gen.wall_thickness_max << "\n";
  os << "gen.door_width_min=" << gen.door_width_min << "\n";
  os << "gen.door_width_max=" << gen.door_width_max << "\n";
  os << "gen.window_density=" << gen.window_density << "\n";
  os << "gen.irregular=" << (gen.irregular ? 1 : 0) << "\n";
  os << "gen.n_train=" << n_train << "\n";
  os << "gen.n_test=" << n_test << "\n";
  os << "eval.split=" << split << "\n";
  os << "eval.postprocess=" << (postprocess ? 1 : 0) << "\n";
  os << "recon.cell_size=" << cell_size << "\n";
  os << "recon.wall_height=" << wall_height << "\n";
  os << "recon.wall_class=" << wall_class << "\n";
  os << "paths.data=" << data_dir << "\n";
  os << "paths.checkpoint=" << checkpoint << "\n";
  os << "paths.input=" << input << "\n";
  os << "paths.palette=" << palette_file << "\n";
  return os.str();
}

// Apply "key=value" lines (blank lines and '#' comments skipped) on top of cfg.
inline void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    std::size_t start = 0;
    while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
    line = line.substr(start);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(line_no) + " has no '=': '" + line + "'");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline void apply_config_file(RunConfig& cfg, const std::string& path) {
  apply_config_text(cfg, read_text_file(path));
}

}  // namespace floorplan
