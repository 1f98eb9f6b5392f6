// Command-line front end: reproducible pipelines over the floorplan library.
// Commands: gen-data, train, eval, infer, postprocess, reconstruct.
// Exit codes: 0 ok, 2 bad usage, 3 data error, 4 numeric failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "floorplan/dataset_io.hpp"
#include "floorplan/postprocess.hpp"
#include "floorplan/reconstruct3d.hpp"

namespace fs = std::filesystem;
using namespace floorplan;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --config file first, then typed sugar flags (handled by callers), then
// --set key=value overrides, in command-line order.
void apply_sets(RunConfig& cfg, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void write_resolved(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_text_file((fs::path(out_dir) / "resolved.cfg").string(), cfg.to_text());
}

Palette palette_for(const RunConfig& cfg) {
  if (cfg.palette_file.empty()) return Palette::defaults();
  return palette_from_text(read_text_file(cfg.palette_file));
}

void require_canvas(const ModelConfig& model, const std::vector<Sample>& samples) {
  for (const Sample& s : samples)
    if (s.image.h != model.input_size || s.image.w != model.input_size)
      throw DataError("sample '" + s.id + "' is " + std::to_string(s.image.w) + "x" +
                      std::to_string(s.image.h) + " but the model expects " +
                      std::to_string(model.input_size) + "x" +
                      std::to_string(model.input_size));
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out) {
  const Corpus corpus = make_corpus(cfg.gen, cfg.n_train, cfg.n_test);
  save_corpus(corpus, out, palette_for(cfg));
  write_resolved(cfg, out);
  std::cout << "wrote " << corpus.train.size() << " train + " << corpus.test.size()
            << " test samples under " << out << "\n";
  return 0;
}

int cmd_train(RunConfig cfg, const std::string& out) {
  const LoadedCorpus lc = load_corpus(cfg.data_dir);
  require_canvas(cfg.model, lc.corpus.train);
  fs::create_directories(out);
  cfg.train.checkpoint_path = (fs::path(out) / "checkpoint.fpn").string();
  write_resolved(cfg, out);
  const std::vector<Sample>* eval_set =
      cfg.train.eval_every > 0 && !lc.corpus.test.empty() ? &lc.corpus.test : nullptr;
  if (eval_set) require_canvas(cfg.model, *eval_set);
  const TrainResult result = train(cfg.model, cfg.train, lc.corpus.train, eval_set);
  write_text_file((fs::path(out) / "train_log.csv").string(),
                  "iteration,loss_rb,loss_rt,loss_total\n" + result.log);
  if (!result.evals.empty()) {
    std::ostringstream ev;
    ev.precision(12);
    ev << "iteration,overall_accu\n";
    for (const EvalRecord& r : result.evals)
      ev << r.iteration << "," << r.overall_accu << "\n";
    write_text_file((fs::path(out) / "evals.csv").string(), ev.str());
  }
  std::cout << "trained " << cfg.train.iterations << " iterations on "
            << lc.corpus.train.size() << " samples; checkpoint at "
            << cfg.train.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(RunConfig cfg, const std::string& out, const std::string& ablation) {
  const LoadedCorpus lc = load_corpus(cfg.data_dir);
  Checkpoint ck = load_checkpoint(cfg.checkpoint);
  if (!ablation.empty()) ck.model.ablation = ablation_from_string(ablation);
  cfg.model = ck.model;
  const std::vector<Sample> samples = select_split(lc.corpus, cfg.split);
  require_canvas(ck.model, samples);
  write_resolved(cfg, out);
  const MetricsReport report = evaluate(ck, samples, cfg.postprocess);
  const std::string label = to_string(ck.model.ablation);
  std::ostringstream txt;
  txt << "ablation=" << label << "\n"
      << "split=" << cfg.split << "\n"
      << "postprocess=" << (cfg.postprocess ? 1 : 0) << "\n"
      << report.to_kv();
  write_text_file((fs::path(out) / "metrics.txt").string(), txt.str());
  write_text_file(
      (fs::path(out) / "metrics.csv").string(),
      "ablation," + MetricsReport::csv_header(static_cast<int>(report.gt_count.size())) +
          "\n" + label + "," + report.to_csv_row() + "\n");
  std::ostringstream line;
  line.precision(12);
  line << "ablation=" << label << " split=" << cfg.split
       << " overall_accu=" << report.overall_accu << " mean_iou=" << report.mean_iou
       << " f_beta_max=" << report.f_beta_max;
  std::cout << line.str() << "\n";
  return 0;
}

int cmd_infer(RunConfig cfg, const std::string& out) {
  const LoadedCorpus lc = load_corpus(cfg.data_dir);
  const Checkpoint ck = load_checkpoint(cfg.checkpoint);
  cfg.model = ck.model;
  const std::vector<Sample> samples = select_split(lc.corpus, cfg.split);
  require_canvas(ck.model, samples);
  write_resolved(cfg, out);
  fs::create_directories(fs::path(out) / "pred_boundary");
  fs::create_directories(fs::path(out) / "pred_room");
  fs::create_directories(fs::path(out) / "composite");
  write_text_file((fs::path(out) / "palette.txt").string(), palette_to_text(lc.palette));
  for (const Sample& s : samples) {
    PredictedSample p = predict(ck, s.image);
    if (cfg.postprocess) p.room = postprocess_rooms(p.boundary, p.room);
    const std::string name = s.id + ".png";
    encode_label_png((fs::path(out) / "pred_boundary" / name).string(), p.boundary,
                     lc.palette.boundary);
    encode_label_png((fs::path(out) / "pred_room" / name).string(), p.room,
                     lc.palette.room);
    const RgbImage panel = side_by_side(
        {gray_to_rgb(s.image),
         composite_labels(s.boundary_labels, s.room_labels, lc.palette),
         composite_labels(p.boundary, p.room, lc.palette)});
    write_png((fs::path(out) / "composite" / name).string(), panel);
  }
  std::cout << "wrote " << samples.size() << " predictions under " << out << "\n";
  return 0;
}

int cmd_postprocess(const RunConfig& cfg, const std::string& out) {
  const fs::path pred(cfg.data_dir);
  const Palette pal = palette_from_text(read_text_file((pred / "palette.txt").string()));
  const std::vector<std::string> ids = list_png_ids((pred / "pred_boundary").string());
  write_resolved(cfg, out);
  fs::create_directories(fs::path(out) / "pred_boundary");
  fs::create_directories(fs::path(out) / "pred_room");
  write_text_file((fs::path(out) / "palette.txt").string(), palette_to_text(pal));
  for (const std::string& id : ids) {
    const std::string name = id + ".png";
    const LabelMap boundary =
        decode_label_png((pred / "pred_boundary" / name).string(), pal.boundary);
    const LabelMap room = decode_label_png((pred / "pred_room" / name).string(), pal.room);
    const LabelMap refined = postprocess_rooms(boundary, room);
    encode_label_png((fs::path(out) / "pred_boundary" / name).string(), boundary,
                     pal.boundary);
    encode_label_png((fs::path(out) / "pred_room" / name).string(), refined, pal.room);
  }
  std::cout << "refined " << ids.size() << " predictions under " << out << "\n";
  return 0;
}

int cmd_reconstruct(const RunConfig& cfg, const std::string& out, bool binary) {
  LabelMap mask(0, 0);
  if (binary) {
    const GrayImage g = read_png_gray(cfg.input);
    mask = LabelMap(g.h, g.w);
    for (std::size_t i = 0; i < g.v.size(); ++i) mask.v[i] = g.v[i] >= 128 ? 1 : 0;
  } else {
    const Palette pal = palette_for(cfg);
    const LabelMap labels = decode_label_png(cfg.input, pal.boundary);
    mask = LabelMap(labels.h, labels.w);
    for (std::size_t i = 0; i < labels.v.size(); ++i)
      mask.v[i] = labels.v[i] == cfg.wall_class ? 1 : 0;
  }
  long long wall_px = 0;
  for (const std::uint8_t v : mask.v) wall_px += v;
  const Mesh mesh = extrude_walls(mask, cfg.cell_size, cfg.wall_height);
  write_resolved(cfg, out);
  write_obj(mesh, (fs::path(out) / "walls.obj").string());
  std::ostringstream line;
  line.precision(12);
  line << "cuboids=" << mesh.vertices.size() / 8 << " wall_pixels=" << wall_px
       << " footprint_m2=" << static_cast<double>(wall_px) * cfg.cell_size * cfg.cell_size;
  std::cout << line.str() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"floor-plan segmentation toolkit: synthetic data, training, "
               "evaluation, inference, postprocessing, 3D reconstruction"};
  app.require_subcommand(1);

  std::string config_file, out, data, checkpoint, input, ablation, split, palette;
  std::vector<std::string> sets;
  long long seed = 0;
  int n_train = 0, n_test = 0, iterations = 0, eval_every = 0, wall_class = 0;
  double cell = 0.0, height = 0.0;
  bool post = false, binary = false;

  const auto add_common = [&](CLI::App* c) {
    c->add_option("--config", config_file, "key=value config file ('#' comments)");
    c->add_option("--set", sets, "override one config key (key=value, repeatable)");
    c->add_option("--out", out, "output directory")->required();
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  add_common(gen);
  gen->add_option("--seed", seed, "generation seed (gen.seed)");
  gen->add_option("--train", n_train, "training samples (gen.n_train)");
  gen->add_option("--test", n_test, "test samples (gen.n_test)");

  CLI::App* tr = app.add_subcommand("train", "train a model on a corpus");
  add_common(tr);
  tr->add_option("--data", data, "corpus directory")->required();
  tr->add_option("--iterations", iterations, "training iterations (train.iterations)");
  tr->add_option("--seed", seed, "initialization seed (train.seed)");
  tr->add_option("--eval-every", eval_every, "evaluate every N iterations (train.eval_every)");
  tr->add_option("--ablation", ablation, "architecture variant (model.ablation)");

  CLI::App* ev = app.add_subcommand("eval", "score a checkpoint on a corpus split");
  add_common(ev);
  ev->add_option("--data", data, "corpus directory")->required();
  ev->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  ev->add_option("--ablation", ablation, "override the architecture variant under test");
  ev->add_option("--split", split, "train|test|all (eval.split)");
  ev->add_flag("--post", post, "vote room types inside regions before scoring");

  CLI::App* in = app.add_subcommand("infer", "write argmax label maps and composites");
  add_common(in);
  in->add_option("--data", data, "corpus directory")->required();
  in->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  in->add_option("--split", split, "train|test|all (eval.split)");
  in->add_flag("--post", post, "vote room types inside regions before saving");

  CLI::App* pp = app.add_subcommand("postprocess", "refine a prediction directory");
  add_common(pp);
  pp->add_option("--pred", data, "prediction directory (from infer)")->required();

  CLI::App* rc = app.add_subcommand("reconstruct", "extrude a wall mask to an OBJ mesh");
  add_common(rc);
  rc->add_option("--input", input, "boundary label PNG (or binary mask with --binary)")
      ->required();
  rc->add_flag("--binary", binary, "input is a grayscale mask: >=128 means wall");
  rc->add_option("--cell", cell, "metres per pixel (recon.cell_size)");
  rc->add_option("--height", height, "extrusion height in metres (recon.wall_height)");
  rc->add_option("--wall-class", wall_class, "boundary label id to extrude (recon.wall_class)");
  rc->add_option("--palette", palette, "palette file for label decoding (paths.palette)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "floorplan: usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    const auto sugar = [&](const CLI::App* c, const std::string& flag,
                           const std::string& key, const auto& value) {
      if (c->count(flag)) cfg.set(key, [&] {
        std::ostringstream os;
        os.precision(17);
        os << value;
        return os.str();
      }());
    };
    if (gen->parsed()) {
      sugar(gen, "--seed", "gen.seed", seed);
      sugar(gen, "--train", "gen.n_train", n_train);
      sugar(gen, "--test", "gen.n_test", n_test);
      apply_sets(cfg, sets);
      return cmd_gen_data(cfg, out);
    }
    if (tr->parsed()) {
      cfg.data_dir = data;
      sugar(tr, "--iterations", "train.iterations", iterations);
      sugar(tr, "--seed", "train.seed", seed);
      sugar(tr, "--eval-every", "train.eval_every", eval_every);
      sugar(tr, "--ablation", "model.ablation", ablation);
      apply_sets(cfg, sets);
      return cmd_train(cfg, out);
    }
    if (ev->parsed()) {
      cfg.data_dir = data;
      cfg.checkpoint = checkpoint;
      sugar(ev, "--split", "eval.split", split);
      if (post) cfg.postprocess = true;
      apply_sets(cfg, sets);
      return cmd_eval(cfg, out, ablation);
    }
    if (in->parsed()) {
      cfg.data_dir = data;
      cfg.checkpoint = checkpoint;
      sugar(in, "--split", "eval.split", split);
      if (post) cfg.postprocess = true;
      apply_sets(cfg, sets);
      return cmd_infer(cfg, out);
    }
    if (pp->parsed()) {
      cfg.data_dir = data;
      apply_sets(cfg, sets);
      return cmd_postprocess(cfg, out);
    }
    if (rc->parsed()) {
      cfg.input = input;
      sugar(rc, "--cell", "recon.cell_size", cell);
      sugar(rc, "--height", "recon.wall_height", height);
      sugar(rc, "--wall-class", "recon.wall_class", wall_class);
      sugar(rc, "--palette", "paths.palette", palette);
      apply_sets(cfg, sets);
      return cmd_reconstruct(cfg, out, binary);
    }
    throw UsageError("no command selected");
  } catch (const UsageError& e) {
    std::cerr << "floorplan: usage error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "floorplan: numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "floorplan: error: " << e.what() << "\n";
    return 3;
  }
}
