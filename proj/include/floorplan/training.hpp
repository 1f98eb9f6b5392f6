#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "floorplan/autodiff.hpp"
#include "floorplan/core.hpp"
#include "floorplan/labelmap.hpp"
#include "floorplan/loss.hpp"
#include "floorplan/metrics.hpp"
#include "floorplan/network.hpp"
#include "floorplan/postprocess.hpp"
#include "floorplan/synthetic.hpp"

namespace floorplan {

struct TrainConfig {
  double learning_rate = 1e-4;
  int iterations = 2000;
  double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
  std::uint64_t seed = 7;
  int eval_every = 0;  // 0 disables periodic evaluation
  std::string checkpoint_path;
  bool mean_over_pixels = true;  // within-task loss normalization
  bool count_channels = true;    // cross-task weights count H*W*C, not H*W

  void validate() const {
    if (!(learning_rate > 0)) throw DataError("train config: learning_rate must be > 0");
    if (iterations < 1) throw DataError("train config: iterations must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw DataError("train config: betas must lie in [0,1)");
    if (!(epsilon > 0)) throw DataError("train config: epsilon must be > 0");
    if (eval_every < 0) throw DataError("train config: eval_every must be >= 0");
  }
};

template <typename S>
struct AdamStateT {
  std::map<std::string, TensorT<S>> m, v;
};
using AdamState = AdamStateT<float>;

// Standard bias-corrected Adam update, applied in place. Moment buffers are
// created on first use; a non-finite gradient aborts naming the parameter.
template <typename S>
void adam_step(ParamMapT<S>& params, const std::map<std::string, TensorT<S>>& grads,
               AdamStateT<S>& moments, int t, const TrainConfig& cfg) {
  if (t < 1) throw DataError("adam_step: step index must be >= 1");
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) throw DataError("adam_step: no gradient for '" + name + "'");
    const TensorT<S>& g = git->second;
    if (!(g.shape == p.shape))
      throw ShapeError("adam_step: gradient shape " + g.shape.str() + " != parameter shape " +
                       p.shape.str() + " for '" + name + "'");
    TensorT<S>& m = moments.m[name];
    TensorT<S>& v = moments.v[name];
    if (m.data.empty()) m = TensorT<S>(p.shape);
    if (v.data.empty()) v = TensorT<S>(p.shape);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gd = static_cast<double>(g.data[i]);
      if (!std::isfinite(gd)) throw NumericError("non-finite gradient in '" + name + "'");
      const double md = cfg.beta1 * static_cast<double>(m.data[i]) + (1.0 - cfg.beta1) * gd;
      const double vd =
          cfg.beta2 * static_cast<double>(v.data[i]) + (1.0 - cfg.beta2) * gd * gd;
      m.data[i] = static_cast<S>(md);
      v.data[i] = static_cast<S>(vd);
      const double update =
          cfg.learning_rate * (md / bc1) / (std::sqrt(vd / bc2) + cfg.epsilon);
      p.data[i] = static_cast<S>(static_cast<double>(p.data[i]) - update);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "FPN1", u32-LE-length-prefixed config text (iteration
// plus model settings as key=value lines), then name-sorted tensor entries of
// (u32 name length, name, u32 rank = 4, u32 dims[4], f32 LE payload).
// ---------------------------------------------------------------------------

inline std::string model_config_to_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "input_size=" << cfg.input_size << "\n";
  os << "input_channels=" << cfg.input_channels << "\n";
  os << "encoder_channels=";
  for (std::size_t i = 0; i < cfg.encoder_channels.size(); ++i)
    os << (i ? "," : "") << cfg.encoder_channels[i];
  os << "\n";
  os << "levels=" << cfg.levels << "\n";
  os << "boundary_classes=" << cfg.boundary_classes << "\n";
  os << "room_classes=" << cfg.room_classes << "\n";
  os << "direction_kernel_halfwidth=" << cfg.direction_kernel_halfwidth << "\n";
  os << "alpha=" << cfg.alpha << "\n";
  os << "literal_center=" << (cfg.literal_center ? 1 : 0) << "\n";
  os << "ablation=" << to_string(cfg.ablation) << "\n";
  return os.str();
}

namespace detail {

inline long long parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad integer '" + s + "' for " + what);
  }
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("bad number '" + s + "' for " + what);
  }
}

}  // namespace detail

// Assign one model-config field by key; unknown keys are rejected.
inline void model_config_set(ModelConfig& cfg, const std::string& key,
                             const std::string& value) {
  if (key == "input_size")
    cfg.input_size = static_cast<int>(detail::parse_int(value, key));
  else if (key == "input_channels")
    cfg.input_channels = static_cast<int>(detail::parse_int(value, key));
  else if (key == "encoder_channels") {
    std::istringstream vs(value);
    std::string item;
    std::size_t n = 0;
    while (std::getline(vs, item, ',')) {
      if (n >= cfg.encoder_channels.size())
        throw DataError("model config: too many encoder channels");
      cfg.encoder_channels[n++] = static_cast<int>(detail::parse_int(item, key));
    }
    if (n != cfg.encoder_channels.size())
      throw DataError("model config: expected " +
                      std::to_string(cfg.encoder_channels.size()) + " encoder channels");
  } else if (key == "levels")
    cfg.levels = static_cast<int>(detail::parse_int(value, key));
  else if (key == "boundary_classes")
    cfg.boundary_classes = static_cast<int>(detail::parse_int(value, key));
  else if (key == "room_classes")
    cfg.room_classes = static_cast<int>(detail::parse_int(value, key));
  else if (key == "direction_kernel_halfwidth")
    cfg.direction_kernel_halfwidth = static_cast<int>(detail::parse_int(value, key));
  else if (key == "alpha")
    cfg.alpha = detail::parse_double(value, key);
  else if (key == "literal_center")
    cfg.literal_center = detail::parse_int(value, key) != 0;
  else if (key == "ablation")
    cfg.ablation = ablation_from_string(value);
  else
    throw DataError("model config: unknown key '" + key + "'");
}

inline ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("model config line " + std::to_string(lineno) + ": expected key=value");
    model_config_set(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

struct Checkpoint {
  ModelConfig model;
  int iteration = 0;
  std::map<std::string, TensorT<float>> tensors;  // params plus adam.m.* / adam.v.*
  bool operator==(const Checkpoint&) const = default;
};

// Model parameters only — the Adam moment entries stripped.
inline ParamMap checkpoint_params(const Checkpoint& ck) {
  ParamMap p;
  for (const auto& [name, t] : ck.tensors)
    if (name.rfind("adam.", 0) != 0) p.emplace(name, t);
  return p;
}

namespace detail {

constexpr char kCheckpointMagic[4] = {'F', 'P', 'N', '1'};

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError(std::string("truncated checkpoint: missing ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  // Stage to a temp file and rename so failures never leave partial files.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open '" + tmp + "' for writing");
    os.write(detail::kCheckpointMagic, 4);
    const std::string text =
        "iteration=" + std::to_string(ck.iteration) + "\n" + model_config_to_text(ck.model);
    detail::put_u32(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ck.tensors) {
      detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      detail::put_u32(os, 4);
      for (std::int64_t d : {t.shape.b, t.shape.c, t.shape.h, t.shape.w})
        detail::put_u32(os, static_cast<std::uint32_t>(d));
      for (float f : t.data) detail::put_u32(os, std::bit_cast<std::uint32_t>(f));
    }
    if (!os) throw DataError("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4)) throw DataError("truncated checkpoint: missing magic");
  if (!std::equal(magic, magic + 3, detail::kCheckpointMagic))
    throw DataError("'" + path + "' is not a checkpoint file");
  if (magic[3] != detail::kCheckpointMagic[3])
    throw DataError("unsupported checkpoint version '" + std::string(magic, 4) + "'");

  const std::uint32_t text_len = detail::get_u32(is, "config length");
  std::string text(text_len, '\0');
  if (!is.read(text.data(), text_len)) throw DataError("truncated checkpoint: config text");

  Checkpoint ck;
  std::string config_rest;
  {
    std::istringstream ts(text);
    std::string line;
    bool have_iter = false;
    while (std::getline(ts, line)) {
      if (line.rfind("iteration=", 0) == 0) {
        ck.iteration = static_cast<int>(detail::parse_int(line.substr(10), "iteration"));
        have_iter = true;
      } else {
        config_rest += line + "\n";
      }
    }
    if (!have_iter) throw DataError("checkpoint config lacks an iteration counter");
  }
  ck.model = model_config_from_text(config_rest);

  while (true) {
    is.peek();
    if (is.eof()) break;
    const std::uint32_t name_len = detail::get_u32(is, "tensor name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw DataError("truncated checkpoint: tensor name");
    const std::uint32_t rank = detail::get_u32(is, "tensor rank");
    if (rank != 4)
      throw DataError("checkpoint tensor '" + name + "' has unsupported rank " +
                      std::to_string(rank));
    int dims[4];
    for (auto& d : dims) {
      const std::uint32_t v = detail::get_u32(is, "tensor dim");
      if (v > (1u << 24))
        throw DataError("checkpoint tensor '" + name + "' has an implausible extent");
      d = static_cast<int>(v);
    }
    const Shape4 shape{dims[0], dims[1], dims[2], dims[3]};
    if (shape.numel() > (std::int64_t(1) << 28))
      throw DataError("checkpoint tensor '" + name + "' is implausibly large");
    TensorT<float> t(shape);
    for (auto& f : t.data)
      f = std::bit_cast<float>(detail::get_u32(is, "tensor payload"));
    if (!ck.tensors.emplace(std::move(name), std::move(t)).second)
      throw DataError("checkpoint repeats a tensor name");
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Evaluation: both heads argmaxed per sample, counts aggregated across the
// corpus (micro-average), metrics computed over the merged label space of
// room classes followed by the non-background boundary classes. The F-beta
// sweep runs on the binary predicted-vs-true wall masks.
// ---------------------------------------------------------------------------

inline int merged_class_count(const ModelConfig& cfg) {
  return cfg.room_classes + cfg.boundary_classes - 1;
}

// Class id of "wall" (first non-background boundary class) in the merged space.
inline int merged_wall_class(const ModelConfig& cfg) { return cfg.room_classes; }

// Boundary classes win the pixel: merged id = room_classes + boundary_id - 1
// on boundary pixels, the room id elsewhere.
inline LabelMap merge_labels(const LabelMap& boundary, const LabelMap& room,
                             int room_classes) {
  require_same_extent(boundary, room);
  LabelMap m(boundary.h, boundary.w);
  for (std::size_t i = 0; i < m.v.size(); ++i)
    m.v[i] = boundary.v[i] != 0
                 ? static_cast<std::uint8_t>(room_classes + boundary.v[i] - 1)
                 : room.v[i];
  return m;
}

struct PredictedSample {
  LabelMap boundary, room;
};

inline MetricsReport evaluate_predictions(const std::vector<PredictedSample>& preds,
                                          const std::vector<Sample>& samples,
                                          const ModelConfig& cfg, bool with_postprocess) {
  if (samples.empty()) throw DataError("evaluate: empty corpus");
  if (preds.size() != samples.size())
    throw ShapeError("evaluate: " + std::to_string(preds.size()) + " predictions for " +
                     std::to_string(samples.size()) + " samples");
  MetricsReport report;
  std::vector<std::int64_t> inter, uni;
  std::vector<double> wall_prob;
  std::vector<std::uint8_t> wall_gt;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    LabelMap bpred = preds[i].boundary;
    LabelMap rpred = preds[i].room;
    if (with_postprocess) rpred = postprocess_rooms(bpred, rpred);
    const LabelMap merged_pred = merge_labels(bpred, rpred, cfg.room_classes);
    const LabelMap merged_gt =
        merge_labels(s.boundary_labels, s.room_labels, cfg.room_classes);
    accumulate_counts(merged_pred, merged_gt, merged_class_count(cfg), report.gt_count,
                      report.correct_count, inter, uni);
    for (std::size_t j = 0; j < bpred.v.size(); ++j) {
      wall_prob.push_back(bpred.v[j] == cls::b_wall ? 1.0 : 0.0);
      wall_gt.push_back(s.boundary_labels.v[j] == cls::b_wall ? 1 : 0);
    }
  }
  std::int64_t total = 0, correct = 0;
  for (std::size_t c = 0; c < report.gt_count.size(); ++c) {
    total += report.gt_count[c];
    correct += report.correct_count[c];
  }
  report.overall_accu =
      total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  double iou_sum = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < uni.size(); ++c) {
    if (uni[c] == 0) continue;
    iou_sum += static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
    ++present;
  }
  report.mean_iou = present > 0 ? iou_sum / present : 0.0;
  const FSweep sweep = f_beta_sweep(wall_prob, wall_gt);
  report.f_beta_max = sweep.f_max;
  report.f_beta_mean = sweep.f_mean;
  return report;
}

template <typename S>
MetricsReport evaluate_params(const ParamMapT<S>& params, const ModelConfig& cfg,
                              const std::vector<Sample>& samples, bool with_postprocess) {
  if (samples.empty()) throw DataError("evaluate: empty corpus");
  std::vector<PredictedSample> preds;
  preds.reserve(samples.size());
  for (const Sample& s : samples) {
    const auto [blogits, rlogits] = forward(params, cfg, to_input_tensor<S>(s.image));
    preds.push_back({argmax_channels(blogits), argmax_channels(rlogits)});
  }
  return evaluate_predictions(preds, samples, cfg, with_postprocess);
}

inline MetricsReport evaluate(const Checkpoint& ck, const std::vector<Sample>& samples,
                              bool with_postprocess = false) {
  return evaluate_params(checkpoint_params(ck), ck.model, samples, with_postprocess);
}

// Argmax label maps for one input image.
inline PredictedSample predict(const Checkpoint& ck, const GrayImage& image) {
  const auto [blogits, rlogits] =
      forward(checkpoint_params(ck), ck.model, to_input_tensor<float>(image));
  return {argmax_channels(blogits), argmax_channels(rlogits)};
}

// ---------------------------------------------------------------------------
// Training loop: batch size 1, samples visited cyclically, one fresh tape per
// iteration. Fully deterministic given (seed, corpus, configs).
// ---------------------------------------------------------------------------

struct EvalRecord {
  int iteration = 0;
  double overall_accu = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;  // best evaluation when eval_every > 0, else final state
  std::string log;        // one "iter,loss_rb,loss_rt,loss_total" line per iteration
  std::vector<EvalRecord> evals;
};

inline TrainResult train(const ModelConfig& mcfg, const TrainConfig& tcfg,
                         const std::vector<Sample>& train_set,
                         const std::vector<Sample>* eval_set = nullptr,
                         const ParamMap* init = nullptr) {
  mcfg.validate();
  tcfg.validate();
  if (train_set.empty()) throw DataError("train: empty corpus");

  ParamMap params = init ? *init : build_model<float>(mcfg, tcfg.seed);

  // Per-sample constants: network input, flattened labels, and within-task
  // class weights from that sample's ground-truth histogram.
  struct Prepared {
    TensorT<float> input;
    std::vector<double> w_rb, w_rt;
  };
  std::vector<Prepared> prep;
  prep.reserve(train_set.size());
  for (const Sample& s : train_set) {
    Prepared p;
    p.input = to_input_tensor<float>(s.image);
    p.w_rb = within_task_weights(class_pixel_counts(s.boundary_labels, mcfg.boundary_classes));
    p.w_rt = within_task_weights(class_pixel_counts(s.room_labels, mcfg.room_classes));
    prep.push_back(std::move(p));
  }
  const TaskWeights tw = cross_task_weights_for(
      mcfg.input_size, mcfg.input_size, mcfg.boundary_classes, mcfg.room_classes,
      tcfg.count_channels);

  AdamState moments;
  std::ostringstream log;
  log << std::setprecision(9);
  TrainResult result;
  double best_accu = -1.0;
  auto snapshot = [&](int iteration) {
    Checkpoint ck;
    ck.model = mcfg;
    ck.iteration = iteration;
    ck.tensors = params;
    for (const auto& [name, m] : moments.m) ck.tensors.emplace("adam.m." + name, m);
    for (const auto& [name, v] : moments.v) ck.tensors.emplace("adam.v." + name, v);
    return ck;
  };

  for (int t = 1; t <= tcfg.iterations; ++t) {
    const std::size_t idx = static_cast<std::size_t>((t - 1) % train_set.size());
    const Sample& s = train_set[idx];
    TapeT<float> tape;
    const auto ids = stage_params(tape, params);
    const auto fw = forward_on_tape(tape, mcfg, ids, tape.leaf(prep[idx].input));
    const auto l_rb = within_task_loss(tape, fw.boundary_logits, s.boundary_labels.v,
                                       prep[idx].w_rb, tcfg.mean_over_pixels);
    const auto l_rt = within_task_loss(tape, fw.room_logits, s.room_labels.v,
                                       prep[idx].w_rt, tcfg.mean_over_pixels);
    const auto total = total_loss(tape, l_rb, l_rt, tw);

    const double loss_rb = tape.value(l_rb).data[0];
    const double loss_rt = tape.value(l_rt).data[0];
    const double loss_total = tape.value(total).data[0];
    if (!std::isfinite(loss_total))
      throw NumericError("non-finite loss at iteration " + std::to_string(t));
    log << t << ',' << loss_rb << ',' << loss_rt << ',' << loss_total << '\n';

    tape.backward(total);
    std::map<std::string, TensorT<float>> grads;
    for (const auto& [name, id] : ids) grads.emplace(name, tape.grad_tensor(id));
    adam_step(params, grads, moments, t, tcfg);

    if (tcfg.eval_every > 0 && (t % tcfg.eval_every == 0 || t == tcfg.iterations)) {
      const std::vector<Sample>& eval_on = eval_set ? *eval_set : train_set;
      const MetricsReport r = evaluate_params(params, mcfg, eval_on, false);
      result.evals.push_back({t, r.overall_accu});
      if (r.overall_accu > best_accu) {
        best_accu = r.overall_accu;
        result.checkpoint = snapshot(t);
      }
    }
  }
  if (tcfg.eval_every <= 0) result.checkpoint = snapshot(tcfg.iterations);
  result.log = log.str();
  if (!tcfg.checkpoint_path.empty()) save_checkpoint(result.checkpoint, tcfg.checkpoint_path);
  return result;
}

}  // namespace floorplan
