#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "floorplan/autodiff.hpp"
#include "floorplan/core.hpp"
#include "floorplan/tensor.hpp"

namespace floorplan {

// Which parts of the context coupling between the two decoder branches run.
//   full                  — attention gating and direction aggregation
//   no_attention          — gate fixed to 1, direction aggregation kept
//   no_direction_kernels  — gating kept, aggregation bypassed
//   no_context            — module absent; decoders share only the encoder
//   two_separate_networks — fully independent encoder+decoder per task
enum class Ablation {
  full,
  no_attention,
  no_direction_kernels,
  no_context,
  two_separate_networks,
};

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_attention: return "no_attention";
    case Ablation::no_direction_kernels: return "no_direction_kernels";
    case Ablation::no_context: return "no_context";
    case Ablation::two_separate_networks: return "two_separate_networks";
  }
  throw Error("unreachable ablation value");
}

inline Ablation ablation_from_string(const std::string& s) {
  for (Ablation a : {Ablation::full, Ablation::no_attention, Ablation::no_direction_kernels,
                     Ablation::no_context, Ablation::two_separate_networks})
    if (to_string(a) == s) return a;
  throw DataError("unknown ablation '" + s + "'");
}

// Shape of the two-branch encoder-decoder. Five encoder blocks with a 2x
// pool between consecutive blocks (four pools total), four decoder levels
// back up to full resolution, context coupling at every decoder level.
struct ModelConfig {
  int input_size = 64;
  int input_channels = 1;
  std::array<int, 5> encoder_channels{8, 16, 32, 64, 64};
  int levels = 4;
  int boundary_classes = 4;
  int room_classes = 9;
  int direction_kernel_halfwidth = 4;  // K: arm length of the direction kernels
  double alpha = 1.0;                  // weight of every direction-kernel tap
  // Count the center tap once per arm offset (K times per direction) instead
  // of once per direction.
  bool literal_center = false;
  Ablation ablation = Ablation::full;

  void validate() const {
    if (input_size < 16 || input_size % 16 != 0)
      throw DataError("input_size must be a positive multiple of 16, got " +
                      std::to_string(input_size));
    if (levels != 4) throw DataError("levels must be 4");
    if (input_channels < 1) throw DataError("input_channels must be >= 1");
    for (int c : encoder_channels)
      if (c < 1) throw DataError("encoder channels must be >= 1");
    if (boundary_classes < 2) throw DataError("boundary_classes must be >= 2");
    if (room_classes < 2) throw DataError("room_classes must be >= 2");
    if (direction_kernel_halfwidth < 1)
      throw DataError("direction_kernel_halfwidth must be >= 1");
  }

  bool operator==(const ModelConfig&) const = default;

  static ModelConfig toy() { return ModelConfig{}; }
  static ModelConfig full_scale() {
    ModelConfig c;
    c.input_size = 512;
    c.encoder_channels = {64, 128, 256, 512, 512};
    return c;
  }
};

template <typename S>
using ParamMapT = std::map<std::string, TensorT<S>>;
using ParamMap = ParamMapT<float>;

template <typename S>
using ParamIdsT = std::map<std::string, typename TapeT<S>::Id>;

namespace detail {

template <typename S>
void init_conv(ParamMapT<S>& params, Rng& rng, const std::string& name, int oc,
               int ic, int k) {
  TensorT<S> w(Shape4{oc, ic, k, k});
  const double bound = std::sqrt(6.0 / (static_cast<double>(ic) * k * k));
  for (S& v : w.data) v = static_cast<S>(rng.uniform(-bound, bound));
  params.emplace(name + ".weight", std::move(w));
  params.emplace(name + ".bias", TensorT<S>::zeros(Shape4{1, oc, 1, 1}));
}

inline std::string level_name(const std::string& prefix, int level,
                              const std::string& leaf) {
  return prefix + ".level" + std::to_string(level) + "." + leaf;
}

inline std::string block_name(const std::string& prefix, int block,
                              const std::string& leaf) {
  return prefix + ".block" + std::to_string(block) + "." + leaf;
}

template <typename S>
void init_encoder(ParamMapT<S>& params, Rng& rng, const ModelConfig& cfg,
                  const std::string& prefix) {
  int in_c = cfg.input_channels;
  for (int b = 0; b < 5; ++b) {
    const int out_c = cfg.encoder_channels[static_cast<std::size_t>(b)];
    init_conv(params, rng, block_name(prefix, b + 1, "conv1"), out_c, in_c, 3);
    init_conv(params, rng, block_name(prefix, b + 1, "conv2"), out_c, out_c, 3);
    in_c = out_c;
  }
}

template <typename S>
void init_decoder(ParamMapT<S>& params, Rng& rng, const ModelConfig& cfg,
                  const std::string& prefix) {
  for (int l = 1; l <= 4; ++l) {
    const int prev_c = cfg.encoder_channels[static_cast<std::size_t>(5 - l)];
    const int skip_c = cfg.encoder_channels[static_cast<std::size_t>(4 - l)];
    const int out_c = skip_c;
    init_conv(params, rng, level_name(prefix, l, "conv1"), out_c, prev_c + skip_c, 3);
    init_conv(params, rng, level_name(prefix, l, "conv2"), out_c, out_c, 3);
  }
}

}  // namespace detail

// Deterministic parameter initialization: scaled-uniform weights with bound
// sqrt(6 / fan_in), zero biases. Identical (config, seed) gives identical
// parameters; tensor creation order is fixed.
template <typename S = float>
ParamMapT<S> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamMapT<S> params;
  Rng rng(seed);
  detail::init_encoder(params, rng, cfg, "encoder");
  if (cfg.ablation == Ablation::two_separate_networks)
    detail::init_encoder(params, rng, cfg, "room_encoder");
  detail::init_decoder(params, rng, cfg, "boundary_decoder");
  detail::init_decoder(params, rng, cfg, "room_decoder");
  if (cfg.ablation != Ablation::no_context &&
      cfg.ablation != Ablation::two_separate_networks) {
    for (int l = 1; l <= 4; ++l) {
      const int ch = cfg.encoder_channels[static_cast<std::size_t>(4 - l)];
      detail::init_conv(params, rng, detail::level_name("context", l, "attn1"), ch, ch, 3);
      detail::init_conv(params, rng, detail::level_name("context", l, "attn2"), ch, ch, 3);
      detail::init_conv(params, rng, detail::level_name("context", l, "attn_reduce"), 1, ch, 1);
      detail::init_conv(params, rng, detail::level_name("context", l, "room3x3"), ch, ch, 3);
      detail::init_conv(params, rng, detail::level_name("context", l, "room_reduce"), 1, ch, 1);
      detail::init_conv(params, rng, detail::level_name("context", l, "expand"), ch, ch + 1, 3);
    }
  }
  const int head_c = cfg.encoder_channels[0];
  detail::init_conv(params, rng, "boundary_head", cfg.boundary_classes, head_c, 1);
  detail::init_conv(params, rng, "room_head", cfg.room_classes, head_c, 1);
  return params;
}

// Register every parameter as a tape leaf. std::map iterates name-sorted, so
// leaf order (and therefore tape layout) is deterministic.
template <typename S>
ParamIdsT<S> stage_params(TapeT<S>& tape, const ParamMapT<S>& params) {
  ParamIdsT<S> ids;
  for (const auto& [name, tensor] : params) ids.emplace(name, tape.leaf(tensor));
  return ids;
}

namespace detail {

template <typename S>
typename TapeT<S>::Id param(TapeT<S>&, const ParamIdsT<S>& ids, const std::string& name) {
  auto it = ids.find(name);
  if (it == ids.end()) throw DataError("missing parameter '" + name + "'");
  return it->second;
}

// 3x3 (or 1x1) conv + bias from named parameters; padding preserves extent
template <typename S>
typename TapeT<S>::Id named_conv(TapeT<S>& t, const ParamIdsT<S>& ids,
                                 const std::string& name, typename TapeT<S>::Id x) {
  auto w = param(t, ids, name + ".weight");
  const int pad = t.value(w).shape.h / 2;
  return t.conv2d(x, w, param(t, ids, name + ".bias"), 1, pad);
}

}  // namespace detail

// Sum of four fixed direction kernels (horizontal, vertical, diagonal,
// anti-diagonal), each an all-ones line of length 2K+1 with weight alpha,
// applied with zero padding. The center tap contributes once per direction
// (4*alpha combined); with literal_center it contributes once per arm offset
// (4*K*alpha combined). Input must be a single-channel map.
template <typename S>
typename TapeT<S>::Id direction_aware_aggregate(TapeT<S>& tape,
                                                typename TapeT<S>::Id feat2d, int K,
                                                double alpha = 1.0,
                                                bool literal_center = false) {
  const Shape4 s = tape.value(feat2d).shape;
  if (s.c != 1)
    throw ShapeError("direction_aware_aggregate: expected single-channel map, got " +
                     s.str());
  if (K < 1) throw ShapeError("direction_aware_aggregate: K must be >= 1");
  const int n = 2 * K + 1;
  TensorT<S> kernel(Shape4{1, 1, n, n});
  const S a = static_cast<S>(alpha);
  for (int k = 1; k <= K; ++k) {
    kernel.at(0, 0, K, K - k) += a;  // horizontal arm
    kernel.at(0, 0, K, K + k) += a;
    kernel.at(0, 0, K - k, K) += a;  // vertical arm
    kernel.at(0, 0, K + k, K) += a;
    kernel.at(0, 0, K - k, K - k) += a;  // main diagonal arm
    kernel.at(0, 0, K + k, K + k) += a;
    kernel.at(0, 0, K - k, K + k) += a;  // anti-diagonal arm
    kernel.at(0, 0, K + k, K - k) += a;
  }
  kernel.at(0, 0, K, K) = static_cast<S>(4.0 * (literal_center ? K : 1) * alpha);
  auto w = tape.leaf(std::move(kernel));
  auto b = tape.leaf(TensorT<S>::zeros(Shape4{1, 1, 1, 1}));
  return tape.conv2d(feat2d, w, b, 1, K);
}

// Boundary features -> per-pixel gate in [0,1]: two 3x3 convs with relu,
// a 1x1 reduction to one channel, then sigmoid.
template <typename S>
typename TapeT<S>::Id attention_weights(TapeT<S>& t, const ParamIdsT<S>& ids, int level,
                                        typename TapeT<S>::Id boundary_feat) {
  auto h = t.relu(detail::named_conv(t, ids, detail::level_name("context", level, "attn1"),
                                     boundary_feat));
  h = t.relu(detail::named_conv(t, ids, detail::level_name("context", level, "attn2"), h));
  h = detail::named_conv(t, ids, detail::level_name("context", level, "attn_reduce"), h);
  return t.sigmoid(h);
}

// Intermediate maps of one context application, for inspection and tests.
template <typename S>
struct ContextProbeT {
  typename TapeT<S>::Id attention = -1;   // a
  typename TapeT<S>::Id reduced = -1;     // r2d, the 2D room-feature map
  typename TapeT<S>::Id gated = -1;       // f'  = a * r2d
  typename TapeT<S>::Id aggregated = -1;  // g   = sum of direction kernels over f'
  typename TapeT<S>::Id context2d = -1;   // f'' = a * g
};

// Room-boundary-guided context: gate a 2D reduction of the room features with
// attention from the boundary features, spread it along the four directions,
// gate again, and fold the result back into the room features.
template <typename S>
typename TapeT<S>::Id spatial_context(TapeT<S>& t, const ModelConfig& cfg,
                                      const ParamIdsT<S>& ids, int level,
                                      typename TapeT<S>::Id boundary_feat,
                                      typename TapeT<S>::Id room_feat,
                                      ContextProbeT<S>* probe = nullptr) {
  const Shape4 bs = t.value(boundary_feat).shape;
  const Shape4 rs = t.value(room_feat).shape;
  if (bs.h != rs.h || bs.w != rs.w)
    throw ShapeError("spatial_context: branch extents differ, " + bs.str() + " vs " +
                     rs.str());
  const bool attend = cfg.ablation != Ablation::no_attention;

  auto r2d = detail::named_conv(
      t, ids, detail::level_name("context", level, "room_reduce"),
      t.relu(detail::named_conv(t, ids, detail::level_name("context", level, "room3x3"),
                                room_feat)));

  typename TapeT<S>::Id a = -1;
  if (attend) a = attention_weights(t, ids, level, boundary_feat);

  auto fprime = attend ? t.mul(r2d, a) : r2d;
  auto g = cfg.ablation == Ablation::no_direction_kernels
               ? fprime
               : direction_aware_aggregate(t, fprime, cfg.direction_kernel_halfwidth,
                                           cfg.alpha, cfg.literal_center);
  auto fdp = attend ? t.mul(g, a) : g;

  if (probe) *probe = ContextProbeT<S>{a, r2d, fprime, g, fdp};

  auto merged = t.concat_channels({room_feat, fdp});
  return t.relu(
      detail::named_conv(t, ids, detail::level_name("context", level, "expand"), merged));
}

template <typename S>
struct ForwardIdsT {
  typename TapeT<S>::Id boundary_logits = -1;
  typename TapeT<S>::Id room_logits = -1;
  std::vector<ContextProbeT<S>> context;  // one per decoder level (full/partial modes)
};

namespace detail {

// five conv blocks; returns the pre-pool feature of each block
template <typename S>
std::array<typename TapeT<S>::Id, 5> run_encoder(TapeT<S>& t, const ParamIdsT<S>& ids,
                                                 const std::string& prefix,
                                                 typename TapeT<S>::Id x) {
  std::array<typename TapeT<S>::Id, 5> feats{};
  for (int b = 1; b <= 5; ++b) {
    x = t.relu(named_conv(t, ids, block_name(prefix, b, "conv1"), x));
    x = t.relu(named_conv(t, ids, block_name(prefix, b, "conv2"), x));
    feats[static_cast<std::size_t>(b - 1)] = x;
    if (b < 5) x = t.max_pool2d(x);
  }
  return feats;
}

// one decoder level: upsample, concat the skip feature, two convs
template <typename S>
typename TapeT<S>::Id decoder_level(TapeT<S>& t, const ParamIdsT<S>& ids,
                                    const std::string& prefix, int level,
                                    typename TapeT<S>::Id x,
                                    typename TapeT<S>::Id skip) {
  x = t.upsample_nearest2(x);
  x = t.concat_channels({x, skip});
  x = t.relu(named_conv(t, ids, level_name(prefix, level, "conv1"), x));
  return t.relu(named_conv(t, ids, level_name(prefix, level, "conv2"), x));
}

}  // namespace detail

// Full forward pass on an existing tape. Image shape (1, input_channels, S, S)
// with S = cfg.input_size. Boundary branch first (it never depends on the room
// branch), then the room branch with per-level context injection.
template <typename S>
ForwardIdsT<S> forward_on_tape(TapeT<S>& t, const ModelConfig& cfg,
                               const ParamIdsT<S>& ids, typename TapeT<S>::Id image) {
  cfg.validate();
  const Shape4 is = t.value(image).shape;
  if (is.b != 1 || is.c != cfg.input_channels || is.h != cfg.input_size ||
      is.w != cfg.input_size)
    throw ShapeError("forward: expected image (1," + std::to_string(cfg.input_channels) +
                     "," + std::to_string(cfg.input_size) + "," +
                     std::to_string(cfg.input_size) + "), got " + is.str());

  const bool separate = cfg.ablation == Ablation::two_separate_networks;
  const bool context = !separate && cfg.ablation != Ablation::no_context;

  const auto feats_b = detail::run_encoder(t, ids, "encoder", image);
  const auto feats_r = separate ? detail::run_encoder(t, ids, "room_encoder", image) : feats_b;

  ForwardIdsT<S> out;

  std::array<typename TapeT<S>::Id, 4> boundary_levels{};
  auto xb = feats_b[4];
  for (int l = 1; l <= 4; ++l) {
    xb = detail::decoder_level(t, ids, "boundary_decoder", l, xb,
                               feats_b[static_cast<std::size_t>(4 - l)]);
    boundary_levels[static_cast<std::size_t>(l - 1)] = xb;
  }

  auto xr = feats_r[4];
  for (int l = 1; l <= 4; ++l) {
    xr = detail::decoder_level(t, ids, "room_decoder", l, xr,
                               feats_r[static_cast<std::size_t>(4 - l)]);
    if (context) {
      ContextProbeT<S> probe;
      xr = spatial_context(t, cfg, ids, l, boundary_levels[static_cast<std::size_t>(l - 1)],
                           xr, &probe);
      out.context.push_back(probe);
    }
  }

  out.boundary_logits = detail::named_conv(t, ids, "boundary_head", xb);
  out.room_logits = detail::named_conv(t, ids, "room_head", xr);
  return out;
}

// Convenience fixed-parameter forward; returns (boundary_logits, room_logits).
template <typename S>
std::pair<TensorT<S>, TensorT<S>> forward(const ParamMapT<S>& params,
                                          const ModelConfig& cfg,
                                          const TensorT<S>& image) {
  TapeT<S> tape;
  auto ids = stage_params(tape, params);
  auto r = forward_on_tape(tape, cfg, ids, tape.leaf(image));
  return {tape.value(r.boundary_logits), tape.value(r.room_logits)};
}

}  // namespace floorplan
