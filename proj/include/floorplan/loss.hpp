#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "floorplan/autodiff.hpp"
#include "floorplan/core.hpp"
#include "floorplan/labelmap.hpp"

namespace floorplan {

// Balance between the two task losses; always sums to 1.
struct TaskWeights {
  double rb = 0.5;  // boundary task
  double rt = 0.5;  // room task
};

// Rarity weighting from ground-truth pixel counts: classes with more pixels
// get smaller weights, w_i = (N - N_i) / sum_j (N - N_j), summing to 1.
inline std::vector<double> within_task_weights(const std::vector<std::int64_t>& gt_counts) {
  if (gt_counts.size() < 2)
    throw DataError("within_task_weights: need at least 2 classes, got " +
                    std::to_string(gt_counts.size()));
  std::int64_t total = 0;
  for (std::int64_t c : gt_counts) {
    if (c < 0) throw DataError("within_task_weights: negative pixel count");
    total += c;
  }
  if (total == 0) throw DataError("within_task_weights: all class counts are zero");
  double denom = 0.0;
  for (std::int64_t c : gt_counts) denom += static_cast<double>(total - c);
  std::vector<double> w(gt_counts.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = static_cast<double>(total - gt_counts[i]) / denom;
  return w;
}

// Mean (or sum) over pixels of w_label * -log(softmax(logits)[label]), with the
// probability clamped at 1e-12 before the log. Differentiable through logits.
template <typename S>
typename TapeT<S>::Id within_task_loss(TapeT<S>& tape, typename TapeT<S>::Id logits,
                                       const std::vector<std::uint8_t>& labels,
                                       const std::vector<double>& class_weights,
                                       bool mean_over_pixels = true) {
  std::vector<S> w(class_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<S>(class_weights[i]);
  return tape.weighted_nll(tape.softmax_channels(logits), labels, std::move(w),
                           mean_over_pixels);
}

// Each task is weighted by the other task's share of output pixels, so the
// smaller head gets the larger weight: w_rb = N_rt/(N_rb+N_rt) and vice versa.
inline TaskWeights cross_task_weights(std::int64_t n_rb, std::int64_t n_rt) {
  if (n_rb < 0 || n_rt < 0) throw DataError("cross_task_weights: negative pixel count");
  if (n_rb + n_rt == 0) throw DataError("cross_task_weights: both pixel counts are zero");
  const double total = static_cast<double>(n_rb) + static_cast<double>(n_rt);
  return TaskWeights{static_cast<double>(n_rt) / total, static_cast<double>(n_rb) / total};
}

// Output-pixel counts per task head. Channels count by default, making the
// ratio the class-count ratio; with count_channels=false both tasks see H*W
// and the weights collapse to 1/2 each.
inline TaskWeights cross_task_weights_for(int h, int w, int boundary_classes,
                                          int room_classes, bool count_channels = true) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  const std::int64_t n_rb = hw * (count_channels ? boundary_classes : 1);
  const std::int64_t n_rt = hw * (count_channels ? room_classes : 1);
  return cross_task_weights(n_rb, n_rt);
}

// w_rb * L_rb + w_rt * L_rt, differentiable through both scalars.
template <typename S>
typename TapeT<S>::Id total_loss(TapeT<S>& tape, typename TapeT<S>::Id loss_rb,
                                 typename TapeT<S>::Id loss_rt, TaskWeights tw) {
  return tape.add(tape.scale(loss_rb, static_cast<S>(tw.rb)),
                  tape.scale(loss_rt, static_cast<S>(tw.rt)));
}

}  // namespace floorplan
