#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "floorplan/core.hpp"
#include "floorplan/labelmap.hpp"

namespace floorplan {

// Accumulate per-class counting state for one (prediction, ground truth) pair:
// gt/pred occupancy, correct pixels, intersection and union per class. The
// vectors are resized to num_classes if smaller, so one set of accumulators
// can absorb a whole corpus.
inline void accumulate_counts(const LabelMap& pred, const LabelMap& gt, int num_classes,
                              std::vector<std::int64_t>& gt_count,
                              std::vector<std::int64_t>& correct_count,
                              std::vector<std::int64_t>& inter_count,
                              std::vector<std::int64_t>& union_count) {
  require_same_extent(pred, gt);
  const auto n = static_cast<std::size_t>(num_classes);
  for (auto* v : {&gt_count, &correct_count, &inter_count, &union_count})
    if (v->size() < n) v->resize(n, 0);
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const std::uint8_t p = pred.v[i], g = gt.v[i];
    if (p >= num_classes || g >= num_classes)
      throw DataError("label id " + std::to_string(int(std::max(p, g))) +
                      " out of range [0," + std::to_string(num_classes) + ")");
    ++gt_count[g];
    if (p == g) {
      ++correct_count[g];
      ++inter_count[g];
      ++union_count[g];
    } else {
      ++union_count[g];
      ++union_count[p];
    }
  }
}

// Per-class and overall pixel accuracy. Classes absent from the ground truth
// carry no class accuracy and are excluded from any average.
struct AccuracyReport {
  double overall = 0.0;
  std::vector<std::int64_t> gt_count;       // ground-truth pixels per class
  std::vector<std::int64_t> correct_count;  // correctly predicted pixels per class

  bool present(int i) const { return gt_count[static_cast<std::size_t>(i)] > 0; }
  std::optional<double> class_accu(int i) const {
    if (!present(i)) return std::nullopt;
    return static_cast<double>(correct_count[static_cast<std::size_t>(i)]) /
           static_cast<double>(gt_count[static_cast<std::size_t>(i)]);
  }
};

inline AccuracyReport accuracy(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  AccuracyReport r;
  std::vector<std::int64_t> inter, uni;
  accumulate_counts(pred, gt, num_classes, r.gt_count, r.correct_count, inter, uni);
  std::int64_t total = 0, correct = 0;
  for (std::size_t i = 0; i < r.gt_count.size(); ++i) {
    total += r.gt_count[i];
    correct += r.correct_count[i];
  }
  r.overall = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return r;
}

// Mean intersection-over-union across the classes present in gt or pred.
inline double mean_iou(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  std::vector<std::int64_t> gt_c, correct_c, inter, uni;
  accumulate_counts(pred, gt, num_classes, gt_c, correct_c, inter, uni);
  double sum = 0.0;
  int present = 0;
  for (std::size_t i = 0; i < uni.size(); ++i) {
    if (uni[i] == 0) continue;
    sum += static_cast<double>(inter[i]) / static_cast<double>(uni[i]);
    ++present;
  }
  return present > 0 ? sum / present : 0.0;
}

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Binary-mask precision and recall; empty denominators yield 0.
inline PrecisionRecall precision_recall(const std::vector<std::uint8_t>& pred,
                                        const std::vector<std::uint8_t>& gt) {
  if (pred.size() != gt.size())
    throw ShapeError("precision_recall: mask sizes differ, " +
                     std::to_string(pred.size()) + " vs " + std::to_string(gt.size()));
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    if (p && g) ++tp;
    else if (p) ++fp;
    else if (g) ++fn;
  }
  PrecisionRecall r;
  if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return r;
}

// (1+b2)*P*R / (b2*P + R), defined as 0 when the denominator vanishes.
inline double f_beta(double precision, double recall, double beta2 = 0.3) {
  const double denom = beta2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + beta2) * precision * recall / denom;
}

struct FSweep {
  double f_max = 0.0;
  double f_mean = 0.0;
};

// Threshold sweep over t/(T-1) for t = 0..T-1, detecting prob >= threshold.
// A map that is already binary is evaluated as-is at every threshold, so its
// F_max and F_mean coincide by construction.
inline FSweep f_beta_sweep(const std::vector<double>& prob,
                           const std::vector<std::uint8_t>& gt_mask, int T = 256,
                           double beta2 = 0.3) {
  if (T < 2) throw DataError("f_beta_sweep: need at least 2 thresholds");
  if (prob.size() != gt_mask.size())
    throw ShapeError("f_beta_sweep: map sizes differ, " + std::to_string(prob.size()) +
                     " vs " + std::to_string(gt_mask.size()));
  bool binary = true;
  for (double p : prob) {
    if (p < 0.0 || p > 1.0)
      throw DataError("f_beta_sweep: probability " + std::to_string(p) +
                      " outside [0,1]");
    if (p != 0.0 && p != 1.0) binary = false;
  }
  std::vector<std::uint8_t> pred(prob.size());
  FSweep out;
  if (binary) {
    for (std::size_t i = 0; i < prob.size(); ++i) pred[i] = prob[i] == 1.0 ? 1 : 0;
    auto pr = precision_recall(pred, gt_mask);
    out.f_max = out.f_mean = f_beta(pr.precision, pr.recall, beta2);
    return out;
  }
  double sum = 0.0;
  for (int t = 0; t < T; ++t) {
    const double tau = static_cast<double>(t) / (T - 1);
    for (std::size_t i = 0; i < prob.size(); ++i) pred[i] = prob[i] >= tau ? 1 : 0;
    auto pr = precision_recall(pred, gt_mask);
    const double f = f_beta(pr.precision, pr.recall, beta2);
    out.f_max = std::max(out.f_max, f);
    sum += f;
  }
  out.f_mean = sum / T;
  return out;
}

// Bundle of every evaluation number for one label space, plus the raw counts
// the ratios were computed from.
struct MetricsReport {
  double overall_accu = 0.0;
  double mean_iou = 0.0;
  double f_beta_max = 0.0;
  double f_beta_mean = 0.0;
  std::vector<std::int64_t> gt_count;
  std::vector<std::int64_t> correct_count;

  bool present(int i) const { return gt_count[static_cast<std::size_t>(i)] > 0; }
  std::optional<double> class_accu(int i) const {
    if (!present(i)) return std::nullopt;
    return static_cast<double>(correct_count[static_cast<std::size_t>(i)]) /
           static_cast<double>(gt_count[static_cast<std::size_t>(i)]);
  }

  // flat key=value text, one pair per line; absent classes have no class_accu
  std::string to_kv() const {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "overall_accu=" << overall_accu << "\n";
    os << "mean_iou=" << mean_iou << "\n";
    os << "f_beta_max=" << f_beta_max << "\n";
    os << "f_beta_mean=" << f_beta_mean << "\n";
    os << "classes=" << gt_count.size() << "\n";
    for (std::size_t i = 0; i < gt_count.size(); ++i) {
      os << "gt_count." << i << "=" << gt_count[i] << "\n";
      os << "correct_count." << i << "=" << correct_count[i] << "\n";
      if (gt_count[i] > 0)
        os << "class_accu." << i << "="
           << static_cast<double>(correct_count[i]) / static_cast<double>(gt_count[i])
           << "\n";
    }
    return os.str();
  }

  static std::string csv_header(int num_classes) {
    std::string s = "overall_accu,mean_iou,f_beta_max,f_beta_mean";
    for (int i = 0; i < num_classes; ++i) s += ",class_accu." + std::to_string(i);
    return s;
  }

  // comma-separated row matching csv_header; absent classes print empty cells
  std::string to_csv_row() const {
    std::ostringstream os;
    os << std::setprecision(12);
    os << overall_accu << "," << mean_iou << "," << f_beta_max << "," << f_beta_mean;
    for (std::size_t i = 0; i < gt_count.size(); ++i) {
      os << ",";
      if (auto a = class_accu(static_cast<int>(i))) os << *a;
    }
    return os.str();
  }
};

}  // namespace floorplan
