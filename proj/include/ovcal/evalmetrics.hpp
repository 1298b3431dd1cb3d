#pragma once

#include <cstdint>
#include <vector>

#include "ovcal/errors.hpp"

namespace ovcal {

constexpr uint16_t kIgnoreLabel = 0xFFFF;

struct LabelMap {
  int h = 0;
  int w = 0;
  std::vector<uint16_t> labels;

  LabelMap() = default;
  LabelMap(int h_, int w_, uint16_t fill = kIgnoreLabel)
      : h(h_), w(w_), labels(static_cast<std::size_t>(h_) * w_, fill) {}

  uint16_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * w + x]; }
  uint16_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * w + x]; }
  std::size_t pixels() const { return labels.size(); }
};

// Per-class intersection/union tallies. Mergeable across images (and video
// frames) by elementwise sum, so accumulation order never matters.
struct ConfusionAccumulator {
  int num_classes = 0;
  std::vector<uint64_t> intersection;
  std::vector<uint64_t> union_;

  ConfusionAccumulator() = default;
  explicit ConfusionAccumulator(int k)
      : num_classes(k), intersection(static_cast<std::size_t>(k), 0), union_(static_cast<std::size_t>(k), 0) {}

  /// Tally one image pair. Pixels whose ground truth is the ignore label are
  /// skipped entirely; an ignore prediction at a counted pixel misses its
  /// class but pollutes no other.
  void accumulate(const LabelMap& pred, const LabelMap& gt);

  void merge(const ConfusionAccumulator& other);
};

struct MiouResult {
  std::vector<double> iou;         // per class, percent; meaningful where evaluated
  std::vector<bool> evaluated;     // union > 0
  double mean_percent = 0.0;       // mean over evaluated classes
};

/// Per-class IoU and their mean, in percent. Classes appearing in neither
/// prediction nor ground truth are excluded from the mean.
MiouResult miou(const ConfusionAccumulator& acc);

struct SplitResult {
  double seen_miou = 0.0;
  double unseen_miou = 0.0;
  bool seen_defined = false;
  bool unseen_defined = false;
  double harmonic = 0.0;  // 2su/(s+u); 0 when either side is undefined or s+u == 0
};

/// Seen/unseen means over the evaluated classes plus their harmonic mean.
SplitResult split_metrics(const MiouResult& per_class, const std::vector<bool>& is_seen);

struct VideoEvalResult {
  MiouResult per_class;
  SplitResult split;
};

/// Treats the frame sequence as one T x H x W spatio-temporal volume:
/// counts are pooled over frames before any ratio is taken.
VideoEvalResult video_eval(const std::vector<LabelMap>& pred_frames,
                           const std::vector<LabelMap>& gt_frames, int num_classes,
                           const std::vector<bool>& is_seen);

}  // namespace ovcal
