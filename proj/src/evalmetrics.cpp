#include "ovcal/evalmetrics.hpp"

#include <string>

namespace ovcal {

void ConfusionAccumulator::accumulate(const LabelMap& pred, const LabelMap& gt) {
  if (pred.h != gt.h || pred.w != gt.w) throw ShapeError("accumulate: label map shapes differ");
  for (std::size_t p = 0; p < gt.pixels(); ++p) {
    const uint16_t g = gt.labels[p];
    if (g == kIgnoreLabel) continue;
    if (g >= num_classes) throw DomainError("accumulate: gt label " + std::to_string(g) + " out of range");
    const uint16_t q = pred.labels[p];
    if (q != kIgnoreLabel && q >= num_classes)
      throw DomainError("accumulate: pred label " + std::to_string(q) + " out of range");
    union_[g] += 1;
    if (q == g) {
      intersection[g] += 1;
    } else if (q != kIgnoreLabel) {
      union_[q] += 1;
    }
  }
}

void ConfusionAccumulator::merge(const ConfusionAccumulator& other) {
  if (other.num_classes != num_classes) throw ShapeError("merge: class counts differ");
  for (int c = 0; c < num_classes; ++c) {
    intersection[static_cast<std::size_t>(c)] += other.intersection[static_cast<std::size_t>(c)];
    union_[static_cast<std::size_t>(c)] += other.union_[static_cast<std::size_t>(c)];
  }
}

MiouResult miou(const ConfusionAccumulator& acc) {
  MiouResult out;
  out.iou.assign(static_cast<std::size_t>(acc.num_classes), 0.0);
  out.evaluated.assign(static_cast<std::size_t>(acc.num_classes), false);
  double sum = 0.0;
  int counted = 0;
  for (int c = 0; c < acc.num_classes; ++c) {
    const uint64_t u = acc.union_[static_cast<std::size_t>(c)];
    if (u == 0) continue;
    const double v = 100.0 * static_cast<double>(acc.intersection[static_cast<std::size_t>(c)]) /
                     static_cast<double>(u);
    out.iou[static_cast<std::size_t>(c)] = v;
    out.evaluated[static_cast<std::size_t>(c)] = true;
    sum += v;
    ++counted;
  }
  if (counted == 0) throw DomainError("miou: empty accumulator");
  out.mean_percent = sum / counted;
  return out;
}

SplitResult split_metrics(const MiouResult& per_class, const std::vector<bool>& is_seen) {
  if (is_seen.size() != per_class.iou.size())
    throw ShapeError("split_metrics: seen mask length differs from class count");
  bool any_seen_cfg = false, any_unseen_cfg = false;
  for (bool s : is_seen) (s ? any_seen_cfg : any_unseen_cfg) = true;
  if (!any_seen_cfg || !any_unseen_cfg)
    throw DomainError("split_metrics: both split sides must be nonempty");

  SplitResult out;
  double ssum = 0.0, usum = 0.0;
  int scount = 0, ucount = 0;
  for (std::size_t c = 0; c < per_class.iou.size(); ++c) {
    if (!per_class.evaluated[c]) continue;
    if (is_seen[c]) {
      ssum += per_class.iou[c];
      ++scount;
    } else {
      usum += per_class.iou[c];
      ++ucount;
    }
  }
  out.seen_defined = scount > 0;
  out.unseen_defined = ucount > 0;
  if (out.seen_defined) out.seen_miou = ssum / scount;
  if (out.unseen_defined) out.unseen_miou = usum / ucount;
  if (out.seen_defined && out.unseen_defined && out.seen_miou + out.unseen_miou > 0.0)
    out.harmonic = 2.0 * out.seen_miou * out.unseen_miou / (out.seen_miou + out.unseen_miou);
  return out;
}

VideoEvalResult video_eval(const std::vector<LabelMap>& pred_frames,
                           const std::vector<LabelMap>& gt_frames, int num_classes,
                           const std::vector<bool>& is_seen) {
  if (pred_frames.size() != gt_frames.size()) throw ShapeError("video_eval: frame counts differ");
  if (pred_frames.empty()) throw ShapeError("video_eval: empty sequence");
  ConfusionAccumulator acc(num_classes);
  for (std::size_t t = 0; t < pred_frames.size(); ++t) acc.accumulate(pred_frames[t], gt_frames[t]);
  VideoEvalResult out;
  out.per_class = miou(acc);
  out.split = split_metrics(out.per_class, is_seen);
  return out;
}

}  // namespace ovcal
