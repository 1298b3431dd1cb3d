#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ovcal/linalg.hpp"

namespace ovcal {

// One training/evaluation sample: a synthetic feature grid with N disjoint
// ground-truth instance masks. `training_words` holds the text prompt
// currently attached to each instance (canonical names until a
// diversification pass rewrites them for a step).
struct RegionBatch {
  uint64_t image_id = 0;
  TokenGrid features;                       // H x W x D_f
  std::vector<Grid> gt_masks;               // binary 0/1 grids
  std::vector<int> gt_labels;               // category ids
  std::vector<uint64_t> instance_ids;       // stable ids for teacher oracle calls
  std::vector<std::string> caption_words;   // image-level caption vocabulary
  std::vector<std::string> training_words;  // per-instance prompt, parallel to gt_labels

  int num_instances() const { return static_cast<int>(gt_masks.size()); }

  void validate() const {
    if (gt_masks.empty()) throw ShapeError("region batch: no instances");
    if (gt_masks.size() != gt_labels.size() || gt_masks.size() != instance_ids.size() ||
        gt_masks.size() != training_words.size())
      throw ShapeError("region batch: parallel arrays differ in length");
    for (const auto& m : gt_masks)
      if (m.h != features.h || m.w != features.w)
        throw ShapeError("region batch: mask shape differs from feature grid");
    for (std::size_t p = 0; p < gt_masks.front().pixels(); ++p) {
      int covered = 0;
      for (const auto& m : gt_masks) covered += m.v[p] > 0.0 ? 1 : 0;
      if (covered > 1) throw DomainError("region batch: instance masks overlap");
    }
  }
};

}  // namespace ovcal
