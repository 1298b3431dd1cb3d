#include "ovcal/dataset.hpp"

#include <algorithm>

#include "ovcal/rng.hpp"

namespace ovcal {

namespace {

struct Rect {
  int y0, x0, y1, x1;  // half-open
  bool overlaps(const Rect& o) const {
    return y0 < o.y1 && o.y0 < y1 && x0 < o.x1 && o.x0 < x1;
  }
};

Grid rect_mask(int h, int w, const Rect& r) {
  Grid m(h, w);
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) m.at(y, x) = 1.0;
  return m;
}

RegionBatch make_image(const ExperimentConfig& cfg, const TeacherSpace& space,
                       const std::vector<int>& label_pool, uint64_t image_id,
                       std::size_t round_robin) {
  Rng rng(mix_seed(cfg.seed, streams::kDataset, image_id));
  const int h = cfg.grid_h;
  const int w = cfg.grid_w;
  const int want = cfg.regions_min +
                   static_cast<int>(rng.next_u64() %
                                    static_cast<uint64_t>(cfg.regions_max - cfg.regions_min + 1));

  const int max_h = std::max(3, h / 2);
  const int max_w = std::max(3, w / 2);
  std::vector<Rect> rects;
  for (int k = 0; k < want; ++k) {
    for (int attempt = 0; attempt < 64; ++attempt) {
      const int rh = 3 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(max_h - 2));
      const int rw = 3 + static_cast<int>(rng.next_u64() % static_cast<uint64_t>(max_w - 2));
      const int y0 = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(h - rh + 1));
      const int x0 = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(w - rw + 1));
      const Rect cand{y0, x0, y0 + rh, x0 + rw};
      bool clash = false;
      for (const Rect& r : rects) clash = clash || cand.overlaps(r);
      if (!clash) {
        rects.push_back(cand);
        break;
      }
    }
  }
  // The first rectangle always fits; crowded layouts may carry fewer regions.
  const int n = static_cast<int>(rects.size());

  // Distinct labels per image; the first comes from a global round-robin
  // cursor so every eligible class keeps appearing in the split.
  std::vector<int> pool = label_pool;
  std::vector<int> labels;
  labels.push_back(pool[round_robin % pool.size()]);
  pool.erase(std::find(pool.begin(), pool.end(), labels.front()));
  for (int i = 1; i < n; ++i) {
    const std::size_t pick = static_cast<std::size_t>(rng.next_u64() % pool.size());
    labels.push_back(pool[pick]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
  }

  RegionBatch img;
  img.image_id = image_id;
  std::vector<const Grid*> mask_ptrs;
  for (int i = 0; i < n; ++i) {
    img.gt_masks.push_back(rect_mask(h, w, rects[static_cast<std::size_t>(i)]));
    img.gt_labels.push_back(labels[static_cast<std::size_t>(i)]);
    img.instance_ids.push_back(image_id * 16 + static_cast<uint64_t>(i));
  }
  for (const Grid& m : img.gt_masks) mask_ptrs.push_back(&m);
  img.features = space.token_grid(image_id, h, w, mask_ptrs, img.gt_labels, img.instance_ids);

  std::vector<int> sorted = img.gt_labels;
  std::sort(sorted.begin(), sorted.end());
  for (int id : sorted) img.caption_words.push_back(space.table().by_id(id).canonical);
  for (int id : img.gt_labels) img.training_words.push_back(space.table().by_id(id).canonical);
  img.validate();
  return img;
}

}  // namespace

DatasetBundle generate_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  DatasetBundle out;
  out.table = make_synthetic_table(cfg.categories, cfg.synonyms_min, cfg.synonyms_max, cfg.seed);
  out.space = build_teacher(out.table, cfg.teacher_params(), cfg.seed);

  // Validation round-robin leads with the unseen ids so even small splits
  // exercise every novel class.
  std::vector<int> unseen_sorted = cfg.unseen_ids;
  std::sort(unseen_sorted.begin(), unseen_sorted.end());
  std::vector<int> seen_sorted = cfg.seen_ids;
  std::sort(seen_sorted.begin(), seen_sorted.end());
  std::vector<int> all_ids = unseen_sorted;
  all_ids.insert(all_ids.end(), seen_sorted.begin(), seen_sorted.end());

  for (int i = 0; i < cfg.train_images; ++i)
    out.train.push_back(make_image(cfg, out.space, seen_sorted, static_cast<uint64_t>(i),
                                   static_cast<std::size_t>(i)));
  // Validation ids start far above the training range so instance noise
  // streams never collide.
  for (int i = 0; i < cfg.val_images; ++i)
    out.val.push_back(make_image(cfg, out.space, all_ids, 1000000 + static_cast<uint64_t>(i),
                                 static_cast<std::size_t>(i)));
  return out;
}

}  // namespace ovcal
