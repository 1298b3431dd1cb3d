#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ovcal/category.hpp"
#include "ovcal/embedding.hpp"

namespace ovcal {

struct TeacherParams {
  int dim = 16;
  double cone_angle = 0.35;   // angular radius of each synonym cluster (radians)
  double alignment = 0.95;    // rho: visual-to-text fidelity in [0, 1]
  double token_noise = 0.25;  // per-pixel perturbation of grid tokens
};

// Deterministic frozen embedding oracle. Stands in for a pretrained
// text/vision encoder pair at desk scale: text embeddings are seeded points
// on the unit sphere, region embeddings mix the class text direction with
// per-instance noise, and grid tokens repaint the covering instance's
// region embedding with per-pixel noise.
//
// Every query is a pure function of (seed, params, arguments); repeated
// calls are bit-identical.
class TeacherSpace {
 public:
  TeacherSpace() = default;

  const CategoryTable& table() const { return table_; }
  int dim() const { return params_.dim; }
  const TeacherParams& params() const { return params_; }
  uint64_t seed() const { return seed_; }

  /// Text embedding of a known word. Unit norm.
  const Vec& text(const std::string& word) const;

  /// Text embedding of synonym `syn` of category `category_id` (0 = canonical).
  const Vec& text(int category_id, int syn) const;

  /// Region-level visual embedding for one instance of a category:
  /// normalize(rho * text(canonical) + (1 - rho) * noise(instance)).
  /// At rho == 1 this is the canonical text embedding, exactly.
  Vec region_embedding(int category_id, uint64_t instance_id) const;

  /// H x W token grid for an image: pixels covered by an instance mask carry
  /// that instance's region embedding plus per-pixel noise; uncovered pixels
  /// carry pure noise tokens.
  TokenGrid token_grid(uint64_t image_id, int h, int w, const std::vector<const Grid*>& masks,
                       const std::vector<int>& category_ids,
                       const std::vector<uint64_t>& instance_ids) const;

  /// All words in table order (categories ascending, synonym index ascending).
  std::vector<std::string> words() const;

  friend TeacherSpace build_teacher(const CategoryTable& table, const TeacherParams& params,
                                    uint64_t seed);

 private:
  CategoryTable table_;
  TeacherParams params_;
  uint64_t seed_ = 0;
  std::vector<std::vector<Vec>> text_embeds_;  // [category][synonym]
  std::unordered_map<std::string, std::pair<int, int>> word_index_;
};

/// Constructs the frozen space. Requires K >= 2 categories and D >= 2.
TeacherSpace build_teacher(const CategoryTable& table, const TeacherParams& params, uint64_t seed);

/// Synthetic vocabulary: K categories named cat00.., each with a seeded
/// number of extra synonym words in [synonyms_min, synonyms_max] - 1.
CategoryTable make_synthetic_table(int categories, int synonyms_min, int synonyms_max,
                                   uint64_t seed);

}  // namespace ovcal
