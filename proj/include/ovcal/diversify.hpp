#pragma once

#include <cstdint>
#include <vector>

#include "ovcal/batch.hpp"
#include "ovcal/teacher.hpp"

namespace ovcal {

// A probability vector over one category's synonym set.
struct SynonymScores {
  int category_id = 0;
  std::vector<double> scores;
};

enum class DiversifyStrategy { None, Random };

enum class GroupMode { Canonical, GroupAvg, GroupMax };

/// softmax(cosines / tau). Shared by the synonym scorer and tests.
std::vector<double> softmax_scores(const std::vector<double>& cosines, double tau);

/// Synonym score vector for one instance: softmax over the cosine
/// similarities between the instance's visual embedding and each synonym's
/// text embedding. tau defaults to 1 (no extra logit scaling).
SynonymScores synonym_scores(const Vec& instance_embed, const Category& category,
                             const TeacherSpace& space, double tau = 1.0);

/// Inverse-CDF draw from a score vector; the stream is fully determined by
/// the seed so per-instance draws can run in any order.
int sample_index(const std::vector<double>& scores, uint64_t seed);

/// Rewrites batch.training_words: each instance's word is drawn from its
/// category's synonym set with probabilities equal to synonym_scores.
/// Draw i uses substream mix(rng_seed, i); masks and labels are untouched.
/// Strategy None restores canonical names.
void diversify_labels(RegionBatch& batch, const CategoryTable& table, DiversifyStrategy strategy,
                      uint64_t rng_seed, const TeacherSpace& space, double tau = 1.0);

/// Inference-time synonym-group score of a query against one category:
/// GroupMax = max cosine over the synonym set, GroupAvg = mean, Canonical =
/// cosine to the canonical name only.
double group_score(const Vec& query_embed, const Category& category, const TeacherSpace& space,
                   GroupMode mode);

}  // namespace ovcal
