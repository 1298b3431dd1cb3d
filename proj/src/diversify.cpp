#include "ovcal/diversify.hpp"

#include <algorithm>
#include <cmath>

#include "ovcal/rng.hpp"

namespace ovcal {

std::vector<double> softmax_scores(const std::vector<double>& cosines, double tau) {
  if (cosines.empty()) throw DomainError("softmax_scores: empty input");
  if (tau <= 0.0) throw DomainError("softmax_scores: temperature must be > 0");
  const double m = *std::max_element(cosines.begin(), cosines.end());
  std::vector<double> out(cosines.size());
  double z = 0.0;
  for (std::size_t i = 0; i < cosines.size(); ++i) {
    out[i] = std::exp((cosines[i] - m) / tau);
    z += out[i];
  }
  for (auto& x : out) x /= z;
  return out;
}

SynonymScores synonym_scores(const Vec& instance_embed, const Category& category,
                             const TeacherSpace& space, double tau) {
  if (category.synonyms.empty()) throw DomainError("synonym_scores: empty synonym set");
  std::vector<double> cosines;
  cosines.reserve(category.synonyms.size());
  for (std::size_t s = 0; s < category.synonyms.size(); ++s)
    cosines.push_back(cosine_sim(instance_embed, space.text(category.id, static_cast<int>(s))));
  return SynonymScores{category.id, softmax_scores(cosines, tau)};
}

int sample_index(const std::vector<double>& scores, uint64_t seed) {
  Rng rng(seed);
  const double u = rng.uniform01();
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    acc += scores[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(scores.size()) - 1;  // guard against rounding of the cumulative sum
}

void diversify_labels(RegionBatch& batch, const CategoryTable& table, DiversifyStrategy strategy,
                      uint64_t rng_seed, const TeacherSpace& space, double tau) {
  batch.training_words.resize(batch.gt_labels.size());
  for (std::size_t i = 0; i < batch.gt_labels.size(); ++i) {
    const Category& cat = table.by_id(batch.gt_labels[i]);
    if (strategy == DiversifyStrategy::None || cat.synonyms.size() == 1) {
      batch.training_words[i] = cat.canonical;
      continue;
    }
    const Vec embed = space.region_embedding(cat.id, batch.instance_ids[i]);
    const SynonymScores s = synonym_scores(embed, cat, space, tau);
    const int pick = sample_index(s.scores, mix_seed(rng_seed, i));
    batch.training_words[i] = cat.synonyms[static_cast<std::size_t>(pick)];
  }
}

double group_score(const Vec& query_embed, const Category& category, const TeacherSpace& space,
                   GroupMode mode) {
  if (category.synonyms.empty()) throw DomainError("group_score: empty synonym set");
  if (mode == GroupMode::Canonical) return cosine_sim(query_embed, space.text(category.id, 0));
  double best = -2.0;
  double sum = 0.0;
  for (std::size_t s = 0; s < category.synonyms.size(); ++s) {
    const double c = cosine_sim(query_embed, space.text(category.id, static_cast<int>(s)));
    best = std::max(best, c);
    sum += c;
  }
  return mode == GroupMode::GroupMax ? best : sum / static_cast<double>(category.synonyms.size());
}

}  // namespace ovcal
