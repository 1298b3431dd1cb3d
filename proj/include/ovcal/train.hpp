#pragma once

#include <cstdint>
#include <vector>

#include "ovcal/distill.hpp"
#include "ovcal/losses.hpp"
#include "ovcal/matching.hpp"
#include "ovcal/model.hpp"

namespace ovcal {

enum class KdVariant { None, Vanilla, VisionGuided, TextGuided };

// Which teacher embedding stands in for R(I, M_i): mask-pooled spatial
// tokens (default) or the unmasked global mean token.
enum class TeacherEmbed { Spatial, Global };

struct TrainSettings {
  LossWeights weights;
  double learning_rate = 0.05;
  double logit_scale = 100.0;     // alignment CE logit multiplier (CLIP-style 1/0.01)
  double grounding_scale = 100.0; // contrastive grounding logit multiplier
  double tau = 1.0;               // synonym-score temperature
  DiversifyStrategy diversify = DiversifyStrategy::Random;
  KdVariant kd = KdVariant::TextGuided;
  TeacherEmbed teacher_embed = TeacherEmbed::Spatial;
  uint64_t seed = 0;  // root of the diversification substream
};

struct ParamGrads {
  Matrix queries;
  Matrix projection;
  Matrix mask_head;
  double no_object_logit = 0.0;

  explicit ParamGrads(const StudentModel& m)
      : queries(m.num_queries, m.query_dim),
        projection(m.query_dim, m.embed_dim),
        mask_head(m.query_dim, m.feature_dim) {}

  std::vector<double> pack() const;
};

/// Composite loss of one mini-batch at the current parameters, with
/// optional analytic parameter gradients. Pure in (model, images,
/// settings, step_index): label diversification draws only from
/// (settings.seed, step_index, image position, instance position).
LossBreakdown composite_loss(const StudentModel& model, const std::vector<RegionBatch>& images,
                             const CategoryTable& table, const TeacherSpace& space,
                             const TrainSettings& settings, uint64_t step_index,
                             ParamGrads* grads);

/// One full-batch gradient-descent step: theta' = theta - lr * grad.
/// Throws DivergenceError on non-finite loss or parameters.
LossBreakdown train_step(StudentModel& model, const std::vector<RegionBatch>& images,
                         const CategoryTable& table, const TeacherSpace& space,
                         const TrainSettings& settings, uint64_t step_index);

/// Teacher region embedding for one instance under the configured variant.
/// Both variants pool the stored token grid, which the teacher painted.
Vec teacher_region(const RegionBatch& batch, std::size_t instance, TeacherEmbed variant);

/// Calibration gap of the current model over a set of images: per image,
/// match queries against canonical prompts, then take the Frobenius norm of
/// (student-to-teacher cross distances) - (text-to-text distances); the
/// result is the mean over images.
double pairwise_gap(const StudentModel& model, const std::vector<RegionBatch>& images,
                    const CategoryTable& table, const TeacherSpace& space,
                    const TrainSettings& settings);

}  // namespace ovcal
