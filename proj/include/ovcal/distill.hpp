#pragma once

#include <functional>
#include <vector>

#include "ovcal/embedding.hpp"

namespace ovcal {

// Inputs to one distillation evaluation. `student` rows receive gradient;
// teacher regions and text embeddings are frozen targets.
struct DistillBatch {
  std::vector<Vec> student;          // V_i, queries matched to ground truth
  std::vector<Vec> teacher_regions;  // R(I, M_i)
  std::vector<Vec> text_embeds;      // T(Y_i)

  int size() const { return static_cast<int>(student.size()); }
  void validate() const;
};

// Inner-difference magnitudes at or below this threshold are treated as
// kinks of |.|; the subgradient there is fixed to zero.
constexpr double kKinkEps = 1e-8;

/// Mean per-instance distance to the matching teacher region:
/// (1/N) sum_i ||V_i - R_i||.
double vanilla_kd(const DistillBatch& batch);

/// Pairwise text-guided objective:
/// (1/N) sum_i sum_j | ||V_i - R_j|| - ||T_i - T_j|| |.
/// The i == j diagonal is included; its text target is zero, so those terms
/// reduce to plain distance pulls.
double tgkd(const DistillBatch& batch);

/// Same pairwise form with the teacher's own visual distances
/// ||R_i - R_j|| as targets instead of text distances.
double vision_guided_kd(const DistillBatch& batch);

std::vector<Vec> vanilla_kd_grad(const DistillBatch& batch);
std::vector<Vec> tgkd_grad(const DistillBatch& batch);
std::vector<Vec> vision_guided_kd_grad(const DistillBatch& batch);

/// Central finite differences of `loss_fn` with respect to every student
/// coordinate: (L(x + h e) - L(x - h e)) / 2h. Verification oracle; no part
/// of the analytic gradient path is reused.
std::vector<Vec> finite_diff_grad(const std::function<double(const DistillBatch&)>& loss_fn,
                                  const DistillBatch& batch, double h);

}  // namespace ovcal
