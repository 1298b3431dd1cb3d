#include "ovcal/distill.hpp"

#include <cmath>

namespace ovcal {

void DistillBatch::validate() const {
  if (student.empty()) throw DomainError("distill batch is empty");
  if (teacher_regions.size() != student.size() || text_embeds.size() != student.size())
    throw ShapeError("distill batch: list lengths differ");
  const std::size_t d = student.front().size();
  for (const auto& v : student)
    if (v.size() != d) throw ShapeError("distill batch: student dimensions differ");
  for (const auto& v : teacher_regions)
    if (v.size() != d) throw ShapeError("distill batch: teacher dimension differs from student");
  for (const auto& v : text_embeds)
    if (v.size() != d) throw ShapeError("distill batch: text dimension differs from student");
}

double vanilla_kd(const DistillBatch& batch) {
  batch.validate();
  const int n = batch.size();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += l2_distance(batch.student[i], batch.teacher_regions[i]);
  return sum / n;
}

static double signed_step(double inner) {
  if (std::fabs(inner) <= kKinkEps) return 0.0;
  return inner > 0.0 ? 1.0 : -1.0;
}

// Shared pairwise form; `target(i, j)` supplies the frozen distance matrix.
template <typename TargetFn>
static double pairwise_kd(const DistillBatch& batch, TargetFn target) {
  batch.validate();
  const int n = batch.size();
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      sum += std::fabs(l2_distance(batch.student[i], batch.teacher_regions[j]) - target(i, j));
  return sum / n;
}

template <typename TargetFn>
static std::vector<Vec> pairwise_kd_grad(const DistillBatch& batch, TargetFn target) {
  batch.validate();
  const int n = batch.size();
  const std::size_t d = batch.student.front().size();
  std::vector<Vec> grads(static_cast<std::size_t>(n), Vec(d, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double inner =
          l2_distance(batch.student[i], batch.teacher_regions[j]) - target(i, j);
      const double s = signed_step(inner);
      if (s == 0.0) continue;
      const Vec g = l2_distance_grad_a(batch.student[i], batch.teacher_regions[j]);
      for (std::size_t k = 0; k < d; ++k) grads[static_cast<std::size_t>(i)][k] += s * g[k] / n;
    }
  }
  return grads;
}

double tgkd(const DistillBatch& batch) {
  return pairwise_kd(batch, [&](int i, int j) {
    return l2_distance(batch.text_embeds[i], batch.text_embeds[j]);
  });
}

double vision_guided_kd(const DistillBatch& batch) {
  return pairwise_kd(batch, [&](int i, int j) {
    return l2_distance(batch.teacher_regions[i], batch.teacher_regions[j]);
  });
}

std::vector<Vec> vanilla_kd_grad(const DistillBatch& batch) {
  batch.validate();
  const int n = batch.size();
  const std::size_t d = batch.student.front().size();
  std::vector<Vec> grads(static_cast<std::size_t>(n), Vec(d, 0.0));
  for (int i = 0; i < n; ++i) {
    const Vec g = l2_distance_grad_a(batch.student[i], batch.teacher_regions[i]);
    for (std::size_t k = 0; k < d; ++k) grads[static_cast<std::size_t>(i)][k] = g[k] / n;
  }
  return grads;
}

std::vector<Vec> tgkd_grad(const DistillBatch& batch) {
  return pairwise_kd_grad(batch, [&](int i, int j) {
    return l2_distance(batch.text_embeds[i], batch.text_embeds[j]);
  });
}

std::vector<Vec> vision_guided_kd_grad(const DistillBatch& batch) {
  return pairwise_kd_grad(batch, [&](int i, int j) {
    return l2_distance(batch.teacher_regions[i], batch.teacher_regions[j]);
  });
}

std::vector<Vec> finite_diff_grad(const std::function<double(const DistillBatch&)>& loss_fn,
                                  const DistillBatch& batch, double h) {
  if (h <= 0.0) throw DomainError("finite_diff_grad: h must be > 0");
  DistillBatch work = batch;
  std::vector<Vec> grads(batch.student.size());
  for (std::size_t i = 0; i < batch.student.size(); ++i) {
    grads[i].resize(batch.student[i].size());
    for (std::size_t k = 0; k < batch.student[i].size(); ++k) {
      const double x = batch.student[i][k];
      work.student[i][k] = x + h;
      const double up = loss_fn(work);
      work.student[i][k] = x - h;
      const double down = loss_fn(work);
      work.student[i][k] = x;
      grads[i][k] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

}  // namespace ovcal
