#include "ovcal/train.hpp"

#include <cmath>

#include "ovcal/rng.hpp"

namespace ovcal {

std::vector<double> ParamGrads::pack() const {
  std::vector<double> flat;
  flat.reserve(queries.a.size() + projection.a.size() + mask_head.a.size() + 1);
  flat.insert(flat.end(), queries.a.begin(), queries.a.end());
  flat.insert(flat.end(), projection.a.begin(), projection.a.end());
  flat.insert(flat.end(), mask_head.a.begin(), mask_head.a.end());
  flat.push_back(no_object_logit);
  return flat;
}

Vec teacher_region(const RegionBatch& batch, std::size_t instance, TeacherEmbed variant) {
  if (variant == TeacherEmbed::Global) return mean_pool(batch.features);
  return mask_pool(batch.features, batch.gt_masks[instance]);
}

namespace {

// Matching cost: lambda_c * (-alignment score) + lambda_m * (bce + dice).
Matrix match_cost(const ForwardResult& fwd, const RegionBatch& batch,
                  const std::vector<Vec>& prompt_embeds, const LossWeights& weights) {
  const int n = batch.num_instances();
  const int m = fwd.queries_post.rows;
  Matrix cost(n, m);
  for (int i = 0; i < n; ++i) {
    const Grid& gt = batch.gt_masks[static_cast<std::size_t>(i)];
    for (int q = 0; q < m; ++q) {
      const double align = cosine_sim(fwd.queries_post.row(q), prompt_embeds[static_cast<std::size_t>(i)]);
      const double mask = bce_mask_loss(fwd.masks[static_cast<std::size_t>(q)], gt) +
                          dice_loss(fwd.masks[static_cast<std::size_t>(q)], gt);
      cost.at(i, q) = weights.ce * (-align) + weights.mask * mask;
    }
  }
  return cost;
}

// Routes a gradient on queries_post back into queries and projection.
void backprop_post(const StudentModel& model, const Matrix& dpost, ParamGrads& grads) {
  for (int q = 0; q < model.num_queries; ++q) {
    for (int d = 0; d < model.embed_dim; ++d) {
      const double g = dpost.at(q, d);
      if (g == 0.0) continue;
      for (int k = 0; k < model.query_dim; ++k) {
        grads.queries.at(q, k) += g * model.projection.at(k, d);
        grads.projection.at(k, d) += g * model.queries.at(q, k);
      }
    }
  }
}

}  // namespace

LossBreakdown composite_loss(const StudentModel& model, const std::vector<RegionBatch>& images,
                             const CategoryTable& table, const TeacherSpace& space,
                             const TrainSettings& settings, uint64_t step_index,
                             ParamGrads* grads) {
  if (images.empty()) throw DomainError("composite_loss: empty mini-batch");
  model.validate();
  const int batch_size = static_cast<int>(images.size());
  const double inv_b = 1.0 / batch_size;
  const LossWeights& w = settings.weights;

  LossTerms terms;
  std::vector<std::vector<Vec>> grounding_regions(images.size());
  std::vector<std::vector<Vec>> grounding_captions(images.size());
  std::vector<ForwardResult> fwds(images.size());

  Matrix dpost_total(model.num_queries, model.embed_dim);

  for (std::size_t b = 0; b < images.size(); ++b) {
    RegionBatch batch = images[b];
    batch.validate();
    diversify_labels(batch, table, settings.diversify,
                     mix_seed(settings.seed, streams::kDiversify, step_index, b), space,
                     settings.tau);

    ForwardResult fwd = forward(model, batch.features);
    const int n = batch.num_instances();

    std::vector<Vec> prompts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      prompts[static_cast<std::size_t>(i)] = space.text(batch.training_words[static_cast<std::size_t>(i)]);

    const MatchResult match = hungarian_match(match_cost(fwd, batch, prompts, w));

    // Mask loss over matched pairs.
    double mask_term = 0.0;
    for (int i = 0; i < n; ++i) {
      const int q = match.assignment[static_cast<std::size_t>(i)];
      const Grid& pred = fwd.masks[static_cast<std::size_t>(q)];
      const Grid& gt = batch.gt_masks[static_cast<std::size_t>(i)];
      mask_term += bce_mask_loss(pred, gt) + dice_loss(pred, gt);
      if (grads != nullptr && w.mask != 0.0) {
        const Grid gb = bce_mask_grad(pred, gt);
        const Grid gd = dice_grad(pred, gt);
        const double scale = w.mask * inv_b / n;
        // dz per pixel, then through the bilinear mask head.
        Vec dcoeff(static_cast<std::size_t>(model.feature_dim), 0.0);
        for (std::size_t p = 0; p < pred.pixels(); ++p) {
          const double prob = pred.v[p];
          const double dz = scale * (gb.v[p] + gd.v[p]) * prob * (1.0 - prob);
          if (dz == 0.0) continue;
          const double* feat = batch.features.token(p);
          for (int f = 0; f < model.feature_dim; ++f) dcoeff[static_cast<std::size_t>(f)] += dz * feat[f];
        }
        for (int f = 0; f < model.feature_dim; ++f) {
          const double dc = dcoeff[static_cast<std::size_t>(f)];
          if (dc == 0.0) continue;
          for (int k = 0; k < model.query_dim; ++k) {
            grads->queries.at(q, k) += dc * model.mask_head.at(k, f);
            grads->mask_head.at(k, f) += dc * model.queries.at(q, k);
          }
        }
      }
    }
    terms.mask += mask_term / n * inv_b;

    // Alignment CE against per-instance prompts plus the no-object column.
    Matrix align(model.num_queries, n);  // raw cosines, reused for the gradient
    Matrix logits(model.num_queries, n + 1);
    std::vector<int> labels(static_cast<std::size_t>(model.num_queries), n);
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(match.assignment[static_cast<std::size_t>(i)])] = i;
    for (int q = 0; q < model.num_queries; ++q) {
      const Vec post = fwd.queries_post.row(q);
      for (int i = 0; i < n; ++i) {
        align.at(q, i) = cosine_sim(post, prompts[static_cast<std::size_t>(i)]);
        logits.at(q, i) = settings.logit_scale * align.at(q, i);
      }
      logits.at(q, n) = settings.logit_scale * model.no_object_logit;
    }
    terms.ce += alignment_ce(logits, labels) * inv_b;
    if (grads != nullptr && w.ce != 0.0) {
      const Matrix dlogits = alignment_ce_grad(logits, labels);
      Matrix dpost(model.num_queries, model.embed_dim);
      for (int q = 0; q < model.num_queries; ++q) {
        const Vec post = fwd.queries_post.row(q);
        for (int i = 0; i < n; ++i) {
          const double da = w.ce * inv_b * settings.logit_scale * dlogits.at(q, i);
          if (da == 0.0) continue;
          const Vec dcos = cosine_sim_grad_a(post, prompts[static_cast<std::size_t>(i)]);
          for (int d = 0; d < model.embed_dim; ++d) dpost.at(q, d) += da * dcos[static_cast<std::size_t>(d)];
        }
        grads->no_object_logit += w.ce * inv_b * settings.logit_scale * dlogits.at(q, n);
      }
      for (std::size_t i = 0; i < dpost.a.size(); ++i) dpost_total.a[i] += dpost.a[i];
    }

    // Distillation on matched pairs (pre-projection queries as students).
    if (settings.kd != KdVariant::None) {
      DistillBatch kd;
      for (int i = 0; i < n; ++i) {
        const int q = match.assignment[static_cast<std::size_t>(i)];
        kd.student.push_back(fwd.queries_prior.row(q));
        kd.teacher_regions.push_back(
            teacher_region(batch, static_cast<std::size_t>(i), settings.teacher_embed));
        kd.text_embeds.push_back(prompts[static_cast<std::size_t>(i)]);
      }
      double kd_term = 0.0;
      std::vector<Vec> kd_grads;
      switch (settings.kd) {
        case KdVariant::Vanilla:
          kd_term = vanilla_kd(kd);
          if (grads != nullptr && w.kd != 0.0) kd_grads = vanilla_kd_grad(kd);
          break;
        case KdVariant::VisionGuided:
          kd_term = vision_guided_kd(kd);
          if (grads != nullptr && w.kd != 0.0) kd_grads = vision_guided_kd_grad(kd);
          break;
        case KdVariant::TextGuided:
          kd_term = tgkd(kd);
          if (grads != nullptr && w.kd != 0.0) kd_grads = tgkd_grad(kd);
          break;
        case KdVariant::None:
          break;
      }
      terms.kd += kd_term * inv_b;
      if (!kd_grads.empty()) {
        for (int i = 0; i < n; ++i) {
          const int q = match.assignment[static_cast<std::size_t>(i)];
          for (int k = 0; k < model.query_dim; ++k)
            grads->queries.at(q, k) += w.kd * inv_b * kd_grads[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        }
      }
    }

    // Grounding inputs: every projected query vs. the caption vocabulary.
    auto& regions = grounding_regions[b];
    for (int q = 0; q < model.num_queries; ++q) regions.push_back(fwd.queries_post.row(q));
    for (const auto& word : batch.caption_words) grounding_captions[b].push_back(space.text(word));

    fwds[b] = std::move(fwd);
  }

  terms.grounding = grounding_loss(grounding_regions, grounding_captions, settings.grounding_scale);
  if (grads != nullptr && w.grounding != 0.0) {
    const auto region_grads =
        grounding_grad(grounding_regions, grounding_captions, settings.grounding_scale);
    Matrix dpost(model.num_queries, model.embed_dim);
    for (std::size_t i = 0; i < dpost.a.size(); ++i) dpost.a[i] = 0.0;
    for (std::size_t b = 0; b < images.size(); ++b)
      for (int q = 0; q < model.num_queries; ++q)
        for (int d = 0; d < model.embed_dim; ++d)
          dpost.at(q, d) += w.grounding * region_grads[b][static_cast<std::size_t>(q)][static_cast<std::size_t>(d)];
    for (std::size_t i = 0; i < dpost.a.size(); ++i) dpost_total.a[i] += dpost.a[i];
  }

  if (grads != nullptr) backprop_post(model, dpost_total, *grads);

  return total_loss(terms, w);
}

LossBreakdown train_step(StudentModel& model, const std::vector<RegionBatch>& images,
                         const CategoryTable& table, const TeacherSpace& space,
                         const TrainSettings& settings, uint64_t step_index) {
  ParamGrads grads(model);
  const LossBreakdown breakdown =
      composite_loss(model, images, table, space, settings, step_index, &grads);
  if (!std::isfinite(breakdown.total)) throw DivergenceError("non-finite loss at step " + std::to_string(step_index));

  const double lr = settings.learning_rate;
  if (lr != 0.0) {
    for (std::size_t i = 0; i < model.queries.a.size(); ++i) model.queries.a[i] -= lr * grads.queries.a[i];
    for (std::size_t i = 0; i < model.projection.a.size(); ++i) model.projection.a[i] -= lr * grads.projection.a[i];
    for (std::size_t i = 0; i < model.mask_head.a.size(); ++i) model.mask_head.a[i] -= lr * grads.mask_head.a[i];
    model.no_object_logit -= lr * grads.no_object_logit;
    for (const Matrix* m : {&model.queries, &model.projection, &model.mask_head})
      for (double x : m->a)
        if (!std::isfinite(x)) throw DivergenceError("non-finite parameter at step " + std::to_string(step_index));
    if (!std::isfinite(model.no_object_logit))
      throw DivergenceError("non-finite parameter at step " + std::to_string(step_index));
  }
  return breakdown;
}

double pairwise_gap(const StudentModel& model, const std::vector<RegionBatch>& images,
                    const CategoryTable& table, const TeacherSpace& space,
                    const TrainSettings& settings) {
  if (images.empty()) throw DomainError("pairwise_gap: no images");
  double total = 0.0;
  for (const RegionBatch& image : images) {
    RegionBatch batch = image;
    diversify_labels(batch, table, DiversifyStrategy::None, 0, space);  // canonical prompts
    const ForwardResult fwd = forward(model, batch.features);
    const int n = batch.num_instances();
    std::vector<Vec> prompts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      prompts[static_cast<std::size_t>(i)] = space.text(batch.training_words[static_cast<std::size_t>(i)]);
    const MatchResult match =
        hungarian_match(match_cost(fwd, batch, prompts, settings.weights));

    std::vector<Vec> students(static_cast<std::size_t>(n));
    std::vector<Vec> teachers(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      students[static_cast<std::size_t>(i)] =
          fwd.queries_prior.row(match.assignment[static_cast<std::size_t>(i)]);
      teachers[static_cast<std::size_t>(i)] =
          teacher_region(batch, static_cast<std::size_t>(i), settings.teacher_embed);
    }
    double sq = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double diff = l2_distance(students[static_cast<std::size_t>(i)], teachers[static_cast<std::size_t>(j)]) -
                            l2_distance(prompts[static_cast<std::size_t>(i)], prompts[static_cast<std::size_t>(j)]);
        sq += diff * diff;
      }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(images.size());
}

}  // namespace ovcal
