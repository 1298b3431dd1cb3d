#include "ovcal/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "ovcal/dataset.hpp"
#include "ovcal/distill.hpp"
#include "ovcal/io.hpp"
#include "ovcal/losses.hpp"
#include "ovcal/matching.hpp"
#include "ovcal/rng.hpp"
#include "ovcal/train.hpp"

namespace ovcal {

namespace {

constexpr double kH = 1e-5;

double rel_err(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double d = analytic[i] - fd[i];
    diff += d * d;
    ref += fd[i] * fd[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-6);
}

std::vector<double> fd_grad(const std::function<double(const std::vector<double>&)>& fn,
                            std::vector<double> x) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    x[i] = v + kH;
    const double up = fn(x);
    x[i] = v - kH;
    const double down = fn(x);
    x[i] = v;
    g[i] = (up - down) / (2.0 * kH);
  }
  return g;
}

std::vector<double> flatten(const std::vector<Vec>& vs) {
  std::vector<double> out;
  for (const Vec& v : vs) out.insert(out.end(), v.begin(), v.end());
  return out;
}

DistillBatch random_distill_batch(Rng& rng) {
  const int n = 1 + static_cast<int>(rng.next_u64() % 6);
  const int d = 2 + static_cast<int>(rng.next_u64() % 15);
  DistillBatch b;
  for (int i = 0; i < n; ++i) {
    b.student.push_back(rng.normal_vec(static_cast<std::size_t>(d)));
    b.teacher_regions.push_back(rng.normal_vec(static_cast<std::size_t>(d)));
    b.text_embeds.push_back(rng.normal_vec(static_cast<std::size_t>(d)));
  }
  return b;
}

// Pairwise objectives kink where a cross distance meets its target; keep a
// safety margin so the finite-difference stencil stays on one side.
bool kd_degenerate(const DistillBatch& b, bool text_targets) {
  for (int i = 0; i < b.size(); ++i)
    for (int j = 0; j < b.size(); ++j) {
      const double target =
          text_targets ? l2_distance(b.text_embeds[static_cast<std::size_t>(i)], b.text_embeds[static_cast<std::size_t>(j)])
                       : l2_distance(b.teacher_regions[static_cast<std::size_t>(i)], b.teacher_regions[static_cast<std::size_t>(j)]);
      const double inner =
          l2_distance(b.student[static_cast<std::size_t>(i)], b.teacher_regions[static_cast<std::size_t>(j)]) - target;
      if (std::fabs(inner) < 1e-5) return true;
    }
  return false;
}

GradCheckResult check_kd(const std::string& name, uint64_t seed, int points,
                         double (*loss)(const DistillBatch&),
                         std::vector<Vec> (*grad)(const DistillBatch&), bool pairwise,
                         bool text_targets) {
  GradCheckResult result{name, 0, 0.0, 1e-4};
  Rng rng(seed);
  while (result.points < points) {
    DistillBatch batch = random_distill_batch(rng);
    if (pairwise && kd_degenerate(batch, text_targets)) continue;
    const auto analytic = flatten(grad(batch));
    const auto fd = flatten(finite_diff_grad(loss, batch, kH));
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, fd));
    ++result.points;
  }
  return result;
}

GradCheckResult check_bce(uint64_t seed, int points) {
  GradCheckResult result{"bce_mask_loss", 0, 0.0, 1e-4};
  Rng rng(seed);
  for (int p = 0; p < points; ++p) {
    const int h = 3 + static_cast<int>(rng.next_u64() % 3);
    const int w = 3 + static_cast<int>(rng.next_u64() % 3);
    Grid pred(h, w), gt(h, w);
    for (auto& x : pred.v) x = 0.05 + 0.9 * rng.uniform01();
    for (auto& x : gt.v) x = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    const Grid analytic = bce_mask_grad(pred, gt);
    auto fn = [&](const std::vector<double>& flat) {
      Grid q = pred;
      q.v = flat;
      return bce_mask_loss(q, gt);
    };
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic.v, fd_grad(fn, pred.v)));
    ++result.points;
  }
  return result;
}

GradCheckResult check_dice(uint64_t seed, int points) {
  GradCheckResult result{"dice_loss", 0, 0.0, 1e-4};
  Rng rng(seed);
  for (int p = 0; p < points; ++p) {
    const int h = 3 + static_cast<int>(rng.next_u64() % 3);
    const int w = 3 + static_cast<int>(rng.next_u64() % 3);
    Grid pred(h, w), gt(h, w);
    for (auto& x : pred.v) x = rng.uniform01();
    for (auto& x : gt.v) x = rng.uniform01() < 0.5 ? 0.0 : 1.0;
    const Grid analytic = dice_grad(pred, gt);
    auto fn = [&](const std::vector<double>& flat) {
      Grid q = pred;
      q.v = flat;
      return dice_loss(q, gt);
    };
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic.v, fd_grad(fn, pred.v)));
    ++result.points;
  }
  return result;
}

GradCheckResult check_alignment_ce(uint64_t seed, int points) {
  GradCheckResult result{"alignment_ce", 0, 0.0, 1e-4};
  Rng rng(seed);
  for (int p = 0; p < points; ++p) {
    const int m = 2 + static_cast<int>(rng.next_u64() % 5);
    const int cols = 2 + static_cast<int>(rng.next_u64() % 5);
    Matrix logits(m, cols);
    for (auto& x : logits.a) x = 2.0 * rng.normal();
    std::vector<int> labels(static_cast<std::size_t>(m));
    for (auto& y : labels) y = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(cols));
    const Matrix analytic = alignment_ce_grad(logits, labels);
    auto fn = [&](const std::vector<double>& flat) {
      Matrix q = logits;
      q.a = flat;
      return alignment_ce(q, labels);
    };
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic.a, fd_grad(fn, logits.a)));
    ++result.points;
  }
  return result;
}

struct GroundingCase {
  std::vector<std::vector<Vec>> regions;
  std::vector<std::vector<Vec>> captions;
  double scale = 1.0;
};

bool grounding_degenerate(const GroundingCase& c) {
  for (std::size_t img = 0; img < c.regions.size(); ++img) {
    for (const auto& caption : c.captions) {
      for (const Vec& word : caption) {
        double best = -2.0, second = -2.0;
        for (const Vec& region : c.regions[img]) {
          const double cs = cosine_sim(region, word);
          if (cs > best) {
            second = best;
            best = cs;
          } else {
            second = std::max(second, cs);
          }
        }
        if (c.regions[img].size() > 1 && best - second < 1e-4) return true;
      }
    }
  }
  return false;
}

GradCheckResult check_grounding(uint64_t seed, int points) {
  GradCheckResult result{"grounding_loss", 0, 0.0, 1e-4};
  Rng rng(seed);
  const double scales[3] = {1.0, 10.0, 100.0};
  while (result.points < points) {
    GroundingCase c;
    const int b = 2 + static_cast<int>(rng.next_u64() % 2);
    const int d = 3 + static_cast<int>(rng.next_u64() % 6);
    c.scale = scales[result.points % 3];
    c.regions.resize(static_cast<std::size_t>(b));
    c.captions.resize(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) {
      const int nr = 1 + static_cast<int>(rng.next_u64() % 3);
      const int nw = 1 + static_cast<int>(rng.next_u64() % 3);
      for (int r = 0; r < nr; ++r)
        c.regions[static_cast<std::size_t>(i)].push_back(rng.normal_vec(static_cast<std::size_t>(d)));
      for (int w = 0; w < nw; ++w)
        c.captions[static_cast<std::size_t>(i)].push_back(rng.normal_vec(static_cast<std::size_t>(d)));
    }
    if (grounding_degenerate(c)) continue;

    const auto analytic_nested = grounding_grad(c.regions, c.captions, c.scale);
    std::vector<double> analytic;
    for (const auto& img : analytic_nested)
      for (const Vec& v : img) analytic.insert(analytic.end(), v.begin(), v.end());

    std::vector<double> flat;
    for (const auto& img : c.regions)
      for (const Vec& v : img) flat.insert(flat.end(), v.begin(), v.end());
    auto fn = [&](const std::vector<double>& x) {
      auto regions = c.regions;
      std::size_t k = 0;
      for (auto& img : regions)
        for (Vec& v : img)
          for (double& coord : v) coord = x[k++];
      return grounding_loss(regions, c.captions, c.scale);
    };
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, fd_grad(fn, flat)));
    ++result.points;
  }
  return result;
}

// Tiny but complete training world for the composite check.
struct CompositeWorld {
  ExperimentConfig cfg;
  DatasetBundle data;
  TrainSettings settings;

  CompositeWorld() {
    cfg.dim = cfg.query_dim = cfg.feature_dim = 4;
    cfg.categories = 3;
    cfg.seen_ids = {0, 1};
    cfg.unseen_ids = {2};
    cfg.synonyms_min = 1;
    cfg.synonyms_max = 3;
    cfg.grid_h = cfg.grid_w = 4;
    cfg.regions_min = 1;
    cfg.regions_max = 2;
    cfg.queries = 3;
    cfg.train_images = 2;
    cfg.val_images = 1;
    cfg.alignment = 0.9;
    cfg.cone_angle = 0.3;
    cfg.token_noise = 0.2;
    cfg.validate();
    data = generate_dataset(cfg);
    settings = cfg.train_settings();
  }

  StudentModel random_model(uint64_t seed) const {
    StudentModel m;
    m.num_queries = cfg.queries;
    m.query_dim = cfg.query_dim;
    m.embed_dim = cfg.dim;
    m.feature_dim = cfg.feature_dim;
    m.init(seed);
    Rng rng(mix_seed(seed, 0xC0FFEE));
    for (Matrix* mat : {&m.queries, &m.projection, &m.mask_head})
      for (auto& x : mat->a) x += 0.3 * rng.normal();
    m.no_object_logit = 0.3 * rng.normal();
    return m;
  }
};

// The composite is piecewise smooth; reject points near a matching flip,
// a pairwise-distillation kink, or a grounding argmax tie.
bool composite_degenerate(const CompositeWorld& world, const StudentModel& model,
                          uint64_t step_index) {
  for (std::size_t b = 0; b < world.data.train.size(); ++b) {
    RegionBatch batch = world.data.train[b];
    diversify_labels(batch, world.data.table, world.settings.diversify,
                     mix_seed(world.settings.seed, streams::kDiversify, step_index, b),
                     world.data.space, world.settings.tau);
    const ForwardResult fwd = forward(model, batch.features);
    const int n = batch.num_instances();
    const int m = model.num_queries;

    for (int q = 0; q < m; ++q)
      for (std::size_t p = 0; p < fwd.masks[static_cast<std::size_t>(q)].pixels(); ++p) {
        const double prob = fwd.masks[static_cast<std::size_t>(q)].v[p];
        if (prob < 1e-6 || prob > 1.0 - 1e-6) return true;  // clamp boundary
      }

    std::vector<Vec> prompts;
    for (int i = 0; i < n; ++i) prompts.push_back(world.data.space.text(batch.training_words[static_cast<std::size_t>(i)]));
    Matrix cost(n, m);
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < m; ++q) {
        const double align = cosine_sim(fwd.queries_post.row(q), prompts[static_cast<std::size_t>(i)]);
        cost.at(i, q) = world.settings.weights.ce * (-align) +
                        world.settings.weights.mask *
                            (bce_mask_loss(fwd.masks[static_cast<std::size_t>(q)], batch.gt_masks[static_cast<std::size_t>(i)]) +
                             dice_loss(fwd.masks[static_cast<std::size_t>(q)], batch.gt_masks[static_cast<std::size_t>(i)]));
      }

    // Exhaustive assignment margins (n <= 2, m <= 3 here).
    std::vector<int> perm(static_cast<std::size_t>(m));
    for (int q = 0; q < m; ++q) perm[static_cast<std::size_t>(q)] = q;
    std::vector<double> totals;
    std::sort(perm.begin(), perm.end());
    do {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += cost.at(i, perm[static_cast<std::size_t>(i)]);
      totals.push_back(total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    std::sort(totals.begin(), totals.end());
    // Distinct assignments can share a prefix; compare best against the
    // closest strictly larger total.
    for (std::size_t t = 1; t < totals.size(); ++t) {
      if (totals[t] - totals[0] > 1e-12 && totals[t] - totals[0] < 1e-3) return true;
    }

    const MatchResult match = hungarian_match(cost);
    DistillBatch kd;
    for (int i = 0; i < n; ++i) {
      kd.student.push_back(fwd.queries_prior.row(match.assignment[static_cast<std::size_t>(i)]));
      kd.teacher_regions.push_back(
          teacher_region(batch, static_cast<std::size_t>(i), world.settings.teacher_embed));
      kd.text_embeds.push_back(prompts[static_cast<std::size_t>(i)]);
    }
    if (kd_degenerate(kd, world.settings.kd != KdVariant::VisionGuided)) return true;
  }

  // Grounding argmax margins across the batch.
  GroundingCase gc;
  gc.regions.resize(world.data.train.size());
  gc.captions.resize(world.data.train.size());
  for (std::size_t b = 0; b < world.data.train.size(); ++b) {
    const ForwardResult fwd = forward(model, world.data.train[b].features);
    for (int q = 0; q < model.num_queries; ++q) gc.regions[b].push_back(fwd.queries_post.row(q));
    for (const auto& wrd : world.data.train[b].caption_words)
      gc.captions[b].push_back(world.data.space.text(wrd));
  }
  return grounding_degenerate(gc);
}

GradCheckResult check_composite(uint64_t seed, int points) {
  GradCheckResult result{"train_step_composite", 0, 0.0, 1e-3};
  const CompositeWorld world;
  uint64_t attempt = 0;
  while (result.points < points) {
    const StudentModel model = world.random_model(mix_seed(seed, 0x51EF, attempt));
    const uint64_t step_index = attempt;
    ++attempt;
    if (composite_degenerate(world, model, step_index)) continue;

    ParamGrads grads(model);
    composite_loss(model, world.data.train, world.data.table, world.data.space, world.settings,
                   step_index, &grads);
    const std::vector<double> analytic = grads.pack();

    StudentModel work = model;
    auto fn = [&](const std::vector<double>& x) {
      work.unpack(x);
      return composite_loss(work, world.data.train, world.data.table, world.data.space,
                            world.settings, step_index, nullptr)
          .total;
    };
    result.max_rel_err = std::max(result.max_rel_err, rel_err(analytic, fd_grad(fn, model.pack())));
    ++result.points;
  }
  return result;
}

}  // namespace

GradSuiteReport run_gradient_suite(uint64_t seed, int points) {
  GradSuiteReport report;
  report.results.push_back(check_kd("vanilla_kd", mix_seed(seed, 1), points, &vanilla_kd,
                                    &vanilla_kd_grad, false, false));
  report.results.push_back(check_kd("vision_guided_kd", mix_seed(seed, 2), points,
                                    &vision_guided_kd, &vision_guided_kd_grad, true, false));
  report.results.push_back(
      check_kd("tgkd", mix_seed(seed, 3), points, &tgkd, &tgkd_grad, true, true));
  report.results.push_back(check_bce(mix_seed(seed, 4), points));
  report.results.push_back(check_dice(mix_seed(seed, 5), points));
  report.results.push_back(check_alignment_ce(mix_seed(seed, 6), points));
  report.results.push_back(check_grounding(mix_seed(seed, 7), points));
  report.results.push_back(check_composite(mix_seed(seed, 8), points));
  return report;
}

std::string format_report(const GradSuiteReport& report) {
  std::string out;
  for (const auto& r : report.results) {
    out += (r.pass() ? "[ok]   " : "[FAIL] ");
    out += r.name + ": max rel err " + fmt_double(r.max_rel_err) + " over " +
           std::to_string(r.points) + " points (tolerance " + fmt_double(r.tolerance) + ")\n";
  }
  return out;
}

}  // namespace ovcal
