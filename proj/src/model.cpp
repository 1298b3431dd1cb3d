#include "ovcal/model.hpp"

#include <cmath>

#include "ovcal/rng.hpp"

namespace ovcal {

void StudentModel::init(uint64_t seed) {
  queries = Matrix(num_queries, query_dim);
  projection = Matrix(query_dim, embed_dim);
  mask_head = Matrix(query_dim, feature_dim);
  no_object_logit = 0.0;

  // Queries start as random unit vectors; the two linear maps start at a
  // scale that keeps projected norms near 1 and mask logits small.
  for (int q = 0; q < num_queries; ++q) {
    Rng rng(mix_seed(seed, streams::kInit, 1, static_cast<uint64_t>(q)));
    Vec v = normalized(rng.normal_vec(static_cast<std::size_t>(query_dim)));
    for (int d = 0; d < query_dim; ++d) queries.at(q, d) = v[static_cast<std::size_t>(d)];
  }
  {
    Rng rng(mix_seed(seed, streams::kInit, 2));
    const double s = 1.0 / std::sqrt(static_cast<double>(query_dim));
    for (auto& x : projection.a) x = s * rng.normal();
  }
  {
    Rng rng(mix_seed(seed, streams::kInit, 3));
    const double s = 0.5 / std::sqrt(static_cast<double>(query_dim));
    for (auto& x : mask_head.a) x = s * rng.normal();
  }
}

void StudentModel::validate() const {
  if (queries.rows != num_queries || queries.cols != query_dim ||
      projection.rows != query_dim || projection.cols != embed_dim ||
      mask_head.rows != query_dim || mask_head.cols != feature_dim)
    throw ShapeError("student model: parameter shapes inconsistent with configuration");
  for (const Matrix* m : {&queries, &projection, &mask_head})
    for (double x : m->a)
      if (!std::isfinite(x)) throw DomainError("student model: non-finite parameter");
  if (!std::isfinite(no_object_logit)) throw DomainError("student model: non-finite parameter");
}

std::vector<double> StudentModel::pack() const {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(param_count()));
  flat.insert(flat.end(), queries.a.begin(), queries.a.end());
  flat.insert(flat.end(), projection.a.begin(), projection.a.end());
  flat.insert(flat.end(), mask_head.a.begin(), mask_head.a.end());
  flat.push_back(no_object_logit);
  return flat;
}

void StudentModel::unpack(const std::vector<double>& flat) {
  if (static_cast<int>(flat.size()) != param_count())
    throw ShapeError("student model: flat parameter size mismatch");
  auto it = flat.begin();
  std::copy(it, it + queries.a.size(), queries.a.begin());
  it += static_cast<std::ptrdiff_t>(queries.a.size());
  std::copy(it, it + projection.a.size(), projection.a.begin());
  it += static_cast<std::ptrdiff_t>(projection.a.size());
  std::copy(it, it + mask_head.a.size(), mask_head.a.begin());
  it += static_cast<std::ptrdiff_t>(mask_head.a.size());
  no_object_logit = *it;
}

ForwardResult forward(const StudentModel& model, const TokenGrid& features) {
  model.validate();
  if (features.dim != model.feature_dim)
    throw ShapeError("forward: feature dimension differs from mask head");

  ForwardResult out;
  out.queries_prior = model.queries;

  out.queries_post = Matrix(model.num_queries, model.embed_dim);
  for (int q = 0; q < model.num_queries; ++q)
    for (int d = 0; d < model.embed_dim; ++d) {
      double s = 0.0;
      for (int k = 0; k < model.query_dim; ++k) s += model.queries.at(q, k) * model.projection.at(k, d);
      out.queries_post.at(q, d) = s;
    }

  out.mask_logits.reserve(static_cast<std::size_t>(model.num_queries));
  out.masks.reserve(static_cast<std::size_t>(model.num_queries));
  for (int q = 0; q < model.num_queries; ++q) {
    // Mask coefficients m_q = mask_head^T query_q, dotted against each pixel.
    Vec coeff(static_cast<std::size_t>(model.feature_dim), 0.0);
    for (int f = 0; f < model.feature_dim; ++f) {
      double s = 0.0;
      for (int k = 0; k < model.query_dim; ++k) s += model.queries.at(q, k) * model.mask_head.at(k, f);
      coeff[static_cast<std::size_t>(f)] = s;
    }
    Grid logits(features.h, features.w);
    Grid probs(features.h, features.w);
    for (std::size_t p = 0; p < features.pixels(); ++p) {
      const double* t = features.token(p);
      double z = 0.0;
      for (int f = 0; f < model.feature_dim; ++f) z += coeff[static_cast<std::size_t>(f)] * t[f];
      logits.v[p] = z;
      probs.v[p] = 1.0 / (1.0 + std::exp(-z));
    }
    out.mask_logits.push_back(std::move(logits));
    out.masks.push_back(std::move(probs));
  }
  return out;
}

Matrix classify(const Matrix& queries_post, const CategoryTable& table, const TeacherSpace& space,
                GroupMode mode, double no_object_logit) {
  if (table.size() == 0) throw ConfigError("classify: empty category table");
  const int k = table.size();
  Matrix scores(queries_post.rows, k + 1);
  for (int q = 0; q < queries_post.rows; ++q) {
    const Vec query = queries_post.row(q);
    for (int c = 0; c < k; ++c) scores.at(q, c) = group_score(query, table.by_id(c), space, mode);
    scores.at(q, k) = no_object_logit;
  }
  return scores;
}

LabelMap fuse_labels(const std::vector<Grid>& masks, const Matrix& scores) {
  if (static_cast<int>(masks.size()) != scores.rows)
    throw ShapeError("fuse_labels: one mask per score row required");
  if (masks.empty()) throw ShapeError("fuse_labels: no queries");
  const int k = scores.cols - 1;  // last column is no-object

  // Per-query argmax class and peak score are pixel-independent.
  std::vector<int> best_class(masks.size(), 0);
  std::vector<double> best_score(masks.size(), 0.0);
  for (int q = 0; q < scores.rows; ++q) {
    int arg = 0;
    double best = scores.at(q, 0);
    for (int c = 1; c <= k; ++c) {
      if (scores.at(q, c) > best) {
        best = scores.at(q, c);
        arg = c;
      }
    }
    best_class[static_cast<std::size_t>(q)] = arg;
    best_score[static_cast<std::size_t>(q)] = best;
  }

  LabelMap out(masks.front().h, masks.front().w);
  for (std::size_t p = 0; p < masks.front().pixels(); ++p) {
    int win_q = 0;
    double win = masks[0].v[p] * best_score[0];
    for (std::size_t q = 1; q < masks.size(); ++q) {
      const double s = masks[q].v[p] * best_score[q];
      if (s > win) {
        win = s;
        win_q = static_cast<int>(q);
      }
    }
    const int cls = best_class[static_cast<std::size_t>(win_q)];
    out.labels[p] = cls == k ? kIgnoreLabel : static_cast<uint16_t>(cls);
  }
  return out;
}

LabelMap segment_then_classify(const StudentModel& model, const RegionBatch& batch,
                               const CategoryTable& table, const TeacherSpace& space,
                               GroupMode mode) {
  const ForwardResult fwd = forward(model, batch.features);
  const Matrix scores = classify(fwd.queries_post, table, space, mode, model.no_object_logit);
  return fuse_labels(fwd.masks, scores);
}

LabelMap gt_label_map(const RegionBatch& batch) {
  LabelMap out(batch.features.h, batch.features.w);
  for (std::size_t i = 0; i < batch.gt_masks.size(); ++i) {
    const Grid& m = batch.gt_masks[i];
    for (std::size_t p = 0; p < m.pixels(); ++p)
      if (m.v[p] > 0.0) out.labels[p] = static_cast<uint16_t>(batch.gt_labels[i]);
  }
  return out;
}

}  // namespace ovcal
