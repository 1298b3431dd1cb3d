#pragma once

#include <cstdint>
#include <vector>

#include "ovcal/batch.hpp"
#include "ovcal/diversify.hpp"
#include "ovcal/evalmetrics.hpp"
#include "ovcal/linalg.hpp"
#include "ovcal/teacher.hpp"

namespace ovcal {

// Toy segment-then-classify student: a static bank of learnable queries, a
// linear projection into the text space, a bilinear mask head against the
// per-pixel features, and a learned no-object logit shared by all queries.
struct StudentModel {
  int num_queries = 20;  // M
  int query_dim = 16;    // D_q
  int embed_dim = 16;    // D, text space
  int feature_dim = 16;  // D_f

  Matrix queries;     // M x D_q
  Matrix projection;  // D_q x D
  Matrix mask_head;   // D_q x D_f
  double no_object_logit = 0.0;

  void init(uint64_t seed);
  void validate() const;

  int param_count() const {
    return num_queries * query_dim + query_dim * embed_dim + query_dim * feature_dim + 1;
  }
  std::vector<double> pack() const;
  void unpack(const std::vector<double>& flat);
};

struct ForwardResult {
  Matrix queries_prior;           // M x D_q (the query bank itself at toy scale)
  Matrix queries_post;            // M x D, projected into text space
  std::vector<Grid> mask_logits;  // M grids of raw scores
  std::vector<Grid> masks;        // sigmoid(mask_logits)
};

/// Deterministic forward pass: queries_post = queries x projection;
/// mask(q, p) = sigmoid(<mask_head^T query_q, feature(p)>).
ForwardResult forward(const StudentModel& model, const TokenGrid& features);

/// M x (K+1) score matrix: per-category synonym-group scores of each
/// projected query, plus the model's no-object logit as the final column.
Matrix classify(const Matrix& queries_post, const CategoryTable& table, const TeacherSpace& space,
                GroupMode mode, double no_object_logit);

/// Pixel labeling rule: each pixel goes to the query maximizing
/// mask(q, p) * max_score(q); the winning query's argmax column names the
/// pixel, and the ignore label is emitted when that column is no-object.
/// Ties break to the lowest query index, then the lowest class id.
LabelMap fuse_labels(const std::vector<Grid>& masks, const Matrix& scores);

/// forward + classify + fuse_labels.
LabelMap segment_then_classify(const StudentModel& model, const RegionBatch& batch,
                               const CategoryTable& table, const TeacherSpace& space,
                               GroupMode mode);

/// Ground-truth label map of a batch: instance pixels take their category
/// id, everything else is ignore.
LabelMap gt_label_map(const RegionBatch& batch);

}  // namespace ovcal
