#pragma once

#include <vector>

#include "ovcal/linalg.hpp"

namespace ovcal {

struct LossWeights {
  double mask = 5.0;       // lambda_m, applied to bce + dice jointly
  double ce = 2.0;         // lambda_c
  double grounding = 2.0;  // lambda_g
  double kd = 2.0;         // lambda_kd
};

// Unweighted values of the four loss terms.
struct LossTerms {
  double mask = 0.0;  // bce + dice
  double ce = 0.0;
  double grounding = 0.0;
  double kd = 0.0;
};

struct LossBreakdown {
  double total = 0.0;
  double mask = 0.0;  // weighted contributions
  double ce = 0.0;
  double grounding = 0.0;
  double kd = 0.0;
};

constexpr double kBceClamp = 1e-7;
constexpr double kDiceSmooth = 1.0;

/// Pixel-mean binary cross-entropy; predictions are clamped to
/// [1e-7, 1 - 1e-7] before the logs.
double bce_mask_loss(const Grid& pred, const Grid& gt);
Grid bce_mask_grad(const Grid& pred, const Grid& gt);

/// 1 - (2 sum(p g) + s) / (sum p + sum g + s), s = 1. In [0, 1].
double dice_loss(const Grid& pred, const Grid& gt);
Grid dice_grad(const Grid& pred, const Grid& gt);

/// Mean softmax cross-entropy over the rows of a logit matrix. The caller
/// applies any logit scaling; the last column is conventionally the
/// no-object class.
double alignment_ce(const Matrix& logits, const std::vector<int>& labels);
Matrix alignment_ce_grad(const Matrix& logits, const std::vector<int>& labels);

/// Symmetric batch-contrastive grounding objective. Per image pair (b, c)
/// the score is the mean over caption words of image c of the best cosine
/// against the regions of image b; the loss is the average of the
/// image-to-caption and caption-to-image cross-entropies against the
/// diagonal of the scaled B x B score matrix.
double grounding_loss(const std::vector<std::vector<Vec>>& region_embeds,
                      const std::vector<std::vector<Vec>>& caption_words, double logit_scale);

/// Gradient of grounding_loss with respect to every region embedding.
std::vector<std::vector<Vec>> grounding_grad(const std::vector<std::vector<Vec>>& region_embeds,
                                             const std::vector<std::vector<Vec>>& caption_words,
                                             double logit_scale);

/// B x B grounding score matrix before scaling (row = image, col = caption).
Matrix grounding_scores(const std::vector<std::vector<Vec>>& region_embeds,
                        const std::vector<std::vector<Vec>>& caption_words);

/// Weighted composite with a per-term breakdown for logging.
LossBreakdown total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace ovcal
