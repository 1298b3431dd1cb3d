#include "ovcal/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ovcal/embedding.hpp"

namespace ovcal {

static double clamp_pred(double p) {
  return std::min(1.0 - kBceClamp, std::max(kBceClamp, p));
}

double bce_mask_loss(const Grid& pred, const Grid& gt) {
  require_same_shape(pred, gt, "bce_mask_loss");
  double sum = 0.0;
  for (std::size_t p = 0; p < pred.pixels(); ++p) {
    const double pc = clamp_pred(pred.v[p]);
    const double g = gt.v[p];
    sum -= g * std::log(pc) + (1.0 - g) * std::log(1.0 - pc);
  }
  return sum / static_cast<double>(pred.pixels());
}

Grid bce_mask_grad(const Grid& pred, const Grid& gt) {
  require_same_shape(pred, gt, "bce_mask_grad");
  Grid out(pred.h, pred.w);
  const double inv = 1.0 / static_cast<double>(pred.pixels());
  for (std::size_t p = 0; p < pred.pixels(); ++p) {
    if (pred.v[p] <= kBceClamp || pred.v[p] >= 1.0 - kBceClamp) continue;  // clamped: flat
    const double pc = pred.v[p];
    out.v[p] = inv * (pc - gt.v[p]) / (pc * (1.0 - pc));
  }
  return out;
}

double dice_loss(const Grid& pred, const Grid& gt) {
  require_same_shape(pred, gt, "dice_loss");
  double inter = 0.0, psum = 0.0, gsum = 0.0;
  for (std::size_t p = 0; p < pred.pixels(); ++p) {
    inter += pred.v[p] * gt.v[p];
    psum += pred.v[p];
    gsum += gt.v[p];
  }
  return 1.0 - (2.0 * inter + kDiceSmooth) / (psum + gsum + kDiceSmooth);
}

Grid dice_grad(const Grid& pred, const Grid& gt) {
  require_same_shape(pred, gt, "dice_grad");
  double inter = 0.0, psum = 0.0, gsum = 0.0;
  for (std::size_t p = 0; p < pred.pixels(); ++p) {
    inter += pred.v[p] * gt.v[p];
    psum += pred.v[p];
    gsum += gt.v[p];
  }
  const double denom = psum + gsum + kDiceSmooth;
  const double num = 2.0 * inter + kDiceSmooth;
  Grid out(pred.h, pred.w);
  for (std::size_t p = 0; p < pred.pixels(); ++p)
    out.v[p] = (num - 2.0 * gt.v[p] * denom) / (denom * denom);
  return out;
}

static double log_sum_exp(const double* row, int n) {
  double m = row[0];
  for (int i = 1; i < n; ++i) m = std::max(m, row[i]);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += std::exp(row[i] - m);
  return m + std::log(s);
}

double alignment_ce(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows)
    throw ShapeError("alignment_ce: one label per row required");
  double sum = 0.0;
  for (int q = 0; q < logits.rows; ++q) {
    const int y = labels[static_cast<std::size_t>(q)];
    if (y < 0 || y >= logits.cols) throw DomainError("alignment_ce: label out of range");
    const double* row = logits.a.data() + static_cast<std::size_t>(q) * logits.cols;
    sum += log_sum_exp(row, logits.cols) - row[y];
  }
  return sum / logits.rows;
}

Matrix alignment_ce_grad(const Matrix& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.rows)
    throw ShapeError("alignment_ce_grad: one label per row required");
  Matrix out(logits.rows, logits.cols);
  for (int q = 0; q < logits.rows; ++q) {
    const int y = labels[static_cast<std::size_t>(q)];
    if (y < 0 || y >= logits.cols) throw DomainError("alignment_ce_grad: label out of range");
    const double* row = logits.a.data() + static_cast<std::size_t>(q) * logits.cols;
    const double lse = log_sum_exp(row, logits.cols);
    for (int c = 0; c < logits.cols; ++c)
      out.at(q, c) = (std::exp(row[c] - lse) - (c == y ? 1.0 : 0.0)) / logits.rows;
  }
  return out;
}

static void check_grounding_input(const std::vector<std::vector<Vec>>& regions,
                                  const std::vector<std::vector<Vec>>& captions) {
  if (regions.size() != captions.size())
    throw ShapeError("grounding: batch sizes differ between regions and captions");
  if (regions.empty()) throw DomainError("grounding: empty batch");
  for (const auto& r : regions)
    if (r.empty()) throw DomainError("grounding: image with no regions");
  for (const auto& c : captions)
    if (c.empty()) throw DomainError("grounding: image with no caption words");
}

Matrix grounding_scores(const std::vector<std::vector<Vec>>& region_embeds,
                        const std::vector<std::vector<Vec>>& caption_words) {
  check_grounding_input(region_embeds, caption_words);
  const int b = static_cast<int>(region_embeds.size());
  Matrix scores(b, b);
  for (int img = 0; img < b; ++img) {
    for (int cap = 0; cap < b; ++cap) {
      double sum = 0.0;
      for (const Vec& word : caption_words[static_cast<std::size_t>(cap)]) {
        double best = -2.0;
        for (const Vec& region : region_embeds[static_cast<std::size_t>(img)])
          best = std::max(best, cosine_sim(region, word));
        sum += best;
      }
      scores.at(img, cap) = sum / static_cast<double>(caption_words[static_cast<std::size_t>(cap)].size());
    }
  }
  return scores;
}

double grounding_loss(const std::vector<std::vector<Vec>>& region_embeds,
                      const std::vector<std::vector<Vec>>& caption_words, double logit_scale) {
  const Matrix s = grounding_scores(region_embeds, caption_words);
  const int b = s.rows;
  std::vector<double> col(static_cast<std::size_t>(b));
  double sum = 0.0;
  for (int i = 0; i < b; ++i) {
    std::vector<double> row(static_cast<std::size_t>(b));
    for (int j = 0; j < b; ++j) {
      row[static_cast<std::size_t>(j)] = logit_scale * s.at(i, j);
      col[static_cast<std::size_t>(j)] = logit_scale * s.at(j, i);
    }
    sum += log_sum_exp(row.data(), b) - row[static_cast<std::size_t>(i)];
    sum += log_sum_exp(col.data(), b) - col[static_cast<std::size_t>(i)];
  }
  return sum / (2.0 * b);
}

std::vector<std::vector<Vec>> grounding_grad(const std::vector<std::vector<Vec>>& region_embeds,
                                             const std::vector<std::vector<Vec>>& caption_words,
                                             double logit_scale) {
  const Matrix s = grounding_scores(region_embeds, caption_words);
  const int b = s.rows;

  // d loss / d score[i][j] via the two softmax directions.
  Matrix dscore(b, b);
  for (int i = 0; i < b; ++i) {
    std::vector<double> row(static_cast<std::size_t>(b)), col(static_cast<std::size_t>(b));
    for (int j = 0; j < b; ++j) {
      row[static_cast<std::size_t>(j)] = logit_scale * s.at(i, j);
      col[static_cast<std::size_t>(j)] = logit_scale * s.at(j, i);
    }
    const double lse_row = log_sum_exp(row.data(), b);
    const double lse_col = log_sum_exp(col.data(), b);
    for (int j = 0; j < b; ++j) {
      dscore.at(i, j) += std::exp(row[static_cast<std::size_t>(j)] - lse_row) - (i == j ? 1.0 : 0.0);
      dscore.at(j, i) += std::exp(col[static_cast<std::size_t>(j)] - lse_col) - (i == j ? 1.0 : 0.0);
    }
  }
  const double factor = logit_scale / (2.0 * b);

  std::vector<std::vector<Vec>> grads(region_embeds.size());
  for (std::size_t img = 0; img < region_embeds.size(); ++img)
    grads[img].assign(region_embeds[img].size(), Vec(region_embeds[img].front().size(), 0.0));

  // score[img][cap] depends only on the regions of `img`; the max over
  // regions routes the gradient to the first best-matching region.
  for (int img = 0; img < b; ++img) {
    for (int cap = 0; cap < b; ++cap) {
      const double coeff = factor * dscore.at(img, cap) /
                           static_cast<double>(caption_words[static_cast<std::size_t>(cap)].size());
      if (coeff == 0.0) continue;
      for (const Vec& word : caption_words[static_cast<std::size_t>(cap)]) {
        int best_r = 0;
        double best = -2.0;
        const auto& regions = region_embeds[static_cast<std::size_t>(img)];
        for (std::size_t r = 0; r < regions.size(); ++r) {
          const double c = cosine_sim(regions[r], word);
          if (c > best) {
            best = c;
            best_r = static_cast<int>(r);
          }
        }
        const Vec g = cosine_sim_grad_a(regions[static_cast<std::size_t>(best_r)], word);
        Vec& dst = grads[static_cast<std::size_t>(img)][static_cast<std::size_t>(best_r)];
        for (std::size_t k = 0; k < g.size(); ++k) dst[k] += coeff * g[k];
      }
    }
  }
  return grads;
}

LossBreakdown total_loss(const LossTerms& terms, const LossWeights& weights) {
  for (double t : {terms.mask, terms.ce, terms.grounding, terms.kd})
    if (!std::isfinite(t)) throw DomainError("total_loss: non-finite term");
  LossBreakdown out;
  out.mask = weights.mask * terms.mask;
  out.ce = weights.ce * terms.ce;
  out.grounding = weights.grounding * terms.grounding;
  out.kd = weights.kd * terms.kd;
  out.total = out.mask + out.ce + out.grounding + out.kd;
  return out;
}

}  // namespace ovcal
