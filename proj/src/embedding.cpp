#include "ovcal/embedding.hpp"

#include <cmath>

namespace ovcal {

static void require_same_dim(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) throw ShapeError(std::string(what) + ": dimension mismatch");
}

double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

void normalize(Vec& a) {
  const double n = norm(a);
  if (n == 0.0) throw DomainError("normalize: zero vector");
  for (auto& x : a) x /= n;
}

Vec normalized(Vec a) {
  normalize(a);
  return a;
}

double cosine_sim(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "cosine_sim");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_sim: zero-norm input");
  return dot(a, b) / (na * nb);
}

Vec cosine_sim_grad_a(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "cosine_sim_grad_a");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_sim_grad_a: zero-norm input");
  const double c = dot(a, b) / (na * nb);
  Vec g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = (b[i] / nb - c * a[i] / na) / na;
  return g;
}

double l2_distance(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "l2_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s + kDistEps) - std::sqrt(kDistEps);
}

Vec l2_distance_grad_a(const Vec& a, const Vec& b) {
  require_same_dim(a, b, "l2_distance_grad_a");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  const double denom = std::sqrt(s + kDistEps);
  Vec g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) g[i] = (a[i] - b[i]) / denom;
  return g;
}

Vec mask_pool(const TokenGrid& tokens, const Grid& mask) {
  if (tokens.h != mask.h || tokens.w != mask.w) throw ShapeError("mask_pool: grid shapes differ");
  double wsum = 0.0;
  Vec out(tokens.dim, 0.0);
  for (std::size_t p = 0; p < tokens.pixels(); ++p) {
    const double m = mask.v[p];
    if (m == 0.0) continue;
    wsum += m;
    const double* t = tokens.token(p);
    for (int d = 0; d < tokens.dim; ++d) out[d] += m * t[d];
  }
  if (wsum <= 0.0) throw DomainError("mask_pool: empty region (mask sums to zero)");
  for (auto& x : out) x /= wsum;
  return out;
}

Vec mean_pool(const TokenGrid& tokens) {
  if (tokens.pixels() == 0) throw DomainError("mean_pool: empty grid");
  Vec out(tokens.dim, 0.0);
  for (std::size_t p = 0; p < tokens.pixels(); ++p) {
    const double* t = tokens.token(p);
    for (int d = 0; d < tokens.dim; ++d) out[d] += t[d];
  }
  for (auto& x : out) x /= static_cast<double>(tokens.pixels());
  return out;
}

}  // namespace ovcal
