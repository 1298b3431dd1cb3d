#pragma once

#include "ovcal/linalg.hpp"

namespace ovcal {

// Smoothing constant for the distance kernel. Keeps the gradient of
// l2_distance finite at coincident points.
constexpr double kDistEps = 1e-12;

/// Cosine similarity dot(a,b) / (|a||b|). Throws on zero-norm inputs or
/// dimension mismatch.
double cosine_sim(const Vec& a, const Vec& b);

/// Gradient of cosine_sim with respect to the first argument.
Vec cosine_sim_grad_a(const Vec& a, const Vec& b);

/// Smoothed Euclidean distance sqrt(sum((a-b)^2) + eps) - sqrt(eps).
/// Zero iff a == b; differentiable everywhere.
double l2_distance(const Vec& a, const Vec& b);

/// d(l2_distance)/da = (a - b) / sqrt(sum((a-b)^2) + eps).
Vec l2_distance_grad_a(const Vec& a, const Vec& b);

double norm(const Vec& a);

/// In-place L2 normalization; zero vectors raise DomainError.
void normalize(Vec& a);
Vec normalized(Vec a);

/// Mask-weighted average of the grid tokens: sum(mask * token) / sum(mask).
/// The region-level teacher embedding for the spatial-token variant.
Vec mask_pool(const TokenGrid& tokens, const Grid& mask);

/// Unweighted mean over all tokens (stand-in for a global pooled token).
Vec mean_pool(const TokenGrid& tokens);

}  // namespace ovcal
