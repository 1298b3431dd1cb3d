#pragma once

#include <cstddef>
#include <vector>

#include "ovcal/errors.hpp"

namespace ovcal {

using Vec = std::vector<double>;

// Dense row-major matrix. Deliberately minimal: the kernels in this library
// are small-dimensional and benefit more from explicit loops than from a
// linear algebra dependency.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  Vec row(int r) const {
    return Vec(a.begin() + static_cast<std::ptrdiff_t>(r) * cols,
               a.begin() + static_cast<std::ptrdiff_t>(r + 1) * cols);
  }
};

// H x W scalar field (soft masks, binary masks as 0/1).
struct Grid {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

  double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
  std::size_t pixels() const { return v.size(); }
};

// H x W grid of dim-dimensional embeddings, pixel-major.
struct TokenGrid {
  int h = 0;
  int w = 0;
  int dim = 0;
  std::vector<double> v;

  TokenGrid() = default;
  TokenGrid(int h_, int w_, int dim_)
      : h(h_), w(w_), dim(dim_), v(static_cast<std::size_t>(h_) * w_ * dim_, 0.0) {}

  double* token(std::size_t p) { return v.data() + p * dim; }
  const double* token(std::size_t p) const { return v.data() + p * dim; }
  std::size_t pixels() const { return static_cast<std::size_t>(h) * w; }

  Vec token_vec(std::size_t p) const {
    return Vec(v.begin() + static_cast<std::ptrdiff_t>(p * dim),
               v.begin() + static_cast<std::ptrdiff_t>((p + 1) * dim));
  }
};

inline void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (a.h != b.h || a.w != b.w) throw ShapeError(std::string(what) + ": grid shapes differ");
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace ovcal
