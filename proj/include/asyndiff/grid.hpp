#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace asyndiff {

// Row-major h x w grid of doubles.
struct Grid2 {
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Grid2() = default;
  Grid2(int h_, int w_, double fill = 0.0)
      : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

  double& at(int r, int c) { return v[static_cast<size_t>(r) * w + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * w + c]; }
  size_t size() const { return v.size(); }
  bool same_shape(const Grid2& o) const { return h == o.h && w == o.w; }
};

// Row-major c x h x w grid (channels outermost).
struct Grid3 {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> v;

  Grid3() = default;
  Grid3(int c_, int h_, int w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

  double& at(int ch, int r, int col) {
    return v[(static_cast<size_t>(ch) * h + r) * w + col];
  }
  double at(int ch, int r, int col) const {
    return v[(static_cast<size_t>(ch) * h + r) * w + col];
  }
  size_t size() const { return v.size(); }
  bool same_shape(const Grid3& o) const {
    return c == o.c && h == o.h && w == o.w;
  }
};

inline void require_same_shape(const Grid2& a, const Grid2& b,
                               const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

inline void require_same_shape(const Grid3& a, const Grid3& b,
                               const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace asyndiff
