#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "rs/common.hpp"

namespace rs {

// 2D/3D throughout; 4 leaves room for the lifted dominance system in sampling.
constexpr int kMaxDim = 4;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Point {
  std::array<double, kMaxDim> x{};
  int dim = 3;
  std::int64_t id = 0;

  double operator[](int i) const { return x[i]; }
};

inline Point make_point2(double a, double b, std::int64_t id = 0) {
  Point p;
  p.x = {a, b, 0, 0};
  p.dim = 2;
  p.id = id;
  return p;
}
inline Point make_point3(double a, double b, double c, std::int64_t id = 0) {
  Point p;
  p.x = {a, b, c, 0};
  p.dim = 3;
  p.id = id;
  return p;
}

// Lexicographic (value, id) comparison: the single degeneracy policy shared by
// every module. Strict orders over coordinates always go through this.
inline bool lex_less(double a, std::int64_t ia, double b, std::int64_t ib) {
  if (a != b) return a < b;
  return ia < ib;
}

struct ColoredWeightedPoint {
  Point pt;
  int color = -1;  // -1: absent
  double weight = 0.0;
  bool has_weight = false;
};

using PointSet = std::vector<ColoredWeightedPoint>;

// Non-vertical hyperplane x_dim = a[0] x_1 + ... + a[dim-2] x_{dim-1} + a[dim-1].
struct Hyperplane {
  std::array<double, kMaxDim> a{};
  int dim = 3;
  std::int64_t id = 0;

  double eval(const Point& q) const {
    double v = a[dim - 1];
    for (int i = 0; i + 1 < dim; ++i) v += a[i] * q.x[i];
    return v;
  }
  double eval_xy(double qx, double qy) const {
    // 3D convenience
    return a[0] * qx + a[1] * qy + a[2];
  }
};

struct Range {
  enum Kind { kHalfspace, kDominance, kSimplex };
  Kind kind = kDominance;
  int dim = 3;
  // halfspace: { x : normal . x <= offset }
  std::array<double, kMaxDim> normal{};
  double offset = 0.0;
  // dominance: { x : x <= corner coordinatewise }
  Point corner;
  // simplex: intersection of bounding halfspaces
  std::vector<Range> faces;

  static Range halfspace(std::span<const double> n, double off) {
    Range r;
    r.kind = kHalfspace;
    r.dim = static_cast<int>(n.size());
    for (int i = 0; i < r.dim; ++i) r.normal[i] = n[i];
    r.offset = off;
    bool nonzero = false;
    for (int i = 0; i < r.dim; ++i) nonzero |= (n[i] != 0.0);
    if (!nonzero) throw input_error("halfspace normal is zero");
    return r;
  }
  static Range halfspace3(double nx, double ny, double nz, double off) {
    std::array<double, 3> n{nx, ny, nz};
    return halfspace(n, off);
  }
  static Range halfspace2(double nx, double ny, double off) {
    std::array<double, 2> n{nx, ny};
    return halfspace(n, off);
  }
  static Range dominance(const Point& c) {
    Range r;
    r.kind = kDominance;
    r.dim = c.dim;
    r.corner = c;
    return r;
  }
  static Range simplex(std::vector<Range> hs) {
    Range r;
    r.kind = kSimplex;
    if (hs.empty()) throw input_error("simplex needs bounding halfspaces");
    r.dim = hs[0].dim;
    for (const auto& h : hs)
      if (h.kind != kHalfspace || h.dim != r.dim)
        throw input_error("simplex faces must be halfspaces of equal dimension");
    r.faces = std::move(hs);
    return r;
  }
};

// Closed-range membership: boundary points count as inside.
inline bool contains(const Range& r, const Point& p) {
  if (p.dim != r.dim) throw input_error("contains: dimension mismatch");
  switch (r.kind) {
    case Range::kHalfspace: {
      double s = 0;
      for (int i = 0; i < r.dim; ++i) s += r.normal[i] * p.x[i];
      return s <= r.offset;
    }
    case Range::kDominance: {
      for (int i = 0; i < r.dim; ++i)
        if (p.x[i] > r.corner.x[i]) return false;
      return true;
    }
    case Range::kSimplex: {
      for (const auto& f : r.faces)
        if (!contains(f, p)) return false;
      return true;
    }
  }
  return false;
}

// Standard duality: point (a,b,c) <-> plane z = ax + by - c
// (2D: (a,b) <-> y = ax - b). Preserves incidence and above/below order.
inline Hyperplane dualize_point(const Point& p) {
  Hyperplane h;
  h.dim = p.dim;
  h.id = p.id;
  for (int i = 0; i + 1 < p.dim; ++i) h.a[i] = p.x[i];
  h.a[p.dim - 1] = -p.x[p.dim - 1];
  return h;
}

inline Point dualize_hyperplane(const Hyperplane& h) {
  Point p;
  p.dim = h.dim;
  p.id = h.id;
  for (int i = 0; i + 1 < h.dim; ++i) p.x[i] = h.a[i];
  p.x[h.dim - 1] = -h.a[h.dim - 1];
  return p;
}

// Dual point of a lower halfspace's boundary plane. Lower means the halfspace
// contains (0,..,0,-inf), i.e. the last normal coordinate is positive.
inline Point dualize_halfspace(const Range& r) {
  if (r.kind != Range::kHalfspace) throw input_error("dualize_halfspace: not a halfspace");
  int d = r.dim;
  double nd = r.normal[d - 1];
  if (nd == 0.0) throw input_error("dualize_halfspace: vertical halfspace");
  if (nd < 0.0) throw input_error("dualize_halfspace: upper halfspace (canonicalize first)");
  // boundary x_d = sum(-n_i/n_d x_i) + offset/n_d, dual of (.., -offset/n_d)
  Point p;
  p.dim = d;
  for (int i = 0; i + 1 < d; ++i) p.x[i] = -r.normal[i] / nd;
  p.x[d - 1] = -r.offset / nd;
  return p;
}

// Number of hyperplanes passing below or through q.
inline std::int64_t level(std::span<const Hyperplane> H, const Point& q) {
  std::int64_t c = 0;
  for (const auto& h : H)
    if (h.eval(q) <= q.x[q.dim - 1]) ++c;
  return c;
}

// Rank-space grid: per-dimension equal-count slabs, ties by (value, id).
struct RankGrid {
  int dim = 3;
  int A = 1;
  // slab_min[d][s] = smallest coordinate value in slab s (by (value,id) order)
  std::array<std::vector<double>, kMaxDim> slab_min;

  // largest slab whose minimum value is <= v; -1 when v is below everything
  int map_coord(int d, double v) const {
    const auto& L = slab_min[d];
    int lo = 0, hi = static_cast<int>(L.size()) - 1, ans = -1;
    while (lo <= hi) {
      int mid = (lo + hi) / 2;
      if (L[mid] <= v) {
        ans = mid;
        lo = mid + 1;
      } else {
        hi = mid - 1;
      }
    }
    return ans;
  }
  std::array<int, kMaxDim> map_query(const Point& q) const {
    std::array<int, kMaxDim> g{};
    for (int d2 = 0; d2 < dim; ++d2) g[d2] = map_coord(d2, q.x[d2]);
    return g;
  }
};

struct RankSpaceResult {
  RankGrid grid;
  std::vector<Point> mapped;  // integer coords in [0, #slabs), ids preserved
};

inline RankSpaceResult rank_space_reduce(const std::vector<Point>& points, int A) {
  if (points.empty()) throw input_error("rank_space_reduce: empty point set");
  if (A < 1) throw input_error("rank_space_reduce: A must be >= 1");
  int n = static_cast<int>(points.size());
  int dim = points[0].dim;
  RankSpaceResult out;
  out.grid.dim = dim;
  out.grid.A = A;
  out.mapped.resize(n);
  for (int i = 0; i < n; ++i) {
    out.mapped[i].dim = dim;
    out.mapped[i].id = points[i].id;
  }
  std::vector<int> order(n);
  for (int d = 0; d < dim; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      return lex_less(points[i].x[d], points[i].id, points[j].x[d], points[j].id);
    });
    int slabs = std::min(A, n);
    out.grid.slab_min[d].assign(slabs, 0.0);
    for (int r = 0; r < n; ++r) {
      int s = static_cast<int>(static_cast<std::int64_t>(r) * slabs / n);
      out.mapped[order[r]].x[d] = s;
      if (r == 0 || s != static_cast<int>(static_cast<std::int64_t>(r - 1) * slabs / n))
        out.grid.slab_min[d][s] = points[order[r]].x[d];
    }
  }
  return out;
}

}  // namespace rs
