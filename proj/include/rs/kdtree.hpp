#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "rs/geometry.hpp"

namespace rs {

namespace detail {

// min/max of normal.x over an axis box
inline void box_dot_range(const Range& h, const double* lo, const double* hi, double& mn,
                          double& mx) {
  mn = mx = 0;
  for (int d = 0; d < h.dim; ++d) {
    if (h.normal[d] >= 0) {
      mn += h.normal[d] * lo[d];
      mx += h.normal[d] * hi[d];
    } else {
      mn += h.normal[d] * hi[d];
      mx += h.normal[d] * lo[d];
    }
  }
}

inline bool range_covers_box(const Range& r, const double* lo, const double* hi) {
  switch (r.kind) {
    case Range::kHalfspace: {
      double mn, mx;
      box_dot_range(r, lo, hi, mn, mx);
      return mx <= r.offset;
    }
    case Range::kDominance: {
      for (int d = 0; d < r.dim; ++d)
        if (hi[d] > r.corner.x[d]) return false;
      return true;
    }
    case Range::kSimplex: {
      for (const auto& f : r.faces)
        if (!range_covers_box(f, lo, hi)) return false;
      return true;
    }
  }
  return false;
}

inline bool range_misses_box(const Range& r, const double* lo, const double* hi) {
  switch (r.kind) {
    case Range::kHalfspace: {
      double mn, mx;
      box_dot_range(r, lo, hi, mn, mx);
      return mn > r.offset;
    }
    case Range::kDominance: {
      for (int d = 0; d < r.dim; ++d)
        if (lo[d] > r.corner.x[d]) return true;
      return false;
    }
    case Range::kSimplex: {
      for (const auto& f : r.faces)
        if (range_misses_box(f, lo, hi)) return true;
      return false;
    }
  }
  return false;
}

}  // namespace detail

// Static kd-tree over points supporting counting and reporting for any Range.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const std::vector<Point>& pts) { build(pts); }

  void build(const std::vector<Point>& pts) {
    pts_ = pts;
    idx_.resize(pts.size());
    std::iota(idx_.begin(), idx_.end(), 0);
    nodes_.clear();
    if (!pts.empty()) root_ = build_rec(0, static_cast<int>(pts.size()), 0);
  }

  std::int64_t count(const Range& r) const {
    if (nodes_.empty()) return 0;
    return count_rec(root_, r);
  }

  // appends indices into the original point vector
  void report(const Range& r, std::vector<int>& out) const {
    if (!nodes_.empty()) report_rec(root_, r, out);
  }

  bool empty() const { return nodes_.empty(); }

 private:
  struct Node {
    double lo[kMaxDim], hi[kMaxDim];
    int begin, end;  // range in idx_
    int left = -1, right = -1;
  };

  int build_rec(int begin, int end, int depth) {
    Node nd;
    nd.begin = begin;
    nd.end = end;
    int dim = pts_[idx_[begin]].dim;
    for (int d = 0; d < kMaxDim; ++d) {
      nd.lo[d] = kInf;
      nd.hi[d] = -kInf;
    }
    for (int i = begin; i < end; ++i)
      for (int d = 0; d < dim; ++d) {
        nd.lo[d] = std::min(nd.lo[d], pts_[idx_[i]].x[d]);
        nd.hi[d] = std::max(nd.hi[d], pts_[idx_[i]].x[d]);
      }
    int me = static_cast<int>(nodes_.size());
    nodes_.push_back(nd);
    if (end - begin > 16) {
      int d = depth % dim;
      int mid = (begin + end) / 2;
      std::nth_element(idx_.begin() + begin, idx_.begin() + mid, idx_.begin() + end,
                       [&](int a, int b) {
                         return lex_less(pts_[a].x[d], pts_[a].id, pts_[b].x[d], pts_[b].id);
                       });
      int l = build_rec(begin, mid, depth + 1);
      int r = build_rec(mid, end, depth + 1);
      nodes_[me].left = l;
      nodes_[me].right = r;
    }
    return me;
  }

  std::int64_t count_rec(int v, const Range& r) const {
    const Node& nd = nodes_[v];
    if (detail::range_misses_box(r, nd.lo, nd.hi)) return 0;
    if (detail::range_covers_box(r, nd.lo, nd.hi)) return nd.end - nd.begin;
    if (nd.left < 0) {
      std::int64_t c = 0;
      for (int i = nd.begin; i < nd.end; ++i)
        if (contains(r, pts_[idx_[i]])) ++c;
      return c;
    }
    return count_rec(nd.left, r) + count_rec(nd.right, r);
  }

  void report_rec(int v, const Range& r, std::vector<int>& out) const {
    const Node& nd = nodes_[v];
    if (detail::range_misses_box(r, nd.lo, nd.hi)) return;
    if (detail::range_covers_box(r, nd.lo, nd.hi)) {
      for (int i = nd.begin; i < nd.end; ++i) out.push_back(idx_[i]);
      return;
    }
    if (nd.left < 0) {
      for (int i = nd.begin; i < nd.end; ++i)
        if (contains(r, pts_[idx_[i]])) out.push_back(idx_[i]);
      return;
    }
    report_rec(nd.left, r, out);
    report_rec(nd.right, r, out);
  }

  std::vector<Point> pts_;
  std::vector<int> idx_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

}  // namespace rs
