#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "rs/freqvec.hpp"
#include "rs/geometry.hpp"
#include "rs/kdtree.hpp"

namespace rs {

// ------------------------- partition-tree type-2 -------------------------
//
// Exact per-color counts for halfspace / simplex / dominance queries. The
// partition is built by recursive median cuts cycling over a pool of
// axis-aligned and diagonal directions; every node stores the packed frequency
// vector of its subtree, so fully contained nodes contribute in one add.

struct PartitionTreeNode {
  std::array<double, kMaxDim> lo{}, hi{};
  int dim = 3;
  int F = 0, w = 64;
  PackedFrequencyVector freq;
  std::vector<PartitionTreeNode> children;
  PointSet pts;  // leaf payload

  bool is_leaf() const { return children.empty(); }
};

namespace detail {

inline std::vector<std::array<double, 3>> partition_directions(int dim, int fanout) {
  std::vector<std::array<double, 3>> dirs;
  for (int d = 0; d < dim; ++d) {
    std::array<double, 3> e{0, 0, 0};
    e[d] = 1;
    dirs.push_back(e);
  }
  if (dim == 2) {
    dirs.push_back({1, 1, 0});
    dirs.push_back({1, -1, 0});
  } else {
    dirs.push_back({1, 1, 1});
    dirs.push_back({1, 1, -1});
    dirs.push_back({1, -1, 1});
    dirs.push_back({1, -1, -1});
  }
  int levels = 0;
  while ((1 << levels) < fanout) ++levels;
  size_t pool = std::max<size_t>(dim, static_cast<size_t>(dim) * levels);
  if (dirs.size() > pool) dirs.resize(pool);
  return dirs;
}

inline PackedFrequencyVector tally_freq(const PointSet& P, const std::vector<int>& idx,
                                        int F, int w) {
  std::vector<std::uint64_t> c(F, 0);
  for (int i : idx) ++c[P[i].color];
  return encode(c, w);
}

}  // namespace detail

inline PartitionTreeNode build_partition_type2(const PointSet& P, int F, int w,
                                               const Config& cfg = Config()) {
  int n = static_cast<int>(P.size());
  if (n < 1) throw input_error("build_partition_type2: empty input");
  if (F < 1) throw input_error("build_partition_type2: need F >= 1");
  for (const auto& p : P)
    if (p.color < 0 || p.color >= F)
      throw input_error("build_partition_type2: color out of range");
  int dim = P[0].pt.dim;

  // two-regime fanout: wide vectors relative to n favor a flatter tree
  double logn = std::log2(std::max(2.0, static_cast<double>(n)));
  bool wide = static_cast<double>(F) / w >= n / std::pow(logn, 4.0);
  int fanout = wide ? 8 : 2;
  int levels = 0;
  while ((1 << levels) < fanout) ++levels;
  auto dirs = detail::partition_directions(dim, fanout);
  std::int64_t leaf_cap = std::max<std::int64_t>(cfg.leaf_threshold, F / w);

  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);

  auto proj = [&](int i, const std::array<double, 3>& dir) {
    double s = 0;
    for (int d = 0; d < dim; ++d) s += dir[d] * P[i].pt.x[d];
    return s;
  };

  std::function<void(PartitionTreeNode&, std::vector<int>&, int)> build =
      [&](PartitionTreeNode& nd, std::vector<int>& ids, int depth) {
        nd.dim = dim;
        nd.F = F;
        nd.w = w;
        for (int d = 0; d < kMaxDim; ++d) {
          nd.lo[d] = kInf;
          nd.hi[d] = -kInf;
        }
        for (int i : ids)
          for (int d = 0; d < dim; ++d) {
            nd.lo[d] = std::min(nd.lo[d], P[i].pt.x[d]);
            nd.hi[d] = std::max(nd.hi[d], P[i].pt.x[d]);
          }
        nd.freq = detail::tally_freq(P, ids, F, w);
        if (static_cast<std::int64_t>(ids.size()) <= leaf_cap) {
          for (int i : ids) nd.pts.push_back(P[i]);
          return;
        }
        // split into fanout groups by median halving, cycling directions
        std::vector<std::vector<int>> groups = {ids};
        for (int lv = 0; lv < levels; ++lv) {
          const auto& dir = dirs[(static_cast<size_t>(depth) * levels + lv) % dirs.size()];
          std::vector<std::vector<int>> next;
          for (auto& g : groups) {
            if (g.size() <= 1) {
              next.push_back(std::move(g));
              continue;
            }
            size_t mid = g.size() / 2;
            std::nth_element(g.begin(), g.begin() + mid, g.end(), [&](int a, int b) {
              return lex_less(proj(a, dir), P[a].pt.id, proj(b, dir), P[b].pt.id);
            });
            next.emplace_back(g.begin(), g.begin() + mid);
            next.emplace_back(g.begin() + mid, g.end());
          }
          groups.swap(next);
        }
        for (auto& g : groups) {
          if (g.empty()) continue;
          nd.children.emplace_back();
          build(nd.children.back(), g, depth + 1);
        }
      };

  PartitionTreeNode root;
  build(root, idx, 0);
  return root;
}

namespace detail {

inline void query_partition_walk(const PartitionTreeNode& nd, const Range& q,
                                 std::vector<std::uint64_t>& acc) {
  if (range_misses_box(q, nd.lo.data(), nd.hi.data())) return;
  if (range_covers_box(q, nd.lo.data(), nd.hi.data())) {
    auto f = decode(nd.freq);
    for (int i = 0; i < nd.F; ++i) acc[i] += f[i];
    return;
  }
  if (nd.is_leaf()) {
    for (const auto& p : nd.pts)
      if (contains(q, p.pt)) ++acc[p.color];
    return;
  }
  for (const auto& ch : nd.children) query_partition_walk(ch, q, acc);
}

}  // namespace detail

inline PackedFrequencyVector query_partition_type2(const PartitionTreeNode& tree,
                                                   const Range& q) {
  std::vector<std::uint64_t> acc(tree.F, 0);
  detail::query_partition_walk(tree, q, acc);
  return encode(acc, tree.w);
}

// ------------------------- recursive-grid type-2 -------------------------
//
// Exact dominance type-2 counting over 3D colored points with a small palette.
// Each node lays an equal-count grid per non-constant dimension, stores packed
// prefix ("corner") vectors over whole slabs, and recurses on each slab of each
// active dimension; a query combines the corner vector with one child per
// active dimension, earlier dimensions restricted below their slab. Leaves
// keep a lookup table keyed by per-dimension distinct-value ranks.

constexpr int kGridColorCap = 4096;
constexpr std::int64_t kGridTableCap = std::int64_t(1) << 22;

struct GridType2Structure {
  int F = 0, w = 64;
  std::int64_t n = 0;
  int depth = 0;  // height of the recursion below this node
  bool leaf = false;
  std::array<bool, 3> active{};
  std::array<double, 3> const_val{};       // inactive dims: the single value
  std::array<std::vector<double>, 3> slab_min;  // active dims: slab start values
  std::vector<PackedFrequencyVector> corner;    // flattened prefix over (m_d + 1)
  std::array<std::vector<std::unique_ptr<GridType2Structure>>, 3> child;
  std::array<std::vector<double>, 3> leaf_vals;  // distinct sorted values
  std::vector<PackedFrequencyVector> table;      // flattened (dx+1)(dy+1)(dz+1)
};

namespace detail {

inline std::unique_ptr<GridType2Structure> build_grid_rec(
    const PointSet& pts, int F, int w, std::int64_t n_star) {
  auto s = std::make_unique<GridType2Structure>();
  s->F = F;
  s->w = w;
  s->n = static_cast<std::int64_t>(pts.size());

  std::array<std::vector<double>, 3> dv;
  for (int d = 0; d < 3; ++d) {
    for (const auto& p : pts) dv[d].push_back(p.pt.x[d]);
    std::sort(dv[d].begin(), dv[d].end());
    dv[d].erase(std::unique(dv[d].begin(), dv[d].end()), dv[d].end());
  }
  bool splittable = dv[0].size() > 1 || dv[1].size() > 1 || dv[2].size() > 1;

  if (s->n <= n_star || !splittable) {
    s->leaf = true;
    s->leaf_vals = dv;
    std::int64_t dx = dv[0].size(), dy = dv[1].size(), dz = dv[2].size();
    std::int64_t cells = (dx + 1) * (dy + 1) * (dz + 1);
    if (cells * F > kGridTableCap)
      throw construction_error("grid type-2: leaf lookup table exceeds memory cap");
    // histogram over rank triples, then 3D prefix sums
    std::vector<std::uint64_t> g(static_cast<size_t>(cells) * F, 0);
    auto at = [&](std::int64_t i, std::int64_t j, std::int64_t l) {
      return ((i * (dy + 1) + j) * (dz + 1) + l) * F;
    };
    for (const auto& p : pts) {
      std::int64_t rx = std::lower_bound(dv[0].begin(), dv[0].end(), p.pt.x[0]) - dv[0].begin();
      std::int64_t ry = std::lower_bound(dv[1].begin(), dv[1].end(), p.pt.x[1]) - dv[1].begin();
      std::int64_t rz = std::lower_bound(dv[2].begin(), dv[2].end(), p.pt.x[2]) - dv[2].begin();
      ++g[at(rx + 1, ry + 1, rz + 1) + p.color];
    }
    for (std::int64_t i = 1; i <= dx; ++i)
      for (std::int64_t j = 0; j <= dy; ++j)
        for (std::int64_t l = 0; l <= dz; ++l)
          for (int c = 0; c < F; ++c) g[at(i, j, l) + c] += g[at(i - 1, j, l) + c];
    for (std::int64_t i = 0; i <= dx; ++i)
      for (std::int64_t j = 1; j <= dy; ++j)
        for (std::int64_t l = 0; l <= dz; ++l)
          for (int c = 0; c < F; ++c) g[at(i, j, l) + c] += g[at(i, j - 1, l) + c];
    for (std::int64_t i = 0; i <= dx; ++i)
      for (std::int64_t j = 0; j <= dy; ++j)
        for (std::int64_t l = 1; l <= dz; ++l)
          for (int c = 0; c < F; ++c) g[at(i, j, l) + c] += g[at(i, j, l - 1) + c];
    s->table.reserve(cells);
    std::vector<std::uint64_t> one(F);
    for (std::int64_t e = 0; e < cells; ++e) {
      std::copy(g.begin() + e * F, g.begin() + (e + 1) * F, one.begin());
      s->table.push_back(encode(one, w));
    }
    return s;
  }

  std::int64_t m = static_cast<std::int64_t>(
      std::ceil(std::cbrt(static_cast<double>(s->n))));
  std::array<std::int64_t, 3> slabs{1, 1, 1};
  for (int d = 0; d < 3; ++d) {
    std::int64_t D = static_cast<std::int64_t>(dv[d].size());
    if (D < 2) {
      s->active[d] = false;
      s->const_val[d] = dv[d][0];
      continue;
    }
    s->active[d] = true;
    std::int64_t mm = std::min(m, D);
    for (std::int64_t t = 0; t < mm; ++t)
      s->slab_min[d].push_back(dv[d][t * D / mm]);
    slabs[d] = mm;
  }

  auto slab_of = [&](int d, double v) {
    return std::upper_bound(s->slab_min[d].begin(), s->slab_min[d].end(), v) -
           s->slab_min[d].begin() - 1;  // >= 0 for any data value
  };

  // corner prefix vectors over whole slabs, one index per dimension (inactive
  // dims collapse to a single slab)
  std::int64_t cx = slabs[0] + 1, cy = slabs[1] + 1, cz = slabs[2] + 1;
  std::vector<std::uint64_t> g(static_cast<size_t>(cx * cy * cz) * F, 0);
  auto at = [&](std::int64_t i, std::int64_t j, std::int64_t l) {
    return ((i * cy + j) * cz + l) * F;
  };
  std::vector<std::array<std::int64_t, 3>> ps(pts.size());
  for (size_t pi = 0; pi < pts.size(); ++pi)
    for (int d = 0; d < 3; ++d)
      ps[pi][d] = s->active[d] ? slab_of(d, pts[pi].pt.x[d]) : 0;
  for (size_t pi = 0; pi < pts.size(); ++pi)
    ++g[at(ps[pi][0] + 1, ps[pi][1] + 1, ps[pi][2] + 1) + pts[pi].color];
  for (std::int64_t i = 1; i < cx; ++i)
    for (std::int64_t j = 0; j < cy; ++j)
      for (std::int64_t l = 0; l < cz; ++l)
        for (int c = 0; c < F; ++c) g[at(i, j, l) + c] += g[at(i - 1, j, l) + c];
  for (std::int64_t i = 0; i < cx; ++i)
    for (std::int64_t j = 1; j < cy; ++j)
      for (std::int64_t l = 0; l < cz; ++l)
        for (int c = 0; c < F; ++c) g[at(i, j, l) + c] += g[at(i, j - 1, l) + c];
  for (std::int64_t i = 0; i < cx; ++i)
    for (std::int64_t j = 0; j < cy; ++j)
      for (std::int64_t l = 1; l < cz; ++l)
        for (int c = 0; c < F; ++c) g[at(i, j, l) + c] += g[at(i, j, l - 1) + c];
  s->corner.reserve(cx * cy * cz);
  std::vector<std::uint64_t> one(F);
  for (std::int64_t e = 0; e < cx * cy * cz; ++e) {
    std::copy(g.begin() + e * F, g.begin() + (e + 1) * F, one.begin());
    s->corner.push_back(encode(one, w));
  }
  g.clear();
  g.shrink_to_fit();

  for (int d = 0; d < 3; ++d) {
    if (!s->active[d]) continue;
    std::vector<PointSet> parts(slabs[d]);
    for (size_t pi = 0; pi < pts.size(); ++pi) parts[ps[pi][d]].push_back(pts[pi]);
    for (auto& part : parts) {
      s->child[d].push_back(build_grid_rec(part, F, w, n_star));
      s->depth = std::max(s->depth, s->child[d].back()->depth + 1);
    }
  }
  return s;
}

}  // namespace detail

inline std::unique_ptr<GridType2Structure> build_grid_type2(const PointSet& P, int F,
                                                            double eta,
                                                            const Config& cfg = Config()) {
  if (P.empty()) throw input_error("build_grid_type2: empty input");
  if (F < 1 || F > kGridColorCap)
    throw input_error("build_grid_type2: color count out of range (cluster first)");
  for (const auto& p : P) {
    if (p.pt.dim != 3) throw input_error("build_grid_type2: points must be 3D");
    if (p.color < 0 || p.color >= F)
      throw input_error("build_grid_type2: color out of range");
  }
  if (eta <= 0 || eta >= 1) throw input_error("build_grid_type2: need 0 < eta < 1");
  std::int64_t n_star = std::max<std::int64_t>(
      2, static_cast<std::int64_t>(std::ceil(std::pow(static_cast<double>(P.size()), eta))));
  return detail::build_grid_rec(P, F, cfg.w, n_star);
}

inline PackedFrequencyVector query_grid_type2(const GridType2Structure& s, const Point& q) {
  auto zero = [&] { return encode(std::vector<std::uint64_t>(s.F, 0), s.w); };
  for (int d = 0; d < 3; ++d)
    if (!s.leaf && !s.active[d] && q.x[d] < s.const_val[d]) return zero();

  if (s.leaf) {
    std::array<std::int64_t, 3> r{};
    for (int d = 0; d < 3; ++d)
      r[d] = std::upper_bound(s.leaf_vals[d].begin(), s.leaf_vals[d].end(), q.x[d]) -
             s.leaf_vals[d].begin();
    std::int64_t dy = s.leaf_vals[1].size(), dz = s.leaf_vals[2].size();
    return s.table[(r[0] * (dy + 1) + r[1]) * (dz + 1) + r[2]];
  }

  // corner prefix index: active dims take "slabs strictly below q's slab";
  // inactive dims include their single slab outright (q >= const_val held above)
  std::array<std::int64_t, 3> iq{1, 1, 1};
  for (int d = 0; d < 3; ++d) {
    if (!s.active[d]) continue;
    iq[d] = std::upper_bound(s.slab_min[d].begin(), s.slab_min[d].end(), q.x[d]) -
            s.slab_min[d].begin() - 1;
    if (iq[d] < 0) return zero();
  }
  std::int64_t cy = (s.active[1] ? static_cast<std::int64_t>(s.child[1].size()) : 1) + 1;
  std::int64_t cz = (s.active[2] ? static_cast<std::int64_t>(s.child[2].size()) : 1) + 1;
  PackedFrequencyVector res = s.corner[(iq[0] * cy + iq[1]) * cz + iq[2]];
  Point qr = q;  // earlier active dims restricted below their slab
  bool nonempty = true;
  for (int d = 0; d < 3 && nonempty; ++d) {
    if (!s.active[d]) continue;
    res = add(res, query_grid_type2(*s.child[d][iq[d]], qr));
    if (iq[d] == 0)
      nonempty = false;  // no point lies strictly below slab 0
    else
      qr.x[d] = std::nextafter(s.slab_min[d][iq[d]], -kInf);
  }
  return res;
}

}  // namespace rs
