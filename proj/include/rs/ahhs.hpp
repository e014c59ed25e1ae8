#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "rs/cuttings.hpp"
#include "rs/type2.hpp"

namespace rs {

// ---------------------------------------------------------------------------
// Coarse base summary. Big colors are counted exactly by a type-2 partition
// tree; every other color worth tracking is counted through a per-color random
// sample. Samples of similar accuracy share one power-of-two tier, and each
// tier is a single type-2 tree over the union of its samples. Every per-color
// estimate is within eps * |P| of the truth.
// ---------------------------------------------------------------------------

struct BaseAhhsStructure {
  Family family = Family::kDominance3D;
  double eps = 0;
  std::int64_t n = 0;
  int F = 0;
  std::vector<std::int64_t> color_count;

  std::vector<int> big_global;  // local -> global color id
  std::vector<int> big_local;   // global -> local, -1 when not big
  std::optional<PartitionTreeNode> big_tree;

  struct SmallTier {
    double delta = 0;         // sample accuracy shared by the tier
    std::vector<int> global;  // local -> global
    std::vector<double> scale;  // |P_i| / sample size
    std::int64_t stored = 0;
    PartitionTreeNode tree;
  };
  std::vector<SmallTier> tiers;
  std::vector<int> small_tier_of;  // global -> tier index, -1
  std::vector<int> small_local;    // global -> local id inside its tier, -1
};

namespace detail {

inline int ahhs_palette(const PointSet& P, int dim) {
  int F = 0;
  for (const auto& p : P) {
    if (p.pt.dim != dim) throw input_error("colored point dimension mismatch");
    if (p.color < 0) throw input_error("heavy-hitter structures need colored points");
    F = std::max(F, p.color + 1);
  }
  return F;
}

// first m of a shuffle of idx, left sorted for determinism
inline std::vector<int> draw_sample(std::vector<int> idx, std::int64_t m, Rng& rng) {
  std::int64_t n = static_cast<std::int64_t>(idx.size());
  m = std::min(m, n);
  for (std::int64_t i = 0; i < m; ++i)
    std::swap(idx[i], idx[rng.uniform_int(i, n - 1)]);
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

inline BaseAhhsStructure build_base(const PointSet& P, double eps, Family family,
                                    const Config& cfg = Config(), std::uint64_t seed = 1) {
  if (eps <= 0 || eps >= 1) throw input_error("build_base: need 0 < eps < 1");
  int d = family_dim(family);
  BaseAhhsStructure s;
  s.family = family;
  s.eps = eps;
  s.n = static_cast<std::int64_t>(P.size());
  s.F = detail::ahhs_palette(P, d);
  s.color_count.assign(s.F, 0);
  for (const auto& p : P) ++s.color_count[p.color];
  s.big_local.assign(s.F, -1);
  s.small_tier_of.assign(s.F, -1);
  s.small_local.assign(s.F, -1);
  if (s.n == 0) return s;

  double X = eps * static_cast<double>(s.n);
  double tbig = std::pow(X, 2.0 * d / (d - 1.0));
  Rng rng(seed);

  std::vector<std::vector<int>> by_color(s.F);
  for (size_t i = 0; i < P.size(); ++i) by_color[P[i].color].push_back(static_cast<int>(i));

  // colors below the error budget can be ignored outright: reporting zero for
  // them is already within eps * n
  std::vector<int> level_of(s.F, -1);  // small colors: accuracy exponent
  int max_level = 0;
  PointSet bigpts;
  for (int c = 0; c < s.F; ++c) {
    double cnt = static_cast<double>(s.color_count[c]);
    if (cnt == 0) continue;
    if (cnt >= tbig) {
      s.big_local[c] = static_cast<int>(s.big_global.size());
      s.big_global.push_back(c);
      for (int i : by_color[c]) {
        ColoredWeightedPoint p = P[i];
        p.color = s.big_local[c];
        bigpts.push_back(p);
      }
    } else if (cnt >= X) {
      // accuracy eps_i = X / |P_i|, rounded down to a power of two
      double ei = X / cnt;
      int lev = std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / ei) - 1e-9)));
      lev = std::min(lev, 62);
      level_of[c] = lev;
      max_level = std::max(max_level, lev);
    }
  }
  if (!bigpts.empty())
    s.big_tree = build_partition_type2(bigpts, static_cast<int>(s.big_global.size()),
                                       cfg.w, cfg);

  std::vector<int> tier_of_level(max_level + 1, -1);
  for (int c = 0; c < s.F; ++c) {
    int lev = level_of[c];
    if (lev < 0) continue;
    if (tier_of_level[lev] < 0) {
      tier_of_level[lev] = static_cast<int>(s.tiers.size());
      s.tiers.emplace_back();
      s.tiers.back().delta = std::pow(0.5, lev);
    }
    auto& t = s.tiers[tier_of_level[lev]];
    s.small_tier_of[c] = tier_of_level[lev];
    s.small_local[c] = static_cast<int>(t.global.size());
    t.global.push_back(c);
  }
  for (auto& t : s.tiers) {
    double delta = t.delta;
    std::int64_t m_target = static_cast<std::int64_t>(
        std::ceil(cfg.c0 / (delta * delta) * std::log(4.0 / delta)));
    PointSet tier_pts;
    for (size_t l = 0; l < t.global.size(); ++l) {
      int c = t.global[l];
      auto samp = detail::draw_sample(by_color[c], m_target, rng);
      t.scale.push_back(static_cast<double>(s.color_count[c]) /
                        static_cast<double>(samp.size()));
      for (int i : samp) {
        ColoredWeightedPoint p = P[i];
        p.color = static_cast<int>(l);
        tier_pts.push_back(p);
      }
    }
    t.stored = static_cast<std::int64_t>(tier_pts.size());
    t.tree = build_partition_type2(tier_pts, static_cast<int>(t.global.size()), cfg.w, cfg);
  }
  return s;
}

// per-global-color estimates; untracked colors stay at zero
inline std::vector<double> query_base_all(const BaseAhhsStructure& s, const Range& q) {
  std::vector<double> out(s.F, 0.0);
  if (s.big_tree) {
    auto f = decode(query_partition_type2(*s.big_tree, q));
    for (size_t l = 0; l < f.size(); ++l)
      out[s.big_global[l]] = static_cast<double>(f[l]);
  }
  for (const auto& t : s.tiers) {
    auto f = decode(query_partition_type2(t.tree, q));
    for (size_t l = 0; l < f.size(); ++l)
      out[t.global[l]] = t.scale[l] * static_cast<double>(f[l]);
  }
  return out;
}

// big colors at or above the budget plus every sampled color seen at all;
// a color sitting exactly on the eps * |P| boundary can drop out, anything
// strictly above it cannot
inline std::vector<std::pair<int, double>> query_base(const BaseAhhsStructure& s,
                                                      const Range& q) {
  std::vector<std::pair<int, double>> out;
  if (s.n == 0) return out;
  auto all = query_base_all(s, q);
  double X = s.eps * static_cast<double>(s.n);
  for (int c = 0; c < s.F; ++c) {
    if (s.big_local[c] >= 0 ? all[c] >= X : all[c] > 0) out.emplace_back(c, all[c]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planar base structure for halfplane queries over a candidate color set.
// Frequent colors carry per-color samples in kd-trees; the infrequent rest is
// dualized to lines and cut into triangles, each knowing how many lines of
// every color pass fully below it plus the exact set crossing it. Estimates
// are within eps * |P| per queried color (infrequent colors come out exact).
// ---------------------------------------------------------------------------

struct Base2dStructure {
  double eps = 0;
  std::int64_t n = 0;
  double B = 0;  // eps * n, the error budget
  int fcap = 1;  // supported candidate-set size
  int F = 0;
  std::vector<std::int64_t> color_count;

  std::vector<int> freq_global;
  std::vector<int> freq_local;  // global -> local, -1
  std::vector<double> freq_scale;
  std::vector<std::int64_t> freq_sample;
  std::vector<KdTree> freq_tree;

  // one dual arrangement per query orientation (sign of the y normal)
  struct DualSide {
    std::vector<Hyperplane> lines;
    std::vector<int> line_color;
    std::vector<CuttingCell2D> cells;  // conflict = lines crossing the cell
    std::vector<std::vector<std::pair<int, std::int64_t>>> below;  // sorted by color
  };
  DualSide side[2];
  PointSet pts;  // fallback for degenerate queries and out-of-box dual points
};

inline Base2dStructure build_base2d(const PointSet& P, double eps,
                                    const Config& cfg = Config(), std::uint64_t seed = 1,
                                    int fcap_min = 0) {
  if (eps <= 0 || eps >= 1) throw input_error("build_base2d: need 0 < eps < 1");
  Base2dStructure s;
  s.eps = eps;
  s.n = static_cast<std::int64_t>(P.size());
  s.F = detail::ahhs_palette(P, 2);
  s.B = eps * static_cast<double>(s.n);
  s.color_count.assign(s.F, 0);
  for (const auto& p : P) ++s.color_count[p.color];
  double bq = std::cbrt(std::max(s.B, 1e-12));
  s.fcap = std::max({1, fcap_min, static_cast<int>(1.0 / (eps * bq))});
  s.freq_local.assign(s.F, -1);
  s.pts = P;
  if (s.n == 0) return s;

  Rng rng(seed);
  std::vector<std::vector<int>> by_color(s.F);
  for (size_t i = 0; i < P.size(); ++i) by_color[P[i].color].push_back(static_cast<int>(i));

  double tf = eps * s.B * static_cast<double>(s.n);
  std::vector<int> infreq;
  for (int c = 0; c < s.F; ++c) {
    if (s.color_count[c] == 0) continue;
    if (static_cast<double>(s.color_count[c]) >= tf) {
      double ej = std::min(0.9, s.B / static_cast<double>(s.color_count[c]));
      std::int64_t m = static_cast<std::int64_t>(
          std::ceil(cfg.c0 / (ej * ej) * std::log(4.0 / ej)));
      auto samp = detail::draw_sample(by_color[c], m, rng);
      s.freq_local[c] = static_cast<int>(s.freq_global.size());
      s.freq_global.push_back(c);
      s.freq_scale.push_back(static_cast<double>(s.color_count[c]) /
                             static_cast<double>(samp.size()));
      s.freq_sample.push_back(static_cast<std::int64_t>(samp.size()));
      std::vector<Point> sp;
      for (int i : samp) sp.push_back(P[i].pt);
      s.freq_tree.emplace_back(sp);
    } else {
      for (int i : by_color[c]) infreq.push_back(i);
    }
  }
  if (infreq.empty()) return s;

  std::int64_t ni = static_cast<std::int64_t>(infreq.size());
  double r = std::clamp(eps * bq * static_cast<double>(ni), 1.0,
                        static_cast<double>(ni));
  for (int si = 0; si < 2; ++si) {
    auto& ds = s.side[si];
    for (int i : infreq) {
      Hyperplane h;
      h.dim = 2;
      h.id = static_cast<std::int64_t>(ds.lines.size());
      h.a[0] = P[i].pt.x[0];
      h.a[1] = si == 0 ? P[i].pt.x[1] : -P[i].pt.x[1];
      ds.lines.push_back(h);
      ds.line_color.push_back(P[i].color);
    }
    ds.cells = build_cutting(ds.lines, r, cfg, seed + 17 * si + 1);
    ds.below.resize(ds.cells.size());
    // re-classify every line against every final cell so below / crossing /
    // above is an exact partition (the recursive conflict lists can lose
    // boundary-grazing ancestors to roundoff)
    for (size_t ci = 0; ci < ds.cells.size(); ++ci) {
      auto& cell = ds.cells[ci];
      std::vector<int> crossing;
      std::vector<std::int64_t> cnt(s.F, 0);
      for (size_t j = 0; j < ds.lines.size(); ++j) {
        double mn = kInf, mx = -kInf;
        for (const auto& v : cell.verts) {
          double sv = ds.lines[j].a[0] * v[0] + ds.lines[j].a[1] - v[1];
          mn = std::min(mn, sv);
          mx = std::max(mx, sv);
        }
        if (mx <= 0)
          ++cnt[ds.line_color[j]];
        else if (mn < 0)
          crossing.push_back(static_cast<int>(j));
      }
      cell.conflict = std::move(crossing);
      for (int c = 0; c < s.F; ++c)
        if (cnt[c] > 0) ds.below[ci].emplace_back(c, cnt[c]);
    }
  }
  return s;
}

inline std::vector<std::pair<int, double>> query_base2d(const Base2dStructure& s,
                                                        const Range& q,
                                                        const std::vector<int>& q_c) {
  if (q.kind != Range::kHalfspace || q.dim != 2)
    throw input_error("query_base2d: need a 2D halfplane");
  if (static_cast<int>(q_c.size()) > s.fcap)
    throw input_error("query_base2d: candidate set exceeds the supported size");
  std::vector<std::pair<int, double>> out;
  out.reserve(q_c.size());
  auto exact_color = [&](int c) {
    std::int64_t f = 0;
    for (const auto& p : s.pts)
      if (p.color == c && contains(q, p.pt)) ++f;
    return static_cast<double>(f);
  };
  double ny = q.normal[1];
  if (ny == 0) {  // vertical boundary: dual point at infinity
    for (int c : q_c)
      out.emplace_back(c, (c >= 0 && c < s.F && s.color_count[c] > 0) ? exact_color(c) : 0.0);
    return out;
  }
  int si = ny > 0 ? 0 : 1;
  const auto& ds = s.side[si];
  double m = std::fabs(ny);
  double wx = q.normal[0] / m, wy = q.offset / m;
  int ci = ds.cells.empty() ? -1 : locate_cutting_cell(ds.cells, wx, wy);
  std::vector<std::int64_t> cross_cnt;
  if (ci >= 0) {
    cross_cnt.assign(s.F, 0);
    for (int j : ds.cells[ci].conflict)
      if (ds.lines[j].a[0] * wx + ds.lines[j].a[1] <= wy) ++cross_cnt[ds.line_color[j]];
  }
  for (int c : q_c) {
    if (c < 0 || c >= s.F || s.color_count[c] == 0) {
      out.emplace_back(c, 0.0);
      continue;
    }
    if (s.freq_local[c] >= 0) {
      int l = s.freq_local[c];
      out.emplace_back(c, s.freq_scale[l] * static_cast<double>(s.freq_tree[l].count(q)));
      continue;
    }
    if (ci < 0) {
      out.emplace_back(c, exact_color(c));
      continue;
    }
    std::int64_t f = cross_cnt[c];
    const auto& bl = ds.below[ci];
    auto it = std::lower_bound(bl.begin(), bl.end(), std::make_pair(c, std::int64_t(0)));
    if (it != bl.end() && it->first == c) f += it->second;
    out.emplace_back(c, static_cast<double>(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full heavy-hitter index: a base cutting answered exactly from its conflict
// lists, a ladder of estimation tiers whose cells carry frequent-color
// dictionaries, a doubling ladder of testing tiers whose cells carry candidate
// color lists, and a short geometric ladder of coarser tiers above the
// estimation ladder. Halfspace families keep one tier set per query
// orientation. Every estimation cell shares one index-wide base structure:
// cell error budgets sit below a single point for any feasible eps0, so
// per-cell structures would all be forced exact while their conflict lists
// overlap many times over; one exact-mode base gives the same answers in
// linear space.
// ---------------------------------------------------------------------------

struct AhhsQueryTrace {
  int path = 0;  // 0 exact scan, 1 base cutting, 2 estimation ladder, 3 coarse ladder
  std::int64_t testing_k = 0;
  std::int64_t tier_k = 0;
  std::vector<int> candidates;
};

struct AhhsTier {
  std::int64_t k = 0;
  double ratio = 2.0;    // this rung over its predecessor
  double eps_cell = 0;   // per-cell base accuracy
  double threshold = 0;  // frequent / candidate count threshold
  CuttingLevel level;
  std::vector<std::vector<int>> candidates;  // testing tiers, sorted
  std::vector<std::vector<int>> frequent;    // estimation tiers, sorted
};

struct AhhsOrientation {
  std::vector<Hyperplane> planes;  // halfspace families: index-aligned with pts
  AhhsTier base;
  std::vector<AhhsTier> testing;
  std::vector<AhhsTier> lower;   // estimation ladder
  std::vector<AhhsTier> higher;  // coarse ladder above it
};

struct AhhsIndex {
  Family family = Family::kDominance3D;
  double eps0 = 0;
  int F = 0;
  std::int64_t n = 0;
  bool exact_mode = false;
  std::int64_t k0 = 1;
  int lambda = 0;
  Config cfg;
  PointSet pts;
  ApproxCounter counter;
  // shared estimation structure, orientation-agnostic (queried in the primal)
  std::optional<BaseAhhsStructure> est_base;
  std::optional<Base2dStructure> est_base2d;
  std::vector<AhhsOrientation> ori;  // dominance: one; halfspace: below/above forms
};

namespace detail {

// point p is in the halfspace (last normal coordinate sign fixed per
// orientation) iff its tier plane passes below or through the query's dual
// point, so shallow levels hold exactly the small-answer queries
inline Hyperplane ahhs_tier_plane(const Point& p, bool upper) {
  Hyperplane h;
  h.dim = p.dim;
  h.id = p.id;
  for (int i = 0; i + 1 < p.dim; ++i) h.a[i] = p.x[i];
  h.a[p.dim - 1] = upper ? -p.x[p.dim - 1] : p.x[p.dim - 1];
  return h;
}

inline Point ahhs_tier_query(const Range& q) {
  int d = q.dim;
  double m = std::fabs(q.normal[d - 1]);
  Point w;
  w.dim = d;
  for (int i = 0; i + 1 < d; ++i) w.x[i] = q.normal[i] / m;
  w.x[d - 1] = q.offset / m;
  return w;
}

inline std::vector<std::int64_t> cell_histogram(const PointSet& pts,
                                                const std::vector<int>& conflict, int F) {
  std::vector<std::int64_t> h(F, 0);
  for (int j : conflict) ++h[pts[j].color];
  return h;
}

}  // namespace detail

inline AhhsIndex build_ahhs(const PointSet& P, double eps0, Family family,
                            const Config& cfg = Config(), std::uint64_t seed = 1) {
  if (eps0 <= 0 || eps0 >= 1) throw input_error("build_ahhs: need 0 < eps0 < 1");
  if (family == Family::kDominance4D)
    throw input_error("build_ahhs: unsupported family");
  if (P.empty()) throw input_error("build_ahhs: empty point set");
  int d = family_dim(family);
  bool dom = family_is_dominance(family);
  bool twod = d == 2;

  AhhsIndex idx;
  idx.family = family;
  idx.eps0 = eps0;
  idx.cfg = cfg;
  idx.pts = P;
  idx.n = static_cast<std::int64_t>(P.size());
  idx.F = detail::ahhs_palette(P, d);

  std::vector<Point> ppts;
  ppts.reserve(P.size());
  for (const auto& p : P) ppts.push_back(p.pt);
  idx.counter = ApproxCounter(ppts, cfg);

  idx.k0 = std::min<std::int64_t>(idx.n,
                                  static_cast<std::int64_t>(std::ceil(1.0 / eps0)));
  idx.exact_mode = idx.k0 >= idx.n;  // the base cutting already covers every query

  // rung ladders (all strictly below n except the mandatory top testing /
  // coarse rung at n)
  std::vector<std::int64_t> lower_rungs, testing_rungs, higher_rungs;
  if (!idx.exact_mode) {
    if (twod) {
      // accuracy ladder with 4/3-power exponents, stopped once past eps0^-3
      double cap3 = std::pow(eps0, -3.0);
      std::int64_t prev = idx.k0;
      for (int i = 0; i < 48; ++i) {
        double g = static_cast<double>(idx.k0) *
                   std::pow(cfg.wbeta, std::pow(4.0 / 3.0, i));
        std::int64_t rung = static_cast<std::int64_t>(std::llround(g));
        if (rung >= idx.n) break;
        if (rung > prev) {
          lower_rungs.push_back(rung);
          prev = rung;
        }
        if (g >= cap3) break;
      }
      idx.lambda = static_cast<int>(lower_rungs.size());
    } else {
      double target = family == Family::kHalfspace3D
                          ? std::max(2.0, std::pow(eps0, -0.5))
                          : std::pow(std::log2(std::max(4.0, 1.0 / eps0)), 4.0);
      idx.lambda = std::max(
          1, static_cast<int>(std::ceil(std::log(target) / std::log(cfg.wbeta))));
      std::int64_t rung = idx.k0;
      for (int i = 1; i <= idx.lambda; ++i) {
        rung = static_cast<std::int64_t>(std::llround(rung * cfg.wbeta));
        if (rung >= idx.n) break;
        lower_rungs.push_back(rung);
      }
    }
    for (std::int64_t k = idx.k0 * 2; k < idx.n; k *= 2) testing_rungs.push_back(k);
    testing_rungs.push_back(idx.n);
    // the coarse ladder keeps a fixed rung count so total space stays linear;
    // the per-rung estimation constants absorb the larger ratios
    std::int64_t lm = lower_rungs.empty() ? idx.k0 : lower_rungs.back();
    if (idx.n > 4 * lm) {
      double qr = std::cbrt(static_cast<double>(idx.n) / static_cast<double>(lm));
      std::int64_t r1 = static_cast<std::int64_t>(std::llround(lm * qr));
      std::int64_t r2 = static_cast<std::int64_t>(std::llround(lm * qr * qr));
      if (r1 > lm && r1 < idx.n) higher_rungs.push_back(r1);
      if (r2 > (higher_rungs.empty() ? lm : higher_rungs.back()) && r2 < idx.n)
        higher_rungs.push_back(r2);
    }
    higher_rungs.push_back(idx.n);
  }

  if (!idx.exact_mode) {
    // shared estimation structure: its absolute error stays below the
    // tightest per-cell budget eps0 * k0 / (2 c_eps), which is under one
    // point, so it lands in the exact regime
    double eps_est = std::min(0.5, eps0 * static_cast<double>(idx.k0) /
                                       (2.0 * cfg.c_eps * static_cast<double>(idx.n)));
    int fcap_min = static_cast<int>(std::ceil(cfg.c_cl / (cfg.c1 * eps0)));
    if (family == Family::kHalfplane2D)
      idx.est_base2d = build_base2d(P, eps_est, cfg, seed * 131 + 9, fcap_min);
    else
      idx.est_base = build_base(P, eps_est, family, cfg, seed * 131 + 9);
  }
  int nori = dom ? 1 : 2;
  std::uint64_t s2 = seed;

  for (int o = 0; o < nori; ++o) {
    AhhsOrientation ori;
    if (!dom) {
      ori.planes.reserve(P.size());
      for (size_t i = 0; i < P.size(); ++i) {
        Hyperplane h = detail::ahhs_tier_plane(P[i].pt, o == 1);
        h.id = static_cast<std::int64_t>(i);
        ori.planes.push_back(h);
      }
    }
    auto cut = [&](std::int64_t k) {
      ++s2;
      return dom ? build_shallow_cutting(ppts, k, family, cfg, s2 * 7919)
                 : build_shallow_cutting(ori.planes, k, family, cfg, s2 * 7919);
    };
    ori.base.k = idx.k0;
    ori.base.level.k = idx.k0;
    ori.base.level.cells = cut(idx.k0);

    std::int64_t prev = idx.k0;
    for (std::int64_t k : testing_rungs) {
      AhhsTier t;
      t.k = k;
      t.ratio = static_cast<double>(k) / static_cast<double>(prev);
      t.threshold = cfg.c1 * eps0 * static_cast<double>(k);
      t.level.k = k;
      t.level.cells = cut(k);
      for (auto& cell : t.level.cells) {
        auto h = detail::cell_histogram(P, cell.conflict, idx.F);
        std::vector<int> cand;
        for (int c = 0; c < idx.F; ++c)
          if (static_cast<double>(h[c]) >= t.threshold) cand.push_back(c);
        t.candidates.push_back(std::move(cand));
        cell.conflict.clear();
        cell.conflict.shrink_to_fit();
      }
      ori.testing.push_back(std::move(t));
      // rungs double, so the ratio only shrinks at the final rung
      prev = k;
    }

    auto fill_estimation = [&](AhhsTier& t, bool with_frequent) {
      for (auto& cell : t.level.cells) {
        if (with_frequent) {
          auto h = detail::cell_histogram(P, cell.conflict, idx.F);
          std::vector<int> fr;
          for (int c = 0; c < idx.F; ++c)
            if (static_cast<double>(h[c]) >= t.threshold) fr.push_back(c);
          t.frequent.push_back(std::move(fr));
        }
        cell.conflict.clear();
        cell.conflict.shrink_to_fit();
      }
    };

    prev = idx.k0;
    for (std::int64_t k : lower_rungs) {
      AhhsTier t;
      t.k = k;
      t.ratio = static_cast<double>(k) / static_cast<double>(prev);
      t.threshold = cfg.c1 * eps0 * static_cast<double>(k) / t.ratio;
      t.eps_cell = eps0 / (cfg.c_eps * cfg.c_cl * t.ratio);
      t.level.k = k;
      t.level.cells = cut(k);
      fill_estimation(t, true);
      ori.lower.push_back(std::move(t));
      prev = k;
    }

    prev = lower_rungs.empty() ? idx.k0 : lower_rungs.back();
    for (std::int64_t k : higher_rungs) {
      AhhsTier t;
      t.k = k;
      t.ratio = static_cast<double>(k) / static_cast<double>(prev);
      t.eps_cell = eps0 / (cfg.c_eps * cfg.c_cl * t.ratio);
      t.level.k = k;
      t.level.cells = cut(k);
      fill_estimation(t, false);
      ori.higher.push_back(std::move(t));
      prev = k;
    }

    idx.ori.push_back(std::move(ori));
  }
  return idx;
}

inline std::vector<std::pair<int, double>> query_ahhs(const AhhsIndex& idx, const Range& q,
                                                      AhhsQueryTrace* trace = nullptr) {
  bool dom = family_is_dominance(idx.family);
  int d = family_dim(idx.family);
  if (q.dim != d || q.kind != (dom ? Range::kDominance : Range::kHalfspace))
    throw input_error("query_ahhs: range does not match the index family");
  if (trace) *trace = AhhsQueryTrace{};

  auto report_exact = [&](const std::vector<std::int64_t>& freq, std::int64_t k) {
    std::vector<std::pair<int, double>> out;
    double th = idx.eps0 * static_cast<double>(k);
    for (int c = 0; c < idx.F; ++c)
      if (freq[c] > 0 && static_cast<double>(freq[c]) >= th)
        out.emplace_back(c, static_cast<double>(freq[c]));
    return out;
  };
  auto scan_exact = [&]() {
    std::vector<std::int64_t> freq(idx.F, 0);
    std::int64_t k = 0;
    for (const auto& p : idx.pts)
      if (contains(q, p.pt)) {
        ++k;
        ++freq[p.color];
      }
    return report_exact(freq, k);
  };

  int oi = 0;
  Point w;
  if (dom) {
    w = q.corner;
  } else {
    double nd = q.normal[d - 1];
    if (nd == 0) return scan_exact();  // vertical boundary, no dual point
    oi = nd > 0 ? 0 : 1;
    w = detail::ahhs_tier_query(q);
  }
  const AhhsOrientation& ori = idx.ori[oi];

  std::int64_t kk = std::min<std::int64_t>(idx.n, 2 * idx.counter.approx(q));
  if (kk <= 0) return {};

  if (kk <= idx.k0) {
    int ci = locate_in_level(ori.base.level, idx.family, w);
    if (ci < 0) return scan_exact();  // outside the certified column box
    std::vector<std::int64_t> freq(idx.F, 0);
    std::int64_t k = 0;
    for (int j : ori.base.level.cells[ci].conflict)
      if (contains(q, idx.pts[j].pt)) {
        ++k;
        ++freq[idx.pts[j].color];
      }
    if (trace) trace->path = 1;
    return report_exact(freq, k);
  }

  const AhhsTier* tt = nullptr;
  for (const auto& t : ori.testing)
    if (t.k >= kk) {
      tt = &t;
      break;
    }
  if (!tt) return scan_exact();
  int tc = locate_in_level(tt->level, idx.family, w);
  if (tc < 0) return scan_exact();
  const std::vector<int>& cand = tt->candidates[tc];
  if (trace) {
    trace->testing_k = tt->k;
    trace->candidates = cand;
  }

  bool use_lower = !ori.lower.empty() && kk <= ori.lower.back().k;
  const AhhsTier* et = nullptr;
  for (const auto& t : (use_lower ? ori.lower : ori.higher))
    if (t.k >= kk) {
      et = &t;
      break;
    }
  if (!et) return scan_exact();
  int ec = locate_in_level(et->level, idx.family, w);
  if (ec < 0) return scan_exact();
  if (trace) {
    trace->path = use_lower ? 2 : 3;
    trace->tier_k = et->k;
  }

  std::vector<int> sub;
  if (use_lower) {
    for (int c : cand)
      if (std::binary_search(et->frequent[ec].begin(), et->frequent[ec].end(), c))
        sub.push_back(c);  // skipped colors are below the frequent threshold,
                           // so provably not heavy
  } else {
    sub = cand;
  }
  std::vector<std::pair<int, double>> out;
  if (idx.est_base2d) {
    for (auto& [c, v] : query_base2d(*idx.est_base2d, q, sub))
      out.emplace_back(c, std::max(0.0, v));
  } else {
    auto all = query_base_all(*idx.est_base, q);
    for (int c : sub)
      out.emplace_back(c, std::max(0.0, c < static_cast<int>(all.size()) ? all[c] : 0.0));
  }
  return out;
}

// ------------------------- measured storage -------------------------

inline std::int64_t memory_footprint(const PackedFrequencyVector& v) {
  return static_cast<std::int64_t>(sizeof(v)) + 8 * v.bits.size() +
         4 * v.per_word_counts.size() + 4 * v.field_start.size();
}

inline std::int64_t memory_footprint(const PartitionTreeNode& t) {
  std::int64_t b = sizeof(t) + memory_footprint(t.freq) - sizeof(t.freq);
  b += static_cast<std::int64_t>(t.pts.size()) * sizeof(ColoredWeightedPoint);
  for (const auto& ch : t.children) b += memory_footprint(ch);
  return b;
}

inline std::int64_t memory_footprint(const BaseAhhsStructure& s) {
  std::int64_t b = sizeof(s);
  b += 8 * s.color_count.size();
  b += 4 * (s.big_global.size() + s.big_local.size() + s.small_tier_of.size() +
            s.small_local.size());
  if (s.big_tree) b += memory_footprint(*s.big_tree);
  for (const auto& t : s.tiers) {
    b += sizeof(t) + 4 * t.global.size() + 8 * t.scale.size();
    b += memory_footprint(t.tree);
  }
  return b;
}

inline std::int64_t memory_footprint(const Base2dStructure& s) {
  std::int64_t b = sizeof(s);
  b += 8 * s.color_count.size() + 8 * s.freq_scale.size() + 8 * s.freq_sample.size();
  b += 4 * (s.freq_global.size() + s.freq_local.size());
  for (std::int64_t m : s.freq_sample) b += 64 * m;  // kd-tree: points, ids, nodes
  for (const auto& ds : s.side) {
    b += static_cast<std::int64_t>(ds.lines.size()) * sizeof(Hyperplane);
    b += 4 * ds.line_color.size();
    for (const auto& c : ds.cells)
      b += sizeof(c) + 16 * c.verts.size() + 4 * c.conflict.size();
    for (const auto& bl : ds.below) b += 16 * bl.size();
  }
  b += static_cast<std::int64_t>(s.pts.size()) * sizeof(ColoredWeightedPoint);
  return b;
}

inline std::int64_t memory_footprint(const AhhsTier& t) {
  std::int64_t b = sizeof(t);
  for (const auto& c : t.level.cells) b += sizeof(c) + 4 * c.conflict.size();
  for (const auto& v : t.candidates) b += sizeof(v) + 4 * v.size();
  for (const auto& v : t.frequent) b += sizeof(v) + 4 * v.size();
  return b;
}

inline std::int64_t memory_footprint(const AhhsIndex& idx) {
  std::int64_t b = sizeof(idx);
  b += static_cast<std::int64_t>(idx.pts.size()) * sizeof(ColoredWeightedPoint);
  b += 64 * idx.n;  // counting kd-tree: points, ids, nodes
  if (idx.est_base) b += memory_footprint(*idx.est_base);
  if (idx.est_base2d) b += memory_footprint(*idx.est_base2d);
  for (const auto& o : idx.ori) {
    b += static_cast<std::int64_t>(o.planes.size()) * sizeof(Hyperplane);
    b += memory_footprint(o.base);
    for (const auto& t : o.testing) b += memory_footprint(t);
    for (const auto& t : o.lower) b += memory_footprint(t);
    for (const auto& t : o.higher) b += memory_footprint(t);
  }
  return b;
}

}  // namespace rs
