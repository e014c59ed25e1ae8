#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "rs/common.hpp"
#include "rs/geometry.hpp"
#include "rs/kdtree.hpp"
#include "rs/sampling.hpp"

namespace rs {

// One cell of a shallow cutting. Halfspace families: a vertical prism unbounded
// below, the region under `ceiling` over a column region (3D: the columns where
// `base` attains the minimum over the level's base planes; 2D: the x-interval
// [x_lo, x_hi)). Dominance families: everything dominated by `corner`.
struct ShallowCuttingCell {
  Hyperplane base;
  Hyperplane ceiling;
  double x_lo = -kInf, x_hi = kInf;  // column strip (3D: within the query box)
  double y_lo = -kInf, y_hi = kInf;  // 3D query box bounds
  Point corner;
  std::vector<int> conflict;
  std::int64_t level_k = 0;
};

struct CuttingLevel {
  std::int64_t k = 0;
  std::vector<ShallowCuttingCell> cells;
};

struct CuttingHierarchy {
  Family family = Family::kDominance3D;
  int n = 0;
  std::vector<CuttingLevel> levels;  // ascending k
};

struct LocateResult {
  int level = -1;
  int cell = -1;
  bool top = true;
};

namespace detail {

inline double next_below(double v) { return std::nextafter(v, -kInf); }

// ------------------------- dominance staircases -------------------------
//
// Corners are built exactly (no sampling): a greedy staircase walk covers every
// query of 2D-level <= k2 with corners dominating <= kcre points, consuming a
// disjoint z-window of points per corner. The 3D build sweeps x-slabs, keeps
// the 2D corner set alive across slabs, and emits a corner with the slab
// boundary as its x-coordinate when it dies (its point count outgrows kdie).

struct DomCorner {
  double cy = kInf, cz = kInf;
  std::int64_t dom = 0;
};

// covers {q <= (c.cy, c.cz) : 2D-level <= k2} given what `alive` and `fresh`
// already cover; new corners (dom <= kcre) are appended to `fresh`.
// R holds the (y, z) pairs of current points inside the dead corner's box.
inline void staircase_recover(const DomCorner& c, std::int64_t k2, std::int64_t kcre,
                              const std::vector<std::array<double, 2>>& R,
                              const std::vector<DomCorner>& alive,
                              std::vector<DomCorner>& fresh) {
  double zcur = -kInf;
  std::vector<double> tmp;
  while (zcur < c.cz) {
    // largest y whose (k2+1)-th smallest z among {p.y <= y} exceeds zcur
    tmp.clear();
    for (const auto& p : R)
      if (p[1] <= zcur) tmp.push_back(p[0]);
    double Y;
    if (static_cast<std::int64_t>(tmp.size()) <= k2) {
      Y = c.cy;
    } else {
      std::nth_element(tmp.begin(), tmp.begin() + k2, tmp.end());
      Y = next_below(tmp[k2]);
    }
    // corner height: (kcre+1)-th smallest z among {p.y <= Y}, capped at c.cz
    tmp.clear();
    for (const auto& p : R)
      if (p[0] <= Y) tmp.push_back(p[1]);
    double f;
    if (static_cast<std::int64_t>(tmp.size()) <= kcre) {
      f = c.cz;
    } else {
      std::nth_element(tmp.begin(), tmp.begin() + kcre, tmp.end());
      f = std::min(c.cz, next_below(tmp[kcre]));
    }
    if (!(f > zcur)) throw integrity_error("staircase walk stalled");
    // an existing corner may already cover at least as much
    double best = -kInf;
    {
      // alive is sorted by cy descending with cz ascending; the last corner
      // with cy >= Y has the largest cz among them
      int lo = 0, hi = static_cast<int>(alive.size()) - 1, pos = -1;
      while (lo <= hi) {
        int mid = (lo + hi) / 2;
        if (alive[mid].cy >= Y) {
          pos = mid;
          lo = mid + 1;
        } else {
          hi = mid - 1;
        }
      }
      if (pos >= 0) best = alive[pos].cz;
      for (const auto& g : fresh)
        if (g.cy >= Y) best = std::max(best, g.cz);
    }
    if (best >= f) {
      zcur = best;
      continue;
    }
    DomCorner nc;
    nc.cy = Y;
    nc.cz = f;
    nc.dom = 0;
    for (const auto& p : R)
      if (p[0] <= Y && p[1] <= f) ++nc.dom;
    if (nc.dom > kcre) throw integrity_error("staircase corner overfull");
    fresh.push_back(nc);
    zcur = f;
  }
}

// antichain merge: sort by cy desc (ties cz desc), keep strictly rising cz
inline void staircase_prune(std::vector<DomCorner>& v) {
  std::sort(v.begin(), v.end(), [](const DomCorner& a, const DomCorner& b) {
    if (a.cy != b.cy) return a.cy > b.cy;
    return a.cz > b.cz;
  });
  std::vector<DomCorner> out;
  double best = -kInf;
  for (const auto& c : v)
    if (c.cz > best) {
      out.push_back(c);
      best = c.cz;
    }
  v.swap(out);
}

// Exact staircase cover of the (<=k)-level. dim 2 maps (x0, x1) onto the
// (y, z) walk; dim 3 sweeps x0. Returns corner points only; conflict lists
// are filled in by the caller.
inline std::vector<Point> dominance_staircase(const std::vector<Point>& P, int dim,
                                              std::int64_t k) {
  std::int64_t n = static_cast<std::int64_t>(P.size());
  const std::int64_t kcre = 4 * k, kdie = 6 * k;
  int ydim = dim - 2, zdim = dim - 1;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (dim == 3)
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return lex_less(P[a].x[0], P[a].id, P[b].x[0], P[b].id);
    });

  std::vector<DomCorner> alive(1);  // (inf, inf), dom 0
  std::vector<std::int64_t> diff(alive.size() + 1, 0);
  std::vector<std::array<double, 2>> active;
  active.reserve(n);
  std::vector<Point> out;
  auto emit = [&](const DomCorner& c, double bx) {
    if (bx == -kInf) return;  // never covered any query column
    Point pt;
    pt.dim = dim;
    pt.id = static_cast<std::int64_t>(out.size());
    if (dim == 3) {
      pt.x = {bx, c.cy, c.cz, 0};
    } else {
      pt.x = {c.cy, c.cz, 0, 0};
    }
    out.push_back(pt);
  };

  std::int64_t g = std::max<std::int64_t>(1, k / 2);
  std::int64_t pos = 0;
  // 2D has no sweep axis: dead corners are fully replaced and never emitted
  double prev_b = -kInf;
  while (pos < n) {
    std::int64_t e = dim == 3 ? std::min(n, pos + g) : n;
    if (dim == 3)  // extend over x-ties so inserted prefixes are value-closed
      while (e < n && P[order[e]].x[0] == P[order[e - 1]].x[0]) ++e;
    std::int64_t slab = e - pos;
    if (dim == 3 && slab > 2 * k)
      throw construction_error("dominance cutting: slab of tied x-values exceeds 2k");
    std::int64_t k2 = dim == 3 ? k + slab : k;

    for (std::int64_t i = pos; i < e; ++i) {
      const Point& p = P[order[i]];
      double py = p.x[ydim], pz = p.x[zdim];
      active.push_back({py, pz});
      // corners dominating p form a contiguous run: cy >= py among the cy-desc
      // order, then cz >= pz is a suffix of that prefix
      int lo = 0, hi = static_cast<int>(alive.size());
      while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (alive[mid].cy >= py)
          lo = mid + 1;
        else
          hi = mid;
      }
      int pref = lo;  // alive[0..pref) have cy >= py
      lo = 0;
      hi = pref;
      while (lo < hi) {
        int mid = (lo + hi) / 2;
        if (alive[mid].cz >= pz)
          hi = mid;
        else
          lo = mid + 1;
      }
      ++diff[lo];
      --diff[pref];
    }

    std::int64_t run = 0;
    std::vector<DomCorner> dead;
    std::vector<DomCorner> kept;
    for (size_t i = 0; i < alive.size(); ++i) {
      run += diff[i];
      alive[i].dom += run;
      if (alive[i].dom > kdie)
        dead.push_back(alive[i]);
      else
        kept.push_back(alive[i]);
    }
    alive.swap(kept);

    std::vector<DomCorner> fresh;
    for (const auto& c : dead) {
      emit(c, prev_b);
      std::vector<std::array<double, 2>> R;
      for (const auto& p : active)
        if (p[0] <= c.cy && p[1] <= c.cz) R.push_back(p);
      staircase_recover(c, k2, kcre, R, alive, fresh);
    }
    if (!fresh.empty()) {
      for (auto& c : fresh) alive.push_back(c);
      staircase_prune(alive);
    }
    diff.assign(alive.size() + 1, 0);

    if (dim == 3) prev_b = P[order[e - 1]].x[0];
    pos = e;
  }
  for (const auto& c : alive) emit(c, kInf);
  return out;
}

// ------------------------- halfspace envelopes -------------------------

using Poly = std::vector<std::array<double, 2>>;

// keep {(x, y) : e x + f y + g <= 0}
inline Poly clip_halfplane(const Poly& poly, double e, double f, double g) {
  Poly out;
  int m = static_cast<int>(poly.size());
  for (int i = 0; i < m; ++i) {
    const auto& A = poly[i];
    const auto& B = poly[(i + 1) % m];
    double va = e * A[0] + f * A[1] + g, vb = e * B[0] + f * B[1] + g;
    if (va <= 0) out.push_back(A);
    if ((va < 0 && vb > 0) || (va > 0 && vb < 0)) {
      double t = va / (va - vb);
      out.push_back({A[0] + t * (B[0] - A[0]), A[1] + t * (B[1] - A[1])});
    }
  }
  return out;
}

// clip box for planar cuttings; modest size keeps clipping roundoff far below
// the crossing margins of any line that genuinely enters a cell
constexpr double kEnvelopeBox = 1e4;

// One build attempt for the 3D dual form: envelope cells of a sample, ceilings
// raised until probed columns have >= 2k planes at or below them (the caller
// handles n <= 2k with a single whole-space cell). Columns are confined to a
// moderate box so conflict tests stay exact over each cell polygon; queries
// outside the box fall through to a coarser level of the hierarchy. Cells
// whose conflict list overflows are split into narrower column strips.
inline bool build_halfspace3_attempt(const std::vector<Hyperplane>& H, std::int64_t k,
                                     int r, const Config& cfg, Rng& rng,
                                     std::vector<ShallowCuttingCell>& out) {
  int n = static_cast<int>(H.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < r; ++i) {
    std::int64_t j = rng.uniform_int(i, n - 1);
    std::swap(idx[i], idx[j]);
  }
  double maxslope = 0;
  for (const auto& h : H) maxslope = std::max({maxslope, std::fabs(h.a[0]), std::fabs(h.a[1])});
  const double M = 8.0 * (maxslope + 1.0);
  const std::int64_t need = 2 * k;
  const std::int64_t cap = static_cast<std::int64_t>(cfg.c_cl * static_cast<double>(k));
  const double szcap =
      std::max(cfg.c_sz * static_cast<double>(n) / static_cast<double>(k), 1.0);

  out.clear();
  std::vector<double> diffs(n);
  struct Piece {
    Poly poly;
    double xl, xr, yl, yh;
  };
  for (int ii = 0; ii < r; ++ii) {
    const Hyperplane& hi = H[idx[ii]];
    Poly poly = {{-M, -M}, {M, -M}, {M, M}, {-M, M}};
    for (int jj = 0; jj < r && poly.size() >= 3; ++jj) {
      if (jj == ii) continue;
      const Hyperplane& hj = H[idx[jj]];
      poly = clip_halfplane(poly, hi.a[0] - hj.a[0], hi.a[1] - hj.a[1], hi.a[2] - hj.a[2]);
    }
    if (poly.size() < 3) continue;

    std::vector<Piece> stack;
    stack.push_back({std::move(poly), -M, M, -M, M});
    while (!stack.empty()) {
      Piece pc = std::move(stack.back());
      stack.pop_back();
      double cx = 0, cy = 0;
      for (const auto& v : pc.poly) {
        cx += v[0];
        cy += v[1];
      }
      cx /= pc.poly.size();
      cy /= pc.poly.size();
      double delta = 0;
      auto probe = [&](double px, double py) {
        double base = hi.eval_xy(px, py);
        for (int j = 0; j < n; ++j) diffs[j] = H[j].eval_xy(px, py) - base;
        std::nth_element(diffs.begin(), diffs.begin() + (need - 1), diffs.end());
        delta = std::max(delta, diffs[need - 1]);
      };
      probe(cx, cy);
      int m = static_cast<int>(pc.poly.size());
      for (int vi = 0; vi < m; ++vi) {
        const auto& a = pc.poly[vi];
        const auto& b = pc.poly[(vi + 1) % m];
        probe(a[0], a[1]);
        probe(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]));
        probe(0.5 * (a[0] + cx), 0.5 * (a[1] + cy));
      }
      delta = std::max(delta, 0.0);

      ShallowCuttingCell cell;
      cell.level_k = k;
      cell.base = hi;
      cell.ceiling = hi;
      cell.ceiling.a[2] = hi.a[2] + delta;
      cell.x_lo = pc.xl;
      cell.x_hi = pc.xr;
      cell.y_lo = pc.yl;
      cell.y_hi = pc.yh;
      for (int j = 0; j < n; ++j) {
        double mn = kInf;
        for (const auto& v : pc.poly)
          mn = std::min(mn, H[j].eval_xy(v[0], v[1]) - hi.eval_xy(v[0], v[1]));
        if (mn <= delta) cell.conflict.push_back(j);
      }
      if (static_cast<std::int64_t>(cell.conflict.size()) <= cap) {
        out.push_back(std::move(cell));
        if (static_cast<double>(out.size()) > szcap) return false;
        continue;
      }
      // conflict too wide: split the column box on its longer axis
      if (std::max(pc.xr - pc.xl, pc.yh - pc.yl) < 1e-6 * M) return false;
      bool on_x = pc.xr - pc.xl >= pc.yh - pc.yl;
      Poly left, right;
      Piece a, b;
      if (on_x) {
        double mid = 0.5 * (pc.xl + pc.xr);
        left = clip_halfplane(pc.poly, 1.0, 0.0, -mid);
        right = clip_halfplane(pc.poly, -1.0, 0.0, mid);
        a = {std::move(left), pc.xl, mid, pc.yl, pc.yh};
        b = {std::move(right), mid, pc.xr, pc.yl, pc.yh};
      } else {
        double mid = 0.5 * (pc.yl + pc.yh);
        left = clip_halfplane(pc.poly, 0.0, 1.0, -mid);
        right = clip_halfplane(pc.poly, 0.0, -1.0, mid);
        a = {std::move(left), pc.xl, pc.xr, pc.yl, mid};
        b = {std::move(right), pc.xl, pc.xr, mid, pc.yh};
      }
      if (a.poly.size() >= 3) stack.push_back(std::move(a));
      if (b.poly.size() >= 3) stack.push_back(std::move(b));
    }
  }
  return !out.empty();
}

inline double line_isect(const Hyperplane& a, const Hyperplane& b) {
  return (b.a[1] - a.a[1]) / (a.a[0] - b.a[0]);
}

// 2D dual form: lower envelope of sampled lines gives the columns; ceilings
// are (possibly slope-replaced for the unbounded end cells) lines raised until
// the exact minimum depth over every column reaches min(k+1, n).
inline bool build_halfplane2_attempt(const std::vector<Hyperplane>& H, std::int64_t k,
                                     int r, const Config& cfg, Rng& rng,
                                     std::vector<ShallowCuttingCell>& out) {
  int n = static_cast<int>(H.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < r; ++i) {
    std::int64_t j = rng.uniform_int(i, n - 1);
    std::swap(idx[i], idx[j]);
  }
  std::vector<int> samp(idx.begin(), idx.begin() + r);
  // slope descending, ties by intercept then id; duplicates of a slope beyond
  // the lowest line never touch the envelope
  std::sort(samp.begin(), samp.end(), [&](int a, int b) {
    if (H[a].a[0] != H[b].a[0]) return H[a].a[0] > H[b].a[0];
    if (H[a].a[1] != H[b].a[1]) return H[a].a[1] < H[b].a[1];
    return H[a].id < H[b].id;
  });
  std::vector<int> st;
  std::vector<double> bx;
  for (int li : samp) {
    if (!st.empty() && H[st.back()].a[0] == H[li].a[0]) continue;
    while (true) {
      if (st.empty()) {
        st.push_back(li);
        bx.push_back(-kInf);
        break;
      }
      double x = line_isect(H[st.back()], H[li]);
      if (x <= bx.back()) {
        st.pop_back();
        bx.pop_back();
        continue;
      }
      st.push_back(li);
      bx.push_back(x);
      break;
    }
  }

  // input lines by slope for the unbounded-end ceiling ranks
  std::vector<int> byslope(n);
  std::iota(byslope.begin(), byslope.end(), 0);
  std::sort(byslope.begin(), byslope.end(), [&](int a, int b) {
    if (H[a].a[0] != H[b].a[0]) return H[a].a[0] > H[b].a[0];
    return H[a].id < H[b].id;
  });

  const std::int64_t cap = static_cast<std::int64_t>(cfg.c_cl * static_cast<double>(k));
  const std::int64_t want = std::min<std::int64_t>(k + 1, n);
  auto eval2 = [&](const Hyperplane& h, double x) { return h.a[0] * x + h.a[1]; };

  out.clear();
  std::vector<double> vals(n);
  // try one cell over [xl, xr): 0 = emitted, 1 = conflict overflow (split the
  // interval and retry), 2 = unfixable
  auto try_cell = [&](int ci, double xl, double xr) -> int {
    ShallowCuttingCell cell;
    cell.level_k = k;
    cell.x_lo = xl;
    cell.x_hi = xr;
    cell.base = H[st[ci]];

    Hyperplane ceil;
    if (xl == -kInf && xr == kInf) {
      ceil = H[byslope[k]];  // (k+1)-th largest slope: k+1 below at both ends
    } else if (xl == -kInf) {
      ceil = H[byslope[2 * k]];
    } else if (xr == kInf) {
      ceil = H[byslope[n - 1 - 2 * k]];
    } else {
      ceil = H[st[ci]];
    }
    ceil.dim = 2;
    // intercept: meet the depth-2k requirement at finite endpoints
    for (double x0 : {xl, xr}) {
      if (x0 == -kInf || x0 == kInf) continue;
      for (int j = 0; j < n; ++j) vals[j] = eval2(H[j], x0);
      std::int64_t t = std::min<std::int64_t>(2 * k, n) - 1;
      std::nth_element(vals.begin(), vals.begin() + t, vals.end());
      ceil.a[1] = std::max(ceil.a[1], vals[t] - ceil.a[0] * x0);
    }

    // exact minimum depth over the column interval, raising the intercept
    // until it reaches `want`. Depth is constant on the open segments between
    // crossing columns, so the minimum is measured per segment and a deficient
    // segment's midpoint serves as the raise witness.
    bool ok = false;
    for (int iter = 0; iter < 200; ++iter) {
      double cs = ceil.a[0], cc = ceil.a[1];
      std::vector<std::pair<double, int>> ev;  // (x, +1 enter / -1 leave)
      for (int j = 0; j < n; ++j) {
        if (H[j].a[0] == cs) continue;
        double x = (cc - H[j].a[1]) / (H[j].a[0] - cs);
        if (x > xl && x < xr) ev.push_back({x, H[j].a[0] < cs ? 1 : -1});
      }
      std::sort(ev.begin(), ev.end());
      std::int64_t depth = 0;
      if (xl == -kInf) {
        for (int j = 0; j < n; ++j)
          if (H[j].a[0] > cs || (H[j].a[0] == cs && H[j].a[1] <= cc)) ++depth;
      } else {
        // depth on the open segment just after xl: ties on the ceiling at xl
        // count only when the line stays below to the right
        for (int j = 0; j < n; ++j) {
          double rl = eval2(H[j], xl) - eval2(ceil, xl);
          if (rl < 0 || (rl == 0 && H[j].a[0] <= cs)) ++depth;
        }
      }
      std::int64_t mind = depth, cur = depth;
      double minx;
      {
        double seg_end = !ev.empty() ? ev[0].first : (xr != kInf ? xr : xl + 1.0);
        minx = xl == -kInf ? -kInf : 0.5 * (xl + seg_end);
      }
      for (size_t i = 0; i < ev.size();) {
        size_t j = i;
        while (j < ev.size() && ev[j].first == ev[i].first) {
          cur += ev[j].second;
          ++j;
        }
        double nxt = j < ev.size() ? ev[j].first : (xr != kInf ? xr : ev[i].first + 1.0);
        if (cur < mind) {
          mind = cur;
          minx = 0.5 * (ev[i].first + nxt);
        }
        i = j;
      }
      if (mind >= want) {
        ok = true;
        break;
      }
      if (minx == -kInf) return 2;  // slope ranks insufficient at the ends
      for (int j = 0; j < n; ++j) vals[j] = eval2(H[j], minx) - eval2(ceil, minx);
      std::nth_element(vals.begin(), vals.begin() + (want - 1), vals.end());
      if (vals[want - 1] <= 0) return 2;
      ceil.a[1] += vals[want - 1];
    }
    if (!ok) return 2;

    // a line dips under the ceiling on [xl, xr] iff it does at an endpoint
    // (their difference is linear in x)
    for (int j = 0; j < n; ++j) {
      bool below = false;
      double cs = ceil.a[0], cc = ceil.a[1];
      if (xl != -kInf && eval2(H[j], xl) <= eval2(ceil, xl)) below = true;
      if (xr != kInf && eval2(H[j], xr) <= eval2(ceil, xr)) below = true;
      if (xl == -kInf && (H[j].a[0] > cs || (H[j].a[0] == cs && H[j].a[1] <= cc)))
        below = true;
      if (xr == kInf && (H[j].a[0] < cs || (H[j].a[0] == cs && H[j].a[1] <= cc)))
        below = true;
      if (below) cell.conflict.push_back(j);
    }
    if (static_cast<std::int64_t>(cell.conflict.size()) > cap) return 1;
    cell.ceiling = ceil;
    out.push_back(std::move(cell));
    return 0;
  };

  // wide envelope cells can see more than c_cl * k lines pass below their
  // ceiling; split such intervals until each piece certifies
  std::function<bool(int, double, double, int)> emit = [&](int ci, double xl, double xr,
                                                           int depth) -> bool {
    int rc = try_cell(ci, xl, xr);
    if (rc == 0) return true;
    if (rc == 2 || depth > 60) return false;
    double mid;
    if (xl == -kInf && xr == kInf) {
      mid = 0;
    } else if (xl == -kInf) {
      mid = xr - std::max(1.0, std::fabs(xr));
    } else if (xr == kInf) {
      mid = xl + std::max(1.0, std::fabs(xl));
    } else {
      mid = 0.5 * (xl + xr);
      if (!(mid > xl && mid < xr)) return false;
    }
    return emit(ci, xl, mid, depth + 1) && emit(ci, mid, xr, depth + 1);
  };

  int cells = static_cast<int>(st.size());
  for (int ci = 0; ci < cells; ++ci)
    if (!emit(ci, bx[ci], ci + 1 < cells ? bx[ci + 1] : kInf, 0)) return false;
  return !out.empty();
}

}  // namespace detail

inline std::vector<ShallowCuttingCell> build_shallow_cutting(
    const std::vector<Hyperplane>& H, std::int64_t k, Family family,
    const Config& cfg = Config(), std::uint64_t seed = 1) {
  if (family != Family::kHalfplane2D && family != Family::kHalfspace3D)
    throw input_error("build_shallow_cutting: hyperplane input needs a halfspace family");
  int n = static_cast<int>(H.size());
  if (n == 0) throw input_error("build_shallow_cutting: empty input");
  if (k < 1 || k > n) throw input_error("build_shallow_cutting: need 1 <= k <= n");
  if (n <= 2 * k) {
    // one whole-space cell with an infinite ceiling covers every query
    ShallowCuttingCell cell;
    cell.level_k = k;
    cell.base = H[0];
    cell.ceiling = H[0];
    cell.ceiling.a = {0, 0, 0, 0};
    cell.ceiling.a[family == Family::kHalfplane2D ? 1 : 2] = kInf;
    cell.conflict.resize(n);
    std::iota(cell.conflict.begin(), cell.conflict.end(), 0);
    return {cell};
  }
  int cap = std::max(1, static_cast<int>(cfg.c_sz * static_cast<double>(n) /
                                         static_cast<double>(k)));
  cap = std::min(cap, n);
  int r = static_cast<int>(std::ceil(cfg.sample_factor * static_cast<double>(n) /
                                     static_cast<double>(k)));
  r = std::clamp(r, 1, cap);
  std::vector<ShallowCuttingCell> out;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    Rng rng(seed + 1000003ull * static_cast<std::uint64_t>(attempt));
    if (attempt > 0) r = std::min(cap, std::max(r + 1, static_cast<int>(r * 1.5)));
    bool ok = family == Family::kHalfspace3D
                  ? detail::build_halfspace3_attempt(H, k, r, cfg, rng, out)
                  : detail::build_halfplane2_attempt(H, k, r, cfg, rng, out);
    if (ok && static_cast<double>(out.size()) <=
                  std::max(cfg.c_sz * static_cast<double>(n) / static_cast<double>(k), 1.0))
      return out;
  }
  throw construction_error("build_shallow_cutting: certification failed after retries");
}

inline std::vector<ShallowCuttingCell> build_shallow_cutting(
    const std::vector<Point>& P, std::int64_t k, Family family,
    const Config& cfg = Config(), std::uint64_t /*seed*/ = 1) {
  if (!family_is_dominance(family) || family == Family::kDominance4D)
    throw input_error("build_shallow_cutting: point input needs a 2D/3D dominance family");
  int n = static_cast<int>(P.size());
  if (n == 0) throw input_error("build_shallow_cutting: empty input");
  if (k < 1 || k > n) throw input_error("build_shallow_cutting: need 1 <= k <= n");
  int dim = family_dim(family);
  auto corners = detail::dominance_staircase(P, dim, k);

  KdTree tree(P);
  std::vector<ShallowCuttingCell> out;
  std::int64_t cap = static_cast<std::int64_t>(cfg.c_cl * static_cast<double>(k));
  for (const auto& c : corners) {
    ShallowCuttingCell cell;
    cell.level_k = k;
    cell.corner = c;
    tree.report(Range::dominance(c), cell.conflict);
    std::sort(cell.conflict.begin(), cell.conflict.end());
    if (static_cast<std::int64_t>(cell.conflict.size()) > cap)
      throw construction_error("dominance cutting: conflict list exceeds c_cl * k");
    out.push_back(std::move(cell));
  }
  if (static_cast<double>(out.size()) >
      std::max(cfg.c_sz * static_cast<double>(n) / static_cast<double>(k), 1.0))
    throw construction_error("dominance cutting: cell count exceeds c_sz * n / k");
  return out;
}

// cell of this level containing q, or -1. Tie-break: smallest cell index.
inline int locate_in_level(const CuttingLevel& lv, Family family, const Point& q) {
  switch (family) {
    case Family::kDominance2D:
    case Family::kDominance3D:
    case Family::kDominance4D:
      for (size_t i = 0; i < lv.cells.size(); ++i)
        if (contains(Range::dominance(lv.cells[i].corner), q)) return static_cast<int>(i);
      return -1;
    case Family::kHalfplane2D: {
      // cells partition the x-axis in order
      int lo = 0, hi = static_cast<int>(lv.cells.size()) - 1, pos = -1;
      while (lo <= hi) {
        int mid = (lo + hi) / 2;
        if (lv.cells[mid].x_lo <= q.x[0] || lv.cells[mid].x_lo == -kInf) {
          pos = mid;
          lo = mid + 1;
        } else {
          hi = mid - 1;
        }
      }
      if (pos < 0) return -1;
      const auto& c = lv.cells[pos];
      double ceil = c.ceiling.a[0] * q.x[0] + c.ceiling.a[1];
      return q.x[1] <= ceil ? pos : -1;
    }
    case Family::kHalfspace3D: {
      // cell of the base plane minimal at the column whose strip holds it
      double bv = kInf;
      for (const auto& c : lv.cells) bv = std::min(bv, c.base.eval_xy(q.x[0], q.x[1]));
      if (bv == kInf) return -1;
      for (size_t i = 0; i < lv.cells.size(); ++i) {
        const auto& c = lv.cells[i];
        if (c.base.eval_xy(q.x[0], q.x[1]) != bv) continue;
        if (q.x[0] < c.x_lo || q.x[0] > c.x_hi) continue;
        if (q.x[1] < c.y_lo || q.x[1] > c.y_hi) continue;
        if (q.x[2] <= c.ceiling.eval_xy(q.x[0], q.x[1])) return static_cast<int>(i);
      }
      return -1;
    }
  }
  return -1;
}

inline LocateResult locate(const CuttingHierarchy& h, const Point& q) {
  for (size_t i = 0; i < h.levels.size(); ++i) {
    int c = locate_in_level(h.levels[i], h.family, q);
    if (c >= 0) return {static_cast<int>(i), c, false};
  }
  return {static_cast<int>(h.levels.size()), -1, true};
}

namespace detail {

inline std::vector<std::int64_t> hierarchy_ladder(std::int64_t n, std::int64_t k0,
                                                  double ratio, bool include_top) {
  if (ratio <= 1.0) throw input_error("hierarchy ratio must exceed 1");
  std::vector<std::int64_t> ks;
  std::int64_t k = std::clamp<std::int64_t>(k0, 1, n);
  while (k < n) {
    ks.push_back(k);
    k = std::max(k + 1, static_cast<std::int64_t>(std::llround(k * ratio)));
  }
  if (include_top || ks.empty()) ks.push_back(n);
  return ks;
}

}  // namespace detail

inline CuttingHierarchy build_hierarchy(const std::vector<Hyperplane>& H, Family family,
                                        std::int64_t k0, double ratio,
                                        const Config& cfg = Config(),
                                        std::uint64_t seed = 1, bool include_top = true) {
  CuttingHierarchy h;
  h.family = family;
  h.n = static_cast<int>(H.size());
  for (std::int64_t k : detail::hierarchy_ladder(h.n, k0, ratio, include_top))
    h.levels.push_back({k, build_shallow_cutting(H, k, family, cfg, seed + k)});
  return h;
}

inline CuttingHierarchy build_hierarchy(const std::vector<Point>& P, Family family,
                                        std::int64_t k0, double ratio,
                                        const Config& cfg = Config(),
                                        std::uint64_t seed = 1, bool include_top = true) {
  CuttingHierarchy h;
  h.family = family;
  h.n = static_cast<int>(P.size());
  for (std::int64_t k : detail::hierarchy_ladder(h.n, k0, ratio, include_top))
    h.levels.push_back({k, build_shallow_cutting(P, k, family, cfg, seed + k)});
  return h;
}

// ------------------------- 2D (1/r)-cuttings -------------------------

struct CuttingCell2D {
  detail::Poly verts;         // convex, ccw, clipped to a large box
  std::vector<int> conflict;  // lines crossing the cell
};

namespace detail {

inline bool line_crosses_poly(const Hyperplane& h, const Poly& poly) {
  double mn = kInf, mx = -kInf;
  for (const auto& v : poly) {
    double s = h.a[0] * v[0] + h.a[1] - v[1];  // line minus point height
    mn = std::min(mn, s);
    mx = std::max(mx, s);
  }
  return mn < 0 && mx > 0;  // strictly crossing the open cell
}

}  // namespace detail

// Recursive split by conflict lines until every cell is crossed by <= n/r
// lines. Disjoint interiors, union covers the clip box.
inline std::vector<CuttingCell2D> build_cutting(const std::vector<Hyperplane>& H, double r,
                                                const Config& cfg = Config(),
                                                std::uint64_t seed = 1) {
  if (r < 1) throw input_error("build_cutting: r must be >= 1");
  int n = static_cast<int>(H.size());
  std::int64_t target = std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                                      std::floor(n / r)));
  double limit = std::max(cfg.c_sz * r * r, 1.0);
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    Rng rng(seed + 7919ull * static_cast<std::uint64_t>(attempt));
    double M = detail::kEnvelopeBox;
    std::vector<CuttingCell2D> done, work;
    CuttingCell2D root;
    root.verts = {{-M, -M}, {M, -M}, {M, M}, {-M, M}};
    root.conflict.resize(n);
    std::iota(root.conflict.begin(), root.conflict.end(), 0);
    work.push_back(std::move(root));
    bool failed = false;
    while (!work.empty()) {
      CuttingCell2D cell = std::move(work.back());
      work.pop_back();
      if (static_cast<std::int64_t>(cell.conflict.size()) <= target) {
        done.push_back(std::move(cell));
        if (static_cast<double>(done.size()) + work.size() > limit) {
          failed = true;
          break;
        }
        continue;
      }
      int pick = cell.conflict[static_cast<size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(cell.conflict.size()) - 1))];
      const Hyperplane& g = H[pick];
      // below side: y >= ax + b fails ... keep both closed halves
      CuttingCell2D lo, hi;
      lo.verts = detail::clip_halfplane(cell.verts, -g.a[0], 1.0, -g.a[1]);   // y <= ax+b
      hi.verts = detail::clip_halfplane(cell.verts, g.a[0], -1.0, g.a[1]);    // y >= ax+b
      for (auto* child : {&lo, &hi}) {
        if (child->verts.size() < 3) continue;
        for (int j : cell.conflict)
          if (j != pick && detail::line_crosses_poly(H[j], child->verts))
            child->conflict.push_back(j);
        work.push_back(std::move(*child));
      }
      if (static_cast<double>(done.size()) + work.size() > limit) {
        failed = true;
        break;
      }
    }
    if (!failed) return done;
  }
  throw construction_error("build_cutting: size bound failed after retries");
}

// first cell whose closed polygon contains (x, y), or -1
inline int locate_cutting_cell(const std::vector<CuttingCell2D>& cells, double x, double y) {
  for (size_t i = 0; i < cells.size(); ++i) {
    const auto& p = cells[i].verts;
    int m = static_cast<int>(p.size());
    bool in = true;
    for (int j = 0; j < m && in; ++j) {
      const auto& A = p[j];
      const auto& B = p[(j + 1) % m];
      double cr = (B[0] - A[0]) * (y - A[1]) - (B[1] - A[1]) * (x - A[0]);
      double tol = 1e-9 * (std::fabs(B[0] - A[0]) + std::fabs(B[1] - A[1])) *
                   (1.0 + std::fabs(x - A[0]) + std::fabs(y - A[1]));
      if (cr < -tol) in = false;
    }
    if (in) return static_cast<int>(i);
  }
  return -1;
}

// ------------------------- approximate counting -------------------------

// Exact count snapped to the nearest rung of a geometric ladder; the snap
// keeps the answer within a factor of sqrt(ratio) <= 1 + alpha of the truth.
class ApproxCounter {
 public:
  ApproxCounter() = default;
  explicit ApproxCounter(const std::vector<Point>& pts, const Config& cfg = Config())
      : ratio_(cfg.count_ladder_ratio) {
    tree_.build(pts);
  }

  std::int64_t exact(const Range& r) const { return tree_.count(r); }

  std::int64_t approx(const Range& r) const {
    std::int64_t k = tree_.count(r);
    if (k <= 0) return 0;
    double li = std::log(static_cast<double>(k)) / std::log(ratio_);
    std::int64_t best = 1;
    double bd = kInf;
    for (long long i = std::llround(li) - 1; i <= std::llround(li) + 1; ++i) {
      std::int64_t c = std::max<std::int64_t>(1, std::llround(std::pow(ratio_, static_cast<double>(i))));
      double d = std::fabs(std::log(static_cast<double>(c) / static_cast<double>(k)));
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    return best;
  }

 private:
  KdTree tree_;
  double ratio_ = 1.5;
};

inline std::int64_t approx_count(const ApproxCounter& ac, const Range& r) {
  return ac.approx(r);
}

}  // namespace rs
