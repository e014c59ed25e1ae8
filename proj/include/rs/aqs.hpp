#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "rs/ahhs.hpp"
#include "rs/type2.hpp"

namespace rs {

// Approximate quantile summaries over weighted points. A query returns
// 1 + ceil(1/eps0) non-decreasing weights; the i-th lies between the exact
// (i-1)*eps0- and (i+1)*eps0-quantiles of the query subset. Empty subsets
// return an empty vector.
//
// Shared machinery: each cutting cell partitions its conflict list into t
// near-equal weight groups (a "weight group cell"). Group counts inside the
// query give exact ranks for the group minima via a balanced binary tree of
// left-hanging subtree sums; a running scan emits one representative per
// quantile threshold. Answers below 8/eps0 points skip the groups entirely
// and read exact quantiles off a conflict scan.

struct RankedSummary {
  std::vector<double> weights;  // non-decreasing
  std::vector<double> ranks;    // estimated 0-indexed rank of each entry
  std::int64_t k = 0;           // estimated subset size
};

// rank of each group minimum = sum of left-hanging subtree counts on the
// root-to-leaf path of a balanced tree padded to a power of two
inline std::vector<std::int64_t> tree_ranks(const std::vector<std::int64_t>& g) {
  int t = static_cast<int>(g.size());
  int tp = 1;
  while (tp < t) tp <<= 1;
  std::vector<std::int64_t> sum(2 * tp, 0);
  for (int j = 0; j < t; ++j) sum[tp + j] = g[j];
  for (int v = tp - 1; v >= 1; --v) sum[v] = sum[2 * v] + sum[2 * v + 1];
  std::vector<std::int64_t> r(t, 0);
  for (int j = 0; j < t; ++j) {
    std::int64_t acc = 0;
    for (int v = tp + j; v > 1; v >>= 1)
      if (v & 1) acc += sum[v - 1];
    r[j] = acc;
  }
  return r;
}

struct WeightGroupCell {
  int t = 0;                     // group count
  double scale = 1.0;            // stored-to-source ratio (subsampled cells)
  std::vector<int> members;      // point indices, ascending (weight, id)
  std::vector<int> group_start;  // size t + 1
  std::vector<double> rep;       // minimum weight per group
};

namespace detail {

inline void sort_by_weight(const PointSet& P, std::vector<int>& ids) {
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    return lex_less(P[a].weight, P[a].pt.id, P[b].weight, P[b].pt.id);
  });
}

inline WeightGroupCell build_groups(const PointSet& P, std::vector<int> members,
                                    int t_target, double scale = 1.0) {
  WeightGroupCell c;
  sort_by_weight(P, members);
  int m = static_cast<int>(members.size());
  c.members = std::move(members);
  c.scale = scale;
  c.t = std::max(1, std::min(t_target, m));
  c.group_start.resize(c.t + 1);
  c.rep.resize(c.t);
  for (int j = 0; j <= c.t; ++j)
    c.group_start[j] = static_cast<int>(static_cast<std::int64_t>(j) * m / c.t);
  for (int j = 0; j < c.t; ++j) {
    int s = c.group_start[j];
    c.rep[j] = s < c.group_start[j + 1] ? P[c.members[s]].weight : kInf;
  }
  return c;
}

template <class Pred>
std::vector<std::int64_t> count_groups(const WeightGroupCell& c, Pred pred) {
  std::vector<std::int64_t> g(c.t, 0);
  for (int j = 0; j < c.t; ++j)
    for (int i = c.group_start[j]; i < c.group_start[j + 1]; ++i)
      if (pred(c.members[i])) ++g[j];
  return g;
}

// emission scan: walk groups in weight order and emit the smallest in-query
// group member each time its rank clears the next quantile threshold
template <class Pred>
RankedSummary emit_groups(const WeightGroupCell& c, const PointSet& P,
                          const std::vector<std::int64_t>& g, double eps, int Q,
                          Pred pred) {
  RankedSummary out;
  std::int64_t tot = 0;
  for (auto v : g) tot += v;
  out.k = static_cast<std::int64_t>(std::llround(c.scale * static_cast<double>(tot)));
  if (tot == 0) return out;
  std::vector<std::int64_t> r = tree_ranks(g);
  double kd = c.scale * static_cast<double>(tot);
  int jq = 0;
  for (int j = 0; j < c.t && jq <= Q; ++j) {
    if (g[j] == 0) continue;
    double rj = c.scale * static_cast<double>(r[j]);
    if (rj < static_cast<double>(jq) * eps * kd - 1e-9) continue;
    double w = kInf;
    for (int i = c.group_start[j]; i < c.group_start[j + 1]; ++i)
      if (pred(c.members[i])) {
        w = P[c.members[i]].weight;  // members ascend by weight
        break;
      }
    while (jq <= Q && rj >= static_cast<double>(jq) * eps * kd - 1e-9) {
      out.weights.push_back(w);
      out.ranks.push_back(rj);
      ++jq;
    }
  }
  if (jq <= Q) {
    // thresholds past the last representative: emit the query maximum
    double w = kInf;
    for (int j = c.t - 1; j >= 0 && w == kInf; --j)
      for (int i = c.group_start[j + 1] - 1; i >= c.group_start[j]; --i)
        if (pred(c.members[i])) {
          w = P[c.members[i]].weight;
          break;
        }
    while (jq <= Q) {
      out.weights.push_back(w);
      out.ranks.push_back(kd - 1.0);
      ++jq;
    }
  }
  return out;
}

// exact quantile list from the sorted weights of the subset
inline std::vector<double> exact_quantiles(const std::vector<double>& w, double eps) {
  if (w.empty()) return {};
  std::int64_t k = static_cast<std::int64_t>(w.size());
  int Q = static_cast<int>(std::ceil(1.0 / eps));
  std::vector<double> out;
  out.reserve(Q + 1);
  for (int i = 0; i <= Q; ++i) {
    std::int64_t r = static_cast<std::int64_t>(
        std::floor(static_cast<double>(i) * eps * static_cast<double>(k)));
    out.push_back(w[std::min(r, k - 1)]);
  }
  return out;
}

inline RankedSummary full_summary(std::vector<double> sorted_w) {
  RankedSummary s;
  s.k = static_cast<std::int64_t>(sorted_w.size());
  s.weights = std::move(sorted_w);
  s.ranks.resize(s.weights.size());
  for (size_t i = 0; i < s.ranks.size(); ++i) s.ranks[i] = static_cast<double>(i);
  return s;
}

// step-interpolated rank: the recorded rank of the largest entry <= w
inline double step_rank(const RankedSummary& s, double w) {
  auto it = std::upper_bound(s.weights.begin(), s.weights.end(), w);
  if (it == s.weights.begin()) return 0.0;
  return s.ranks[static_cast<size_t>(it - s.weights.begin()) - 1];
}

// re-emit a finer summary on the eps grid; safe only when eps * k is at
// least a few points (callers route tiny subsets to exact_quantiles)
inline RankedSummary resample_summary(const RankedSummary& s, double eps) {
  RankedSummary out;
  out.k = s.k;
  if (s.k == 0 || s.weights.empty()) return out;
  int Q = static_cast<int>(std::ceil(1.0 / eps));
  size_t pos = 0;
  for (int i = 0; i <= Q; ++i) {
    double target = static_cast<double>(i) * eps * static_cast<double>(s.k);
    while (pos + 1 < s.weights.size() && s.ranks[pos] < target - 1e-9) ++pos;
    out.weights.push_back(s.weights[pos]);
    out.ranks.push_back(s.ranks[pos]);
  }
  return out;
}

}  // namespace detail

// interleave two summaries by weight; ranks add through each counterpart's
// step-interpolated rank function, then the union is re-emitted on the
// eps_out grid. Errors add. An empty side leaves the other unchanged.
inline RankedSummary merge_quantile_summaries(const RankedSummary& a,
                                              const RankedSummary& b, double eps_out) {
  if (b.k == 0 || b.weights.empty()) return a;
  if (a.k == 0 || a.weights.empty()) return b;
  RankedSummary u;
  u.k = a.k + b.k;
  std::vector<double> cand;
  cand.reserve(a.weights.size() + b.weights.size());
  cand.insert(cand.end(), a.weights.begin(), a.weights.end());
  cand.insert(cand.end(), b.weights.begin(), b.weights.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  std::vector<double> cr(cand.size());
  for (size_t i = 0; i < cand.size(); ++i)
    cr[i] = detail::step_rank(a, cand[i]) + detail::step_rank(b, cand[i]);
  int Q = static_cast<int>(std::ceil(1.0 / eps_out));
  size_t pos = 0;
  for (int i = 0; i <= Q; ++i) {
    double target = static_cast<double>(i) * eps_out * static_cast<double>(u.k);
    while (pos + 1 < cand.size() && cr[pos] < target - 1e-9) ++pos;
    u.weights.push_back(cand[pos]);
    u.ranks.push_back(cr[pos]);
  }
  return u;
}

// ------------------------- halfspace summaries -------------------------

struct AqsGroupTier {
  std::int64_t k = 0;
  CuttingLevel level;
  std::vector<WeightGroupCell> cells;
};

struct AqsOrientation {
  std::vector<Hyperplane> planes;
  std::vector<AqsGroupTier> tiers;
};

struct AqsIndex {
  Family family = Family::kHalfspace3D;
  double eps0 = 0;
  std::int64_t n = 0, k0 = 0;
  int Q = 0;
  bool exact_mode = false;
  Config cfg;
  PointSet pts;
  ApproxCounter counter;
  std::vector<AqsOrientation> ori;
};

namespace detail {

// answers at or below this multiple of the base depth bypass the groups
constexpr double kAqsExactRouting = 8.0;
// count-snap slack: kk = 2 * approx(q) has kk <= 2.449 * k
constexpr double kAqsCountSlack = 2.449;

// group accuracy so one group spans well under eps * k points:
// width <= eps_g * |conflict| <= 0.6 * eps * k for conflict <= c_cl * k_cell
// and k_cell <= slack * ratio * k
inline int group_count_target(double eps, double ratio, const Config& cfg) {
  double eps_g = 0.6 * eps / (cfg.c_cl * kAqsCountSlack * ratio);
  return static_cast<int>(std::ceil(1.0 / eps_g));
}

inline void require_weights(const PointSet& P, const char* who) {
  if (P.empty()) throw input_error(std::string(who) + ": empty point set");
  for (const auto& p : P)
    if (!p.has_weight) throw input_error(std::string(who) + ": point without weight");
}

// doubling rungs strictly above the exact-routing band, topped by n
inline std::vector<std::int64_t> aqs_rungs(std::int64_t n, std::int64_t k0) {
  std::vector<std::int64_t> r;
  for (std::int64_t k = 2 * k0; k < n; k *= 2)
    if (static_cast<double>(k) > kAqsExactRouting * static_cast<double>(k0))
      r.push_back(k);
  r.push_back(n);
  return r;
}

}  // namespace detail

inline AqsIndex build_aqs_halfspace(const PointSet& P, double eps0, int d,
                                    const Config& cfg = Config(),
                                    std::uint64_t seed = 1) {
  if (eps0 <= 0 || eps0 >= 1) throw input_error("build_aqs_halfspace: need 0 < eps0 < 1");
  if (d != 2 && d != 3) throw input_error("build_aqs_halfspace: need d in {2, 3}");
  detail::require_weights(P, "build_aqs_halfspace");

  AqsIndex idx;
  idx.family = d == 2 ? Family::kHalfplane2D : Family::kHalfspace3D;
  idx.eps0 = eps0;
  idx.cfg = cfg;
  idx.pts = P;
  idx.n = static_cast<std::int64_t>(P.size());
  idx.Q = static_cast<int>(std::ceil(1.0 / eps0));
  idx.k0 = std::min<std::int64_t>(idx.n,
                                  static_cast<std::int64_t>(std::ceil(1.0 / eps0)));
  idx.exact_mode = idx.k0 >= idx.n;

  std::vector<Point> ppts;
  ppts.reserve(P.size());
  for (const auto& p : P) ppts.push_back(p.pt);
  idx.counter = ApproxCounter(ppts, cfg);
  if (idx.exact_mode) return idx;  // every query reads its quantiles off a scan

  int t_target = detail::group_count_target(eps0, 2.0, cfg);
  std::uint64_t s2 = seed;
  for (int o = 0; o < 2; ++o) {
    AqsOrientation ori;
    ori.planes.reserve(P.size());
    for (size_t i = 0; i < P.size(); ++i) {
      Hyperplane h = detail::ahhs_tier_plane(P[i].pt, o == 1);
      h.id = static_cast<std::int64_t>(i);
      ori.planes.push_back(h);
    }
    for (std::int64_t k : detail::aqs_rungs(idx.n, idx.k0)) {
      AqsGroupTier t;
      t.k = k;
      t.level.k = k;
      ++s2;
      t.level.cells = build_shallow_cutting(ori.planes, k, idx.family, cfg, s2 * 7919);
      for (auto& cell : t.level.cells) {
        t.cells.push_back(detail::build_groups(P, cell.conflict, t_target));
        cell.conflict.clear();
        cell.conflict.shrink_to_fit();
      }
      ori.tiers.push_back(std::move(t));
    }
    idx.ori.push_back(std::move(ori));
  }
  return idx;
}

inline std::vector<double> query_aqs_halfspace(const AqsIndex& idx, const Range& q) {
  int d = family_dim(idx.family);
  if (q.dim != d || q.kind != Range::kHalfspace)
    throw input_error("query_aqs_halfspace: range does not match the index");

  auto scan = [&]() {
    std::vector<double> w;
    for (const auto& p : idx.pts)
      if (contains(q, p.pt)) w.push_back(p.weight);
    std::sort(w.begin(), w.end());
    return detail::exact_quantiles(w, idx.eps0);
  };

  double nd = q.normal[d - 1];
  if (nd == 0) return scan();  // vertical boundary, no dual point
  std::int64_t kk = std::min<std::int64_t>(idx.n, 2 * idx.counter.approx(q));
  if (kk <= 0) return {};
  if (idx.exact_mode ||
      static_cast<double>(kk) <= detail::kAqsExactRouting * static_cast<double>(idx.k0))
    return scan();

  const AqsOrientation& ori = idx.ori[nd > 0 ? 0 : 1];
  Point w = detail::ahhs_tier_query(q);
  const AqsGroupTier* tt = nullptr;
  for (const auto& t : ori.tiers)
    if (t.k >= kk) {
      tt = &t;
      break;
    }
  if (!tt) return scan();
  int ci = locate_in_level(tt->level, idx.family, w);
  if (ci < 0) return scan();

  const WeightGroupCell& c = tt->cells[ci];
  auto pred = [&](int i) { return contains(q, idx.pts[i].pt); };
  auto g = detail::count_groups(c, pred);
  RankedSummary s = detail::emit_groups(c, idx.pts, g, idx.eps0, idx.Q, pred);
  return s.weights;
}

// ------------------------- dominance summaries -------------------------

// Weight group cell for a staircase cell. Group counts inside a query come
// from one exact pass over the stored members; a per-cluster grid structure
// would cost 70-300 KB per stored point at these input sizes (measured), so
// the clusters exist only as the scan batching below.
struct DomAqsCell {
  WeightGroupCell groups;
  bool exact_tier = true;  // groups sit on the full conflict list
};

struct DomAqsTier {
  std::int64_t k = 0;
  CuttingLevel level;
  std::vector<DomAqsCell> cells;
};

struct DomAqsIndex {
  double eps0 = 0;
  std::int64_t n = 0, k0 = 0, k_exact_thr = 0;
  int Q = 0, alpha = 1;
  bool exact_mode = false;
  Config cfg;
  PointSet pts;
  ApproxCounter counter;
  std::vector<DomAqsTier> tiers;
};

namespace detail {

inline int dom_cluster_width(double eps0) {
  double ll = std::ceil(std::log2(std::max(2.0, std::log2(std::max(4.0, 1.0 / eps0)))));
  return std::max(1, static_cast<int>(std::llround(ll * ll * ll)));
}

// member sample large enough that subset ranks stay within
// 0.2 * eps0 * k of the truth; saturates to the full list at bench scales
inline std::int64_t rank_sample_target(std::int64_t m, double eps0, std::int64_t k,
                                       const Config& cfg) {
  double e = 0.2 * eps0 * static_cast<double>(k) / kAqsCountSlack;
  double md = static_cast<double>(m);
  double t = cfg.c0 * (md / e) * (md / e) *
             std::log(4.0 * std::max(2.0, md));
  return t >= md ? m : std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(t)));
}

inline DomAqsCell build_dom_cell(const PointSet& P, const std::vector<int>& conflict,
                                 double eps0, std::int64_t k, std::int64_t k_exact_thr,
                                 int t_target, const Config& cfg, Rng& rng) {
  DomAqsCell cell;
  std::vector<int> members = conflict;
  double scale = 1.0;
  cell.exact_tier = k <= k_exact_thr;
  if (!cell.exact_tier) {
    std::int64_t m = static_cast<std::int64_t>(members.size());
    std::int64_t tgt = rank_sample_target(m, eps0, k, cfg);
    if (tgt < m) {
      // rank-preserving subsample of the conflict list
      for (std::int64_t i = 0; i < tgt; ++i) {
        std::int64_t j = i + static_cast<std::int64_t>(rng.uniform_int(0, m - 1 - i));
        std::swap(members[i], members[j]);
      }
      members.resize(tgt);
      scale = static_cast<double>(m) / static_cast<double>(tgt);
    }
  }
  cell.groups = build_groups(P, std::move(members), t_target, scale);
  return cell;
}

// one exact pass per query, batched in clusters of alpha consecutive groups
template <class Pred>
std::vector<std::int64_t> dom_cell_counts(const DomAqsCell& cell, int alpha,
                                          Pred pred) {
  const WeightGroupCell& gr = cell.groups;
  std::vector<std::int64_t> g(gr.t, 0);
  for (int jlo = 0; jlo < gr.t; jlo += alpha) {
    int jhi = std::min(gr.t, jlo + alpha);
    for (int j = jlo; j < jhi; ++j)
      for (int i = gr.group_start[j]; i < gr.group_start[j + 1]; ++i)
        if (pred(gr.members[i])) ++g[j];
  }
  return g;
}

}  // namespace detail

// full hierarchy of staircase cuttings with a weight group cell per cell;
// simple, superlinear in stored bytes, kept as the reference structure
inline DomAqsIndex build_aqs_dominance_suboptimal(const PointSet& P, double eps0,
                                                  const Config& cfg = Config(),
                                                  std::uint64_t seed = 1) {
  if (eps0 <= 0 || eps0 >= 1)
    throw input_error("build_aqs_dominance: need 0 < eps0 < 1");
  detail::require_weights(P, "build_aqs_dominance");

  DomAqsIndex idx;
  idx.eps0 = eps0;
  idx.cfg = cfg;
  idx.pts = P;
  idx.n = static_cast<std::int64_t>(P.size());
  idx.Q = static_cast<int>(std::ceil(1.0 / eps0));
  idx.k0 = std::min<std::int64_t>(idx.n,
                                  static_cast<std::int64_t>(std::ceil(1.0 / eps0)));
  idx.exact_mode = idx.k0 >= idx.n;
  idx.alpha = detail::dom_cluster_width(eps0);
  double lg = std::log2(std::max(2.0, 1.0 / eps0));
  idx.k_exact_thr = static_cast<std::int64_t>(
      std::ceil(std::pow(lg, cfg.kappa) / eps0));

  std::vector<Point> ppts;
  ppts.reserve(P.size());
  for (const auto& p : P) ppts.push_back(p.pt);
  idx.counter = ApproxCounter(ppts, cfg);
  if (idx.exact_mode) return idx;

  int t_target = detail::group_count_target(eps0, 2.0, cfg);
  Rng rng(seed * 977 + 5);
  std::uint64_t s2 = seed;
  for (std::int64_t k : detail::aqs_rungs(idx.n, idx.k0)) {
    DomAqsTier t;
    t.k = k;
    t.level.k = k;
    ++s2;
    t.level.cells = build_shallow_cutting(ppts, k, Family::kDominance3D, cfg, s2 * 7919);
    for (auto& cell : t.level.cells) {
      t.cells.push_back(detail::build_dom_cell(P, cell.conflict, eps0, k,
                                               idx.k_exact_thr, t_target, cfg, rng));
      cell.conflict.clear();
      cell.conflict.shrink_to_fit();
    }
    idx.tiers.push_back(std::move(t));
  }
  return idx;
}

inline std::vector<double> query_aqs_dominance(const DomAqsIndex& idx, const Point& corner) {
  if (corner.dim != 3) throw input_error("query_aqs_dominance: need a 3D corner");
  Range q = Range::dominance(corner);
  auto scan = [&]() {
    std::vector<double> w;
    for (const auto& p : idx.pts)
      if (contains(q, p.pt)) w.push_back(p.weight);
    std::sort(w.begin(), w.end());
    return detail::exact_quantiles(w, idx.eps0);
  };
  std::int64_t kk = std::min<std::int64_t>(idx.n, 2 * idx.counter.approx(q));
  if (kk <= 0) return {};
  if (idx.exact_mode ||
      static_cast<double>(kk) <= detail::kAqsExactRouting * static_cast<double>(idx.k0))
    return scan();

  const DomAqsTier* tt = nullptr;
  for (const auto& t : idx.tiers)
    if (t.k >= kk) {
      tt = &t;
      break;
    }
  if (!tt) return scan();
  int ci = locate_in_level(tt->level, Family::kDominance3D, corner);
  if (ci < 0) return scan();

  const DomAqsCell& cell = tt->cells[ci];
  auto pred = [&](int i) { return contains(q, idx.pts[i].pt); };
  auto g = detail::dom_cell_counts(cell, idx.alpha, pred);
  RankedSummary s = detail::emit_groups(cell.groups, idx.pts, g, idx.eps0, idx.Q, pred);
  return s.weights;
}

// ------------------------- optimal dominance build -------------------------

// One shallow staircase at depth ~A/eps0 whose cells reduce their points to
// rank space: per-dimension slab breakpoints, point images under the slab
// indices, a small fixed-rung ladder of weight group cells over the images,
// and per-slab point lists. A query snaps to the grid corner below it,
// summarizes the snapped subset from the image ladder, computes the at most
// three partial slabs exactly, and merges.
struct RankReductionCell {
  std::vector<int> members;  // global indices, ascending (weight, id)
  std::array<std::vector<double>, 3> breaks;
  std::array<std::vector<std::vector<int>>, 3> slabs;  // member positions per slab
  PointSet images;                                     // slab-index coordinates
  ApproxCounter icounter;
  std::int64_t k0l = 0;
  double eps_emit = 0;
  int Ql = 0;
  std::vector<AqsGroupTier> local;
};

struct DomAqsOptIndex {
  double eps0 = 0;
  std::int64_t n = 0, k0 = 0, k_shell = 0;
  int Q = 0;
  bool exact_mode = false;
  Config cfg;
  PointSet pts;
  ApproxCounter counter;
  CuttingLevel shell;
  std::vector<RankReductionCell> cells;
};

inline DomAqsOptIndex build_aqs_dominance(const PointSet& P, double eps0,
                                          const Config& cfg = Config(),
                                          std::uint64_t seed = 1) {
  if (eps0 <= 0 || eps0 >= 1)
    throw input_error("build_aqs_dominance: need 0 < eps0 < 1");
  detail::require_weights(P, "build_aqs_dominance");

  DomAqsOptIndex idx;
  idx.eps0 = eps0;
  idx.cfg = cfg;
  idx.pts = P;
  idx.n = static_cast<std::int64_t>(P.size());
  idx.Q = static_cast<int>(std::ceil(1.0 / eps0));
  idx.k0 = std::min<std::int64_t>(idx.n,
                                  static_cast<std::int64_t>(std::ceil(1.0 / eps0)));
  idx.exact_mode = idx.k0 >= idx.n;

  std::vector<Point> ppts;
  ppts.reserve(P.size());
  for (const auto& p : P) ppts.push_back(p.pt);
  idx.counter = ApproxCounter(ppts, cfg);
  if (idx.exact_mode) return idx;

  double lg = std::log2(std::max(4.0, 1.0 / eps0));
  double A = std::pow(lg, cfg.kappa + 1.0);
  idx.k_shell = std::min<std::int64_t>(
      idx.n, static_cast<std::int64_t>(std::ceil(A / eps0)));
  idx.shell.k = idx.k_shell;
  idx.shell.cells =
      build_shallow_cutting(ppts, idx.k_shell, Family::kDominance3D, cfg, seed * 7919);

  std::int64_t s_star = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(1.0 / (eps0 * lg))));
  std::uint64_t s2 = seed;
  for (auto& sc : idx.shell.cells) {
    RankReductionCell rc;
    rc.members = sc.conflict;
    detail::sort_by_weight(P, rc.members);
    sc.conflict.clear();
    sc.conflict.shrink_to_fit();
    std::int64_t m = static_cast<std::int64_t>(rc.members.size());

    for (int d = 0; d < 3; ++d) {
      std::vector<double> coord(m);
      for (std::int64_t i = 0; i < m; ++i) coord[i] = P[rc.members[i]].pt.x[d];
      std::sort(coord.begin(), coord.end());
      for (std::int64_t i = s_star - 1; i < m; i += s_star)
        if (rc.breaks[d].empty() || coord[i] > rc.breaks[d].back())
          rc.breaks[d].push_back(coord[i]);
      rc.slabs[d].resize(rc.breaks[d].size() + 1);
    }
    std::vector<Point> ipts(m);
    for (std::int64_t i = 0; i < m; ++i) {
      const ColoredWeightedPoint& p = P[rc.members[i]];
      ColoredWeightedPoint ip;
      ip.pt.dim = 3;
      ip.pt.id = i;
      ip.has_weight = true;
      ip.weight = p.weight;
      for (int d = 0; d < 3; ++d) {
        auto& br = rc.breaks[d];
        std::int64_t ic = std::lower_bound(br.begin(), br.end(), p.pt.x[d]) - br.begin();
        ip.pt.x[d] = static_cast<double>(ic);
        rc.slabs[d][ic].push_back(static_cast<int>(i));
      }
      rc.images.push_back(ip);
      ipts[i] = rc.images.back().pt;
    }
    rc.icounter = ApproxCounter(ipts, cfg);

    rc.eps_emit = eps0 / 6.0;  // merge budget: snapped-side plus remainder
    rc.Ql = static_cast<int>(std::ceil(1.0 / rc.eps_emit));
    rc.k0l = std::min<std::int64_t>(
        m, static_cast<std::int64_t>(std::ceil(1.0 / rc.eps_emit)));
    if (static_cast<double>(m) > detail::kAqsExactRouting * static_cast<double>(rc.k0l)) {
      // fixed rung count keeps stored bytes linear; the per-rung group
      // accuracy absorbs the larger ratios
      const int J = 4;
      std::int64_t prev = rc.k0l;
      for (int j = 1; j <= J; ++j) {
        std::int64_t k =
            j == J ? m
                   : static_cast<std::int64_t>(std::llround(
                         rc.k0l * std::pow(static_cast<double>(m) / rc.k0l,
                                           static_cast<double>(j) / J)));
        if (k <= prev) continue;
        if (k > m) k = m;
        AqsGroupTier t;
        t.k = k;
        t.level.k = k;
        ++s2;
        t.level.cells = build_shallow_cutting(ipts, k, Family::kDominance3D, cfg, s2 * 7919);
        double ratio = static_cast<double>(k) / static_cast<double>(prev);
        int t_target = detail::group_count_target(rc.eps_emit, ratio, cfg);
        for (auto& cell : t.level.cells) {
          t.cells.push_back(detail::build_groups(rc.images, cell.conflict, t_target));
          cell.conflict.clear();
          cell.conflict.shrink_to_fit();
        }
        rc.local.push_back(std::move(t));
        prev = k;
      }
    }
    idx.cells.push_back(std::move(rc));
  }
  return idx;
}

namespace detail {

// summary of the image points dominated by the snapped grid corner
inline RankedSummary shell_local_summary(const RankReductionCell& rc, const Point& gq) {
  Range lq = Range::dominance(gq);
  auto scan = [&]() {
    std::vector<double> w;
    for (const auto& p : rc.images)
      if (contains(lq, p.pt)) w.push_back(p.weight);
    std::sort(w.begin(), w.end());
    return full_summary(std::move(w));
  };
  std::int64_t m = static_cast<std::int64_t>(rc.images.size());
  std::int64_t kk = std::min<std::int64_t>(m, 2 * rc.icounter.approx(lq));
  if (kk <= 0) return RankedSummary{};
  if (static_cast<double>(kk) <= kAqsExactRouting * static_cast<double>(rc.k0l))
    return scan();
  const AqsGroupTier* tt = nullptr;
  for (const auto& t : rc.local)
    if (t.k >= kk) {
      tt = &t;
      break;
    }
  if (!tt) return scan();
  int ci = locate_in_level(tt->level, Family::kDominance3D, gq);
  if (ci < 0) return scan();
  const WeightGroupCell& c = tt->cells[ci];
  auto pred = [&](int i) { return contains(lq, rc.images[i].pt); };
  auto g = count_groups(c, pred);
  return emit_groups(c, rc.images, g, rc.eps_emit, rc.Ql, pred);
}

}  // namespace detail

inline std::vector<double> query_aqs_dominance(const DomAqsOptIndex& idx,
                                               const Point& corner) {
  if (corner.dim != 3) throw input_error("query_aqs_dominance: need a 3D corner");
  Range q = Range::dominance(corner);
  auto scan = [&]() {
    std::vector<double> w;
    for (const auto& p : idx.pts)
      if (contains(q, p.pt)) w.push_back(p.weight);
    std::sort(w.begin(), w.end());
    return detail::exact_quantiles(w, idx.eps0);
  };
  std::int64_t kk = std::min<std::int64_t>(idx.n, 2 * idx.counter.approx(q));
  if (kk <= 0) return {};
  if (idx.exact_mode ||
      static_cast<double>(kk) <= detail::kAqsExactRouting * static_cast<double>(idx.k0))
    return scan();
  int ci = locate_in_level(idx.shell, Family::kDominance3D, corner);
  if (ci < 0) return scan();  // deeper than the shell: vanishing fraction
  const RankReductionCell& rc = idx.cells[ci];

  std::array<std::int64_t, 3> iq{};
  for (int d = 0; d < 3; ++d) {
    const auto& br = rc.breaks[d];
    iq[d] = std::upper_bound(br.begin(), br.end(), corner.x[d]) - br.begin();
  }
  // partial slabs between the snapped corner and the query, handled exactly
  std::vector<int> rem;
  for (int d = 0; d < 3; ++d)
    if (iq[d] < static_cast<std::int64_t>(rc.slabs[d].size())) {
      const auto& sl = rc.slabs[d][iq[d]];
      rem.insert(rem.end(), sl.begin(), sl.end());
    }
  std::sort(rem.begin(), rem.end());
  rem.erase(std::unique(rem.begin(), rem.end()), rem.end());
  std::vector<double> rw;
  for (int loc : rem) {
    const auto& p = idx.pts[rc.members[loc]];
    if (contains(q, p.pt)) rw.push_back(p.weight);
  }
  std::sort(rw.begin(), rw.end());
  RankedSummary b = detail::full_summary(std::move(rw));

  RankedSummary a;
  if (iq[0] > 0 && iq[1] > 0 && iq[2] > 0) {
    Point gq = make_point3(static_cast<double>(iq[0] - 1),
                           static_cast<double>(iq[1] - 1),
                           static_cast<double>(iq[2] - 1));
    a = detail::shell_local_summary(rc, gq);
  }
  if (a.k == 0) {
    std::vector<double> w = std::move(b.weights);
    return detail::exact_quantiles(w, idx.eps0);
  }
  if (b.k == 0) return detail::resample_summary(a, idx.eps0).weights;
  return merge_quantile_summaries(a, b, idx.eps0).weights;
}

// ------------------------- measured storage -------------------------

inline std::int64_t memory_footprint(const WeightGroupCell& c) {
  return static_cast<std::int64_t>(sizeof(c)) + 4 * c.members.size() +
         4 * c.group_start.size() + 8 * c.rep.size();
}

inline std::int64_t memory_footprint(const GridType2Structure& s) {
  std::int64_t b = sizeof(s);
  for (const auto& v : s.corner) b += memory_footprint(v);
  for (const auto& v : s.table) b += memory_footprint(v);
  for (int d = 0; d < 3; ++d) {
    b += 8 * (s.slab_min[d].size() + s.leaf_vals[d].size());
    for (const auto& ch : s.child[d])
      if (ch) b += memory_footprint(*ch);
  }
  return b;
}

inline std::int64_t memory_footprint(const AqsGroupTier& t) {
  std::int64_t b = sizeof(t);
  for (const auto& c : t.level.cells) b += sizeof(c) + 4 * c.conflict.size();
  for (const auto& c : t.cells) b += memory_footprint(c);
  return b;
}

inline std::int64_t memory_footprint(const AqsIndex& idx) {
  std::int64_t b = sizeof(idx);
  b += static_cast<std::int64_t>(idx.pts.size()) * sizeof(ColoredWeightedPoint);
  b += 64 * idx.n;  // counting kd-tree: points, ids, nodes
  for (const auto& o : idx.ori) {
    b += static_cast<std::int64_t>(o.planes.size()) * sizeof(Hyperplane);
    for (const auto& t : o.tiers) b += memory_footprint(t);
  }
  return b;
}

inline std::int64_t memory_footprint(const DomAqsIndex& idx) {
  std::int64_t b = sizeof(idx);
  b += static_cast<std::int64_t>(idx.pts.size()) * sizeof(ColoredWeightedPoint);
  b += 64 * idx.n;
  for (const auto& t : idx.tiers) {
    b += sizeof(t);
    for (const auto& c : t.level.cells) b += sizeof(c) + 4 * c.conflict.size();
    for (const auto& c : t.cells) b += sizeof(c) + memory_footprint(c.groups);
  }
  return b;
}

inline std::int64_t memory_footprint(const DomAqsOptIndex& idx) {
  std::int64_t b = sizeof(idx);
  b += static_cast<std::int64_t>(idx.pts.size()) * sizeof(ColoredWeightedPoint);
  b += 64 * idx.n;
  for (const auto& c : idx.shell.cells) b += sizeof(c) + 4 * c.conflict.size();
  for (const auto& rc : idx.cells) {
    b += sizeof(rc) + 4 * rc.members.size();
    b += static_cast<std::int64_t>(rc.images.size()) * sizeof(ColoredWeightedPoint);
    b += 64 * static_cast<std::int64_t>(rc.images.size());
    for (int d = 0; d < 3; ++d) {
      b += 8 * rc.breaks[d].size();
      for (const auto& sl : rc.slabs[d]) b += sizeof(sl) + 4 * sl.size();
    }
    for (const auto& t : rc.local) b += memory_footprint(t);
  }
  return b;
}

}  // namespace rs
