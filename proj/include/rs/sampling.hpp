#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "rs/geometry.hpp"

namespace rs {

enum class Family { kHalfplane2D, kHalfspace3D, kDominance2D, kDominance3D, kDominance4D };

inline int family_dim(Family f) {
  switch (f) {
    case Family::kHalfplane2D:
    case Family::kDominance2D: return 2;
    case Family::kHalfspace3D:
    case Family::kDominance3D: return 3;
    case Family::kDominance4D: return 4;
  }
  return 3;
}
inline bool family_is_dominance(Family f) {
  return f != Family::kHalfplane2D && f != Family::kHalfspace3D;
}

struct EpsApproximation {
  std::vector<int> sample;  // indices into the source set, sorted
  std::vector<Point> pts;   // the sampled points
  double eps = 0;
  Family family = Family::kDominance3D;
  bool certified = false;
  double max_error = 0;          // certified/spot-checked max range error
  std::int64_t size_target = 0;  // theoretical size for reporting
};

namespace detail {

// Solve the k x k system M x = rhs in place (tiny k, partial pivoting).
// Returns false when singular.
inline bool solve_small(std::vector<std::vector<double>>& M, std::vector<double>& rhs) {
  int k = static_cast<int>(M.size());
  for (int c = 0; c < k; ++c) {
    int piv = c;
    for (int r = c + 1; r < k; ++r)
      if (std::fabs(M[r][c]) > std::fabs(M[piv][c])) piv = r;
    if (std::fabs(M[piv][c]) < 1e-12) return false;
    std::swap(M[c], M[piv]);
    std::swap(rhs[c], rhs[piv]);
    for (int r = 0; r < k; ++r) {
      if (r == c) continue;
      double f = M[r][c] / M[c][c];
      for (int c2 = c; c2 < k; ++c2) M[r][c2] -= f * M[c][c2];
      rhs[r] -= f * rhs[c];
    }
  }
  for (int c = 0; c < k; ++c) rhs[c] /= M[c][c];
  return true;
}

// Halfspaces through a (d-1)-tuple... through d affinely independent points,
// one variant per boundary inclusion pattern. The plane through the tuple is
// tilted by a small affine function with prescribed signs at the tuple points.
inline void emit_halfspace_variants(const std::vector<Point>& P,
                                    const std::vector<int>& tuple, double scale,
                                    std::vector<Range>& out) {
  int d = P[tuple[0]].dim;
  // base plane through the tuple: normal n0 with n0 . p = o for all tuple pts
  // parameterize as sum(n_i x_i) = o with |n| ~ 1: solve for n with one coord
  // pinned; try each pinned coordinate until non-singular
  std::array<double, kMaxDim> n0{};
  double o0 = 0;
  bool found = false;
  for (int pin = 0; pin < d && !found; ++pin) {
    std::vector<std::vector<double>> M(d, std::vector<double>(d, 0.0));
    std::vector<double> rhs(d, 0.0);
    // unknowns: n_j (j != pin) and o; equation n.p - o = -p[pin]
    for (int r = 0; r < d; ++r) {
      const Point& p = P[tuple[r]];
      int col = 0;
      for (int j = 0; j < d; ++j) {
        if (j == pin) continue;
        M[r][col++] = p.x[j];
      }
      M[r][d - 1] = -1.0;
      rhs[r] = -p.x[pin];
    }
    auto Mc = M;
    auto rc = rhs;
    if (!solve_small(Mc, rc)) continue;
    int col = 0;
    for (int j = 0; j < d; ++j) n0[j] = (j == pin) ? 1.0 : rc[col++];
    o0 = rc[d - 1];
    found = true;
  }
  if (!found) return;  // degenerate tuple
  double nn = 0;
  for (int j = 0; j < d; ++j) nn += n0[j] * n0[j];
  nn = std::sqrt(nn);
  for (int j = 0; j < d; ++j) n0[j] /= nn;
  o0 /= nn;
  double delta = 1e-6 * std::max(scale, 1.0);
  // both orientations: the boundary patterns below only control the tuple
  // points, the rest of the set stays on the chosen side
  for (int orient = 0; orient < 2; ++orient, o0 = -o0) {
    if (orient == 1)
      for (int j = 0; j < d; ++j) n0[j] = -n0[j];
  // tilt: affine g(x) = m.x + c with g(p_r) = target_r, plane n0.x <= o0
  // perturbed to (n0 + delta m).x <= o0 + delta c
  int patterns = 1 << d;
  for (int pat = 0; pat < patterns; ++pat) {
    std::vector<std::vector<double>> M(d + 1, std::vector<double>(d + 1, 0.0));
    std::vector<double> rhs(d + 1, 0.0);
    for (int r = 0; r < d; ++r) {
      const Point& p = P[tuple[r]];
      for (int j = 0; j < d; ++j) M[r][j] = p.x[j];
      M[r][d] = 1.0;
      rhs[r] = (pat >> r) & 1 ? -1.0 : 1.0;  // negative g keeps the point inside
    }
    // normalization row: m . n0 = 0 keeps the tilt tangential
    for (int j = 0; j < d; ++j) M[d][j] = n0[j];
    rhs[d] = 0.0;
    if (!solve_small(M, rhs)) continue;
    Range r;
    r.kind = Range::kHalfspace;
    r.dim = d;
    for (int j = 0; j < d; ++j) r.normal[j] = n0[j] + delta * rhs[j];
    r.offset = o0 - delta * rhs[d];
    // n.x <= o and g(x) = m.x + c: inside iff n0.x + delta m.x <= o0 - delta c
    // i.e. (n0.x - o0) <= -delta g(x); at tuple points n0.p = o0 so inside iff
    // g(p) < 0 matching the pattern
    out.push_back(r);
  }
  // plain closed and strictly shrunk variants
  {
    Range r;
    r.kind = Range::kHalfspace;
    r.dim = d;
    for (int j = 0; j < d; ++j) r.normal[j] = n0[j];
    r.offset = o0 + delta * 1e-3;
    out.push_back(r);
    r.offset = o0 - delta * 1e-3;
    out.push_back(r);
  }
  }
}

inline double coord_scale(const std::vector<Point>& P) {
  double s = 1.0;
  for (const auto& p : P)
    for (int j = 0; j < p.dim; ++j) s = std::max(s, std::fabs(p.x[j]));
  return s;
}

}  // namespace detail

// One representative per distinct subset (up to the certified tolerance):
// dominance corners from the per-dimension coordinate grid plus an infinity
// sentinel; halfspaces through point tuples in all boundary-inclusion variants.
inline std::vector<Range> enumerate_canonical_ranges(const std::vector<Point>& P, Family fam,
                                                     const Config& cfg = Config{}) {
  if (P.empty()) throw input_error("enumerate_canonical_ranges: empty set");
  if (static_cast<int>(P.size()) > cfg.certify_limit)
    throw input_error("enumerate_canonical_ranges: set too large, sample instead");
  int d = family_dim(fam);
  int n = static_cast<int>(P.size());
  std::vector<Range> out;
  if (family_is_dominance(fam)) {
    std::array<std::vector<double>, kMaxDim> vals;
    double est = 1;
    for (int j = 0; j < d; ++j) {
      for (const auto& p : P) vals[j].push_back(p.x[j]);
      std::sort(vals[j].begin(), vals[j].end());
      vals[j].erase(std::unique(vals[j].begin(), vals[j].end()), vals[j].end());
      vals[j].push_back(kInf);
      est *= static_cast<double>(vals[j].size());
    }
    if (est > 5e6)
      throw input_error("enumerate_canonical_ranges: too many corners, use the grid certifier");
    std::array<int, kMaxDim> idx{};
    for (;;) {
      Point c;
      c.dim = d;
      for (int j = 0; j < d; ++j) c.x[j] = vals[j][idx[j]];
      out.push_back(Range::dominance(c));
      int j = 0;
      while (j < d) {
        if (++idx[j] < static_cast<int>(vals[j].size())) break;
        idx[j] = 0;
        ++j;
      }
      if (j == d) break;
    }
    return out;
  }
  double scale = detail::coord_scale(P);
  if (n == 1) {
    std::array<double, kMaxDim> nrm{};
    nrm[d - 1] = 1.0;
    Range below;
    below.kind = Range::kHalfspace;
    below.dim = d;
    below.normal = nrm;
    below.offset = P[0].x[d - 1] + scale;
    out.push_back(below);  // full set
    below.offset = P[0].x[d - 1] - scale;
    out.push_back(below);  // empty
    return out;
  }
  std::vector<int> tuple(d);
  if (d == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        tuple = {i, j};
        detail::emit_halfspace_variants(P, tuple, scale, out);
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int l = j + 1; l < n; ++l) {
          tuple = {i, j, l};
          detail::emit_halfspace_variants(P, tuple, scale, out);
        }
  }
  // extremes
  std::array<double, kMaxDim> nrm{};
  nrm[d - 1] = 1.0;
  Range r;
  r.kind = Range::kHalfspace;
  r.dim = d;
  r.normal = nrm;
  double lo = kInf, hi = -kInf;
  for (const auto& p : P) {
    lo = std::min(lo, p.x[d - 1]);
    hi = std::max(hi, p.x[d - 1]);
  }
  r.offset = hi + 1;
  out.push_back(r);
  r.offset = lo - 1;
  out.push_back(r);
  return out;
}

namespace detail {

// Max range error of A against P over every canonical dominance corner,
// computed by a rank-grid sweep over the last dimension. Exact: corners use
// (value, id) ranks so weight ties in the lifted system stay separated.
inline double max_error_dominance_grid(const std::vector<Point>& P,
                                       const std::vector<char>& in_sample, int dim,
                                       std::int64_t NA) {
  int n = static_cast<int>(P.size());
  std::int64_t NP = n;
  std::array<std::vector<int>, kMaxDim> rank;
  std::vector<int> order(n);
  for (int d = 0; d < dim; ++d) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return lex_less(P[a].x[d], P[a].id, P[b].x[d], P[b].id);
    });
    rank[d].resize(n);
    for (int r = 0; r < n; ++r) rank[d][order[r]] = r;
  }
  // g = cntA * NP - cntP * NA accumulated over a grid on the first dim-1 dims
  int fd = dim - 1;
  std::int64_t cells = 1;
  for (int d = 0; d < fd; ++d) cells *= n;
  std::vector<std::int32_t> G(static_cast<size_t>(cells), 0);
  // process points by last-dimension rank
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return rank[dim - 1][a] < rank[dim - 1][b];
  });
  std::int64_t best = 0;
  for (int li = 0; li < n; ++li) {
    int p = order[li];
    std::int32_t delta =
        static_cast<std::int32_t>((in_sample[p] ? NP : 0) - NA);
    // add delta to every cell with rank >= p's rank in each leading dimension
    if (fd == 1) {
      for (int x = rank[0][p]; x < n; ++x) G[x] += delta;
    } else if (fd == 2) {
      for (int x = rank[0][p]; x < n; ++x) {
        std::int32_t* row = G.data() + static_cast<size_t>(x) * n;
        for (int y = rank[1][p]; y < n; ++y) row[y] += delta;
      }
    } else {
      for (int x = rank[0][p]; x < n; ++x)
        for (int y = rank[1][p]; y < n; ++y) {
          std::int32_t* row = G.data() + (static_cast<size_t>(x) * n + y) * n;
          for (int z = rank[2][p]; z < n; ++z) row[z] += delta;
        }
    }
    if (li + 1 < n && rank[dim - 1][order[li + 1]] == rank[dim - 1][p]) continue;
    for (std::int64_t i = 0; i < cells; ++i) {
      std::int64_t v = G[i] < 0 ? -static_cast<std::int64_t>(G[i]) : G[i];
      best = std::max(best, v);
    }
  }
  return static_cast<double>(best) / (static_cast<double>(NA) * static_cast<double>(NP));
}

inline double max_error_over_ranges(const std::vector<Point>& P,
                                    const std::vector<char>& in_sample, std::int64_t NA,
                                    const std::vector<Range>& ranges, Range* worst = nullptr) {
  std::int64_t NP = static_cast<std::int64_t>(P.size());
  double best = 0;
  for (const auto& r : ranges) {
    std::int64_t cp = 0, ca = 0;
    for (size_t i = 0; i < P.size(); ++i) {
      if (!contains(r, P[i])) continue;
      ++cp;
      if (in_sample[i]) ++ca;
    }
    double err = std::fabs(static_cast<double>(ca) / static_cast<double>(NA) -
                           static_cast<double>(cp) / static_cast<double>(NP));
    if (err > best) {
      best = err;
      if (worst) *worst = r;
    }
  }
  return best;
}

// streaming version for the halfspace families: avoids materializing the
// n^d-sized canonical list
inline double max_error_halfspace_exhaustive(const std::vector<Point>& P,
                                             const std::vector<char>& in_sample,
                                             std::int64_t NA, int d, Range* worst) {
  int n = static_cast<int>(P.size());
  double scale = coord_scale(P);
  double best = 0;
  std::vector<Range> buf;
  std::vector<int> tuple(d);
  auto flush = [&] {
    Range w;
    double e = max_error_over_ranges(P, in_sample, NA, buf, &w);
    if (e > best) {
      best = e;
      if (worst) *worst = w;
    }
    buf.clear();
  };
  if (d == 2) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        tuple = {i, j};
        emit_halfspace_variants(P, tuple, scale, buf);
        if (buf.size() >= 64) flush();
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int l = j + 1; l < n; ++l) {
          tuple = {i, j, l};
          emit_halfspace_variants(P, tuple, scale, buf);
          if (buf.size() >= 64) flush();
        }
  }
  flush();
  return best;
}

inline std::vector<Range> sample_canonical_ranges(const std::vector<Point>& P, Family fam,
                                                  int count, Rng& rng) {
  int n = static_cast<int>(P.size());
  int d = family_dim(fam);
  std::vector<Range> out;
  if (family_is_dominance(fam)) {
    for (int it = 0; it < count; ++it) {
      Point c;
      c.dim = d;
      for (int j = 0; j < d; ++j) {
        std::int64_t pick = rng.uniform_int(0, n);
        c.x[j] = pick == n ? kInf : P[pick].x[j];
      }
      out.push_back(Range::dominance(c));
    }
    return out;
  }
  double scale = coord_scale(P);
  std::vector<int> tuple(d);
  int made = 0, guard = 0;
  while (made * (1 << d) < count && ++guard < 4 * count) {
    bool distinct = true;
    for (int j = 0; j < d; ++j) {
      tuple[j] = static_cast<int>(rng.uniform_int(0, n - 1));
      for (int l = 0; l < j; ++l) distinct &= (tuple[l] != tuple[j]);
    }
    if (!distinct) continue;
    size_t before = out.size();
    emit_halfspace_variants(P, tuple, scale, out);
    if (out.size() > before) ++made;
  }
  return out;
}

}  // namespace detail

inline std::int64_t eps_approx_size_target(Family fam, double eps, double c = 4.0) {
  int d = family_dim(fam);
  double v;
  if (family_is_dominance(fam))
    v = c / eps * std::pow(std::log2(1.0 / eps) + 1, d + 0.5);
  else
    v = c * std::pow(1.0 / eps, 2.0 * d / (d + 1.0));
  return static_cast<std::int64_t>(std::ceil(v));
}

// Random sample of size min(n, c0 eps^-2 ln(4/eps)), certified against the
// canonical ranges (exhaustively when feasible, spot-checked otherwise);
// the sample is doubled on certification failure.
inline EpsApproximation build_eps_approximation(const std::vector<Point>& P, Family fam,
                                                double eps, std::uint64_t seed,
                                                const Config& cfg = Config{}) {
  if (P.empty() || eps <= 0 || eps >= 1)
    throw input_error("build_eps_approximation: need points and 0 < eps < 1");
  int n = static_cast<int>(P.size());
  Rng rng(seed);
  double c0 = cfg.c0;
  EpsApproximation out;
  out.eps = eps;
  out.family = fam;
  out.size_target = eps_approx_size_target(fam, eps);

  // exhaustive certification is affordable for these families at desk scale;
  // 3D halfspace tuples grow as n^3 ranges so it gets a tighter cap
  int exhaustive_cap = cfg.certify_limit;
  if (fam == Family::kHalfspace3D) exhaustive_cap = std::min(exhaustive_cap, 120);
  bool exhaustive = n <= exhaustive_cap;

  Range worst;
  for (int attempt = 0;; ++attempt) {
    std::int64_t m = static_cast<std::int64_t>(
        std::ceil(c0 / (eps * eps) * std::log(4.0 / eps)));
    m = std::min<std::int64_t>(m, n);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::int64_t i = 0; i < m; ++i)
      std::swap(idx[i], idx[rng.uniform_int(i, n - 1)]);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    std::vector<char> in_sample(n, 0);
    for (int i : idx) in_sample[i] = 1;

    double err;
    if (m == n) {
      err = 0.0;
    } else if (family_is_dominance(fam) && exhaustive) {
      err = detail::max_error_dominance_grid(P, in_sample, family_dim(fam), m);
    } else if (exhaustive) {
      err = detail::max_error_halfspace_exhaustive(P, in_sample, m, family_dim(fam), &worst);
    } else {
      auto ranges = detail::sample_canonical_ranges(P, fam, 2000, rng);
      err = detail::max_error_over_ranges(P, in_sample, m, ranges, &worst);
    }
    if (err <= eps + 1e-12) {
      out.sample = std::move(idx);
      out.pts.reserve(out.sample.size());
      for (int i : out.sample) out.pts.push_back(P[i]);
      out.certified = exhaustive || m == n;
      out.max_error = err;
      return out;
    }
    if (attempt >= cfg.max_retries)
      throw construction_error("eps-approximation failed certification after doubling");
    c0 *= 2.0;
  }
}

// Rank-preserving variant: lift weighted 3D points to 4D with the weight as
// the fourth coordinate, approximate the 4D dominance system, project back.
inline EpsApproximation build_rank_preserving_approximation(const PointSet& P, double eps,
                                                            std::uint64_t seed,
                                                            const Config& cfg = Config{}) {
  std::vector<Point> lifted;
  lifted.reserve(P.size());
  for (const auto& p : P) {
    if (!p.has_weight) throw input_error("rank-preserving approximation needs weights");
    Point q = p.pt;
    q.dim = 4;
    q.x[3] = p.weight;
    lifted.push_back(q);
  }
  auto approx = build_eps_approximation(lifted, Family::kDominance4D, eps, seed, cfg);
  approx.family = Family::kDominance3D;
  for (auto& q : approx.pts) {
    q.dim = 3;
    q.x[3] = 0;
  }
  return approx;
}

}  // namespace rs
