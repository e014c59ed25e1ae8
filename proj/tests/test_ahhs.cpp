#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "rs/ahhs.hpp"
#include "rs/oracle.hpp"
#include "rs/sampling.hpp"

using namespace rs;

namespace {

PointSet zipf_colored(int n, int dim, int F, Rng& rng, double s = 1.1) {
  std::vector<double> cum(F);
  double tot = 0;
  for (int c = 0; c < F; ++c) {
    tot += 1.0 / std::pow(c + 1.0, s);
    cum[c] = tot;
  }
  PointSet P;
  for (int i = 0; i < n; ++i) {
    ColoredWeightedPoint p;
    p.pt.dim = dim;
    p.pt.id = i;
    for (int d = 0; d < dim; ++d) p.pt.x[d] = rng.uniform(0, 1);
    double u = rng.uniform(0, tot);
    p.color = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (p.color >= F) p.color = F - 1;
    P.push_back(p);
  }
  return P;
}

// halfspace through a projection quantile so answer sizes span everything
Range quantile_halfspace(const PointSet& P, int dim, Rng& rng) {
  std::array<double, 3> nrm{0, 0, 0};
  double len = 0;
  while (len < 1e-9) {
    for (int d = 0; d < dim; ++d) nrm[d] = rng.normal();
    len = 0;
    for (int d = 0; d < dim; ++d) len += nrm[d] * nrm[d];
    len = std::sqrt(len);
  }
  for (int d = 0; d < dim; ++d) nrm[d] /= len;
  std::vector<double> proj;
  proj.reserve(P.size());
  for (const auto& p : P) {
    double v = 0;
    for (int d = 0; d < dim; ++d) v += nrm[d] * p.pt.x[d];
    proj.push_back(v);
  }
  double u = rng.uniform(0, 1);
  size_t rank = static_cast<size_t>(u * u * u * (proj.size() - 1));
  std::nth_element(proj.begin(), proj.begin() + rank, proj.end());
  double off = proj[rank] + rng.uniform(-1e-4, 1e-4);
  if (dim == 2) return Range::halfspace2(nrm[0], nrm[1], off);
  return Range::halfspace3(nrm[0], nrm[1], nrm[2], off);
}

Range quantile_dominance(const PointSet& P, int dim, Rng& rng) {
  Point c;
  c.dim = dim;
  if (rng.uniform(0, 1) < 0.5) {
    for (int d = 0; d < dim; ++d) c.x[d] = rng.uniform(-0.05, 1.1);
  } else {
    // corner just above a random data point: answers of every size
    const auto& p = P[rng.uniform_int(0, static_cast<std::int64_t>(P.size()) - 1)];
    for (int d = 0; d < dim; ++d) c.x[d] = p.pt.x[d] + rng.uniform(0, 0.15);
  }
  return Range::dominance(c);
}

Range random_query(const PointSet& P, Family fam, Rng& rng) {
  int dim = family_dim(fam);
  return family_is_dominance(fam) ? quantile_dominance(P, dim, rng)
                                  : quantile_halfspace(P, dim, rng);
}

void check_bijection(const BaseAhhsStructure& s) {
  for (size_t l = 0; l < s.big_global.size(); ++l)
    CHECK(s.big_local[s.big_global[l]] == static_cast<int>(l));
  for (int c = 0; c < s.F; ++c) {
    if (s.big_local[c] >= 0) {
      CHECK(s.big_global[s.big_local[c]] == c);
      CHECK(s.small_tier_of[c] == -1);
    }
    if (s.small_tier_of[c] >= 0) {
      CHECK(s.tiers[s.small_tier_of[c]].global[s.small_local[c]] == c);
      CHECK(s.big_local[c] == -1);
    }
  }
  for (size_t t = 0; t < s.tiers.size(); ++t)
    for (size_t l = 0; l < s.tiers[t].global.size(); ++l) {
      CHECK(s.small_tier_of[s.tiers[t].global[l]] == static_cast<int>(t));
      CHECK(s.small_local[s.tiers[t].global[l]] == static_cast<int>(l));
    }
}

}  // namespace

TEST_CASE("base summary: single color is exact") {
  Rng rng(301);
  auto P = zipf_colored(500, 2, 1, rng);
  auto s = build_base(P, 0.1, Family::kHalfplane2D);
  for (int it = 0; it < 200; ++it) {
    Range q = quantile_halfspace(P, 2, rng);
    auto truth = oracle::oracle_type2(P, q, 1);
    auto est = query_base_all(s, q);
    CHECK(est[0] == doctest::Approx(static_cast<double>(truth[0])).epsilon(1e-12));
  }
}

TEST_CASE("base summary: zipf palette within eps * n") {
  Rng rng(302);
  int n = 5000, F = 80;
  double eps = 0.05;
  auto P = zipf_colored(n, 2, F, rng);
  auto s = build_base(P, eps, Family::kHalfplane2D);
  check_bijection(s);
  double X = eps * n;
  for (int it = 0; it < 500; ++it) {
    Range q = quantile_halfspace(P, 2, rng);
    auto truth = oracle::oracle_type2(P, q, F);
    auto est = query_base_all(s, q);
    for (int c = 0; c < F; ++c)
      CHECK(std::fabs(est[c] - static_cast<double>(truth[c])) <= X + 1e-7);
    auto rep = query_base(s, q);
    std::set<int> got;
    for (auto& [c, v] : rep) {
      got.insert(c);
      CHECK(std::fabs(v - static_cast<double>(truth[c])) <= X + 1e-7);
    }
    for (int c = 0; c < F; ++c)
      if (static_cast<double>(truth[c]) > X) CHECK(got.count(c) == 1);
  }
}

TEST_CASE("base summary: all colors sitting exactly on the budget") {
  Rng rng(303);
  int per = 100, F = 20;
  double eps = 0.05;  // eps * n = per exactly
  PointSet P;
  for (int c = 0; c < F; ++c)
    for (int i = 0; i < per; ++i) {
      ColoredWeightedPoint p;
      p.pt = make_point2(rng.uniform(0, 1), rng.uniform(0, 1), c * per + i);
      p.color = c;
      P.push_back(p);
    }
  auto s = build_base(P, eps, Family::kHalfplane2D);
  double X = eps * static_cast<double>(P.size());
  // everything in range: sampled colors report their full count exactly
  Range all = Range::halfspace2(0, 1, 2.0);
  auto est = query_base_all(s, all);
  for (int c = 0; c < F; ++c) CHECK(est[c] == doctest::Approx(per).epsilon(1e-9));
  for (int it = 0; it < 200; ++it) {
    Range q = quantile_halfspace(P, 2, rng);
    auto truth = oracle::oracle_type2(P, q, F);
    auto e = query_base_all(s, q);
    for (int c = 0; c < F; ++c)
      CHECK(std::fabs(e[c] - static_cast<double>(truth[c])) <= X + 1e-7);
  }
  // empty query reports nothing
  CHECK(query_base(s, Range::halfspace2(0, 1, -2.0)).empty());
}

TEST_CASE("base summary: dominance family") {
  Rng rng(304);
  int n = 3000, F = 40;
  double eps = 0.05;
  auto P = zipf_colored(n, 3, F, rng);
  auto s = build_base(P, eps, Family::kDominance3D);
  double X = eps * n;
  for (int it = 0; it < 300; ++it) {
    Range q = quantile_dominance(P, 3, rng);
    auto truth = oracle::oracle_type2(P, q, F);
    auto est = query_base_all(s, q);
    for (int c = 0; c < F; ++c)
      CHECK(std::fabs(est[c] - static_cast<double>(truth[c])) <= X + 1e-7);
  }
}

TEST_CASE("planar base: frequent color at half the set") {
  Rng rng(305);
  int n = 200;
  double eps = 0.05;  // frequency threshold eps^2 n^2 = 100 = n / 2
  PointSet P;
  for (int i = 0; i < n; ++i) {
    ColoredWeightedPoint p;
    p.pt = make_point2(rng.uniform(0, 1), rng.uniform(0, 1), i);
    p.color = i < n / 2 ? 0 : 1 + static_cast<int>(rng.uniform_int(0, 3));
    P.push_back(p);
  }
  auto s = build_base2d(P, eps, Config(), 7);
  CHECK(s.freq_local[0] >= 0);  // the dominant color is tracked by sampling
  double B = eps * n;
  std::vector<int> all_c = {0, 1, 2, 3, 4};
  for (int it = 0; it < 400; ++it) {
    Range q = quantile_halfspace(P, 2, rng);
    auto truth = oracle::oracle_type2(P, q, 5);
    for (auto& [c, v] : query_base2d(s, q, all_c))
      CHECK(std::fabs(v - static_cast<double>(truth[c])) <= B + 1e-7);
  }
  // below everything: all zero
  for (auto& [c, v] : query_base2d(s, Range::halfspace2(0, 1, -5.0), all_c))
    CHECK(v == 0.0);
}

TEST_CASE("planar base: exhaustive over canonical halfplanes") {
  Rng rng(306);
  int n = 200, F = 6;
  double eps = 0.05;
  auto P = zipf_colored(n, 2, F, rng, 0.8);
  auto s = build_base2d(P, eps, Config(), 11);
  double B = eps * n;
  CHECK(F <= s.fcap);
  // every crossing set stays within the cap
  for (const auto& ds : s.side)
    for (const auto& cell : ds.cells)
      CHECK(static_cast<int>(cell.conflict.size()) <= 2 * s.fcap + 8);
  std::vector<int> all_c(F);
  for (int c = 0; c < F; ++c) all_c[c] = c;
  std::vector<Point> plain;
  for (const auto& p : P) plain.push_back(p.pt);
  auto ranges = enumerate_canonical_ranges(plain, Family::kHalfplane2D);
  for (const auto& q : ranges) {
    auto truth = oracle::oracle_type2(P, q, F);
    for (auto& [c, v] : query_base2d(s, q, all_c))
      CHECK(std::fabs(v - static_cast<double>(truth[c])) <= B + 1e-7);
  }
  // oversized candidate sets are rejected
  std::vector<int> big(s.fcap + 1, 0);
  CHECK_THROWS_AS(query_base2d(s, Range::halfspace2(0, 1, 0.5), big), input_error);
}

static void contract_roundtrip(Family fam, int n, double eps0, int F, int queries,
                               std::uint64_t seed) {
  Rng rng(seed);
  int dim = family_dim(fam);
  auto P = zipf_colored(n, dim, F, rng);
  auto idx = build_ahhs(P, eps0, fam, Config(), seed + 1);
  double cap = 8.0 / (Config().c1 * eps0) + 1;
  int paths[4] = {0, 0, 0, 0};
  for (int it = 0; it < queries; ++it) {
    Range q = random_query(P, fam, rng);
    AhhsQueryTrace tr;
    auto res = query_ahhs(idx, q, &tr);
    ++paths[tr.path];
    auto rep = oracle::report(P, q, F);
    double budget = eps0 * static_cast<double>(rep.k);
    CHECK(static_cast<double>(res.size()) <= cap);
    std::map<int, double> got(res.begin(), res.end());
    CHECK(got.size() == res.size());  // no duplicate colors
    for (auto& [c, v] : got) {
      REQUIRE(c >= 0);
      REQUIRE(c < F);
      CHECK(std::fabs(v - static_cast<double>(rep.freq[c])) <= budget + 1e-6);
    }
    for (int c = 0; c < F; ++c) {
      if (rep.freq[c] > 0 && static_cast<double>(rep.freq[c]) >= budget) {
        CHECK(got.count(c) == 1);
        if (tr.path >= 2)  // the candidate list must already hold every heavy color
          CHECK(std::binary_search(tr.candidates.begin(), tr.candidates.end(), c));
      }
    }
  }
  std::printf("contract %d-d %s n=%d eps0=%.3g paths scan/base/est/coarse = %d/%d/%d/%d\n",
              dim, family_is_dominance(fam) ? "dominance" : "halfspace", n, eps0,
              paths[0], paths[1], paths[2], paths[3]);
  CHECK(paths[1] > 0);
  CHECK(paths[2] + paths[3] > 0);
}

TEST_CASE("heavy hitters: halfplane contract") {
  contract_roundtrip(Family::kHalfplane2D, 6000, 0.1, 60, 700, 401);
  contract_roundtrip(Family::kHalfplane2D, 6000, 0.02, 60, 700, 402);
}

TEST_CASE("heavy hitters: halfspace contract") {
  contract_roundtrip(Family::kHalfspace3D, 3000, 0.1, 60, 500, 403);
  contract_roundtrip(Family::kHalfspace3D, 3000, 0.02, 60, 500, 404);
}

TEST_CASE("heavy hitters: planar dominance contract") {
  contract_roundtrip(Family::kDominance2D, 20000, 0.1, 60, 700, 405);
  contract_roundtrip(Family::kDominance2D, 20000, 0.02, 60, 700, 406);
}

TEST_CASE("heavy hitters: dominance contract") {
  contract_roundtrip(Family::kDominance3D, 20000, 0.1, 60, 700, 407);
  contract_roundtrip(Family::kDominance3D, 20000, 0.02, 60, 700, 408);
}

TEST_CASE("heavy hitters: small instances and exact mode") {
  Rng rng(409);
  auto P = zipf_colored(100, 3, 8, rng);
  auto idx = build_ahhs(P, 0.5, Family::kDominance3D);
  CHECK_FALSE(idx.exact_mode);
  for (int it = 0; it < 200; ++it) {
    Range q = quantile_dominance(P, 3, rng);
    auto res = query_ahhs(idx, q);
    auto hh = oracle::oracle_heavy_hitters(P, q, 0.5);
    std::map<int, double> got(res.begin(), res.end());
    for (auto& [c, f] : hh) CHECK(got.count(c) == 1);
  }

  // eps0 below 1/n: every query is answered exactly from the base cutting
  auto P2 = zipf_colored(300, 3, 8, rng);
  auto ex = build_ahhs(P2, 1e-3, Family::kDominance3D);
  CHECK(ex.exact_mode);
  CHECK(ex.ori[0].lower.empty());
  CHECK(ex.ori[0].higher.empty());
  CHECK(ex.ori[0].testing.empty());
  for (int it = 0; it < 200; ++it) {
    Range q = quantile_dominance(P2, 3, rng);
    auto rep = oracle::report(P2, q, 8);
    auto res = query_ahhs(ex, q);
    std::map<int, double> got(res.begin(), res.end());
    for (int c = 0; c < 8; ++c) {
      if (rep.freq[c] > 0) {
        REQUIRE(got.count(c) == 1);
        CHECK(got[c] == doctest::Approx(static_cast<double>(rep.freq[c])));
      }
    }
  }

  // vertical boundary halfplanes take the exact fallback
  auto P3 = zipf_colored(400, 2, 6, rng);
  auto hx = build_ahhs(P3, 0.1, Family::kHalfplane2D);
  for (double off : {0.25, 0.5, 0.75}) {
    Range q = Range::halfspace2(1, 0, off);
    auto rep = oracle::report(P3, q, 6);
    std::map<int, double> got;
    for (auto& [c, v] : query_ahhs(hx, q)) got[c] = v;
    for (int c = 0; c < 6; ++c)
      if (rep.freq[c] > 0 &&
          static_cast<double>(rep.freq[c]) >= 0.1 * static_cast<double>(rep.k)) {
        REQUIRE(got.count(c) == 1);
        CHECK(got[c] == doctest::Approx(static_cast<double>(rep.freq[c])));
      }
  }

  // off-the-data query: empty result
  Point far3;
  far3.dim = 3;
  far3.x = {-5, -5, -5};
  CHECK(query_ahhs(idx, Range::dominance(far3)).empty());
}

TEST_CASE("heavy hitters: renumbering inside the index") {
  Rng rng(410);
  auto P = zipf_colored(4000, 3, 30, rng);
  auto idx = build_ahhs(P, 0.05, Family::kDominance3D);
  REQUIRE_FALSE(idx.ori[0].lower.empty());
  REQUIRE(idx.est_base.has_value());
  check_bijection(*idx.est_base);
  for (const auto& t : idx.ori[0].lower) {
    CHECK(t.frequent.size() == t.level.cells.size());
    for (const auto& fr : t.frequent) CHECK(std::is_sorted(fr.begin(), fr.end()));
  }
  for (const auto& t : idx.ori[0].testing)
    for (const auto& cd : t.candidates) CHECK(std::is_sorted(cd.begin(), cd.end()));
}

static double audit_slope(Family fam, int n0, double eps0, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> bits;
  for (int i = 0; i <= 4; ++i) {
    int n = n0 << i;
    auto P = zipf_colored(n, family_dim(fam), 48, rng);
    auto idx = build_ahhs(P, eps0, fam, Config(), seed + i);
    bits.push_back(std::log2(static_cast<double>(memory_footprint(idx))));
  }
  double slope = (bits.back() - bits.front()) / 4.0;
  std::printf("space audit %s n=%d..%d eps0=%.3g slope=%.3f\n",
              family_is_dominance(fam) ? "dominance" : "halfspace", n0, n0 << 4, eps0,
              slope);
  return slope;
}

TEST_CASE("heavy hitters: near-linear space across doublings") {
  double s1 = audit_slope(Family::kDominance3D, 2000, 0.02, 501);
  CHECK(s1 >= 0.9);
  CHECK(s1 <= 1.15);
  double s2 = audit_slope(Family::kDominance2D, 2000, 0.02, 502);
  CHECK(s2 >= 0.9);
  CHECK(s2 <= 1.15);
  double s3 = audit_slope(Family::kHalfplane2D, 1000, 0.02, 503);
  CHECK(s3 >= 0.9);
  CHECK(s3 <= 1.15);
  double s4 = audit_slope(Family::kHalfspace3D, 1500, 0.02, 504);
  CHECK(s4 >= 0.9);
  CHECK(s4 <= 1.15);
}
