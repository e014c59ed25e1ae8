#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "rs/cuttings.hpp"

using namespace rs;

namespace {

std::vector<Point> random_points(int n, int dim, Rng& rng, double lo = 0, double hi = 1) {
  std::vector<Point> P;
  for (int i = 0; i < n; ++i) {
    Point p;
    p.dim = dim;
    p.id = i;
    for (int d = 0; d < dim; ++d) p.x[d] = rng.uniform(lo, hi);
    P.push_back(p);
  }
  return P;
}

std::vector<Hyperplane> random_planes(int n, int dim, Rng& rng) {
  std::vector<Hyperplane> H;
  for (int i = 0; i < n; ++i) {
    Point p;
    p.dim = dim;
    p.id = i;
    for (int d = 0; d < dim; ++d) p.x[d] = rng.uniform(0, 1);
    H.push_back(dualize_point(p));
  }
  return H;
}

std::int64_t dom_level(const std::vector<Point>& P, const Point& q) {
  std::int64_t c = 0;
  for (const auto& p : P) {
    bool dom = true;
    for (int d = 0; d < q.dim; ++d) dom &= (p.x[d] <= q.x[d]);
    c += dom;
  }
  return c;
}

bool covered_dominance(const std::vector<ShallowCuttingCell>& cells, const Point& q) {
  for (const auto& c : cells)
    if (contains(Range::dominance(c.corner), q)) return true;
  return false;
}

// membership in a halfspace cutting level (3D: argmin base column then ceiling)
bool covered_halfspace(const std::vector<ShallowCuttingCell>& cells, Family fam,
                       const Point& q) {
  CuttingLevel lv;
  lv.cells = cells;
  return locate_in_level(lv, fam, q) >= 0;
}

// a query point at a given brute-force level: z just below the l-th smallest
// plane value over a random column
Point point_at_level(const std::vector<Hyperplane>& H, double x, double y, int l) {
  Point q = H[0].dim == 2 ? make_point2(x, 0) : make_point3(x, y, 0);
  std::vector<double> v;
  for (const auto& h : H) v.push_back(h.eval(q));  // same rounding as level()
  std::sort(v.begin(), v.end());
  q.x[q.dim - 1] = detail::next_below(v[l - 1]);
  return q;
}

}  // namespace

TEST_CASE("single plane, k=1: one whole-column cell") {
  std::vector<Hyperplane> H = {dualize_point(make_point3(0.3, 0.4, 0.5, 0))};
  auto cells = build_shallow_cutting(H, 1, Family::kHalfspace3D);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].conflict == std::vector<int>{0});
  // the whole space is covered: n <= 2k forces an infinite ceiling
  for (double x : {-5.0, 0.0, 7.0})
    CHECK(covered_halfspace(cells, Family::kHalfspace3D, make_point3(x, x, 100 * x)));
}

TEST_CASE("3D halfspace cutting: coverage and conflict bounds") {
  Rng rng(71);
  Config cfg;
  auto H = random_planes(200, 3, rng);
  std::int64_t k = 20;
  auto cells = build_shallow_cutting(H, k, Family::kHalfspace3D, cfg, 5);
  CHECK(cells.size() <= static_cast<size_t>(cfg.c_sz * 200 / k));
  for (const auto& c : cells) CHECK(c.conflict.size() <= static_cast<size_t>(cfg.c_cl * k));

  int covered = 0, total = 0;
  for (int it = 0; it < 4000; ++it) {
    double x = rng.uniform(-0.5, 1.5), y = rng.uniform(-0.5, 1.5);
    int l = 1 + static_cast<int>(rng.uniform_int(0, k - 1));
    Point q = point_at_level(H, x, y, l);
    REQUIRE(level(H, q) < l);  // strictly below the l-th plane
    ++total;
    covered += covered_halfspace(cells, Family::kHalfspace3D, q);
  }
  CHECK(covered == total);

  // conflict-list correctness: planes below a covered query all sit in its cell
  CuttingLevel lv{k, cells};
  for (int it = 0; it < 200; ++it) {
    double x = rng.uniform(-0.5, 1.5), y = rng.uniform(-0.5, 1.5);
    Point q = point_at_level(H, x, y, 1 + static_cast<int>(rng.uniform_int(0, k - 1)));
    int ci = locate_in_level(lv, Family::kHalfspace3D, q);
    REQUIRE(ci >= 0);
    std::set<int> conf(cells[ci].conflict.begin(), cells[ci].conflict.end());
    for (int j = 0; j < 200; ++j)
      if (H[j].eval(q) <= q.x[2]) CHECK(conf.count(j) == 1);
  }
}

TEST_CASE("2D halfplane cutting: exact coverage including far columns") {
  Rng rng(72);
  Config cfg;
  std::vector<Hyperplane> H;
  for (int i = 0; i < 300; ++i) {
    Point p;
    p.dim = 2;
    p.id = i;
    p.x = {rng.uniform(0, 1), rng.uniform(0, 1), 0, 0};
    H.push_back(dualize_point(p));
  }
  std::int64_t k = 15;
  auto cells = build_shallow_cutting(H, k, Family::kHalfplane2D, cfg, 9);
  CHECK(cells.size() <= static_cast<size_t>(cfg.c_sz * 300 / k));
  for (const auto& c : cells) CHECK(c.conflict.size() <= static_cast<size_t>(cfg.c_cl * k));
  int covered = 0, total = 0;
  for (int it = 0; it < 4000; ++it) {
    // deliberately include columns far outside the data range
    double x = rng.uniform(-50, 51);
    int l = 1 + static_cast<int>(rng.uniform_int(0, k - 1));
    Point q = point_at_level(H, x, 0, l);
    ++total;
    covered += covered_halfspace(cells, Family::kHalfplane2D, q);
  }
  CHECK(covered == total);
  // conflict correctness on covered queries
  CuttingLevel lv{k, cells};
  for (int it = 0; it < 200; ++it) {
    double x = rng.uniform(-50, 51);
    Point q = point_at_level(H, x, 0, 1 + static_cast<int>(rng.uniform_int(0, k - 1)));
    int ci = locate_in_level(lv, Family::kHalfplane2D, q);
    REQUIRE(ci >= 0);
    std::set<int> conf(cells[ci].conflict.begin(), cells[ci].conflict.end());
    for (int j = 0; j < 300; ++j)
      if (H[j].eval(q) <= q.x[1]) CHECK(conf.count(j) == 1);
  }
}

TEST_CASE("dominance cutting: spec example n=100, k=10") {
  Rng rng(73);
  Config cfg;
  auto P = random_points(100, 3, rng);
  auto cells = build_shallow_cutting(P, 10, Family::kDominance3D, cfg);
  for (const auto& c : cells) {
    CHECK(c.conflict.size() <= static_cast<size_t>(cfg.c_cl * 10));
    CHECK(static_cast<std::int64_t>(c.conflict.size()) == dom_level(P, c.corner));
  }
  for (const auto& p : P)
    if (dom_level(P, p) <= 10) CHECK(covered_dominance(cells, p));
}

TEST_CASE("dominance cutting: exact coverage on larger instances") {
  Rng rng(74);
  Config cfg;
  for (auto [dim, fam] : {std::pair{2, Family::kDominance2D}, {3, Family::kDominance3D}}) {
    auto P = random_points(2000, dim, rng);
    std::int64_t k = 25;
    auto cells = build_shallow_cutting(P, k, fam, cfg);
    CHECK(cells.size() <= static_cast<size_t>(cfg.c_sz * 2000 / k));
    for (const auto& c : cells) CHECK(c.conflict.size() <= static_cast<size_t>(cfg.c_cl * k));
    int tried = 0;
    for (int it = 0; it < 8000 && tried < 2000; ++it) {
      Point q;
      q.dim = dim;
      for (int d = 0; d < dim; ++d) q.x[d] = rng.uniform(0, 0.6);
      if (dom_level(P, q) > k) continue;
      ++tried;
      CHECK(covered_dominance(cells, q));
    }
    CHECK(tried >= 300);
  }
}

TEST_CASE("dominance cutting is deterministic") {
  Rng rng(75);
  auto P = random_points(500, 3, rng);
  auto a = build_shallow_cutting(P, 12, Family::kDominance3D);
  auto b = build_shallow_cutting(P, 12, Family::kDominance3D);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].corner.x == b[i].corner.x);
    CHECK(a[i].conflict == b[i].conflict);
  }
}

TEST_CASE("locate: agreement with brute-force smallest covering level") {
  Rng rng(76);
  Config cfg;
  auto P = random_points(2000, 3, rng);
  auto h = build_hierarchy(P, Family::kDominance3D, 8, 2.0, cfg, 3);
  REQUIRE(h.levels.size() >= 3);
  for (size_t i = 1; i < h.levels.size(); ++i) CHECK(h.levels[i].k > h.levels[i - 1].k);
  CHECK(h.levels.back().k == 2000);

  for (int it = 0; it < 2000; ++it) {
    Point q;
    q.dim = 3;
    for (int d = 0; d < 3; ++d) q.x[d] = rng.uniform(0, 1.1);
    auto r = locate(h, q);
    // brute force: smallest level with a covering cell
    int want = -1;
    for (size_t i = 0; i < h.levels.size() && want < 0; ++i)
      if (covered_dominance(h.levels[i].cells, q)) want = static_cast<int>(i);
    REQUIRE(want >= 0);  // top level covers everything
    CHECK(r.top == false);
    CHECK(r.level == want);
    CHECK(contains(Range::dominance(h.levels[r.level].cells[r.cell].corner), q));
    // coverage contract: the true level exceeds the previous rung
    std::int64_t L = dom_level(P, q);
    if (r.level > 0) CHECK(L > h.levels[r.level - 1].k);
    CHECK(L <= static_cast<std::int64_t>(cfg.c_cl * h.levels[r.level].k));
  }
}

TEST_CASE("locate: level 0 and top sentinel") {
  Rng rng(77);
  auto P = random_points(300, 2, rng, 0.5, 1.0);
  auto hd = build_hierarchy(P, Family::kDominance2D, 5, 2.0, Config(), 3);
  auto rl = locate(hd, make_point2(0.4, 0.4));  // dominates nothing
  CHECK(rl.level == 0);
  CHECK(!rl.top);

  // halfplane hierarchy without its top levels: a sky-high dual point falls off
  std::vector<Hyperplane> H;
  for (int i = 0; i < 300; ++i) {
    Point p;
    p.dim = 2;
    p.id = i;
    p.x = {rng.uniform(0, 1), rng.uniform(0, 1), 0, 0};
    H.push_back(dualize_point(p));
  }
  auto hh = build_hierarchy(H, Family::kHalfplane2D, 5, 2.0, Config(), 3, false);
  while (hh.levels.size() > 3) hh.levels.pop_back();  // keep finite ceilings only
  auto rt = locate(hh, make_point2(0.5, 1e9));
  CHECK(rt.top);
  CHECK(rt.cell == -1);
  auto rb = locate(hh, make_point2(0.5, -1e9));  // below every line
  CHECK(rb.level == 0);
}

TEST_CASE("halfspace hierarchy locate agrees with brute force") {
  Rng rng(78);
  auto H = random_planes(400, 3, rng);
  auto h = build_hierarchy(H, Family::kHalfspace3D, 10, 2.0, Config(), 11);
  for (int it = 0; it < 500; ++it) {
    double x = rng.uniform(-0.5, 1.5), y = rng.uniform(-0.5, 1.5);
    Point q = point_at_level(H, x, y, 1 + static_cast<int>(rng.uniform_int(0, 399)));
    auto r = locate(h, q);
    int want = -1;
    for (size_t i = 0; i < h.levels.size() && want < 0; ++i)
      if (locate_in_level(h.levels[i], Family::kHalfspace3D, q) >= 0)
        want = static_cast<int>(i);
    REQUIRE(want >= 0);
    CHECK(r.level == want);
    if (r.level > 0) CHECK(level(H, q) > h.levels[r.level - 1].k);
  }
}

TEST_CASE("(1/r)-cutting: trivial and random instances") {
  Rng rng(79);
  std::vector<Hyperplane> H;
  for (int i = 0; i < 300; ++i) {
    Hyperplane l;
    l.dim = 2;
    l.id = i;
    l.a = {rng.uniform(-2, 2), rng.uniform(-1, 1), 0, 0};
    H.push_back(l);
  }
  Config cfg;

  auto one = build_cutting(H, 1.0, cfg);
  REQUIRE(one.size() == 1);
  CHECK(one[0].conflict.size() == 300);

  auto cells = build_cutting(H, 5.0, cfg, 7);
  CHECK(static_cast<double>(cells.size()) <= cfg.c_sz * 25);
  for (const auto& c : cells) {
    CHECK(c.conflict.size() <= 60u);
    // stored conflicts match a direct crossing scan; lines within roundoff of
    // the cell boundary (ancestor split lines) are allowed to go either way
    std::set<int> conf(c.conflict.begin(), c.conflict.end());
    for (int j = 0; j < 300; ++j) {
      double mn = kInf, mx = -kInf;
      for (const auto& v : c.verts) {
        double s = H[j].a[0] * v[0] + H[j].a[1] - v[1];
        mn = std::min(mn, s);
        mx = std::max(mx, s);
      }
      double tol = 1e-8 * (std::fabs(mn) + std::fabs(mx) + 1);
      if (mn < -tol && mx > tol) CHECK(conf.count(j) == 1);
      if (mn > tol || mx < -tol) CHECK(conf.count(j) == 0);
    }
  }
  // every point lands in some cell
  for (int it = 0; it < 2000; ++it) {
    double x = rng.uniform(-3, 3), y = rng.uniform(-3, 3);
    CHECK(locate_cutting_cell(cells, x, y) >= 0);
  }

  // r close to n: near-arrangement refinement still certifies
  std::vector<Hyperplane> small(H.begin(), H.begin() + 12);
  auto fine = build_cutting(small, 12.0, cfg, 13);
  for (const auto& c : fine) CHECK(c.conflict.size() <= 1u);
}

TEST_CASE("approx_count: ladder contract") {
  Rng rng(80);
  Config cfg;
  auto P = random_points(10000, 3, rng);
  ApproxCounter ac(P, cfg);

  Point none = make_point3(-1, -1, -1);
  CHECK(approx_count(ac, Range::dominance(none)) == 0);
  Point all = make_point3(2, 2, 2);
  std::int64_t full = approx_count(ac, Range::dominance(all));
  CHECK(full >= 5000);
  CHECK(full <= 15000);

  for (int it = 0; it < 1000; ++it) {
    Point q;
    q.dim = 3;
    for (int d = 0; d < 3; ++d) q.x[d] = rng.uniform(0, 1.2);
    Range r = Range::dominance(q);
    std::int64_t truth = 0;
    for (const auto& p : P) truth += contains(r, p);
    std::int64_t est = approx_count(ac, r);
    if (truth == 0) {
      CHECK(est == 0);
    } else {
      CHECK(2 * est >= truth);
      CHECK(2 * est <= 3 * truth);
    }
  }
  // halfspace ranges go through the same tree
  for (int it = 0; it < 100; ++it) {
    Range r = Range::halfspace3(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    std::int64_t truth = 0;
    for (const auto& p : P) truth += contains(r, p);
    std::int64_t est = approx_count(ac, r);
    if (truth == 0) {
      CHECK(est == 0);
    } else {
      CHECK(2 * est >= truth);
      CHECK(2 * est <= 3 * truth);
    }
  }
}
