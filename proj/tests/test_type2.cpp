#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "rs/oracle.hpp"
#include "rs/type2.hpp"

using namespace rs;

namespace {

PointSet random_colored(int n, int dim, int F, Rng& rng) {
  PointSet P;
  for (int i = 0; i < n; ++i) {
    ColoredWeightedPoint p;
    p.pt.dim = dim;
    p.pt.id = i;
    for (int d = 0; d < dim; ++d) p.pt.x[d] = rng.uniform(0, 1);
    p.color = static_cast<int>(rng.uniform_int(0, F - 1));
    P.push_back(p);
  }
  return P;
}

Range random_halfplane(Rng& rng) {
  double ang = rng.uniform(0, 6.283185307179586);
  return Range::halfspace2(std::cos(ang), std::sin(ang), rng.uniform(-1.5, 1.5));
}

Range random_simplex3(Rng& rng) {
  std::vector<Range> faces;
  for (int f = 0; f < 4; ++f) {
    double nx = rng.normal(), ny = rng.normal(), nz = rng.normal();
    if (nx == 0 && ny == 0 && nz == 0) nx = 1;
    faces.push_back(Range::halfspace3(nx, ny, nz, rng.uniform(-0.5, 1.5)));
  }
  return Range::simplex(faces);
}

bool match(const PackedFrequencyVector& got, const std::vector<std::int64_t>& want) {
  auto d = decode(got);
  if (d.size() != want.size()) return false;
  for (size_t i = 0; i < d.size(); ++i)
    if (d[i] != static_cast<std::uint64_t>(want[i])) return false;
  return true;
}

// decoded parent vector equals the sum over children, recursively
void check_conservation(const PartitionTreeNode& nd) {
  if (nd.is_leaf()) {
    std::vector<std::uint64_t> c(nd.F, 0);
    for (const auto& p : nd.pts) ++c[p.color];
    CHECK(decode(nd.freq) == c);
    return;
  }
  std::vector<std::uint64_t> sum(nd.F, 0);
  for (const auto& ch : nd.children) {
    auto f = decode(ch.freq);
    for (int i = 0; i < nd.F; ++i) sum[i] += f[i];
    check_conservation(ch);
  }
  CHECK(decode(nd.freq) == sum);
}

int count_crossed(const PartitionTreeNode& nd, const Range& q) {
  if (detail::range_misses_box(q, nd.lo.data(), nd.hi.data())) return 0;
  if (detail::range_covers_box(q, nd.lo.data(), nd.hi.data())) return 0;
  int c = 1;
  for (const auto& ch : nd.children) c += count_crossed(ch, q);
  return c;
}

int count_nodes(const PartitionTreeNode& nd) {
  int c = 1;
  for (const auto& ch : nd.children) c += count_nodes(ch);
  return c;
}

}  // namespace

TEST_CASE("partition tree: single point") {
  PointSet P;
  ColoredWeightedPoint p;
  p.pt = make_point2(0.5, 0.5, 0);
  p.color = 2;
  P.push_back(p);
  auto t = build_partition_type2(P, 4, 64);
  CHECK(t.is_leaf());
  CHECK(match(query_partition_type2(t, Range::halfspace2(0, 1, 1.0)),
              {0, 0, 1, 0}));
  CHECK(match(query_partition_type2(t, Range::halfspace2(0, 1, 0.2)),
              {0, 0, 0, 0}));
}

TEST_CASE("partition tree: single color equals plain counting") {
  Rng rng(91);
  auto P = random_colored(800, 2, 1, rng);
  auto t = build_partition_type2(P, 1, 64);
  std::vector<Point> pts;
  for (const auto& p : P) pts.push_back(p.pt);
  KdTree kt(pts);
  for (int it = 0; it < 300; ++it) {
    Range q = random_halfplane(rng);
    CHECK(static_cast<std::int64_t>(decode(query_partition_type2(t, q))[0]) ==
          kt.count(q));
  }
}

TEST_CASE("partition tree: halfplane queries exact, n=2000, F=50") {
  Rng rng(92);
  auto P = random_colored(2000, 2, 50, rng);
  auto t = build_partition_type2(P, 50, 64);
  for (int it = 0; it < 500; ++it) {
    Range q = random_halfplane(rng);
    CHECK(match(query_partition_type2(t, q), oracle::oracle_type2(P, q, 50)));
  }
}

TEST_CASE("partition tree: simplex and dominance queries exact") {
  Rng rng(93);
  auto P = random_colored(1200, 3, 12, rng);
  auto t = build_partition_type2(P, 12, 64);

  // empty and all-covering ranges
  CHECK(decode(query_partition_type2(t, Range::halfspace3(0, 0, 1, -5.0))) ==
        std::vector<std::uint64_t>(12, 0));
  auto full = decode(query_partition_type2(t, Range::halfspace3(0, 0, 1, 5.0)));
  std::uint64_t tot = 0;
  for (auto f : full) tot += f;
  CHECK(tot == 1200);

  for (int it = 0; it < 200; ++it) {
    Range q = random_simplex3(rng);
    CHECK(match(query_partition_type2(t, q), oracle::oracle_type2(P, q, 12)));
  }
  for (int it = 0; it < 200; ++it) {
    Point c = make_point3(rng.uniform(0, 1.2), rng.uniform(0, 1.2), rng.uniform(0, 1.2));
    Range q = Range::dominance(c);
    CHECK(match(query_partition_type2(t, q), oracle::oracle_type2(P, q, 12)));
  }
}

TEST_CASE("partition tree: parent-child frequency conservation") {
  Rng rng(94);
  auto P = random_colored(1500, 3, 20, rng);
  auto t = build_partition_type2(P, 20, 64);
  check_conservation(t);
}

TEST_CASE("partition tree: crossing-number audit") {
  Rng rng(95);
  auto P = random_colored(4096, 2, 8, rng);
  auto t = build_partition_type2(P, 8, 64);
  int nodes = count_nodes(t);
  std::vector<int> crossings;
  for (int it = 0; it < 1000; ++it) {
    // boundary through a random interior point, so every line truly cuts
    double ang = rng.uniform(0, 6.283185307179586);
    double nx = std::cos(ang), ny = std::sin(ang);
    double px = rng.uniform(0.1, 0.9), py = rng.uniform(0.1, 0.9);
    crossings.push_back(count_crossed(t, Range::halfspace2(nx, ny, nx * px + ny * py)));
  }
  std::sort(crossings.begin(), crossings.end());
  double median = crossings[crossings.size() / 2];
  double bound = std::sqrt(static_cast<double>(nodes)) *
                 std::log2(static_cast<double>(nodes));
  double c = median / bound;
  std::printf("crossing audit: nodes=%d median=%.0f t^(1/2)log t=%.1f c=%.3f\n", nodes,
              median, bound, c);
  CHECK(c <= 4.0);  // generous audit cap; measured c is the real report
}

TEST_CASE("grid type-2: 2x2x2 grid, two colors, exhaustive corners") {
  PointSet P;
  int id = 0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) {
        ColoredWeightedPoint p;
        p.pt = make_point3(x, y, z, id++);
        p.color = (x + y + z) % 2;
        P.push_back(p);
      }
  auto s = build_grid_type2(P, 2, 0.25);
  for (double qx : {-0.5, 0.0, 0.5, 1.0, 1.5})
    for (double qy : {-0.5, 0.0, 0.5, 1.0, 1.5})
      for (double qz : {-0.5, 0.0, 0.5, 1.0, 1.5}) {
        Point q = make_point3(qx, qy, qz);
        CHECK(match(query_grid_type2(*s, q),
                    oracle::oracle_type2(P, Range::dominance(q), 2)));
      }
}

TEST_CASE("grid type-2: single color equals dominance counting") {
  Rng rng(96);
  auto P = random_colored(400, 3, 1, rng);
  auto s = build_grid_type2(P, 1, 0.25);
  std::vector<Point> pts;
  for (const auto& p : P) pts.push_back(p.pt);
  KdTree kt(pts);
  for (int it = 0; it < 300; ++it) {
    Point q = make_point3(rng.uniform(-0.1, 1.1), rng.uniform(-0.1, 1.1),
                          rng.uniform(-0.1, 1.1));
    CHECK(static_cast<std::int64_t>(decode(query_grid_type2(*s, q))[0]) ==
          kt.count(Range::dominance(q)));
  }
}

TEST_CASE("grid type-2: eta=1/4 at N=4096 terminates shallow and exact") {
  Rng rng(97);
  auto P = random_colored(4096, 3, 6, rng);
  auto s = build_grid_type2(P, 6, 0.25);
  // N -> N^(2/3) per level until below N^eta: ceil(log(eta)/log(2/3)) levels
  CHECK(s->depth <= 5);
  for (int it = 0; it < 1000; ++it) {
    Point q = make_point3(rng.uniform(0, 1.2), rng.uniform(0, 1.2), rng.uniform(0, 1.2));
    CHECK(match(query_grid_type2(*s, q),
                oracle::oracle_type2(P, Range::dominance(q), 6)));
  }
  // extremes
  CHECK(decode(query_grid_type2(*s, make_point3(-1, -1, -1))) ==
        std::vector<std::uint64_t>(6, 0));
  auto full = decode(query_grid_type2(*s, make_point3(2, 2, 2)));
  std::uint64_t tot = 0;
  for (auto f : full) tot += f;
  CHECK(tot == 4096);
}

TEST_CASE("grid type-2: duplicate-heavy coordinates stay exact") {
  Rng rng(98);
  PointSet P;
  for (int i = 0; i < 600; ++i) {
    ColoredWeightedPoint p;
    p.pt = make_point3(rng.uniform_int(0, 4), rng.uniform_int(0, 4), rng.uniform_int(0, 4), i);
    p.color = static_cast<int>(rng.uniform_int(0, 3));
    P.push_back(p);
  }
  auto s = build_grid_type2(P, 4, 0.3);
  for (int it = 0; it < 400; ++it) {
    Point q = make_point3(rng.uniform_int(-1, 5), rng.uniform_int(-1, 5),
                          rng.uniform_int(-1, 5));
    CHECK(match(query_grid_type2(*s, q),
                oracle::oracle_type2(P, Range::dominance(q), 4)));
  }
}

TEST_CASE("grid type-2: palette cap is enforced") {
  Rng rng(99);
  auto P = random_colored(8, 3, 4, rng);
  CHECK_THROWS_AS(build_grid_type2(P, kGridColorCap + 1, 0.25), input_error);
}
