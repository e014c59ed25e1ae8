#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "rs/geometry.hpp"

namespace rs {
namespace oracle {

// Ground truth by linear scan. Deliberately shares no code with the index
// modules beyond the Range/Point types and the contains() predicate.

struct OracleReport {
  std::vector<std::int64_t> freq;    // per color, size F
  std::vector<double> weights;       // sorted weights of the query subset
  std::vector<std::int64_t> weight_ids;  // ids in the same (weight, id) order
  std::int64_t k = 0;
};

inline OracleReport report(const PointSet& P, const Range& q, int F) {
  OracleReport r;
  r.freq.assign(std::max(F, 0), 0);
  std::vector<std::pair<double, std::int64_t>> w;
  for (const auto& p : P) {
    if (!contains(q, p.pt)) continue;
    ++r.k;
    if (p.color >= 0) {
      if (p.color >= static_cast<int>(r.freq.size())) r.freq.resize(p.color + 1, 0);
      ++r.freq[p.color];
    }
    if (p.has_weight) w.emplace_back(p.weight, p.pt.id);
  }
  std::sort(w.begin(), w.end());
  r.weights.reserve(w.size());
  r.weight_ids.reserve(w.size());
  for (auto& [wt, id] : w) {
    r.weights.push_back(wt);
    r.weight_ids.push_back(id);
  }
  // internal consistency
  std::int64_t sum = 0;
  for (auto f : r.freq) sum += f;
  if (!r.freq.empty() && sum > r.k) throw integrity_error("oracle: frequencies exceed k");
  for (size_t i = 1; i < r.weights.size(); ++i)
    if (r.weights[i] < r.weights[i - 1]) throw integrity_error("oracle: weights unsorted");
  return r;
}

inline std::vector<std::int64_t> oracle_type2(const PointSet& P, const Range& q, int F) {
  return report(P, q, F).freq;
}

// colors with exact frequency >= eps * k
inline std::vector<std::pair<int, std::int64_t>> oracle_heavy_hitters(const PointSet& P,
                                                                      const Range& q,
                                                                      double eps) {
  auto rep = report(P, q, 0);
  std::vector<std::pair<int, std::int64_t>> out;
  double thresh = eps * static_cast<double>(rep.k);
  for (int c = 0; c < static_cast<int>(rep.freq.size()); ++c)
    if (rep.freq[c] > 0 && static_cast<double>(rep.freq[c]) >= thresh) out.emplace_back(c, rep.freq[c]);
  return out;
}

// exact i*eps-quantiles, i = 0 .. ceil(1/eps); empty when the subset is empty
inline std::vector<double> oracle_quantiles(const PointSet& P, const Range& q, double eps) {
  auto rep = report(P, q, 0);
  if (rep.weights.empty()) return {};
  std::int64_t k = static_cast<std::int64_t>(rep.weights.size());
  int t = static_cast<int>(std::ceil(1.0 / eps));
  std::vector<double> out;
  out.reserve(t + 1);
  for (int i = 0; i <= t; ++i) {
    std::int64_t r = static_cast<std::int64_t>(std::floor(i * eps * static_cast<double>(k)));
    r = std::min<std::int64_t>(r, k - 1);
    out.push_back(rep.weights[r]);
  }
  return out;
}

// 0-indexed rank of (weight, id) within the query subset, ties by (weight, id);
// with the default id every point weighing exactly `weight` counts as after it.
inline std::int64_t rank_of(const PointSet& P, const Range& q, double weight,
                            std::int64_t id = std::numeric_limits<std::int64_t>::min()) {
  std::int64_t r = 0;
  for (const auto& p : P)
    if (p.has_weight && contains(q, p.pt) && lex_less(p.weight, p.pt.id, weight, id)) ++r;
  return r;
}

}  // namespace oracle
}  // namespace rs
