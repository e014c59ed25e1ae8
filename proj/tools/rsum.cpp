#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rs/ahhs.hpp"
#include "rs/aqs.hpp"
#include "rs/oracle.hpp"

namespace {

// shortest round-trip decimal, so repeated runs are byte-identical
std::string fmt(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw rs::input_error(where + ": bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// ------------------------------ datasets ------------------------------

struct Dataset {
  int d = 2;
  bool has_color = false, has_weight = false;
  rs::PointSet pts;
};

int color_count(const Dataset& ds) {
  int f = 0;
  for (const auto& p : ds.pts) f = std::max(f, p.color + 1);
  return f;
}

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw rs::input_error("cannot open for writing: " + path);
  out << "# rangesummary v1 d=" << ds.d << " fields=x,y";
  if (ds.d == 3) out << ",z";
  if (ds.has_color) out << ",color";
  if (ds.has_weight) out << ",weight";
  out << "\n";
  for (const auto& p : ds.pts) {
    out << fmt(p.pt.x[0]) << "," << fmt(p.pt.x[1]);
    if (ds.d == 3) out << "," << fmt(p.pt.x[2]);
    if (ds.has_color) out << "," << p.color;
    if (ds.has_weight) out << "," << fmt(p.weight);
    out << "\n";
  }
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rs::input_error("cannot open dataset: " + path);
  std::string header;
  if (!std::getline(in, header)) throw rs::input_error(path + ":1: empty file");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  std::istringstream hs(header);
  std::string hash, name, vtok, dtok, ftok;
  hs >> hash >> name >> vtok >> dtok >> ftok;
  if (hash != "#" || name != "rangesummary" || vtok != "v1")
    throw rs::input_error(path + ":1: not a rangesummary v1 dataset");
  Dataset ds;
  if (dtok.rfind("d=", 0) != 0) throw rs::input_error(path + ":1: missing d=");
  ds.d = std::stoi(dtok.substr(2));
  if (ds.d != 2 && ds.d != 3) throw rs::input_error(path + ":1: d must be 2 or 3");
  if (ftok.rfind("fields=", 0) != 0) throw rs::input_error(path + ":1: missing fields=");
  auto fields = split(ftok.substr(7), ',');
  size_t want = ds.d;
  if (fields.size() < want || fields[0] != "x" || fields[1] != "y" ||
      (ds.d == 3 && fields[2] != "z"))
    throw rs::input_error(path + ":1: coordinate fields must be x,y" +
                          std::string(ds.d == 3 ? ",z" : ""));
  for (size_t i = want; i < fields.size(); ++i) {
    if (fields[i] == "color" && !ds.has_color && !ds.has_weight) ds.has_color = true;
    else if (fields[i] == "weight" && !ds.has_weight) ds.has_weight = true;
    else throw rs::input_error(path + ":1: unexpected field '" + fields[i] + "'");
  }
  size_t ncol = want + (ds.has_color ? 1 : 0) + (ds.has_weight ? 1 : 0);
  std::string line;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cols = split(line, ',');
    std::string where = path + ":" + std::to_string(lineno);
    if (cols.size() != ncol)
      throw rs::input_error(where + ": expected " + std::to_string(ncol) + " columns");
    rs::ColoredWeightedPoint p;
    p.pt.dim = ds.d;
    p.pt.id = static_cast<std::int64_t>(ds.pts.size());
    for (int i = 0; i < ds.d; ++i) p.pt.x[i] = parse_double(cols[i], where);
    size_t at = want;
    if (ds.has_color) {
      p.color = static_cast<int>(parse_double(cols[at++], where));
      if (p.color < 0) throw rs::input_error(where + ": negative color");
    }
    if (ds.has_weight) {
      p.weight = parse_double(cols[at], where);
      p.has_weight = true;
    }
    ds.pts.push_back(p);
  }
  if (ds.pts.empty()) throw rs::input_error(path + ": dataset has no points");
  return ds;
}

// ------------------------------ generation ------------------------------

struct GenSpec {
  std::int64_t n = 1000;
  int d = 2;
  std::string dist = "uniform";     // uniform | clustered | grid
  int clusters = 8;
  double sigma = 0.05;
  std::string colors = "uniform";   // none | uniform | zipf | planted
  int F = 16;
  double zipf_s = 1.0;
  std::string planted;              // "color:fraction,..."
  std::string weights = "uniform";  // none | uniform | sorted-correlated | discrete
  int levels = 8;
  std::uint64_t seed = 1;
};

Dataset generate(const GenSpec& g) {
  if (g.n <= 0) throw rs::input_error("gen: n must be positive");
  if (g.d != 2 && g.d != 3) throw rs::input_error("gen: d must be 2 or 3");
  Dataset ds;
  ds.d = g.d;
  ds.has_color = g.colors != "none";
  ds.has_weight = g.weights != "none";
  rs::Rng rng(g.seed);

  std::vector<std::array<double, 3>> centers;
  if (g.dist == "clustered") {
    if (g.clusters < 1) throw rs::input_error("gen: clusters must be >= 1");
    for (int c = 0; c < g.clusters; ++c) {
      std::array<double, 3> ctr{};
      for (int i = 0; i < g.d; ++i) ctr[i] = rng.uniform();
      centers.push_back(ctr);
    }
  }
  std::int64_t side = 1;
  if (g.dist == "grid") {
    while (side * side * (g.d == 3 ? side : 1) < g.n) ++side;
  } else if (g.dist != "uniform" && g.dist != "clustered") {
    throw rs::input_error("gen: unknown distribution '" + g.dist + "'");
  }

  std::vector<double> ccum;
  if (g.colors == "zipf") {
    double tot = 0;
    for (int c = 0; c < g.F; ++c) tot += std::pow(c + 1.0, -g.zipf_s);
    double acc = 0;
    for (int c = 0; c < g.F; ++c) {
      acc += std::pow(c + 1.0, -g.zipf_s) / tot;
      ccum.push_back(acc);
    }
  } else if (g.colors == "planted") {
    std::vector<double> frac(g.F, 0.0);
    double planted_mass = 0;
    for (const auto& tok : split(g.planted, ',')) {
      if (tok.empty()) continue;
      auto cv = split(tok, ':');
      if (cv.size() != 2) throw rs::input_error("gen: planted entry '" + tok + "'");
      int c = std::stoi(cv[0]);
      double f = parse_double(cv[1], "gen planted");
      if (c < 0 || c >= g.F || f < 0) throw rs::input_error("gen: planted entry '" + tok + "'");
      frac[c] += f;
      planted_mass += f;
    }
    if (planted_mass > 1.0 + 1e-9) throw rs::input_error("gen: planted fractions exceed 1");
    double rest = (1.0 - std::min(1.0, planted_mass)) / g.F;
    double acc = 0;
    for (int c = 0; c < g.F; ++c) {
      acc += frac[c] + rest;
      ccum.push_back(acc);
    }
  } else if (g.colors != "none" && g.colors != "uniform") {
    throw rs::input_error("gen: unknown color model '" + g.colors + "'");
  }
  if (ds.has_color && g.F < 1) throw rs::input_error("gen: F must be >= 1");

  if (g.weights != "none" && g.weights != "uniform" && g.weights != "sorted-correlated" &&
      g.weights != "discrete")
    throw rs::input_error("gen: unknown weight model '" + g.weights + "'");

  for (std::int64_t i = 0; i < g.n; ++i) {
    rs::ColoredWeightedPoint p;
    p.pt.dim = g.d;
    p.pt.id = i;
    if (g.dist == "uniform") {
      for (int j = 0; j < g.d; ++j) p.pt.x[j] = rng.uniform();
    } else if (g.dist == "clustered") {
      const auto& c = centers[static_cast<size_t>(rng.uniform_int(0, g.clusters - 1))];
      for (int j = 0; j < g.d; ++j) p.pt.x[j] = c[j] + g.sigma * rng.normal();
    } else {
      std::int64_t v = i;
      for (int j = 0; j < g.d; ++j) {
        p.pt.x[j] = (static_cast<double>(v % side) + 0.5) / static_cast<double>(side);
        v /= side;
      }
    }
    if (ds.has_color) {
      if (g.colors == "uniform") {
        p.color = static_cast<int>(rng.uniform_int(0, g.F - 1));
      } else {
        double u = rng.uniform();
        p.color = static_cast<int>(
            std::lower_bound(ccum.begin(), ccum.end(), u) - ccum.begin());
        p.color = std::min(p.color, g.F - 1);
      }
    }
    if (ds.has_weight) {
      p.has_weight = true;
      if (g.weights == "uniform") p.weight = rng.uniform();
      else if (g.weights == "sorted-correlated")
        p.weight = p.pt.x[g.d - 1] + 0.01 * rng.uniform();
      else p.weight = static_cast<double>(rng.uniform_int(0, g.levels - 1));
    }
    ds.pts.push_back(p);
  }
  return ds;
}

// ------------------------------ queries ------------------------------

struct QuerySpec {
  rs::Range r;
  std::string text;
};

std::vector<QuerySpec> parse_queries(const std::string& path, int d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rs::input_error("cannot open queries: " + path);
  std::vector<QuerySpec> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    std::string where = path + ":" + std::to_string(lineno);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (!ls.eof()) throw rs::input_error(where + ": trailing garbage");
    QuerySpec qs;
    qs.text = line;
    if (kind == "H") {
      if (static_cast<int>(v.size()) != d + 1)
        throw rs::input_error(where + ": H needs " + std::to_string(d + 1) + " numbers");
      qs.r = rs::Range::halfspace(std::span<const double>(v.data(), d), v[d]);
    } else if (kind == "D") {
      if (static_cast<int>(v.size()) != d)
        throw rs::input_error(where + ": D needs " + std::to_string(d) + " numbers");
      rs::Point c;
      c.dim = d;
      for (int i = 0; i < d; ++i) c.x[i] = v[i];
      qs.r = rs::Range::dominance(c);
    } else {
      throw rs::input_error(where + ": unknown range kind '" + kind + "'");
    }
    out.push_back(std::move(qs));
  }
  return out;
}

std::vector<QuerySpec> random_queries(const Dataset& ds, bool dominance, std::int64_t count,
                                      std::uint64_t seed) {
  std::array<double, 3> lo{rs::kInf, rs::kInf, rs::kInf}, hi{-rs::kInf, -rs::kInf, -rs::kInf};
  for (const auto& p : ds.pts)
    for (int i = 0; i < ds.d; ++i) {
      lo[i] = std::min(lo[i], p.pt.x[i]);
      hi[i] = std::max(hi[i], p.pt.x[i]);
    }
  rs::Rng rng(seed);
  std::vector<QuerySpec> out;
  out.reserve(count);
  for (std::int64_t i = 0; i < count; ++i) {
    QuerySpec qs;
    std::ostringstream t;
    if (dominance) {
      rs::Point c;
      c.dim = ds.d;
      t << "D";
      for (int j = 0; j < ds.d; ++j) {
        double span = std::max(hi[j] - lo[j], 1e-9);
        c.x[j] = rng.uniform(lo[j] - 0.05 * span, hi[j] + 0.05 * span);
        t << " " << fmt(c.x[j]);
      }
      qs.r = rs::Range::dominance(c);
    } else {
      std::array<double, 3> nrm{};
      double len = 0;
      do {
        len = 0;
        for (int j = 0; j < ds.d; ++j) {
          nrm[j] = rng.normal();
          len += nrm[j] * nrm[j];
        }
        len = std::sqrt(len);
      } while (len < 1e-9);
      for (int j = 0; j < ds.d; ++j) nrm[j] /= len;
      double off = 0;
      for (int j = 0; j < ds.d; ++j) off += nrm[j] * rng.uniform(lo[j], hi[j]);
      qs.r = rs::Range::halfspace(std::span<const double>(nrm.data(), ds.d), off);
      t << "H";
      for (int j = 0; j < ds.d; ++j) t << " " << fmt(nrm[j]);
      t << " " << fmt(off);
    }
    qs.text = t.str();
    out.push_back(std::move(qs));
  }
  return out;
}

// ------------------------------ index container ------------------------------

constexpr std::uint32_t kIndexVersion = 1;

struct BuiltIndex {
  std::string family, summary;
  double eps0 = 0.1;
  std::uint64_t seed = 1;
  rs::Config cfg;
  Dataset ds;
  std::optional<rs::AhhsIndex> ahhs;
  std::optional<rs::AqsIndex> aqs_half;
  std::optional<rs::DomAqsOptIndex> aqs_dom;
  std::optional<rs::DomAqsIndex> aqs_dom_sub;
  std::int64_t bytes = 0;
  bool dominance() const { return family.rfind("dominance", 0) == 0; }
};

rs::Family to_family(const std::string& s) {
  if (s == "halfplane2d") return rs::Family::kHalfplane2D;
  if (s == "halfspace3d") return rs::Family::kHalfspace3D;
  if (s == "dominance2d") return rs::Family::kDominance2D;
  if (s == "dominance3d") return rs::Family::kDominance3D;
  throw rs::input_error("unknown family '" + s + "'");
}

int family_d(const std::string& s) {
  return rs::family_dim(to_family(s));
}

void build_structures(BuiltIndex& b) {
  if (family_d(b.family) != b.ds.d)
    throw rs::input_error("family " + b.family + " needs d=" +
                          std::to_string(family_d(b.family)) + " data");
  if (b.summary == "ahhs") {
    if (!b.ds.has_color) throw rs::input_error("ahhs needs a colored dataset");
    b.ahhs = rs::build_ahhs(b.ds.pts, b.eps0, to_family(b.family), b.cfg, b.seed);
    b.bytes = rs::memory_footprint(*b.ahhs);
  } else if (b.summary == "aqs") {
    if (!b.ds.has_weight) throw rs::input_error("aqs needs a weighted dataset");
    if (b.dominance()) {
      if (b.ds.d != 3) throw rs::input_error("aqs dominance needs d=3");
      b.aqs_dom = rs::build_aqs_dominance(b.ds.pts, b.eps0, b.cfg, b.seed);
      b.bytes = rs::memory_footprint(*b.aqs_dom);
    } else {
      b.aqs_half = rs::build_aqs_halfspace(b.ds.pts, b.eps0, b.ds.d, b.cfg, b.seed);
      b.bytes = rs::memory_footprint(*b.aqs_half);
    }
  } else if (b.summary == "aqs-suboptimal") {
    if (!b.ds.has_weight) throw rs::input_error("aqs needs a weighted dataset");
    if (!b.dominance() || b.ds.d != 3)
      throw rs::input_error("aqs-suboptimal supports dominance3d only");
    b.aqs_dom_sub = rs::build_aqs_dominance_suboptimal(b.ds.pts, b.eps0, b.cfg, b.seed);
    b.bytes = rs::memory_footprint(*b.aqs_dom_sub);
  } else {
    throw rs::input_error("unknown summary kind '" + b.summary + "'");
  }
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_f64(std::string& s, double v) {
  std::uint64_t b;
  std::memcpy(&b, &v, 8);
  put_u64(s, b);
}

struct Reader {
  const std::string& s;
  size_t at = 0;
  explicit Reader(const std::string& str) : s(str) {}
  void need(size_t n) const {
    if (at + n > s.size()) throw rs::input_error("index file truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at++])) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t b = u64();
    double v;
    std::memcpy(&v, &b, 8);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string v = s.substr(at, n);
    at += n;
    return v;
  }
};

std::string config_text(const rs::Config& c) {
  std::ostringstream o;
  o << "w=" << c.w << "\nalpha=" << fmt(c.alpha)
    << "\ncount_ladder_ratio=" << fmt(c.count_ladder_ratio) << "\nc_eps=" << fmt(c.c_eps)
    << "\nc0=" << fmt(c.c0) << "\nc1=" << fmt(c.c1) << "\nwbeta=" << fmt(c.wbeta)
    << "\nkappa=" << fmt(c.kappa) << "\nc_cl=" << fmt(c.c_cl) << "\nc_sz=" << fmt(c.c_sz)
    << "\ncertify_limit=" << c.certify_limit << "\nmax_retries=" << c.max_retries
    << "\nleaf_threshold=" << c.leaf_threshold << "\ntable_bits=" << c.table_bits
    << "\neta=" << fmt(c.eta) << "\nsample_factor=" << fmt(c.sample_factor) << "\n";
  return o.str();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// container: magic, version, section table, payloads. The index is rebuilt
// deterministically from the embedded dataset and manifest; the stored
// footprint is re-checked so a stale file fails instead of lying.
void write_index(const std::string& path, const BuiltIndex& b) {
  std::string conf = config_text(b.cfg);
  std::string data;
  put_u64(data, b.ds.pts.size());
  data += static_cast<char>(b.ds.d);
  data += static_cast<char>(b.ds.has_color ? 1 : 0);
  data += static_cast<char>(b.ds.has_weight ? 1 : 0);
  for (const auto& p : b.ds.pts) {
    for (int i = 0; i < b.ds.d; ++i) put_f64(data, p.pt.x[i]);
    if (b.ds.has_color) put_u32(data, static_cast<std::uint32_t>(p.color));
    if (b.ds.has_weight) put_f64(data, p.weight);
  }
  std::string manifest;
  {
    std::ostringstream m;
    m << "family=" << b.family << "\nsummary=" << b.summary << "\neps0=" << fmt(b.eps0)
      << "\nseed=" << b.seed << "\nn=" << b.ds.pts.size() << "\nd=" << b.ds.d
      << "\nbytes=" << b.bytes << "\ndataset_hash=" << fnv1a(data) << "\n";
    manifest = m.str();
  }

  std::string out = "RSUM";
  put_u32(out, kIndexVersion);
  std::vector<std::pair<std::string, const std::string*>> sections{
      {"manifest", &manifest}, {"config", &conf}, {"dataset", &data}};
  put_u32(out, static_cast<std::uint32_t>(sections.size()));
  std::uint64_t off = out.size() + sections.size() * 24;
  for (auto& [name, body] : sections) {
    std::string n8 = name;
    n8.resize(8, '\0');
    out += n8;
    put_u64(out, off);
    put_u64(out, body->size());
    off += body->size();
  }
  for (auto& [name, body] : sections) out += *body;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw rs::input_error("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

BuiltIndex load_index(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw rs::input_error("cannot open index: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  std::string s = buf.str();
  Reader r(s);
  if (r.bytes(4) != "RSUM") throw rs::input_error(path + ": not an RSUM index file");
  std::uint32_t ver = r.u32();
  if (ver != kIndexVersion)
    throw rs::input_error(path + ": index version " + std::to_string(ver) +
                          " unsupported (expected " + std::to_string(kIndexVersion) + ")");
  std::uint32_t ns = r.u32();
  std::map<std::string, std::string> sect;
  std::vector<std::pair<std::string, std::pair<std::uint64_t, std::uint64_t>>> table;
  for (std::uint32_t i = 0; i < ns; ++i) {
    std::string name = r.bytes(8);
    name.erase(name.find_last_not_of('\0') + 1);
    std::uint64_t off = r.u64(), len = r.u64();
    if (off + len > s.size()) throw rs::input_error(path + ": section out of bounds");
    table.emplace_back(name, std::make_pair(off, len));
  }
  for (auto& [name, ol] : table) sect[name] = s.substr(ol.first, ol.second);
  for (const char* need : {"manifest", "config", "dataset"})
    if (!sect.count(need)) throw rs::input_error(path + ": missing section " + need);

  BuiltIndex b;
  auto kv = parse_kv(sect["manifest"]);
  b.family = kv.at("family");
  b.summary = kv.at("summary");
  b.eps0 = parse_double(kv.at("eps0"), path + " manifest eps0");
  b.seed = std::stoull(kv.at("seed"));
  std::int64_t stored_bytes = std::stoll(kv.at("bytes"));
  if (kv.count("dataset_hash") &&
      std::stoull(kv.at("dataset_hash")) != fnv1a(sect["dataset"]))
    throw rs::integrity_error(path + ": dataset section does not match its manifest hash");
  for (auto& [k, v] : parse_kv(sect["config"])) b.cfg.set(k, v);

  Reader d(sect["dataset"]);
  std::uint64_t n = d.u64();
  b.ds.d = d.bytes(1)[0];
  b.ds.has_color = d.bytes(1)[0] != 0;
  b.ds.has_weight = d.bytes(1)[0] != 0;
  if (b.ds.d != 2 && b.ds.d != 3) throw rs::input_error(path + ": bad dataset dimension");
  b.ds.pts.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    rs::ColoredWeightedPoint p;
    p.pt.dim = b.ds.d;
    p.pt.id = static_cast<std::int64_t>(i);
    for (int j = 0; j < b.ds.d; ++j) p.pt.x[j] = d.f64();
    if (b.ds.has_color) p.color = static_cast<int>(d.u32());
    if (b.ds.has_weight) {
      p.weight = d.f64();
      p.has_weight = true;
    }
    b.ds.pts.push_back(p);
  }
  build_structures(b);
  if (b.bytes != stored_bytes)
    throw rs::integrity_error(path + ": rebuilt index does not match the stored manifest");
  return b;
}

// ------------------------------ query/verify ------------------------------

std::string run_one(const BuiltIndex& b, const rs::Range& q) {
  std::ostringstream o;
  if (b.summary == "ahhs") {
    auto hh = rs::query_ahhs(*b.ahhs, q);
    std::sort(hh.begin(), hh.end());
    bool first = true;
    for (auto& [c, est] : hh) {
      if (!first) o << " ";
      o << c << ":" << fmt(est);
      first = false;
    }
  } else {
    std::vector<double> w;
    if (b.aqs_half) {
      w = rs::query_aqs_halfspace(*b.aqs_half, q);
    } else {
      if (q.kind != rs::Range::kDominance)
        throw rs::input_error("dominance index takes D queries only");
      if (b.aqs_dom) w = rs::query_aqs_dominance(*b.aqs_dom, q.corner);
      else w = rs::query_aqs_dominance(*b.aqs_dom_sub, q.corner);
    }
    bool first = true;
    for (double v : w) {
      if (!first) o << " ";
      o << fmt(v);
      first = false;
    }
  }
  return o.str();
}

// contract checks against the brute-force oracle; returns a description of
// the first violation, empty if the answer is within contract
std::string check_one(const BuiltIndex& b, const QuerySpec& qs) {
  auto rep = rs::oracle::report(b.ds.pts, qs.r, b.summary == "ahhs" ? color_count(b.ds) : 0);
  double ek = b.eps0 * static_cast<double>(rep.k);
  std::ostringstream bad;
  if (b.summary == "ahhs") {
    auto hh = rs::query_ahhs(*b.ahhs, qs.r);
    if (static_cast<double>(hh.size()) > 4.0 / b.eps0 + 1e-9) {
      bad << "query '" << qs.text << "': expected at most " << fmt(4.0 / b.eps0)
          << " heavy hitters, got " << hh.size();
      return bad.str();
    }
    std::map<int, double> got(hh.begin(), hh.end());
    for (int c = 0; c < static_cast<int>(rep.freq.size()); ++c)
      if (rep.freq[c] > 0 && static_cast<double>(rep.freq[c]) >= ek && !got.count(c)) {
        bad << "query '" << qs.text << "': expected color " << c << " (frequency "
            << rep.freq[c] << " >= " << fmt(ek) << "), got no report";
        return bad.str();
      }
    for (auto& [c, est] : got) {
      double truth = c < static_cast<int>(rep.freq.size()) ? static_cast<double>(rep.freq[c]) : 0.0;
      if (std::fabs(est - truth) > ek + 1e-6) {
        bad << "query '" << qs.text << "': expected color " << c << " frequency within "
            << fmt(ek) << " of " << fmt(truth) << ", got " << fmt(est);
        return bad.str();
      }
    }
    return {};
  }
  std::string got = run_one(b, qs.r);
  std::vector<double> w;
  for (const auto& tok : split(got, ' '))
    if (!tok.empty()) w.push_back(parse_double(tok, "result"));
  if (rep.k == 0) {
    if (!w.empty()) {
      bad << "query '" << qs.text << "': expected empty summary, got " << w.size()
          << " entries";
      return bad.str();
    }
    return {};
  }
  int Q = static_cast<int>(std::ceil(1.0 / b.eps0));
  if (static_cast<int>(w.size()) != Q + 1) {
    bad << "query '" << qs.text << "': expected " << Q + 1 << " entries, got " << w.size();
    return bad.str();
  }
  auto at = [&](std::int64_t r) {
    r = std::clamp<std::int64_t>(r, 0, rep.k - 1);
    return rep.weights[static_cast<size_t>(r)];
  };
  for (int i = 0; i <= Q; ++i) {
    double lo = at(static_cast<std::int64_t>(std::floor((i - 1) * b.eps0 * static_cast<double>(rep.k))));
    double hi = at(static_cast<std::int64_t>(std::floor((i + 1) * b.eps0 * static_cast<double>(rep.k))));
    if (w[i] < lo || w[i] > hi) {
      bad << "query '" << qs.text << "': expected entry " << i << " in [" << fmt(lo) << ", "
          << fmt(hi) << "], got " << fmt(w[i]);
      return bad.str();
    }
    if (i > 0 && w[i] < w[i - 1]) {
      bad << "query '" << qs.text << "': expected non-decreasing entries, got " << fmt(w[i])
          << " after " << fmt(w[i - 1]);
      return bad.str();
    }
  }
  return {};
}

// ------------------------------ bench ------------------------------

// column order is fixed; see README
const char* kBenchHeader =
    "family,summary,n,eps0,queries,tier_hits,build_ms,mean_query_us,index_bytes,"
    "max_freq_err,max_rank_err,heavy_complete\n";

void bench_row(std::ostream& out, const std::string& family, const std::string& summary,
               std::int64_t n, double eps0, std::int64_t nq, int F, std::uint64_t seed) {
  GenSpec g;
  g.n = n;
  g.d = family_d(family);
  g.F = F;
  g.seed = seed;
  BuiltIndex b;
  b.family = family;
  b.summary = summary;
  b.eps0 = eps0;
  b.seed = seed + 1;
  b.ds = generate(g);

  auto t0 = std::chrono::steady_clock::now();
  build_structures(b);
  auto t1 = std::chrono::steady_clock::now();
  double build_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  auto queries = random_queries(b.ds, b.dominance(), nq, seed + 2);
  std::vector<std::string> answers(queries.size());
  t0 = std::chrono::steady_clock::now();
  for (size_t i = 0; i < queries.size(); ++i) answers[i] = run_one(b, queries[i].r);
  t1 = std::chrono::steady_clock::now();
  double query_us = std::chrono::duration<double, std::micro>(t1 - t0).count() /
                    static_cast<double>(queries.size());

  std::int64_t tier_hits = 0;
  double max_freq_err = 0, max_rank_err = 0;
  bool heavy_complete = true;
  for (size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i].r;
    if (b.summary == "ahhs") {
      rs::AhhsQueryTrace tr;
      auto hh = rs::query_ahhs(*b.ahhs, q, &tr);
      if (tr.path > 0) ++tier_hits;
      auto rep = rs::oracle::report(b.ds.pts, q, color_count(b.ds));
      double ek = b.eps0 * static_cast<double>(rep.k);
      std::map<int, double> got(hh.begin(), hh.end());
      for (int c = 0; c < static_cast<int>(rep.freq.size()); ++c)
        if (rep.freq[c] > 0 && static_cast<double>(rep.freq[c]) >= ek && !got.count(c))
          heavy_complete = false;
      if (rep.k > 0)
        for (auto& [c, est] : got) {
          double truth = static_cast<double>(rep.freq[c]);
          max_freq_err = std::max(max_freq_err, std::fabs(est - truth) / std::max(ek, 1.0));
        }
    } else {
      const rs::ApproxCounter* ctr = b.aqs_half   ? &b.aqs_half->counter
                                     : b.aqs_dom ? &b.aqs_dom->counter
                                                 : &b.aqs_dom_sub->counter;
      std::int64_t k0 = static_cast<std::int64_t>(std::ceil(1.0 / b.eps0));
      std::int64_t kk = std::min<std::int64_t>(static_cast<std::int64_t>(b.ds.pts.size()),
                                               2 * ctr->approx(q));
      if (static_cast<double>(kk) > 8.0 * static_cast<double>(k0)) ++tier_hits;
      auto rep = rs::oracle::report(b.ds.pts, q, 0);
      if (rep.k == 0) continue;
      std::vector<double> w;
      for (const auto& tok : split(answers[i], ' '))
        if (!tok.empty()) w.push_back(parse_double(tok, "result"));
      double ekq = b.eps0 * static_cast<double>(rep.k);
      auto wat = [&](std::int64_t r) {
        r = std::clamp<std::int64_t>(r, 0, rep.k - 1);
        return rep.weights[static_cast<size_t>(r)];
      };
      for (size_t j = 0; j < w.size(); ++j) {
        // distance outside the contract window, in eps0 * k units; 0 in contract
        double wlo = wat(static_cast<std::int64_t>(
            std::floor((static_cast<double>(j) - 1.0) * ekq)));
        double whi = wat(static_cast<std::int64_t>(
            std::floor((static_cast<double>(j) + 1.0) * ekq)));
        if (w[j] >= wlo && w[j] <= whi) continue;
        auto lo = std::lower_bound(rep.weights.begin(), rep.weights.end(), w[j]) -
                  rep.weights.begin();
        auto hi = std::upper_bound(rep.weights.begin(), rep.weights.end(), w[j]) -
                  rep.weights.begin() - 1;
        double target = static_cast<double>(j) * ekq;
        double err = std::max(target - static_cast<double>(hi),
                              static_cast<double>(lo) - target);
        max_rank_err = std::max(max_rank_err, std::max(err, 0.0) / std::max(ekq, 1.0));
      }
    }
  }

  out << family << "," << summary << "," << n << "," << fmt(eps0) << "," << queries.size()
      << "," << tier_hits << "," << fmt(build_ms) << "," << fmt(query_us) << "," << b.bytes
      << "," << fmt(max_freq_err) << "," << fmt(max_rank_err) << ","
      << (heavy_complete ? 1 : 0) << "\n";
  out.flush();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"range summary toolkit: heavy-hitter and quantile summaries"};
  app.require_subcommand(1);

  std::string config_path, out_path, family = "dominance3d", summary = "ahhs";
  std::vector<std::string> overrides;
  double eps0 = 0.1;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "key=value config file (default: $RSUM_CONFIG)");
  app.add_option("--set", overrides, "config override key=value (repeatable)");

  auto* gen = app.add_subcommand("gen", "generate a dataset");
  GenSpec gs;
  gen->add_option("--n", gs.n, "point count")->required();
  gen->add_option("--d", gs.d, "dimension (2 or 3)");
  gen->add_option("--dist", gs.dist, "uniform | clustered | grid");
  gen->add_option("--clusters", gs.clusters, "cluster count for clustered");
  gen->add_option("--sigma", gs.sigma, "cluster spread");
  gen->add_option("--colors", gs.colors, "none | uniform | zipf | planted");
  gen->add_option("--F", gs.F, "color universe size");
  gen->add_option("--zipf-s", gs.zipf_s, "zipf exponent");
  gen->add_option("--planted", gs.planted, "planted heavy colors, color:fraction,...");
  gen->add_option("--weights", gs.weights, "none | uniform | sorted-correlated | discrete");
  gen->add_option("--levels", gs.levels, "discrete weight levels");
  gen->add_option("--seed", gs.seed, "generator seed");
  gen->add_option("--out", out_path, "output dataset path")->required();

  auto* build = app.add_subcommand("build", "build an index from a dataset");
  std::string data_path, index_path;
  build->add_option("--data", data_path, "dataset path")->required();
  build->add_option("--family", family, "halfplane2d | halfspace3d | dominance2d | dominance3d");
  build->add_option("--summary", summary, "ahhs | aqs | aqs-suboptimal");
  build->add_option("--eps0", eps0, "summary accuracy");
  build->add_option("--seed", seed, "build seed");
  build->add_option("--out", out_path, "output index path")->required();

  auto* query = app.add_subcommand("query", "answer queries from an index");
  std::string queries_path;
  std::int64_t random_n = 0;
  std::uint64_t query_seed = 1;
  query->add_option("--index", index_path, "index path")->required();
  query->add_option("--queries", queries_path, "queries file (H .. | D ..)");
  query->add_option("--random", random_n, "generate this many random queries instead");
  query->add_option("--seed", query_seed, "random query seed");
  query->add_option("--out", out_path, "results path (default stdout)");

  auto* verify = app.add_subcommand("verify", "check query answers against the oracle");
  verify->add_option("--index", index_path, "index path")->required();
  verify->add_option("--queries", queries_path, "queries file");
  verify->add_option("--random", random_n, "verify this many random queries instead");
  verify->add_option("--seed", query_seed, "random query seed");

  auto* bench = app.add_subcommand("bench", "sweep a build/query matrix, emit CSV");
  std::vector<std::int64_t> bn{4096, 16384, 65536};
  std::vector<double> beps{0.05};
  std::int64_t bq = 200;
  int bF = 32;
  bench->add_option("--family", family, "range family");
  bench->add_option("--summary", summary, "summary kind");
  bench->add_option("--n", bn, "point counts")->delimiter(',');
  bench->add_option("--eps0", beps, "accuracies")->delimiter(',');
  bench->add_option("--queries", bq, "queries per configuration");
  bench->add_option("--F", bF, "color universe size");
  bench->add_option("--seed", seed, "sweep seed");
  bench->add_option("--out", out_path, "CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    rs::Config cfg;
    if (config_path.empty())
      if (const char* env = std::getenv("RSUM_CONFIG")) config_path = env;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& ov : overrides) {
      auto eq = ov.find('=');
      if (eq == std::string::npos) throw rs::input_error("--set needs key=value: " + ov);
      cfg.set(ov.substr(0, eq), ov.substr(eq + 1));
    }

    if (*gen) {
      write_dataset(out_path, generate(gs));
      return 0;
    }

    if (*build) {
      BuiltIndex b;
      b.family = family;
      b.summary = summary;
      b.eps0 = eps0;
      b.seed = seed;
      b.cfg = cfg;
      b.ds = read_dataset(data_path);
      build_structures(b);
      write_index(out_path, b);
      std::cerr << "built " << summary << " " << family << " index: n=" << b.ds.pts.size()
                << " eps0=" << fmt(eps0) << " bytes=" << b.bytes << "\n";
      return 0;
    }

    if (*query || *verify) {
      BuiltIndex b = load_index(index_path);
      std::vector<QuerySpec> qs;
      if (!queries_path.empty()) qs = parse_queries(queries_path, b.ds.d);
      else if (random_n > 0) qs = random_queries(b.ds, b.dominance(), random_n, query_seed);
      else throw rs::input_error("need --queries or --random");

      if (*query) {
        std::ofstream file;
        std::ostream* out = &std::cout;
        if (!out_path.empty()) {
          file.open(out_path, std::ios::binary);
          if (!file) throw rs::input_error("cannot open for writing: " + out_path);
          out = &file;
        }
        for (const auto& q : qs) *out << run_one(b, q.r) << "\n";
        return 0;
      }

      std::int64_t bad = 0;
      for (const auto& q : qs) {
        std::string msg = check_one(b, q);
        if (!msg.empty()) {
          ++bad;
          std::cerr << "verify: " << msg << "\n";
        }
      }
      std::cerr << "verified " << qs.size() << " queries, " << bad << " violations\n";
      return bad == 0 ? 0 : 1;
    }

    // bench
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
      file.open(out_path, std::ios::binary);
      if (!file) throw rs::input_error("cannot open for writing: " + out_path);
      out = &file;
    }
    *out << kBenchHeader;
    std::uint64_t s = seed;
    for (double e : beps)
      for (std::int64_t n : bn) bench_row(*out, family, summary, n, e, bq, bF, s += 101);
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}
