#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace rs {

struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct integrity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct construction_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic RNG wrapper. std::mt19937_64 output is pinned by the standard,
// but the std distributions are not, so we derive doubles and bounded ints
// from the raw 64-bit stream ourselves.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // uniform in [0,1)
  double uniform() { return (bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(bits());
    // rejection sampling to avoid modulo bias
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
      v = bits();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// All tunable constants live here; loadable from a flat key=value file and
// overridable from the CLI.
struct Config {
  int w = 64;                  // word width for packed vectors
  double alpha = 0.5;          // approximate-count error factor
  double count_ladder_ratio = 1.5;
  double c_eps = 4.0;          // eps = eps0 / c_eps inside cells
  double c0 = 2.0;             // sample-size factor for eps-approximations
  double c1 = 0.125;           // frequent/candidate threshold factor
  double wbeta = 4.0;          // w^beta, the lower-tier ladder ratio
  double kappa = 4.5;          // log exponent for the dominance AQS thresholds
  double c_cl = 8.0;           // conflict-list bound factor
  double c_sz = 8.0;           // cutting size bound factor
  int certify_limit = 800;     // max n for exhaustive canonical-range checks
  int max_retries = 8;         // constant-doubling retries
  int leaf_threshold = 32;     // partition-tree leaf size floor
  int table_bits = 16;         // decode tabulation chunk width
  double eta = 0.25;           // grid type-2 leaf exponent
  double sample_factor = 2.0;  // shallow-cutting sample multiplier

  void set(const std::string& key, const std::string& val) {
    auto d = [&] { return std::stod(val); };
    auto i = [&] { return std::stoi(val); };
    if (key == "w") w = i();
    else if (key == "alpha") alpha = d();
    else if (key == "count_ladder_ratio") count_ladder_ratio = d();
    else if (key == "c_eps") c_eps = d();
    else if (key == "c0") c0 = d();
    else if (key == "c1") c1 = d();
    else if (key == "wbeta") wbeta = d();
    else if (key == "kappa") kappa = d();
    else if (key == "c_cl") c_cl = d();
    else if (key == "c_sz") c_sz = d();
    else if (key == "certify_limit") certify_limit = i();
    else if (key == "max_retries") max_retries = i();
    else if (key == "leaf_threshold") leaf_threshold = i();
    else if (key == "table_bits") table_bits = i();
    else if (key == "eta") eta = d();
    else if (key == "sample_factor") sample_factor = d();
    else throw input_error("unknown config key: " + key);
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto h = line.find('#');
      if (h != std::string::npos) line.erase(h);
      auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
      std::string stripped;
      for (char c : line)
        if (!is_space(c)) stripped += c;
      if (stripped.empty()) continue;
      auto eq = stripped.find('=');
      if (eq == std::string::npos)
        throw input_error("config parse error at line " + std::to_string(lineno));
      set(stripped.substr(0, eq), stripped.substr(eq + 1));
    }
  }
};

}  // namespace rs
