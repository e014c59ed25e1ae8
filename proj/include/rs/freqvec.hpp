#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rs/common.hpp"

namespace rs {

// Bit-packed frequency vector: each count written in binary (MSB first, no
// leading zeros, empty for zero) followed by a separator, over the alphabet
// {0, 1, #} at 2 bits per symbol. Symbol codes: 00 zero, 01 one, 10 separator;
// 11 never appears in a well-formed stream.
struct PackedFrequencyVector {
  int w = 64;  // bits used per word (even, <= 64)
  int F = 0;
  std::uint64_t s = 0;                        // sum of all fields
  std::uint32_t sym_count = 0;                // total symbols in the stream
  std::vector<std::uint64_t> bits;            // packed symbols, w bits per word
  std::vector<std::uint32_t> per_word_counts; // fields starting in each word
  std::vector<std::uint32_t> field_start;     // select index: first symbol of field i

  int symbol_at(std::uint32_t j) const {
    std::uint32_t per = w / 2;
    return static_cast<int>((bits[j / per] >> (2 * (j % per))) & 3u);
  }
};

namespace detail {

struct ChunkInfo {
  std::uint8_t sep_mask;    // which of the 8 symbols are separators
  std::uint8_t invalid;     // nonzero if any symbol is 11
  std::uint8_t digit_byte;  // the 8 digit bits packed stream-order-MSB-first
};

inline const std::array<ChunkInfo, 65536>& chunk_table() {
  static const std::array<ChunkInfo, 65536> table = [] {
    std::array<ChunkInfo, 65536> t{};
    for (std::uint32_t v = 0; v < 65536; ++v) {
      ChunkInfo ci{0, 0, 0};
      for (int j = 0; j < 8; ++j) {
        int sym = (v >> (2 * j)) & 3;
        if (sym == 3) ci.invalid = 1;
        if (sym == 2) ci.sep_mask |= (1u << j);
        if (sym == 1) ci.digit_byte |= (1u << (7 - j));
      }
      t[v] = ci;
    }
    return t;
  }();
  return table;
}

}  // namespace detail

inline PackedFrequencyVector encode(const std::vector<std::uint64_t>& freqs, int w = 64) {
  if (freqs.empty()) throw input_error("encode: need at least one field");
  if (w < 2 || w > 64 || (w & 1)) throw input_error("encode: bad word width");
  PackedFrequencyVector v;
  v.w = w;
  v.F = static_cast<int>(freqs.size());
  v.field_start.reserve(freqs.size());
  std::uint32_t per = w / 2;
  std::uint32_t sym = 0;
  auto push = [&](std::uint64_t code) {
    std::uint32_t word = sym / per, off = 2 * (sym % per);
    if (word >= v.bits.size()) v.bits.push_back(0);
    v.bits[word] |= code << off;
    ++sym;
  };
  for (std::uint64_t f : freqs) {
    v.field_start.push_back(sym);
    v.s += f;
    int b = 0;
    while ((f >> b) != 0) ++b;  // bit length, 0 for f == 0
    for (int i = b - 1; i >= 0; --i) push((f >> i) & 1u);
    push(2);  // separator
  }
  v.sym_count = sym;
  v.per_word_counts.assign(v.bits.size(), 0);
  for (std::uint32_t st : v.field_start) ++v.per_word_counts[st / per];
  return v;
}

inline std::vector<std::uint64_t> decode(const PackedFrequencyVector& v) {
  const auto& table = detail::chunk_table();
  std::vector<std::uint64_t> out;
  out.reserve(v.F);
  std::uint32_t per = v.w / 2;
  std::uint64_t cur = 0;
  std::uint32_t j = 0;
  auto take_symbol = [&](int sym) {
    if (sym == 3) throw integrity_error("decode: invalid symbol");
    if (sym == 2) {
      out.push_back(cur);
      cur = 0;
    } else {
      cur = (cur << 1) | static_cast<std::uint64_t>(sym);
    }
  };
  while (j < v.sym_count) {
    if (v.w % 16 == 0 && (j % 8) == 0 && j + 8 <= v.sym_count) {
      std::uint32_t word = j / per, off = 2 * (j % per);
      std::uint32_t chunk = static_cast<std::uint32_t>((v.bits[word] >> off) & 0xffffu);
      const auto& ci = table[chunk];
      if (ci.invalid) throw integrity_error("decode: invalid symbol");
      if (ci.sep_mask == 0) {
        cur = (cur << 8) | ci.digit_byte;
        j += 8;
        continue;
      }
    }
    take_symbol(v.symbol_at(j));
    ++j;
  }
  if (static_cast<int>(out.size()) != v.F)
    throw integrity_error("decode: field count mismatch");
  std::uint64_t sum = 0;
  for (auto f : out) sum += f;
  if (sum != v.s) throw integrity_error("decode: sum mismatch");
  // padding beyond the stream must be zero
  std::uint32_t used_words = (v.sym_count + per - 1) / per;
  if (v.bits.size() != used_words && !(v.sym_count == 0 && v.bits.empty()))
    throw integrity_error("decode: stray words");
  if (used_words > 0) {
    std::uint32_t tail = v.sym_count % per;
    if (tail != 0 && (v.bits.back() >> (2 * tail)) != 0)
      throw integrity_error("decode: nonzero padding");
    if (v.w < 64 && (v.bits.back() >> v.w) != 0)
      throw integrity_error("decode: nonzero padding");
  }
  return out;
}

inline std::uint64_t extract(const PackedFrequencyVector& v, int i) {
  if (i < 0 || i >= v.F) throw input_error("extract: color index out of range");
  std::uint32_t j = v.field_start[i];
  std::uint64_t cur = 0;
  for (;; ++j) {
    int sym = v.symbol_at(j);
    if (sym == 3) throw integrity_error("extract: invalid symbol");
    if (sym == 2) return cur;
    cur = (cur << 1) | static_cast<std::uint64_t>(sym);
  }
}

inline PackedFrequencyVector add(const PackedFrequencyVector& a,
                                 const PackedFrequencyVector& b) {
  if (a.F != b.F) throw input_error("add: field count mismatch");
  if (a.w != b.w) throw input_error("add: word width mismatch");
  // Fast path: identical field layouts and every sum keeps its field width.
  // The result then has the exact same layout, so fields can be written in
  // place without re-walking the stream.
  if (a.sym_count == b.sym_count && a.field_start == b.field_start) {
    std::vector<std::uint64_t> sums(a.F);
    bool ok = true;
    for (int i = 0; i < a.F && ok; ++i) {
      sums[i] = extract(a, i) + extract(b, i);
      std::uint32_t width =
          (i + 1 < a.F ? a.field_start[i + 1] : a.sym_count) - a.field_start[i] - 1;
      int bl = 0;
      while ((sums[i] >> bl) != 0) ++bl;
      ok = (static_cast<std::uint32_t>(bl) == width);
    }
    if (ok) {
      PackedFrequencyVector v = a;
      v.s = a.s + b.s;
      std::uint32_t per = v.w / 2;
      for (int i = 0; i < v.F; ++i) {
        std::uint32_t width =
            (i + 1 < v.F ? v.field_start[i + 1] : v.sym_count) - v.field_start[i] - 1;
        for (std::uint32_t d = 0; d < width; ++d) {
          std::uint32_t j = v.field_start[i] + d;
          std::uint64_t bit = (sums[i] >> (width - 1 - d)) & 1u;
          std::uint64_t mask = ~(3ull << (2 * (j % per)));
          v.bits[j / per] = (v.bits[j / per] & mask) | (bit << (2 * (j % per)));
        }
      }
      return v;
    }
  }
  auto da = decode(a);
  auto db = decode(b);
  for (int i = 0; i < a.F; ++i) da[i] += db[i];
  return encode(da, a.w);
}

}  // namespace rs
