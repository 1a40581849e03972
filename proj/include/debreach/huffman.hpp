#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace debreach {

// Canonical prefix code: per-symbol bit lengths (0 = unused) plus the
// RFC 1951 section 3.2.2 codewords derived from them.
struct HuffmanCode {
  std::vector<std::uint8_t> lengths;
  std::vector<std::uint16_t> codes;

  std::uint64_t weighted_length(std::span<const std::uint64_t> freq) const {
    std::uint64_t total = 0;
    for (std::size_t s = 0; s < lengths.size(); ++s)
      total += freq[s] * lengths[s];
    return total;
  }
};

// Canonical codeword assignment per RFC 1951 section 3.2.2: shorter codes
// numerically precede longer ones, equal lengths ordered by symbol.
inline std::vector<std::uint16_t> canonical_codes(
    std::span<const std::uint8_t> lengths) {
  std::uint8_t max_len = 0;
  for (auto l : lengths) max_len = std::max(max_len, l);
  std::vector<std::uint32_t> count(max_len + 1, 0);
  for (auto l : lengths)
    if (l > 0) ++count[l];

  std::vector<std::uint32_t> next(max_len + 1, 0);
  std::uint32_t code = 0;
  for (std::uint8_t bits = 1; bits <= max_len; ++bits) {
    code = (code + count[bits - 1]) << 1;
    next[bits] = code;
  }

  std::vector<std::uint16_t> codes(lengths.size(), 0);
  for (std::size_t s = 0; s < lengths.size(); ++s)
    if (lengths[s] > 0)
      codes[s] = static_cast<std::uint16_t>(next[lengths[s]]++);
  return codes;
}

// Optimal length-limited prefix code via package-merge.  Total encoded
// size sum(freq[s] * len[s]) is minimal among codes with lengths capped at
// max_bits.  A lone used symbol gets length 1.
inline HuffmanCode build_huffman_code_lengths(
    std::span<const std::uint64_t> freq, int max_bits = 15) {
  if (max_bits < 1 || max_bits > 15)
    throw std::invalid_argument("max_bits must be 1..15");

  std::vector<std::uint16_t> used;
  for (std::size_t s = 0; s < freq.size(); ++s)
    if (freq[s] > 0) used.push_back(static_cast<std::uint16_t>(s));
  if (used.empty())
    throw std::invalid_argument("all frequencies are zero");

  HuffmanCode hc;
  hc.lengths.assign(freq.size(), 0);
  if (used.size() == 1) {
    hc.lengths[used[0]] = 1;
    hc.codes = canonical_codes(hc.lengths);
    return hc;
  }
  if (used.size() > (std::size_t{1} << max_bits))
    throw std::invalid_argument("alphabet too large for max_bits");

  // Coins carry the set of symbols they were packaged from; picking the
  // cheapest 2(m-1) items of the deepest list counts, per symbol, how many
  // levels it participates in, which is its code length.
  struct Coin {
    std::uint64_t weight;
    std::vector<std::uint16_t> symbols;
  };
  std::vector<Coin> singles;
  singles.reserve(used.size());
  for (auto s : used) singles.push_back(Coin{freq[s], {s}});
  std::sort(singles.begin(), singles.end(),
            [](const Coin& a, const Coin& b) { return a.weight < b.weight; });

  std::vector<Coin> level = singles;
  for (int depth = 1; depth < max_bits; ++depth) {
    std::vector<Coin> packages;
    for (std::size_t k = 0; k + 1 < level.size(); k += 2) {
      Coin c;
      c.weight = level[k].weight + level[k + 1].weight;
      c.symbols = level[k].symbols;
      c.symbols.insert(c.symbols.end(), level[k + 1].symbols.begin(),
                       level[k + 1].symbols.end());
      packages.push_back(std::move(c));
    }
    std::vector<Coin> merged;
    merged.reserve(singles.size() + packages.size());
    std::merge(singles.begin(), singles.end(),
               std::make_move_iterator(packages.begin()),
               std::make_move_iterator(packages.end()),
               std::back_inserter(merged),
               [](const Coin& a, const Coin& b) { return a.weight < b.weight; });
    level = std::move(merged);
  }

  const std::size_t take = 2 * (used.size() - 1);
  for (std::size_t k = 0; k < take; ++k)
    for (auto s : level[k].symbols) ++hc.lengths[s];

  hc.codes = canonical_codes(hc.lengths);
  return hc;
}

// Kraft sum scaled by 2^15; exactly 1<<15 for a complete code.
inline std::uint64_t kraft_scaled(std::span<const std::uint8_t> lengths) {
  std::uint64_t sum = 0;
  for (auto l : lengths)
    if (l > 0) sum += std::uint64_t{1} << (15 - l);
  return sum;
}

}  // namespace debreach
