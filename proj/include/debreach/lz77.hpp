#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "annotation.hpp"
#include "bytes.hpp"

namespace debreach {

// LZ77 output unit: a literal byte, or a back-reference <distance, length>
// copying `length` bytes starting `distance` bytes back in the output.
struct Token {
  std::uint32_t distance = 0;  // 0 marks a literal
  std::uint32_t length = 0;
  std::uint8_t byte = 0;

  static Token literal(std::uint8_t b) { return Token{0, 0, b}; }
  static Token reference(std::uint32_t distance, std::uint32_t length) {
    return Token{distance, length, 0};
  }

  bool is_literal() const noexcept { return distance == 0; }
  bool is_reference() const noexcept { return distance != 0; }

  // Number of source bytes this token covers.
  std::size_t coverage() const noexcept { return is_literal() ? 1 : length; }

  friend bool operator==(const Token&, const Token&) = default;
};

struct TokenStream {
  std::vector<Token> tokens;
  std::size_t source_len = 0;
};

struct MatchConfig {
  std::size_t min_match = 3;      // dictionary key length and skip threshold
  std::size_t min_emit_len = 3;   // shortest reference worth emitting
  std::size_t max_match_len = 258;
  std::size_t window_size = 32768;
  std::size_t max_chain = 1024;   // candidate positions probed per query
  bool strict_gt = false;         // emit only when bestLen > min_match

  void validate() const {
    if (min_match < 1 || min_match > min_emit_len ||
        min_emit_len > max_match_len)
      throw std::invalid_argument(
          "require 1 <= min_match <= min_emit_len <= max_match_len");
    if (window_size < 1) throw std::invalid_argument("window_size >= 1");
  }
};

// Replays a token stream back into bytes.
inline Bytes expand(const TokenStream& ts) {
  Bytes out;
  out.reserve(ts.source_len);
  for (const Token& t : ts.tokens) {
    if (t.is_literal()) {
      out.push_back(t.byte);
      continue;
    }
    if (t.distance > out.size() || t.length == 0)
      throw std::invalid_argument("reference outside produced output");
    std::size_t from = out.size() - t.distance;
    for (std::size_t k = 0; k < t.length; ++k)  // may overlap itself
      out.push_back(out[from + k]);
  }
  return out;
}

namespace detail {

// Hash-chain dictionary over fixed-length keys, most recent first.
class MatchDict {
 public:
  MatchDict(ByteView input, std::size_t key_len)
      : input_(input),
        key_len_(key_len),
        mask_(bucket_count(input.size()) - 1),
        head_(mask_ + 1, 0),
        prev_(input.size(), 0) {}

  void insert(std::size_t pos) {
    std::size_t h = hash(pos);
    prev_[pos] = head_[h];
    head_[h] = static_cast<std::uint32_t>(pos + 1);
  }

  // Walks the chain for the key at `pos`, invoking fn(candidate) for up to
  // max_chain candidates no farther back than `window`.
  template <typename Fn>
  void for_candidates(std::size_t pos, std::size_t window,
                      std::size_t max_chain, Fn&& fn) const {
    std::uint32_t cur = head_[hash(pos)];
    std::size_t probes = 0;
    while (cur != 0 && probes < max_chain) {
      std::size_t cand = cur - 1;
      if (pos - cand > window) break;  // chain is ordered, older only
      fn(cand);
      ++probes;
      cur = prev_[cand];
    }
  }

 private:
  static std::size_t bucket_count(std::size_t n) {
    std::size_t b = 256;
    while (b < n && b < (1u << 16)) b <<= 1;
    return b;
  }

  std::size_t hash(std::size_t pos) const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t k = 0; k < key_len_; ++k) {
      h ^= input_[pos + k];
      h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h ^ (h >> 29)) & mask_;
  }

  ByteView input_;
  std::size_t key_len_;
  std::size_t mask_;
  std::vector<std::uint32_t> head_;
  std::vector<std::uint32_t> prev_;
};

}  // namespace detail

// Greedy taint-aware matcher.  Positions within min_match of real
// sensitive data are emitted as literals and never enter the dictionary,
// so no match may start in a sensitive region on either side; candidate
// matches are capped at min(next_taint[i], next_taint[matchLoc]) so no
// match may extend into one.  With a span-free TaintMap this degrades to
// plain greedy LZ77 (the tail sentinel next_taint[i] = len - i acts only
// as the remaining-input cap, not as a skip trigger).
inline TokenStream lz77_match(ByteView input, const TaintMap& taint,
                              const MatchConfig& cfg = {}) {
  cfg.validate();
  if (taint.input_len != input.size())
    throw std::invalid_argument("taint map does not match input length");

  const std::size_t n = input.size();
  TokenStream ts;
  ts.source_len = n;
  detail::MatchDict dict(input, cfg.min_match);
  const auto& nt = taint.next_taint;

  std::size_t i = 0;
  while (i < n) {
    // Skip sensitive data: too close to a real sensitive byte to start or
    // key a match.
    if (nt[i] <= cfg.min_match && !taint.tail_sentinel(i)) {
      ts.tokens.push_back(Token::literal(input[i]));
      ++i;
      continue;
    }

    std::size_t best_len = 0;
    std::size_t best_dist = 0;
    if (i + cfg.min_match <= n) {
      // Global cap: taint distance already bounds the remaining input.
      const std::size_t cap_i = std::min<std::size_t>(nt[i], cfg.max_match_len);
      dict.for_candidates(i, cfg.window_size, cfg.max_chain,
                          [&](std::size_t cand) {
        if (best_len >= cap_i) return;
        std::size_t cap = std::min<std::size_t>(cap_i, nt[cand]);
        std::size_t len = 0;
        while (len < cap && input[cand + len] == input[i + len]) ++len;
        if (len > best_len) {  // strict: ties keep the nearer candidate
          best_len = len;
          best_dist = i - cand;
        }
      });
    }

    const bool emit = cfg.strict_gt ? best_len > cfg.min_match
                                    : best_len >= cfg.min_emit_len;
    if (emit) {
      ts.tokens.push_back(Token::reference(
          static_cast<std::uint32_t>(best_dist),
          static_cast<std::uint32_t>(best_len)));
      for (std::size_t j = i; j + cfg.min_match <= i + best_len; ++j)
        dict.insert(j);
      i += best_len;
    } else {
      ts.tokens.push_back(Token::literal(input[i]));
      if (i + cfg.min_match <= n) dict.insert(i);
      ++i;
    }
  }
  return ts;
}

}  // namespace debreach
