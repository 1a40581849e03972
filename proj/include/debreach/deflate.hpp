#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "annotation.hpp"
#include "bitstream.hpp"
#include "bytes.hpp"
#include "errors.hpp"
#include "huffman.hpp"
#include "lz77.hpp"

namespace debreach {

enum class BlockKind { stored, fixed, dynamic };

enum class CompressMode { standard, huffman_only, debreach };

namespace rfc1951 {

// Length symbol tables (symbols 257..285), RFC 1951 section 3.2.5.
inline constexpr std::array<std::uint16_t, 29> kLenBase = {
    3,  4,  5,  6,  7,  8,  9,  10, 11,  13,  15,  17,  19,  23, 27,
    31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258};
inline constexpr std::array<std::uint8_t, 29> kLenExtra = {
    0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2,
    2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0};

inline constexpr std::array<std::uint16_t, 30> kDistBase = {
    1,    2,    3,    4,    5,    7,     9,     13,    17,   25,
    33,   49,   65,   97,   129,  193,   257,   385,   513,  769,
    1025, 1537, 2049, 3073, 4097, 6145,  8193,  12289, 16385, 24577};
inline constexpr std::array<std::uint8_t, 30> kDistExtra = {
    0, 0, 0, 0, 1, 1, 2,  2,  3,  3,  4,  4,  5,  5,  6,
    6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13};

// Code-length alphabet transmission order, RFC 1951 section 3.2.7.
inline constexpr std::array<std::uint8_t, 19> kClOrder = {
    16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15};

inline constexpr std::size_t kMaxDistance = 32768;
inline constexpr std::size_t kMaxLength = 258;
inline constexpr std::size_t kMinLength = 3;
inline constexpr std::size_t kEndOfBlock = 256;

inline unsigned length_symbol(std::size_t len) {
  // 258 has its own zero-extra symbol even though 227..257 covers it
  if (len == 258) return 285;
  unsigned s = 0;
  while (s + 1 < kLenBase.size() && kLenBase[s + 1] <= len) ++s;
  return 257 + s;
}

inline unsigned dist_symbol(std::size_t dist) {
  unsigned s = 0;
  while (s + 1 < kDistBase.size() && kDistBase[s + 1] <= dist) ++s;
  return s;
}

inline std::vector<std::uint8_t> fixed_literal_lengths() {
  std::vector<std::uint8_t> l(288);
  for (int s = 0; s <= 143; ++s) l[s] = 8;
  for (int s = 144; s <= 255; ++s) l[s] = 9;
  for (int s = 256; s <= 279; ++s) l[s] = 7;
  for (int s = 280; s <= 287; ++s) l[s] = 8;
  return l;
}

inline std::vector<std::uint8_t> fixed_distance_lengths() {
  return std::vector<std::uint8_t>(30, 5);
}

}  // namespace rfc1951

// ---------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------

namespace detail {

struct BlockCodes {
  HuffmanCode lit;
  HuffmanCode dist;
};

inline void write_symbol(BitWriter& bw, const HuffmanCode& code, unsigned sym) {
  bw.write_code(code.codes[sym], code.lengths[sym]);
}

inline void write_tokens(BitWriter& bw, std::span<const Token> toks,
                         const BlockCodes& codes) {
  using namespace rfc1951;
  for (const Token& t : toks) {
    if (t.is_literal()) {
      write_symbol(bw, codes.lit, t.byte);
      continue;
    }
    unsigned ls = length_symbol(t.length);
    write_symbol(bw, codes.lit, ls);
    bw.write_bits(
        static_cast<std::uint32_t>(t.length - kLenBase[ls - 257]),
        kLenExtra[ls - 257]);
    unsigned ds = dist_symbol(t.distance);
    write_symbol(bw, codes.dist, ds);
    bw.write_bits(static_cast<std::uint32_t>(t.distance - kDistBase[ds]),
                  kDistExtra[ds]);
  }
  write_symbol(bw, codes.lit, kEndOfBlock);
}

// zlib's trick: guarantee at least two used symbols per alphabet so every
// emitted table is a complete prefix code; strict inflaters (zlib's
// included) reject incomplete literal/length and code-length tables.
inline void pad_to_two_symbols(std::vector<std::uint64_t>& freq) {
  int used = 0;
  for (auto f : freq)
    if (f > 0) ++used;
  for (std::size_t s = 0; used < 2 && s < freq.size(); ++s)
    if (freq[s] == 0) {
      freq[s] = 1;
      ++used;
    }
}

// Run-length items for the code length sequence, RFC 1951 section 3.2.7.
struct ClItem {
  std::uint8_t symbol;  // 0..18
  std::uint8_t extra;   // repeat payload for 16/17/18
};

inline std::vector<ClItem> rle_code_lengths(
    std::span<const std::uint8_t> lengths) {
  std::vector<ClItem> items;
  std::size_t i = 0;
  while (i < lengths.size()) {
    std::uint8_t len = lengths[i];
    std::size_t run = 1;
    while (i + run < lengths.size() && lengths[i + run] == len) ++run;
    if (len == 0) {
      std::size_t left = run;
      while (left >= 11) {
        std::size_t take = std::min<std::size_t>(left, 138);
        items.push_back({18, static_cast<std::uint8_t>(take - 11)});
        left -= take;
      }
      if (left >= 3) {
        items.push_back({17, static_cast<std::uint8_t>(left - 3)});
        left = 0;
      }
      while (left--) items.push_back({0, 0});
    } else {
      items.push_back({len, 0});
      std::size_t left = run - 1;
      while (left >= 3) {
        std::size_t take = std::min<std::size_t>(left, 6);
        items.push_back({16, static_cast<std::uint8_t>(take - 3)});
        left -= take;
      }
      while (left--) items.push_back({len, 0});
    }
    i += run;
  }
  return items;
}

inline void write_dynamic_header(BitWriter& bw, const BlockCodes& codes,
                                 std::size_t hlit, std::size_t hdist) {
  using namespace rfc1951;
  std::vector<std::uint8_t> seq;
  seq.insert(seq.end(), codes.lit.lengths.begin(),
             codes.lit.lengths.begin() + hlit);
  seq.insert(seq.end(), codes.dist.lengths.begin(),
             codes.dist.lengths.begin() + hdist);
  auto items = rle_code_lengths(seq);

  std::vector<std::uint64_t> cl_freq(19, 0);
  for (const auto& it : items) ++cl_freq[it.symbol];
  pad_to_two_symbols(cl_freq);
  HuffmanCode cl = build_huffman_code_lengths(cl_freq, 7);

  std::size_t hclen = 19;
  while (hclen > 4 && cl.lengths[kClOrder[hclen - 1]] == 0) --hclen;

  bw.write_bits(static_cast<std::uint32_t>(hlit - 257), 5);
  bw.write_bits(static_cast<std::uint32_t>(hdist - 1), 5);
  bw.write_bits(static_cast<std::uint32_t>(hclen - 4), 4);
  for (std::size_t k = 0; k < hclen; ++k)
    bw.write_bits(cl.lengths[kClOrder[k]], 3);
  for (const auto& it : items) {
    write_symbol(bw, cl, it.symbol);
    if (it.symbol == 16) bw.write_bits(it.extra, 2);
    if (it.symbol == 17) bw.write_bits(it.extra, 3);
    if (it.symbol == 18) bw.write_bits(it.extra, 7);
  }
}

inline void write_coded_block(BitWriter& bw, std::span<const Token> toks,
                              BlockKind kind, bool final) {
  using namespace rfc1951;
  bw.write_bits(final ? 1 : 0, 1);
  if (kind == BlockKind::fixed) {
    bw.write_bits(1, 2);
    BlockCodes codes;
    codes.lit.lengths = fixed_literal_lengths();
    codes.lit.codes = canonical_codes(codes.lit.lengths);
    codes.dist.lengths = fixed_distance_lengths();
    codes.dist.codes = canonical_codes(codes.dist.lengths);
    write_tokens(bw, toks, codes);
    return;
  }

  bw.write_bits(2, 2);
  std::vector<std::uint64_t> lit_freq(286, 0);
  std::vector<std::uint64_t> dist_freq(30, 0);
  for (const Token& t : toks) {
    if (t.is_literal()) {
      ++lit_freq[t.byte];
    } else {
      ++lit_freq[length_symbol(t.length)];
      ++dist_freq[dist_symbol(t.distance)];
    }
  }
  ++lit_freq[kEndOfBlock];
  pad_to_two_symbols(lit_freq);
  pad_to_two_symbols(dist_freq);

  BlockCodes codes;
  codes.lit = build_huffman_code_lengths(lit_freq, 15);
  codes.dist = build_huffman_code_lengths(dist_freq, 15);

  std::size_t hlit = 286;
  while (hlit > 257 && codes.lit.lengths[hlit - 1] == 0) --hlit;
  std::size_t hdist = 30;
  while (hdist > 1 && codes.dist.lengths[hdist - 1] == 0) --hdist;

  write_dynamic_header(bw, codes, hlit, hdist);
  write_tokens(bw, toks, codes);
}

inline void write_stored_blocks(BitWriter& bw, ByteView raw) {
  std::size_t pos = 0;
  do {
    std::size_t take = std::min<std::size_t>(raw.size() - pos, 65535);
    bool final = pos + take == raw.size();
    bw.write_bits(final ? 1 : 0, 1);
    bw.write_bits(0, 2);
    bw.align_to_byte();
    bw.write_byte(static_cast<std::uint8_t>(take & 0xff));
    bw.write_byte(static_cast<std::uint8_t>(take >> 8));
    bw.write_byte(static_cast<std::uint8_t>(~take & 0xff));
    bw.write_byte(static_cast<std::uint8_t>((~take >> 8) & 0xff));
    for (std::size_t k = 0; k < take; ++k) bw.write_byte(raw[pos + k]);
    pos += take;
  } while (pos < raw.size());
}

}  // namespace detail

// Serializes a token stream as a raw RFC 1951 stream.  Coded blocks are
// cut so each covers at most 64 KiB of source, bounding frequency-table
// staleness; back-references may still reach into earlier blocks.
inline Bytes emit_deflate_stream(const TokenStream& ts, BlockKind kind) {
  using namespace rfc1951;
  std::size_t produced = 0;
  for (const Token& t : ts.tokens) {
    if (t.is_reference()) {
      if (t.length < kMinLength || t.length > kMaxLength)
        throw std::invalid_argument("reference length outside 3..258");
      if (t.distance > kMaxDistance || t.distance > produced)
        throw std::invalid_argument("reference distance out of range");
    }
    produced += t.coverage();
  }

  if (kind == BlockKind::stored) {
    Bytes raw = expand(ts);
    BitWriter bw;
    detail::write_stored_blocks(bw, view(raw));
    return bw.take();
  }

  BitWriter bw;
  std::size_t begin = 0;
  while (true) {
    std::size_t end = begin;
    std::size_t covered = 0;
    while (end < ts.tokens.size() && covered < 65536) {
      covered += ts.tokens[end].coverage();
      ++end;
    }
    bool final = end == ts.tokens.size();
    detail::write_coded_block(
        bw, std::span(ts.tokens).subspan(begin, end - begin), kind, final);
    begin = end;
    if (final) break;
  }
  return bw.take();
}

// ---------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------

namespace detail {

// Flat lookup table: peek `bits` (reversed code bits), get symbol+length.
struct DecodeTable {
  std::vector<std::uint16_t> sym;
  std::vector<std::uint8_t> len;
  unsigned bits = 0;
  bool empty = true;

  static constexpr std::uint16_t kInvalid = 0xffff;
};

inline DecodeTable build_decode_table(std::span<const std::uint8_t> lengths,
                                      std::size_t error_offset) {
  DecodeTable t;
  unsigned max_len = 0;
  for (auto l : lengths) max_len = std::max<unsigned>(max_len, l);
  if (max_len == 0) return t;  // empty code; only valid if never used

  // over-subscription check
  std::array<std::uint32_t, 16> count{};
  for (auto l : lengths)
    if (l > 0) ++count[l];
  std::uint32_t code = 0;
  for (unsigned bits = 1; bits <= max_len; ++bits) {
    code = (code + count[bits - 1]) << 1;
    if (code + count[bits] > (1u << bits))
      throw corrupt_stream("over-subscribed code", error_offset);
  }

  t.empty = false;
  t.bits = max_len;
  t.sym.assign(std::size_t{1} << max_len, DecodeTable::kInvalid);
  t.len.assign(std::size_t{1} << max_len, 0);

  auto codes = canonical_codes(lengths);
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    unsigned l = lengths[s];
    if (l == 0) continue;
    std::uint32_t rev = 0;
    for (unsigned k = 0; k < l; ++k)
      rev |= ((codes[s] >> k) & 1u) << (l - 1 - k);
    for (std::uint32_t fill = rev; fill < t.sym.size();
         fill += std::uint32_t{1} << l) {
      t.sym[fill] = static_cast<std::uint16_t>(s);
      t.len[fill] = static_cast<std::uint8_t>(l);
    }
  }
  return t;
}

inline unsigned decode_symbol(BitReader& br, const DecodeTable& t) {
  if (t.empty) throw corrupt_stream("symbol from empty code", br.byte_offset());
  std::uint32_t idx = br.peek_bits(t.bits);
  if (t.sym[idx] == DecodeTable::kInvalid)
    throw corrupt_stream("invalid code", br.byte_offset());
  br.consume(t.len[idx]);  // throws if the code ran past the end
  return t.sym[idx];
}

struct InflateTables {
  DecodeTable lit;
  DecodeTable dist;
};

inline InflateTables read_dynamic_tables(BitReader& br) {
  using namespace rfc1951;
  std::size_t hlit = 257 + br.read_bits(5);
  std::size_t hdist = 1 + br.read_bits(5);
  std::size_t hclen = 4 + br.read_bits(4);
  if (hlit > 286 || hdist > 30)
    throw corrupt_stream("bad code counts", br.byte_offset());

  std::vector<std::uint8_t> cl_lengths(19, 0);
  for (std::size_t k = 0; k < hclen; ++k)
    cl_lengths[kClOrder[k]] = static_cast<std::uint8_t>(br.read_bits(3));
  DecodeTable cl = build_decode_table(cl_lengths, br.byte_offset());

  std::vector<std::uint8_t> lengths(hlit + hdist, 0);
  std::size_t filled = 0;
  while (filled < lengths.size()) {
    unsigned sym = decode_symbol(br, cl);
    if (sym < 16) {
      lengths[filled++] = static_cast<std::uint8_t>(sym);
    } else if (sym == 16) {
      if (filled == 0)
        throw corrupt_stream("repeat with no previous length",
                             br.byte_offset());
      std::size_t run = 3 + br.read_bits(2);
      if (filled + run > lengths.size())
        throw corrupt_stream("length run overflow", br.byte_offset());
      std::uint8_t prev = lengths[filled - 1];
      while (run--) lengths[filled++] = prev;
    } else {
      std::size_t run = sym == 17 ? 3 + br.read_bits(3) : 11 + br.read_bits(7);
      if (filled + run > lengths.size())
        throw corrupt_stream("length run overflow", br.byte_offset());
      filled += run;
    }
  }

  InflateTables t;
  t.lit = build_decode_table(std::span(lengths).first(hlit), br.byte_offset());
  t.dist =
      build_decode_table(std::span(lengths).subspan(hlit), br.byte_offset());
  return t;
}

inline const InflateTables& fixed_tables() {
  static const InflateTables tables = [] {
    InflateTables t;
    auto lit = rfc1951::fixed_literal_lengths();
    auto dist = rfc1951::fixed_distance_lengths();
    dist.resize(32, 5);  // symbols 30/31 exist in the code, never in data
    t.lit = build_decode_table(lit, 0);
    t.dist = build_decode_table(dist, 0);
    return t;
  }();
  return tables;
}

}  // namespace detail

// Decodes a raw RFC 1951 stream (stored, fixed and dynamic blocks).
// Bytes after the final block are ignored.
inline Bytes inflate_stream(ByteView stream) {
  using namespace rfc1951;
  BitReader br(stream);
  Bytes out;
  bool final = false;
  while (!final) {
    final = br.read_bits(1) != 0;
    unsigned type = br.read_bits(2);
    if (type == 0) {
      br.align_to_byte();
      std::uint32_t len = br.read_aligned_byte();
      len |= std::uint32_t(br.read_aligned_byte()) << 8;
      std::uint32_t nlen = br.read_aligned_byte();
      nlen |= std::uint32_t(br.read_aligned_byte()) << 8;
      if ((len ^ nlen) != 0xffff)
        throw corrupt_stream("stored length mismatch", br.byte_offset());
      for (std::uint32_t k = 0; k < len; ++k)
        out.push_back(br.read_aligned_byte());
      continue;
    }
    if (type == 3) throw corrupt_stream("reserved block type", br.byte_offset());

    detail::InflateTables dynamic;
    const detail::InflateTables& tables =
        type == 1 ? detail::fixed_tables()
                  : (dynamic = detail::read_dynamic_tables(br), dynamic);

    while (true) {
      unsigned sym = detail::decode_symbol(br, tables.lit);
      if (sym == kEndOfBlock) break;
      if (sym < 256) {
        out.push_back(static_cast<std::uint8_t>(sym));
        continue;
      }
      if (sym > 285)
        throw corrupt_stream("bad length symbol", br.byte_offset());
      std::size_t len = kLenBase[sym - 257] + br.read_bits(kLenExtra[sym - 257]);
      unsigned dsym = detail::decode_symbol(br, tables.dist);
      if (dsym > 29)
        throw corrupt_stream("bad distance symbol", br.byte_offset());
      std::size_t dist = kDistBase[dsym] + br.read_bits(kDistExtra[dsym]);
      if (dist > out.size())
        throw corrupt_stream("distance before stream start", br.byte_offset());
      std::size_t from = out.size() - dist;
      for (std::size_t k = 0; k < len; ++k) out.push_back(out[from + k]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------

inline TokenStream literal_tokens(ByteView input) {
  TokenStream ts;
  ts.source_len = input.size();
  ts.tokens.reserve(input.size());
  for (std::uint8_t b : input) ts.tokens.push_back(Token::literal(b));
  return ts;
}

// Marker-aware compression front door.  Every mode strips markers when a
// nonce is supplied, so all modes compress the same plaintext; only
// debreach feeds the recovered taint to the matcher.  Markers never reach
// the wire.
inline TokenStream tokenize(ByteView annotated,
                            const std::optional<Nonce>& nonce,
                            CompressMode mode, const MatchConfig& cfg = {}) {
  Bytes clean;
  TaintMap taint;
  if (nonce) {
    StripResult stripped = strip_markers(annotated, *nonce);
    clean = std::move(stripped.clean);
    taint = std::move(stripped.taint);
  } else {
    if (mode == CompressMode::debreach)
      throw std::invalid_argument("debreach mode requires a nonce");
    clean.assign(annotated.begin(), annotated.end());
    taint = taint_free(clean.size());
  }

  switch (mode) {
    case CompressMode::huffman_only:
      return literal_tokens(view(clean));
    case CompressMode::standard:
      return lz77_match(view(clean), taint_free(clean.size()), cfg);
    case CompressMode::debreach:
      return lz77_match(view(clean), taint, cfg);
  }
  throw std::invalid_argument("bad mode");
}

inline Bytes compress(ByteView annotated, const std::optional<Nonce>& nonce,
                      CompressMode mode, const MatchConfig& cfg = {},
                      BlockKind kind = BlockKind::dynamic) {
  return emit_deflate_stream(tokenize(annotated, nonce, mode, cfg), kind);
}

// compressed size / original size; lower is better.
inline double compression_ratio(std::size_t compressed_len,
                                std::size_t original_len) {
  if (original_len == 0)
    throw std::invalid_argument("original length must be positive");
  return static_cast<double>(compressed_len) /
         static_cast<double>(original_len);
}

// ---------------------------------------------------------------------
// zlib container (RFC 1950), optional CLI wrapper
// ---------------------------------------------------------------------

inline std::uint32_t adler32(ByteView data) {
  std::uint32_t a = 1, b = 0;
  std::size_t i = 0;
  while (i < data.size()) {
    std::size_t chunk = std::min<std::size_t>(data.size() - i, 5552);
    for (std::size_t k = 0; k < chunk; ++k) {
      a += data[i + k];
      b += a;
    }
    a %= 65521;
    b %= 65521;
    i += chunk;
  }
  return (b << 16) | a;
}

inline Bytes zlib_wrap(ByteView deflate_stream, std::uint32_t payload_adler) {
  Bytes out;
  out.reserve(deflate_stream.size() + 6);
  out.push_back(0x78);  // CM=8, CINFO=7
  out.push_back(0x01);  // no dict, check bits
  out.insert(out.end(), deflate_stream.begin(), deflate_stream.end());
  for (int shift = 24; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(payload_adler >> shift));
  return out;
}

inline Bytes zlib_unwrap(ByteView container) {
  if (container.size() < 6) throw corrupt_stream("container too short", 0);
  std::uint8_t cmf = container[0], flg = container[1];
  if ((cmf & 0x0f) != 8 || (flg & 0x20) != 0 ||
      (std::uint32_t(cmf) * 256 + flg) % 31 != 0)
    throw corrupt_stream("bad container header", 0);
  Bytes payload = inflate_stream(container.subspan(2, container.size() - 6));
  std::uint32_t want = 0;
  for (std::size_t k = container.size() - 4; k < container.size(); ++k)
    want = (want << 8) | container[k];
  if (adler32(view(payload)) != want)
    throw corrupt_stream("checksum mismatch", container.size() - 4);
  return payload;
}

}  // namespace debreach
