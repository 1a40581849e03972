#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <utility>

#include "bytes.hpp"
#include "errors.hpp"

namespace debreach {

inline constexpr std::uint8_t kMarkerOpen = '{';
inline constexpr std::uint8_t kMarkerClose = '}';

// Random in-band delimiter for sensitive regions.  A region of sensitive
// bytes S is written as NONCE{S}NONCE.  Braces are banned from the nonce
// so one linear scan can recognize markers unambiguously.
class Nonce {
 public:
  static constexpr std::size_t max_length = 64;

  explicit Nonce(Bytes bytes) : bytes_(std::move(bytes)) {
    if (bytes_.empty() || bytes_.size() > max_length)
      throw std::invalid_argument("nonce must be 1..64 bytes");
    for (std::uint8_t b : bytes_)
      if (b == kMarkerOpen || b == kMarkerClose)
        throw std::invalid_argument("nonce must not contain braces");
  }

  explicit Nonce(std::string_view text) : Nonce(to_bytes(text)) {}

  const Bytes& bytes() const noexcept { return bytes_; }
  std::size_t size() const noexcept { return bytes_.size(); }

 private:
  Bytes bytes_;
};

// Half-open byte range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

namespace detail {

inline void check_span_bounds(const std::vector<Span>& spans,
                              std::size_t input_len) {
  for (const Span& s : spans) {
    if (s.start >= s.end || s.end > input_len)
      throw std::invalid_argument("span out of bounds or empty");
  }
}

}  // namespace detail

// Sorts and merges overlapping or adjacent spans.
inline std::vector<Span> normalize_spans(std::vector<Span> spans,
                                         std::size_t input_len) {
  detail::check_span_bounds(spans, input_len);
  std::sort(spans.begin(), spans.end());
  std::vector<Span> out;
  for (const Span& s : spans) {
    if (!out.empty() && s.start <= out.back().end)
      out.back().end = std::max(out.back().end, s.end);
    else
      out.push_back(s);
  }
  return out;
}

// Per-byte forward distance to the nearest sensitive byte.  next_taint[i]
// is 0 exactly on sensitive bytes; when no sensitive byte follows i the
// entry holds the tail sentinel input_len - i, which is a safe match cap
// because a match can never run past the end of the input anyway.
struct TaintMap {
  std::size_t input_len = 0;
  std::vector<Span> spans;  // sorted, disjoint, non-adjacent
  std::vector<std::uint32_t> next_taint;

  bool sensitive(std::size_t i) const { return next_taint[i] == 0; }

  // True when next_taint[i] is the end-of-input sentinel rather than the
  // distance to real sensitive data.
  bool tail_sentinel(std::size_t i) const {
    return i + next_taint[i] == input_len;
  }
};

inline TaintMap build_next_taint(std::size_t input_len,
                                 std::vector<Span> spans) {
  TaintMap map;
  map.input_len = input_len;
  map.spans = normalize_spans(std::move(spans), input_len);
  map.next_taint.resize(input_len);

  std::size_t next_sensitive = input_len;  // index of next sensitive byte
  auto span_it = map.spans.rbegin();
  for (std::size_t i = input_len; i-- > 0;) {
    if (span_it != map.spans.rend() && i >= span_it->start &&
        i < span_it->end) {
      map.next_taint[i] = 0;
      next_sensitive = i;
      if (i == span_it->start) ++span_it;
    } else {
      // distance to the next sensitive byte, or the tail sentinel
      map.next_taint[i] =
          static_cast<std::uint32_t>(std::min(next_sensitive, input_len) - i);
    }
  }
  return map;
}

inline TaintMap taint_free(std::size_t input_len) {
  return build_next_taint(input_len, {});
}

// Draws `length` bytes from [A-Za-z0-9].
template <typename Rng>
Nonce generate_nonce(std::size_t length, Rng& rng) {
  static constexpr std::string_view alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  if (length < 1 || length > Nonce::max_length)
    throw std::invalid_argument("nonce length must be 1..64");
  Bytes out(length);
  for (auto& b : out)
    b = static_cast<std::uint8_t>(alphabet[uniform_below(rng, alphabet.size())]);
  return Nonce(std::move(out));
}

// Wraps every span of `input` in NONCE{...}NONCE.  Spans must be disjoint
// (adjacent is fine, they stay separate markers).
inline Bytes annotate(ByteView input, std::vector<Span> spans,
                      const Nonce& nonce) {
  detail::check_span_bounds(spans, input.size());
  std::sort(spans.begin(), spans.end());
  for (std::size_t k = 1; k < spans.size(); ++k)
    if (spans[k].start < spans[k - 1].end)
      throw std::invalid_argument("overlapping spans");

  Bytes out;
  out.reserve(input.size() + spans.size() * (2 * nonce.size() + 2));
  std::size_t pos = 0;
  for (const Span& s : spans) {
    out.insert(out.end(), input.begin() + pos, input.begin() + s.start);
    out.insert(out.end(), nonce.bytes().begin(), nonce.bytes().end());
    out.push_back(kMarkerOpen);
    out.insert(out.end(), input.begin() + s.start, input.begin() + s.end);
    out.push_back(kMarkerClose);
    out.insert(out.end(), nonce.bytes().begin(), nonce.bytes().end());
    pos = s.end;
  }
  out.insert(out.end(), input.begin() + pos, input.end());
  return out;
}

struct StripResult {
  Bytes clean;
  TaintMap taint;
};

// Removes every NONCE{...}NONCE pair and reports the covered bytes as
// sensitive spans.  Exact inverse of annotate on its image.  A bare nonce
// outside a marker means the nonce leaked into payload, which is misuse.
inline StripResult strip_markers(ByteView annotated, const Nonce& nonce) {
  const Bytes& n = nonce.bytes();
  auto matches_nonce = [&](std::size_t i) {
    if (i + n.size() > annotated.size()) return false;
    return std::equal(n.begin(), n.end(), annotated.begin() + i);
  };

  Bytes clean;
  clean.reserve(annotated.size());
  std::vector<Span> spans;
  std::optional<std::size_t> open_start;  // clean-index of current region

  auto starts_marker = [&](std::size_t i) {  // NONCE{ at i
    return matches_nonce(i) && i + n.size() < annotated.size() &&
           annotated[i + n.size()] == kMarkerOpen;
  };

  std::size_t i = 0;
  while (i < annotated.size()) {
    if (open_start) {
      // end markers win inside a region, so }NONCE{ closes and leaves a
      // literal '{' behind
      if (annotated[i] == kMarkerClose && matches_nonce(i + 1)) {
        if (clean.size() > *open_start)
          spans.push_back(Span{*open_start, clean.size()});
        open_start.reset();
        i += 1 + n.size();
        continue;
      }
      if (matches_nonce(i)) {
        if (starts_marker(i)) throw malformed_annotation("nested start marker");
        throw malformed_annotation("nonce inside sensitive payload");
      }
    } else {
      if (matches_nonce(i)) {
        if (!starts_marker(i))
          throw malformed_annotation("nonce outside marker");
        open_start = clean.size();
        i += n.size() + 1;
        continue;
      }
      // a payload '}' directly before a start marker is not an end marker
      if (annotated[i] == kMarkerClose && matches_nonce(i + 1) &&
          !starts_marker(i + 1))
        throw malformed_annotation("end marker without start");
    }
    clean.push_back(annotated[i]);
    ++i;
  }
  if (open_start) throw malformed_annotation("start marker without end");

  TaintMap taint = build_next_taint(clean.size(), std::move(spans));
  return StripResult{std::move(clean), std::move(taint)};
}

}  // namespace debreach
