#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace debreach {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteView b) {
  return std::string(b.begin(), b.end());
}

inline ByteView view(const Bytes& b) {
  return ByteView(b.data(), b.size());
}

// Deterministic uniform draw in [0, n).  std::uniform_int_distribution is
// not portable across standard libraries, so results that must be stable
// for a fixed seed go through this instead.
template <typename Rng>
std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = static_cast<std::uint64_t>(rng());
  } while (r >= limit);
  return r % n;
}

}  // namespace debreach
