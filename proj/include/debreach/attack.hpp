#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "bytes.hpp"
#include "deflate.hpp"

namespace debreach {

// Page scaffold with one attacker-controlled slot and one secret slot:
// page = prefix . injected . middle . secret . suffix.  Scaffold bytes are
// chosen outside the usual guess alphabets so the only cross-guess match
// is the designed one.
struct PageTemplate {
  Bytes prefix;
  Bytes middle;
  Bytes suffix;

  Bytes instantiate(ByteView injected, ByteView secret,
                    Span* secret_span = nullptr) const {
    Bytes page;
    page.reserve(prefix.size() + injected.size() + middle.size() +
                 secret.size() + suffix.size());
    page.insert(page.end(), prefix.begin(), prefix.end());
    page.insert(page.end(), injected.begin(), injected.end());
    page.insert(page.end(), middle.begin(), middle.end());
    std::size_t secret_start = page.size();
    page.insert(page.end(), secret.begin(), secret.end());
    if (secret_span) *secret_span = Span{secret_start, page.size()};
    page.insert(page.end(), suffix.begin(), suffix.end());
    return page;
  }

  // Addressbook-style response: the victim's page embeds the secret right
  // after a public "sendto=" anchor and reflects the request's query
  // string verbatim.  Scaffold bytes stay outside the usual guess
  // alphabets and repeat no trigram, so the page compresses to literals
  // plus exactly the designed injected-vs-secret match; lengths are
  // placed so a one-byte match difference always moves the fixed-block
  // output by a whole byte.
  static PageTemplate addressbook_page() {
    PageTemplate t;
    t.prefix = to_bytes("[*|-'` |]=! ;~)]\"='");
    t.middle = to_bytes("'&$-<)/>$?)!|(:*&~/&~'#%[[sendto=");
    t.suffix = to_bytes("<;%%!!(~(&&+>");
    return t;
  }
};

// Compressed-size oracle over one template instantiation; deterministic.
// In debreach mode the secret span is marker-annotated before compression
// (the nonce stays out of band), other modes compress the same plaintext.
inline std::size_t compression_oracle(const PageTemplate& tmpl,
                                      ByteView injected, ByteView secret,
                                      CompressMode mode,
                                      const MatchConfig& cfg = {},
                                      BlockKind kind = BlockKind::fixed) {
  static const Nonce nonce(Bytes{0x02, 0x03});
  Span secret_span;
  Bytes page = tmpl.instantiate(injected, secret, &secret_span);
  std::vector<Span> spans;
  if (secret_span.start < secret_span.end) spans.push_back(secret_span);
  Bytes annotated = annotate(view(page), spans, nonce);
  return compress(view(annotated), nonce, mode, cfg, kind).size();
}

using SizeOracle = std::function<std::size_t(ByteView injected)>;

inline SizeOracle make_oracle(PageTemplate tmpl, Bytes secret,
                              CompressMode mode, MatchConfig cfg = {},
                              BlockKind kind = BlockKind::fixed) {
  return [tmpl = std::move(tmpl), secret = std::move(secret), mode, cfg,
          kind](ByteView injected) {
    return compression_oracle(tmpl, injected, view(secret), mode, cfg, kind);
  };
}

struct OracleCall {
  std::size_t position;
  std::uint8_t guess;
  std::size_t size;
};

struct AttackTranscript {
  Bytes alphabet;
  std::vector<OracleCall> calls;  // one entry per oracle invocation
  Bytes recovered;
  bool ambiguous = false;  // stopped on a size tie
  std::size_t oracle_calls = 0;

  std::vector<std::pair<std::uint8_t, std::size_t>> position_table(
      std::size_t pos) const {
    std::vector<std::pair<std::uint8_t, std::size_t>> rows;
    for (const auto& c : calls)
      if (c.position == pos) rows.emplace_back(c.guess, c.size);
    return rows;
  }
};

// Byte-by-byte recovery: at each position issue one oracle call per
// alphabet byte appended to prefix + recovered-so-far and take the
// argmin; a tie means the position is ambiguous and the attack stops.
inline AttackTranscript recover_secret(const SizeOracle& oracle,
                                       ByteView known_prefix,
                                       ByteView alphabet,
                                       std::size_t max_len) {
  if (alphabet.empty()) throw std::invalid_argument("alphabet is empty");

  AttackTranscript tr;
  tr.alphabet.assign(alphabet.begin(), alphabet.end());
  Bytes attempt(known_prefix.begin(), known_prefix.end());

  for (std::size_t pos = 0; pos < max_len; ++pos) {
    std::size_t best_size = std::numeric_limits<std::size_t>::max();
    std::uint8_t best_guess = 0;
    bool tie = false;
    attempt.push_back(0);
    for (std::uint8_t g : alphabet) {
      attempt.back() = g;
      std::size_t size = oracle(view(attempt));
      tr.calls.push_back(OracleCall{pos, g, size});
      if (size < best_size) {
        best_size = size;
        best_guess = g;
        tie = false;
      } else if (size == best_size) {
        tie = true;
      }
    }
    attempt.pop_back();
    if (tie) {
      tr.ambiguous = true;
      break;
    }
    tr.recovered.push_back(best_guess);
    attempt.push_back(best_guess);
  }
  tr.oracle_calls = tr.calls.size();
  return tr;
}

enum class LeakAgg { min, mean };

struct LeakRow {
  std::size_t n;  // known-prefix length
  double diff;    // aggregated size(incorrect) - size(correct), in bytes
};

struct LeakReport {
  std::vector<LeakRow> rows;
};

// For each prefix length n, compares the compressed size of the correct
// next-byte guess against incorrect ones.  A positive diff means the
// correct guess is observably smaller: the leak is exploitable.
inline LeakReport measure_leak(const PageTemplate& tmpl, ByteView secret,
                               ByteView alphabet, CompressMode mode,
                               std::size_t max_n, const MatchConfig& cfg = {},
                               BlockKind kind = BlockKind::fixed,
                               LeakAgg agg = LeakAgg::min,
                               ByteView bootstrap = {}) {
  if (max_n > secret.size())
    throw std::invalid_argument("max_n exceeds secret length");
  if (alphabet.empty()) throw std::invalid_argument("alphabet is empty");

  LeakReport report;
  for (std::size_t n = 0; n < max_n; ++n) {
    Bytes attempt(bootstrap.begin(), bootstrap.end());
    attempt.insert(attempt.end(), secret.begin(), secret.begin() + n);
    attempt.push_back(secret[n]);
    double correct = static_cast<double>(
        compression_oracle(tmpl, view(attempt), secret, mode, cfg, kind));

    double min_diff = std::numeric_limits<double>::infinity();
    double sum_diff = 0;
    std::size_t incorrect = 0;
    for (std::uint8_t g : alphabet) {
      if (g == secret[n]) continue;
      attempt.back() = g;
      double size = static_cast<double>(
          compression_oracle(tmpl, view(attempt), secret, mode, cfg, kind));
      min_diff = std::min(min_diff, size - correct);
      sum_diff += size - correct;
      ++incorrect;
    }
    double diff = agg == LeakAgg::min
                      ? min_diff
                      : (incorrect ? sum_diff / incorrect : 0.0);
    report.rows.push_back(LeakRow{n, diff});
  }
  return report;
}

// ---------------------------------------------------------------------
// Text forms
// ---------------------------------------------------------------------

inline std::string hex_byte(std::uint8_t b) {
  static constexpr char digits[] = "0123456789abcdef";
  return {digits[b >> 4], digits[b & 0xf]};
}

inline std::string format_transcript(const AttackTranscript& tr) {
  std::ostringstream os;
  os << "pos,guess_byte_hex,size\n";
  for (const auto& c : tr.calls)
    os << c.position << ',' << hex_byte(c.guess) << ',' << c.size << '\n';
  os << "# recovered_hex ";
  for (std::uint8_t b : tr.recovered) os << hex_byte(b);
  os << "\n# oracle_calls " << tr.oracle_calls;
  os << "\n# ambiguous " << (tr.ambiguous ? 1 : 0) << '\n';
  return os.str();
}

inline std::string format_leak_csv(const LeakReport& report) {
  std::ostringstream os;
  os << "n,diff_bytes\n";
  for (const auto& row : report.rows) {
    os << row.n << ',';
    if (row.diff == static_cast<long long>(row.diff))
      os << static_cast<long long>(row.diff);
    else
      os << row.diff;
    os << '\n';
  }
  return os.str();
}

}  // namespace debreach
