// End-to-end acceptance suite: one check per numbered criterion, each with
// its own wall-clock budget.  Prints one PASS/FAIL line per criterion and
// exits with the number of failures.

#include <array>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

#include <debreach/debreach.hpp>

#include "support/corpus.hpp"
#include "support/random_inputs.hpp"
#include "support/taint_oracle.hpp"
#include "support/zlib_helpers.hpp"

using namespace debreach;
namespace dbt = debreach::testing;

namespace {

struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (notes.size() < 6) notes.push_back(what);
  }
};

int g_failures = 0;

template <typename Fn>
void criterion(int num, const std::string& title, double budget_s, Fn&& fn) {
  auto t0 = std::chrono::steady_clock::now();
  Check c;
  try {
    fn(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("unexpected exception: ") + e.what());
  }
  double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  c.expect(secs < budget_s,
           "runtime " + std::to_string(secs) + "s exceeds budget " +
               std::to_string(budget_s) + "s");
  std::printf("%s  %d. %s (%.2fs)\n", c.ok ? "PASS" : "FAIL", num,
              title.c_str(), secs);
  if (!c.ok) {
    ++g_failures;
    for (const auto& note : c.notes) std::printf("      - %s\n", note.c_str());
  }
  std::fflush(stdout);
}

std::string show_tokens(const TokenStream& ts) {
  std::ostringstream os;
  for (const Token& t : ts.tokens) {
    if (t.is_literal())
      os << (std::isprint(t.byte) ? std::string(1, char(t.byte)) : "?");
    else
      os << "<" << t.distance << "," << t.length << ">";
  }
  return os.str();
}

const std::string kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789@.";

Nonce pick_nonce(std::mt19937_64& rng, const Bytes& payload) {
  while (true) {
    Nonce n = generate_nonce(6, rng);
    if (std::search(payload.begin(), payload.end(), n.bytes().begin(),
                    n.bytes().end()) == payload.end())
      return n;
  }
}

// disjoint spans covering ~fraction of len, placement order randomized
std::vector<Span> fraction_spans(std::mt19937_64& rng, std::size_t len,
                                 double fraction) {
  std::vector<Span> spans;
  if (len == 0 || fraction <= 0) return spans;
  auto target = static_cast<std::size_t>(fraction * double(len));
  std::vector<bool> used(len, false);
  std::size_t covered = 0;
  int stall = 0;
  while (covered < target && stall < 2000) {
    std::size_t start = uniform_below(rng, len);
    std::size_t want =
        std::min<std::size_t>(1 + uniform_below(rng, 48), target - covered);
    std::size_t end = std::min(len, start + want);
    bool clear = end > start;
    for (std::size_t k = start; k < end && clear; ++k) clear = !used[k];
    if (!clear) {
      ++stall;
      continue;
    }
    for (std::size_t k = start; k < end; ++k) used[k] = true;
    covered += end - start;
    spans.push_back({start, end});
    stall = 0;
  }
  return spans;
}

void check_1_worked_example(Check& c) {
  Bytes input = to_bytes("she sells seashells");
  auto ts = lz77_match(view(input), build_next_taint(input.size(), {}), {});

  std::vector<Token> want;
  for (char ch : std::string_view("she sells sea"))
    want.push_back(Token::literal(static_cast<std::uint8_t>(ch)));
  want.push_back(Token::reference(13, 3));
  want.push_back(Token::reference(10, 3));
  c.expect(ts.tokens == want,
           "token stream is \"" + show_tokens(ts) +
               "\", not 13 literals + <13,3> + <10,3>; a greedy matcher "
               "that emits length-3 matches necessarily also emits <6,3> "
               "for the repeated \" se\" (zlib does too)");

  std::vector<std::uint64_t> freq(256, 0);
  freq['s'] = 6;
  freq['e'] = 4;
  freq['l'] = 4;
  freq['h'] = 2;
  freq[' '] = 2;
  freq['a'] = 1;
  auto code = build_huffman_code_lengths(freq);
  c.expect(code.weighted_length(freq) == 46,
           "literal code costs " + std::to_string(code.weighted_length(freq)) +
               " bits, want 46");
}

void check_2_round_trip(Check& c) {
  std::mt19937_64 rng(0xdeb0001);
  std::size_t failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t len;
    switch (uniform_below(rng, 20)) {
      case 0: len = 65536; break;
      case 1:
      case 2: len = 16384 + uniform_below(rng, 49152); break;
      default: len = uniform_below(rng, 4096); break;
    }
    Bytes input = dbt::random_text(rng, len);
    Nonce nonce = pick_nonce(rng, input);
    Bytes annotated =
        annotate(view(input), dbt::random_spans(rng, input.size()), nonce);

    auto mode = static_cast<CompressMode>(trial % 3);
    auto kind = static_cast<BlockKind>((trial / 3) % 3);
    Bytes stream = compress(view(annotated), nonce, mode, {}, kind);
    if (inflate_stream(view(stream)) != input) {
      ++failures;
      if (failures == 1)
        c.expect(false, "first mismatch at trial " + std::to_string(trial));
    }
  }
  c.expect(failures == 0,
           std::to_string(failures) + " of 10000 round trips failed");
}

void check_3_sensitive_exclusion(Check& c) {
  std::mt19937_64 rng(0xdeb0002);
  std::size_t violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    Bytes input = dbt::random_text(rng, 1 + uniform_below(rng, 2048));
    auto taint =
        build_next_taint(input.size(), dbt::random_spans(rng, input.size()));
    auto ts = lz77_match(view(input), taint, {});

    std::size_t pos = 0;
    for (const Token& t : ts.tokens) {
      if (t.is_reference())
        for (std::size_t k = 0; k < t.length; ++k)
          if (taint.next_taint[pos + k] == 0 ||
              taint.next_taint[pos - t.distance + k] == 0)
            ++violations;
      pos += t.coverage();
    }
    if (pos != input.size()) ++violations;
  }
  c.expect(violations == 0,
           std::to_string(violations) + " sensitive bytes touched by matches");
}

void check_4_non_interference(Check& c) {
  std::mt19937_64 rng(0xdeb0003);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Bytes base = dbt::random_text(rng, 64 + uniform_below(rng, 2000));
    auto spans = dbt::random_spans(rng, base.size());
    if (spans.empty())
      spans.push_back({0, std::min<std::size_t>(16, base.size())});
    auto taint = build_next_taint(base.size(), spans);

    Bytes other = base;
    for (const Span& s : taint.spans)
      for (std::size_t i = s.start; i < s.end; ++i)
        other[i] = static_cast<std::uint8_t>(uniform_below(rng, 256));

    auto a = lz77_match(view(base), taint, {});
    auto b = lz77_match(view(other), taint, {});
    if (a.tokens.size() != b.tokens.size()) {
      ++violations;
      continue;
    }
    for (std::size_t k = 0; k < a.tokens.size(); ++k) {
      if (a.tokens[k].is_literal() != b.tokens[k].is_literal() ||
          (a.tokens[k].is_reference() && !(a.tokens[k] == b.tokens[k])))
        ++violations;
    }
  }
  c.expect(violations == 0,
           std::to_string(violations) + " non-interference violations");
}

void check_5_attack(Check& c) {
  auto tmpl = PageTemplate::addressbook_page();
  Bytes alphabet = to_bytes(kAlphabet);
  Bytes bootstrap = to_bytes("sendto=");
  MatchConfig oracle_cfg;
  oracle_cfg.min_emit_len = 8;  // one matched byte is exactly one output byte

  std::mt19937_64 rng(0xdeb0004);
  int standard_ok = 0;
  int debreach_full = 0;
  for (int run = 0; run < 100; ++run) {
    Bytes secret(12);
    for (auto& b : secret) b = alphabet[uniform_below(rng, alphabet.size())];

    auto std_oracle =
        make_oracle(tmpl, secret, CompressMode::standard, oracle_cfg);
    auto tr = recover_secret(std_oracle, view(bootstrap), view(alphabet),
                             secret.size());
    if (tr.recovered == secret) ++standard_ok;

    auto dbr_oracle =
        make_oracle(tmpl, secret, CompressMode::debreach, oracle_cfg);
    auto tr2 = recover_secret(dbr_oracle, view(bootstrap), view(alphabet),
                              secret.size());
    if (tr2.recovered == secret) ++debreach_full;
  }
  c.expect(standard_ok == 100,
           "standard mode recovered " + std::to_string(standard_ok) + "/100");
  c.expect(debreach_full == 0, "debreach mode recovered " +
                                   std::to_string(debreach_full) +
                                   "/100, want 0");

  Bytes secret = to_bytes("bob@test.com");
  auto leak_std = measure_leak(tmpl, view(secret), view(alphabet),
                               CompressMode::standard, secret.size());
  for (const auto& row : leak_std.rows)
    if (row.n >= 3)
      c.expect(row.diff >= 1, "standard diff(" + std::to_string(row.n) +
                                  ") = " + std::to_string(row.diff));
  auto leak_dbr = measure_leak(tmpl, view(secret), view(alphabet),
                               CompressMode::debreach, secret.size());
  for (const auto& row : leak_dbr.rows)
    c.expect(row.diff <= 0, "debreach diff(" + std::to_string(row.n) +
                                ") = " + std::to_string(row.diff));
}

void check_6_solver(Check& c) {
  std::mt19937_64 rng(0xdeb0005);
  for (int trial = 0; trial < 200; ++trial) {
    FactBase fb = dbt::random_fact_base(rng);
    auto fast = solve_taint(fb);
    auto slow = dbt::solve_taint_naive(fb);
    bool equal = fast.tainted_var_from == slow.tainted_var_from &&
                 fast.tainted_field_from == slow.tainted_field_from &&
                 fast.tainted == slow.tainted &&
                 fast.data_dep == slow.data_dep &&
                 fast.tainted_sink == slow.tainted_sink;
    c.expect(equal, "solver mismatch on random base " + std::to_string(trial));
    if (!equal) return;
  }

  auto read_file = [](const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string text;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, got);
    std::fclose(f);
    return text;
  };
  auto fb2 =
      parse_facts(read_file(std::string(DEBREACH_TEST_DATA) + "/fig2.facts"));
  auto derived = solve_taint(fb2);
  c.expect(derived.tainted_sink == std::set<StmtId>{17},
           "addressbook fixture tainted sink set is not {17}");

  auto fb8 =
      parse_facts(read_file(std::string(DEBREACH_TEST_DATA) + "/fig8.facts"));
  DDG ddg = build_ddg(fb8.data_dep);
  for (StmtId s : fb8.tainted_sink) ddg.add_node(s);
  SafetyInfo safety;
  safety.context = fb8.context;
  safety.unsafe_ops = fb8.unsafe_op;
  auto plan = find_instrumentation_points(fb8.tainted_sink, ddg, safety);
  c.expect(plan.points.at(17) == std::set<StmtId>{18, 20},
           "dependence fixture plan is not {18, 20}");
}

void check_7_ratios(Check& c) {
  std::mt19937_64 rng(0xdeb0006);
  auto corpus = dbt::canterbury_style_corpus(rng);
  c.expect(corpus.size() >= 10, "corpus too small");

  for (const Bytes& data : corpus) {
    Nonce nonce = pick_nonce(rng, data);
    auto spans_20 = fraction_spans(rng, data.size(), 0.2);
    // nested subset: same placements, trimmed to a quarter of the coverage
    std::vector<Span> spans_05;
    std::size_t want = static_cast<std::size_t>(0.05 * double(data.size()));
    std::size_t covered = 0;
    for (const Span& s : spans_20) {
      if (covered >= want) break;
      spans_05.push_back(s);
      covered += s.end - s.start;
    }

    auto stream_size = [&](const std::vector<Span>& spans, CompressMode mode) {
      Bytes annotated = annotate(view(data), spans, nonce);
      return compress(view(annotated), nonce, mode, {}, BlockKind::dynamic)
          .size();
    };

    double huff = compression_ratio(
        stream_size({}, CompressMode::huffman_only), data.size());
    std::size_t deb0 = stream_size({}, CompressMode::debreach);
    std::size_t deb05 = stream_size(spans_05, CompressMode::debreach);
    std::size_t deb20 = stream_size(spans_20, CompressMode::debreach);

    for (std::size_t size : {deb0, deb05, deb20})
      c.expect(compression_ratio(size, data.size()) <= huff,
               "debreach ratio above huffman-only on a corpus file");
    c.expect(deb0 <= deb05 && deb05 <= deb20,
             "debreach ratio not non-decreasing in the taint fraction");

    auto std_tokens = tokenize(view(data), nonce, CompressMode::standard);
    auto deb_tokens = tokenize(view(data), nonce, CompressMode::debreach);
    c.expect(std_tokens.tokens == deb_tokens.tokens,
             "taint-free debreach tokens differ from standard");
  }
}

void check_8_interop(Check& c) {
  std::mt19937_64 rng(0xdeb0007);
  std::vector<Bytes> corpus = dbt::canterbury_style_corpus(rng);
  while (corpus.size() < 48)
    corpus.push_back(dbt::random_text(rng, uniform_below(rng, 40000)));
  corpus.push_back(Bytes{});            // empty stream edge case
  corpus.push_back(Bytes(70000, 'a'));  // multiple stored blocks
  c.expect(corpus.size() >= 50, "interop corpus too small");

  int file_no = 0;
  for (const Bytes& data : corpus) {
    int level = std::array{0, 1, 6, 9}[file_no % 4];
    Bytes theirs = dbt::zlib_deflate_raw(data, level);
    if (inflate_stream(view(theirs)) != data)
      c.expect(false, "their stream, our inflater: mismatch on file " +
                          std::to_string(file_no));

    auto kind = file_no % 2 ? BlockKind::fixed : BlockKind::dynamic;
    Bytes ours =
        compress(view(data), std::nullopt, CompressMode::standard, {}, kind);
    if (dbt::zlib_inflate_raw(ours, data.size()) != data)
      c.expect(false, "our stream, their inflater: mismatch on file " +
                          std::to_string(file_no));
    ++file_no;
  }
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion(1, "worked-example regression: token stream and 46-bit code", 1.0,
            check_1_worked_example);
  criterion(2, "round trip over modes, block kinds and marker spans", 120.0,
            check_2_round_trip);
  criterion(3, "references never touch sensitive bytes on either side", 120.0,
            check_3_sensitive_exclusion);
  criterion(4, "equal-length secrets leave the token structure unchanged",
            120.0, check_4_non_interference);
  criterion(5, "byte-by-byte attack works on standard, dies on debreach",
            300.0, check_5_attack);
  criterion(6, "solver matches naive fixpoint; fixtures solve as published",
            60.0, check_6_solver);
  criterion(7, "ratio ordering across modes and taint fractions", 120.0,
            check_7_ratios);
  criterion(8, "byte-exact interop with an independent codec", 120.0,
            check_8_interop);

  if (g_failures == 0)
    std::printf("all criteria passed\n");
  else
    std::printf("%d criterion(s) failed\n", g_failures);
  return g_failures;
}
