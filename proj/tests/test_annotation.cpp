#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <debreach/annotation.hpp>

using namespace debreach;

namespace {

// counter-driven stand-in for the random source
struct FixedSource {
  std::vector<std::uint64_t> values;
  std::size_t next = 0;
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return UINT64_MAX; }
  result_type operator()() { return values[next++ % values.size()]; }
};

}  // namespace

TEST_CASE("generate_nonce draws alphanumerics deterministically") {
  // alphabet index of D=3, B=1, R=17
  FixedSource src{{3, 1, 17}};
  CHECK(to_string(view(generate_nonce(3, src).bytes())) == "DBR");

  std::mt19937_64 a(42), b(42);
  auto n1 = generate_nonce(16, a);
  auto n2 = generate_nonce(16, b);
  CHECK(n1.bytes() == n2.bytes());
  CHECK(n1.size() == 16);
  for (auto c : n1.bytes()) CHECK(std::isalnum(c));

  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(generate_nonce(0, rng), std::invalid_argument);
  CHECK_THROWS_AS(generate_nonce(65, rng), std::invalid_argument);
}

TEST_CASE("nonce validation") {
  CHECK_THROWS_AS(Nonce(""), std::invalid_argument);
  CHECK_THROWS_AS(Nonce("a{b"), std::invalid_argument);
  CHECK_THROWS_AS(Nonce("a}b"), std::invalid_argument);
  CHECK(Nonce("DBR").size() == 3);
}

TEST_CASE("annotate wraps spans in markers") {
  Nonce dbr("DBR");
  auto out = annotate(view(to_bytes("bob")), {{0, 3}}, dbr);
  CHECK(to_string(view(out)) == "DBR{bob}DBR");

  CHECK(to_string(view(annotate(view(to_bytes("abc")), {}, dbr))) == "abc");

  auto sells = annotate(view(to_bytes("she sells seashells")), {{4, 9}},
                        Nonce("N7"));
  CHECK(to_string(view(sells)) == "she N7{sells}N7 seashells");

  CHECK_THROWS_AS(
      annotate(view(to_bytes("abcdef")), {{0, 3}, {2, 5}}, dbr),
      std::invalid_argument);
  CHECK_THROWS_AS(annotate(view(to_bytes("abc")), {{0, 4}}, dbr),
                  std::invalid_argument);

  // output length contract
  auto in = to_bytes("0123456789");
  auto annotated = annotate(view(in), {{1, 3}, {5, 6}}, dbr);
  CHECK(annotated.size() == in.size() + 2 * (2 * dbr.size() + 2));
}

TEST_CASE("strip_markers inverts annotate") {
  Nonce dbr("DBR");
  auto [clean, taint] = strip_markers(view(to_bytes("DBR{bob}DBR")), dbr);
  CHECK(to_string(view(clean)) == "bob");
  CHECK(taint.spans == std::vector<Span>{{0, 3}});

  auto [c2, t2] = strip_markers(view(to_bytes("no markers here")), dbr);
  CHECK(to_string(view(c2)) == "no markers here");
  CHECK(t2.spans.empty());

  CHECK_THROWS_AS(strip_markers(view(to_bytes("N7{a}N7 x }N7")), Nonce("N7")),
                  malformed_annotation);
  CHECK_THROWS_AS(strip_markers(view(to_bytes("N7{a")), Nonce("N7")),
                  malformed_annotation);
  CHECK_THROWS_AS(strip_markers(view(to_bytes("N7{a N7{b}N7")), Nonce("N7")),
                  malformed_annotation);
  // bare nonce in payload is misuse, not data
  CHECK_THROWS_AS(strip_markers(view(to_bytes("xx N7 yy")), Nonce("N7")),
                  malformed_annotation);
}

TEST_CASE("build_next_taint distances") {
  auto m = build_next_taint(19, {{4, 9}});
  std::vector<std::uint32_t> want = {4, 3, 2, 1, 0, 0, 0, 0, 0, 10,
                                     9, 8, 7, 6, 5, 4, 3, 2, 1};
  CHECK(m.next_taint == want);

  CHECK(build_next_taint(5, {}).next_taint ==
        std::vector<std::uint32_t>{5, 4, 3, 2, 1});
  CHECK(build_next_taint(3, {{0, 3}}).next_taint ==
        std::vector<std::uint32_t>{0, 0, 0});
  CHECK_THROWS_AS(build_next_taint(3, {{1, 4}}), std::invalid_argument);
}

TEST_CASE("taint map invariants on random spans") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t len = 1 + uniform_below(rng, 300);
    std::vector<Span> spans;
    for (int k = uniform_below(rng, 4); k-- > 0;) {
      std::size_t a = uniform_below(rng, len);
      std::size_t b = a + 1 + uniform_below(rng, len - a);
      spans.push_back({a, b});
    }
    auto m = build_next_taint(len, spans);

    auto in_span = [&](std::size_t i) {
      for (const auto& s : m.spans)
        if (i >= s.start && i < s.end) return true;
      return false;
    };
    for (std::size_t i = 0; i < len; ++i) {
      CHECK((m.next_taint[i] == 0) == in_span(i));
      CHECK(m.next_taint[i] <= len - i);
      if (m.next_taint[i] > 0) {
        std::size_t tgt = i + m.next_taint[i];
        CHECK((tgt == len || in_span(tgt)));
        if (tgt < len) CHECK(!in_span(tgt - 1));
      }
    }
    // normalized spans are sorted, disjoint, non-adjacent
    for (std::size_t k = 1; k < m.spans.size(); ++k)
      CHECK(m.spans[k].start > m.spans[k - 1].end);
  }
}

TEST_CASE("adjacent spans keep separate markers and merge on strip") {
  Nonce n("N7");
  auto annotated = annotate(view(to_bytes("abcd")), {{1, 2}, {2, 3}}, n);
  CHECK(to_string(view(annotated)) == "aN7{b}N7N7{c}N7d");
  auto [clean, taint] = strip_markers(view(annotated), n);
  CHECK(to_string(view(clean)) == "abcd");
  CHECK(taint.spans == std::vector<Span>{{1, 3}});

  // payload brace right before a start marker stays payload
  auto braced = annotate(view(to_bytes("x}y")), {{2, 3}}, n);
  CHECK(to_string(view(braced)) == "x}N7{y}N7");
  auto [clean2, taint2] = strip_markers(view(braced), n);
  CHECK(to_string(view(clean2)) == "x}y");
  CHECK(taint2.spans == std::vector<Span>{{2, 3}});
}

TEST_CASE("annotate/strip round trip on random inputs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t len = uniform_below(rng, 200);
    Bytes input(len);
    for (auto& b : input) b = static_cast<std::uint8_t>(uniform_below(rng, 256));

    std::vector<Span> spans;
    std::size_t pos = 0;
    while (pos < len) {
      std::size_t start = pos + uniform_below(rng, 10);
      if (start >= len) break;
      std::size_t end = start + 1 + uniform_below(rng, 12);
      end = std::min(end, len);
      spans.push_back({start, end});
      pos = end + 1;
    }

    Nonce nonce = [&] {
      while (true) {
        Nonce n = generate_nonce(1 + uniform_below(rng, 6), rng);
        auto it = std::search(input.begin(), input.end(), n.bytes().begin(),
                              n.bytes().end());
        if (it == input.end()) return n;
      }
    }();

    auto annotated = annotate(view(input), spans, nonce);
    auto [clean, taint] = strip_markers(view(annotated), nonce);
    CHECK(clean == input);
    CHECK(taint.spans == normalize_spans(spans, len));
  }
}
