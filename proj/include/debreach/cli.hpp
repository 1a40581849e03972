#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "debreach.hpp"

namespace debreach::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto s = ss.str();
  return Bytes(s.begin(), s.end());
}

// whole-file atomic: write a sibling temp file, then rename over
inline void write_file(const std::string& path, ByteView data) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()),
                            text.size()));
}

inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw std::runtime_error("bad hex digit");
}

// literal text, or hex: prefixed raw bytes
inline Bytes parse_bytes_arg(const std::string& arg) {
  if (arg.rfind("hex:", 0) == 0) {
    std::string_view hex(arg);
    hex.remove_prefix(4);
    if (hex.size() % 2 != 0) throw std::runtime_error("odd hex length");
    Bytes out;
    for (std::size_t k = 0; k < hex.size(); k += 2)
      out.push_back(static_cast<std::uint8_t>(hex_nibble(hex[k]) * 16 +
                                              hex_nibble(hex[k + 1])));
    return out;
  }
  return to_bytes(arg);
}

inline CompressMode parse_mode(const std::string& mode) {
  if (mode == "standard") return CompressMode::standard;
  if (mode == "huffman-only") return CompressMode::huffman_only;
  if (mode == "debreach") return CompressMode::debreach;
  throw CLI::ValidationError("--mode", "unknown mode '" + mode + "'");
}

inline BlockKind parse_block(const std::string& block) {
  if (block == "stored") return BlockKind::stored;
  if (block == "fixed") return BlockKind::fixed;
  if (block == "dynamic") return BlockKind::dynamic;
  throw CLI::ValidationError("--block", "unknown block kind '" + block + "'");
}

inline PageTemplate load_template(const std::string& path) {
  if (path.empty()) return PageTemplate::addressbook_page();
  Bytes raw = read_file(path);
  std::string text(raw.begin(), raw.end());
  auto inj = text.find("@INJECT@");
  auto sec = text.find("@SECRET@");
  if (inj == std::string::npos || sec == std::string::npos || sec < inj ||
      text.find("@INJECT@", inj + 1) != std::string::npos ||
      text.find("@SECRET@", sec + 1) != std::string::npos)
    throw std::runtime_error(
        "template needs one @INJECT@ then one @SECRET@ placeholder");
  PageTemplate t;
  t.prefix = to_bytes(text.substr(0, inj));
  t.middle = to_bytes(text.substr(inj + 8, sec - inj - 8));
  t.suffix = to_bytes(text.substr(sec + 8));
  return t;
}

// spans covering roughly `fraction` of len, placed by seeded draws
inline std::vector<Span> spread_spans(std::mt19937_64& rng, std::size_t len,
                                      double fraction) {
  std::vector<Span> spans;
  if (len == 0 || fraction <= 0.0) return spans;
  auto target = static_cast<std::size_t>(fraction * static_cast<double>(len));
  std::vector<bool> used(len, false);
  std::size_t covered = 0;
  int stall = 0;
  while (covered < target && stall < 1000) {
    std::size_t start = uniform_below(rng, len);
    std::size_t want = 1 + uniform_below(rng, 64);
    want = std::min(want, target - covered);
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

struct Options {
  std::string mode = "standard";
  std::string block = "dynamic";
  std::string nonce;
  std::string input;
  std::string output;
  std::string facts;
  std::string derived;
  std::string out_path;
  std::string secret;
  std::string prefix;
  std::string alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789@.";
  std::string template_path;
  std::string transcript;
  std::string csv;
  std::string corpus;
  std::string agg = "min";
  std::size_t max_len = 0;
  std::size_t max_n = 0;
  std::size_t min_emit = 3;
  double taint_fraction = 0.0;
  std::uint64_t seed = 0;
  bool zlib_container = false;
};

inline int run_compress(const Options& o) {
  CompressMode mode = parse_mode(o.mode);
  std::optional<Nonce> nonce;
  if (!o.nonce.empty()) nonce.emplace(parse_bytes_arg(o.nonce));
  Bytes input = read_file(o.input);
  Bytes stream = compress(view(input), nonce, mode, {}, parse_block(o.block));
  if (o.zlib_container) {
    Bytes plain = nonce ? strip_markers(view(input), *nonce).clean : input;
    stream = zlib_wrap(view(stream), adler32(view(plain)));
  }
  write_file(o.output, view(stream));
  return kExitOk;
}

inline int run_inflate(const Options& o) {
  Bytes stream = read_file(o.input);
  Bytes plain = o.zlib_container ? zlib_unwrap(view(stream))
                                 : inflate_stream(view(stream));
  write_file(o.output, view(plain));
  return kExitOk;
}

inline int run_taint(const Options& o) {
  Bytes raw = read_file(o.facts);
  FactBase fb = parse_facts(std::string_view(
      reinterpret_cast<const char*>(raw.data()), raw.size()));
  write_text(o.out_path, format_derived(solve_taint(fb)));
  return kExitOk;
}

inline int run_instrument(const Options& o) {
  Bytes raw = read_file(o.facts);
  FactBase fb = parse_facts(std::string_view(
      reinterpret_cast<const char*>(raw.data()), raw.size()));
  auto data_dep = fb.data_dep;
  auto sinks = fb.tainted_sink;
  if (!o.derived.empty()) {
    Bytes draw = read_file(o.derived);
    FactBase dfb = parse_facts(std::string_view(
        reinterpret_cast<const char*>(draw.data()), draw.size()));
    data_dep.insert(dfb.data_dep.begin(), dfb.data_dep.end());
    sinks.insert(dfb.tainted_sink.begin(), dfb.tainted_sink.end());
  }

  DDG ddg = build_ddg(data_dep);
  for (StmtId s : sinks) ddg.add_node(s);
  SafetyInfo safety;
  safety.context = fb.context;
  for (StmtId s : fb.unsafe_op)
    if (ddg.has_node(s)) safety.unsafe_ops.insert(s);

  write_text(o.out_path,
             format_plan(find_instrumentation_points(sinks, ddg, safety)));
  return kExitOk;
}

inline int run_attack(const Options& o) {
  PageTemplate tmpl = load_template(o.template_path);
  Bytes secret = parse_bytes_arg(o.secret);
  Bytes alphabet = parse_bytes_arg(o.alphabet);
  MatchConfig cfg;
  cfg.min_emit_len = o.min_emit;
  auto oracle = make_oracle(tmpl, secret, parse_mode(o.mode), cfg,
                            parse_block(o.block));
  std::size_t max_len = o.max_len ? o.max_len : secret.size();
  auto tr = recover_secret(oracle, view(parse_bytes_arg(o.prefix)),
                           view(alphabet), max_len);
  write_text(o.transcript, format_transcript(tr));
  std::cerr << "recovered " << tr.recovered.size() << "/" << secret.size()
            << " bytes in " << tr.oracle_calls << " oracle calls"
            << (tr.ambiguous ? " (stopped: ambiguous)" : "") << "\n";
  return kExitOk;
}

inline int run_leak_report(const Options& o) {
  PageTemplate tmpl = load_template(o.template_path);
  Bytes secret = parse_bytes_arg(o.secret);
  Bytes alphabet = parse_bytes_arg(o.alphabet);
  MatchConfig cfg;
  cfg.min_emit_len = o.min_emit;
  std::size_t max_n = o.max_n ? std::min(o.max_n, secret.size())
                              : secret.size();
  LeakAgg agg = o.agg == "mean" ? LeakAgg::mean : LeakAgg::min;
  auto report =
      measure_leak(tmpl, view(secret), view(alphabet), parse_mode(o.mode),
                   max_n, cfg, parse_block(o.block), agg,
                   view(parse_bytes_arg(o.prefix)));
  write_text(o.csv, format_leak_csv(report));
  return kExitOk;
}

inline int run_bench(const Options& o) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(o.corpus))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  std::mt19937_64 rng(o.seed);
  BlockKind kind = parse_block(o.block);
  std::ostringstream csv;
  csv << "file,size,standard,huffman_only,debreach\n";
  for (const auto& path : files) {
    Bytes data = read_file(path.string());
    if (data.empty()) continue;
    auto spans = spread_spans(rng, data.size(), o.taint_fraction);

    Nonce nonce = [&] {
      while (true) {
        Nonce n = generate_nonce(8, rng);
        if (std::search(data.begin(), data.end(), n.bytes().begin(),
                        n.bytes().end()) == data.end())
          return n;
      }
    }();
    Bytes annotated = annotate(view(data), spans, nonce);

    auto ratio = [&](CompressMode mode) {
      return compression_ratio(
          compress(view(annotated), nonce, mode, {}, kind).size(),
          data.size());
    };
    csv << path.filename().string() << ',' << data.size() << ','
        << ratio(CompressMode::standard) << ','
        << ratio(CompressMode::huffman_only) << ','
        << ratio(CompressMode::debreach) << '\n';
  }
  write_text(o.csv, csv.str());
  return kExitOk;
}

}  // namespace detail

// Argument vector excludes the program name.  Exit codes: 0 success,
// 1 usage error, 2 data error; diagnostics go to stderr.
inline int run_cli(std::vector<std::string> args) {
  using namespace detail;
  CLI::App app{"taint-aware DEFLATE toolkit"};
  app.require_subcommand(1);
  Options o;

  auto* compress_cmd =
      app.add_subcommand("compress", "compress a file to raw DEFLATE");
  compress_cmd->add_option("--mode", o.mode,
                           "standard | huffman-only | debreach");
  compress_cmd->add_option("--nonce", o.nonce,
                           "marker nonce (literal or hex:..)");
  compress_cmd->add_option("--block", o.block, "stored | fixed | dynamic");
  compress_cmd->add_flag("--zlib", o.zlib_container,
                         "wrap in a zlib container with adler32");
  compress_cmd->add_option("input", o.input)->required();
  compress_cmd->add_option("output", o.output)->required();

  auto* inflate_cmd =
      app.add_subcommand("inflate", "decode a raw DEFLATE stream");
  inflate_cmd->add_flag("--zlib", o.zlib_container,
                        "input carries a zlib container");
  inflate_cmd->add_option("input", o.input)->required();
  inflate_cmd->add_option("output", o.output)->required();

  auto* taint_cmd =
      app.add_subcommand("taint", "solve dataflow rules over a facts file");
  taint_cmd->add_option("--facts", o.facts)->required();
  taint_cmd->add_option("--out", o.out_path, "derived relations file");

  auto* instrument_cmd = app.add_subcommand(
      "instrument", "compute instrumentation points from dependences");
  instrument_cmd->add_option("--facts", o.facts)->required();
  instrument_cmd->add_option("--derived", o.derived,
                             "derived relations from the taint step");
  instrument_cmd->add_option("--out", o.out_path, "plan file");

  auto add_experiment_opts = [&](CLI::App* cmd) {
    cmd->add_option("--mode", o.mode, "standard | huffman-only | debreach");
    cmd->add_option("--secret", o.secret)->required();
    cmd->add_option("--alphabet", o.alphabet, "guess alphabet");
    cmd->add_option("--template", o.template_path,
                    "page file with @INJECT@ and @SECRET@ slots");
    cmd->add_option("--prefix", o.prefix, "known bootstrap prefix");
    cmd->add_option("--block", o.block, "stored | fixed | dynamic");
    cmd->add_option("--min-emit-len", o.min_emit,
                    "shortest match worth a reference");
  };

  auto* attack_cmd =
      app.add_subcommand("attack", "byte-by-byte recovery experiment");
  add_experiment_opts(attack_cmd);
  attack_cmd->add_option("--max-len", o.max_len, "positions to recover");
  attack_cmd->add_option("--transcript", o.transcript, "oracle-call log file");

  auto* leak_cmd = app.add_subcommand(
      "leak-report", "per-prefix-length size difference report");
  add_experiment_opts(leak_cmd);
  leak_cmd->add_option("--max-n", o.max_n, "prefix lengths to probe");
  leak_cmd->add_option("--agg", o.agg, "min | mean over incorrect guesses");
  leak_cmd->add_option("--csv", o.csv, "report file");

  auto* bench_cmd =
      app.add_subcommand("bench", "per-file compression ratios over a corpus");
  bench_cmd->add_option("--corpus", o.corpus)->required();
  bench_cmd->add_option("--taint-fraction", o.taint_fraction,
                        "fraction of each file marked sensitive");
  bench_cmd->add_option("--block", o.block, "stored | fixed | dynamic");
  bench_cmd->add_option("--seed", o.seed, "span placement seed");
  bench_cmd->add_option("--csv", o.csv, "report file");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
    // attack and leak-report default to fixed blocks: byte-exact diffs
    if ((*attack_cmd && attack_cmd->count("--block") == 0) ||
        (*leak_cmd && leak_cmd->count("--block") == 0))
      o.block = "fixed";
    if (*compress_cmd && o.mode == "debreach" && o.nonce.empty())
      throw CLI::RequiredError("--nonce (debreach mode)");
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*compress_cmd) return run_compress(o);
    if (*inflate_cmd) return run_inflate(o);
    if (*taint_cmd) return run_taint(o);
    if (*instrument_cmd) return run_instrument(o);
    if (*attack_cmd) return run_attack(o);
    if (*leak_cmd) return run_leak_report(o);
    if (*bench_cmd) return run_bench(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace debreach::cli
