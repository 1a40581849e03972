#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace debreach {

// Annotated input whose markers do not pair up, or a bare nonce outside
// any marker.
class malformed_annotation : public std::runtime_error {
 public:
  explicit malformed_annotation(const std::string& what)
      : std::runtime_error(what) {}
};

// Undecodable DEFLATE data; offset is the byte position where decoding
// failed.
class corrupt_stream : public std::runtime_error {
 public:
  corrupt_stream(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Facts file rejected by the parser; line numbers are 1-based.
class facts_parse_error : public std::runtime_error {
 public:
  facts_parse_error(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace debreach
