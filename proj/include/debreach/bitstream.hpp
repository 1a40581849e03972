#pragma once

#include <cstdint>

#include "bytes.hpp"
#include "errors.hpp"

namespace debreach {

// RFC 1951 bit order: bytes fill least-significant bit first; Huffman
// codes are packed most-significant code bit first, everything else
// least-significant first.
class BitWriter {
 public:
  void write_bits(std::uint32_t value, unsigned count) {
    for (unsigned k = 0; k < count; ++k) {
      if (nbits_ == 0) out_.push_back(0);
      if ((value >> k) & 1u) out_.back() |= std::uint8_t(1u << nbits_);
      nbits_ = (nbits_ + 1) & 7;
    }
  }

  void write_code(std::uint32_t code, unsigned count) {
    for (unsigned k = count; k-- > 0;) write_bits((code >> k) & 1u, 1);
  }

  void align_to_byte() { nbits_ = 0; }

  void write_byte(std::uint8_t b) {
    align_to_byte();
    out_.push_back(b);
  }

  std::size_t bit_count() const {
    return out_.size() * 8 - (nbits_ ? 8 - nbits_ : 0);
  }

  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
  unsigned nbits_ = 0;  // bits used in the last byte (0 = byte boundary)
};

class BitReader {
 public:
  explicit BitReader(ByteView data) : data_(data) {}

  std::size_t bit_pos() const { return bit_pos_; }
  std::size_t byte_offset() const { return bit_pos_ / 8; }
  std::size_t bits_left() const { return data_.size() * 8 - bit_pos_; }

  std::uint32_t read_bits(unsigned count) {
    if (bits_left() < count)
      throw corrupt_stream("truncated stream", byte_offset());
    std::uint32_t v = 0;
    for (unsigned k = 0; k < count; ++k) {
      v |= std::uint32_t((data_[bit_pos_ >> 3] >> (bit_pos_ & 7)) & 1u) << k;
      ++bit_pos_;
    }
    return v;
  }

  // Next `count` bits without consuming, zero-padded past the end.
  std::uint32_t peek_bits(unsigned count) const {
    std::uint32_t v = 0;
    std::size_t p = bit_pos_;
    for (unsigned k = 0; k < count && p < data_.size() * 8; ++k, ++p)
      v |= std::uint32_t((data_[p >> 3] >> (p & 7)) & 1u) << k;
    return v;
  }

  void consume(unsigned count) {
    if (bits_left() < count)
      throw corrupt_stream("truncated stream", byte_offset());
    bit_pos_ += count;
  }

  void align_to_byte() { bit_pos_ = (bit_pos_ + 7) & ~std::size_t{7}; }

  std::uint8_t read_aligned_byte() {
    if (bit_pos_ % 8 != 0 || byte_offset() >= data_.size())
      throw corrupt_stream("truncated stream", byte_offset());
    std::uint8_t b = data_[byte_offset()];
    bit_pos_ += 8;
    return b;
  }

 private:
  ByteView data_;
  std::size_t bit_pos_ = 0;
};

}  // namespace debreach
