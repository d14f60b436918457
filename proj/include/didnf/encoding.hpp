#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace didnf {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}
inline Bytes to_bytes(std::string_view s) {
  auto v = as_bytes(s);
  return {v.begin(), v.end()};
}
inline std::string to_string(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

// Bitcoin alphabet, leading zero bytes map to '1'.
std::string base58_encode(ByteView data);
Bytes base58_decode(std::string_view text);  // throws Error(syntax)

// RFC 4648 section 5, unpadded.
std::string base64url_encode(ByteView data);
Bytes base64url_decode(std::string_view text);  // throws Error(syntax)
std::string base64_encode(ByteView data);        // padded, standard alphabet
Bytes base64_decode(std::string_view text);      // throws Error(syntax)

std::string hex_encode(ByteView data);
Bytes hex_decode(std::string_view text);

template <std::size_t N>
std::array<std::uint8_t, N> to_array(ByteView b);

// Length-prefixed binary framing: every field is a big-endian u32 length
// followed by the raw bytes.
class ByteWriter {
 public:
  ByteWriter& raw(ByteView b);
  ByteWriter& u32(std::uint32_t v);
  ByteWriter& u64(std::uint64_t v);
  ByteWriter& field(ByteView b);
  ByteWriter& field(std::string_view s) { return field(as_bytes(s)); }

  const Bytes& bytes() const& { return out_; }
  Bytes bytes() && { return std::move(out_); }

 private:
  Bytes out_;
};

// Reader counterpart. Every malformed read throws Error(integrity): a frame
// that does not parse is indistinguishable from a corrupted one.
class ByteReader {
 public:
  explicit ByteReader(ByteView in) : in_(in) {}

  ByteView raw(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  ByteView field(std::size_t max_len = 1u << 26);
  std::string field_string(std::size_t max_len = 1u << 26);
  template <std::size_t N>
  std::array<std::uint8_t, N> fixed_field();

  ByteView rest();  // everything not yet consumed

  bool done() const { return pos_ == in_.size(); }
  void expect_done() const;

 private:
  ByteView in_;
  std::size_t pos_ = 0;
};

}  // namespace didnf

#include "didnf/error.hpp"

namespace didnf {

template <std::size_t N>
std::array<std::uint8_t, N> to_array(ByteView b) {
  if (b.size() != N) {
    throw Error(Errc::validation, "expected " + std::to_string(N) +
                                      " bytes, got " + std::to_string(b.size()));
  }
  std::array<std::uint8_t, N> out{};
  std::copy(b.begin(), b.end(), out.begin());
  return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> ByteReader::fixed_field() {
  auto f = field(N);
  if (f.size() != N) throw Error(Errc::integrity, "fixed-size field has wrong length");
  std::array<std::uint8_t, N> out{};
  std::copy(f.begin(), f.end(), out.begin());
  return out;
}

}  // namespace didnf
