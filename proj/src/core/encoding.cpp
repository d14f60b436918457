#include "didnf/encoding.hpp"

#include <sodium.h>

#include <algorithm>

#include "didnf/crypto.hpp"

namespace didnf {

namespace {

constexpr std::string_view kBase58Alphabet =
    "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";

int base58_digit(char c) {
  auto pos = kBase58Alphabet.find(c);
  return pos == std::string_view::npos ? -1 : static_cast<int>(pos);
}

}  // namespace

std::string base58_encode(ByteView data) {
  std::size_t zeros = 0;
  while (zeros < data.size() && data[zeros] == 0) ++zeros;

  // log(256)/log(58) ~= 1.366
  std::vector<std::uint8_t> digits((data.size() - zeros) * 138 / 100 + 1);
  std::size_t length = 0;
  for (std::size_t i = zeros; i < data.size(); ++i) {
    int carry = data[i];
    std::size_t j = 0;
    for (auto it = digits.rbegin(); (carry != 0 || j < length) && it != digits.rend();
         ++it, ++j) {
      carry += 256 * (*it);
      *it = static_cast<std::uint8_t>(carry % 58);
      carry /= 58;
    }
    length = j;
  }

  auto it = digits.begin() + static_cast<std::ptrdiff_t>(digits.size() - length);
  std::string out(zeros, '1');
  out.reserve(zeros + length);
  for (; it != digits.end(); ++it) out.push_back(kBase58Alphabet[*it]);
  return out;
}

Bytes base58_decode(std::string_view text) {
  std::size_t zeros = 0;
  while (zeros < text.size() && text[zeros] == '1') ++zeros;

  // log(58)/log(256) ~= 0.733
  Bytes b256((text.size() - zeros) * 733 / 1000 + 1);
  std::size_t length = 0;
  for (std::size_t i = zeros; i < text.size(); ++i) {
    int carry = base58_digit(text[i]);
    if (carry < 0) throw Error(Errc::syntax, "invalid base58 character");
    std::size_t j = 0;
    for (auto it = b256.rbegin(); (carry != 0 || j < length) && it != b256.rend();
         ++it, ++j) {
      carry += 58 * (*it);
      *it = static_cast<std::uint8_t>(carry % 256);
      carry /= 256;
    }
    length = j;
  }
  Bytes out(zeros, 0);
  out.insert(out.end(), b256.end() - static_cast<std::ptrdiff_t>(length), b256.end());
  return out;
}

namespace {

std::string base64_with(ByteView data, int variant) {
  crypto::init();
  std::string out(sodium_base64_ENCODED_LEN(data.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), variant);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

Bytes unbase64_with(std::string_view text, int variant, const char* name) {
  crypto::init();
  Bytes out(text.size() * 3 / 4 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len,
                        &end, variant) != 0 ||
      end != text.data() + text.size()) {
    throw Error(Errc::syntax, std::string("invalid ") + name + " text");
  }
  out.resize(len);
  return out;
}

}  // namespace

std::string base64url_encode(ByteView data) {
  return base64_with(data, sodium_base64_VARIANT_URLSAFE_NO_PADDING);
}

Bytes base64url_decode(std::string_view text) {
  return unbase64_with(text, sodium_base64_VARIANT_URLSAFE_NO_PADDING, "base64url");
}

std::string base64_encode(ByteView data) {
  return base64_with(data, sodium_base64_VARIANT_ORIGINAL);
}

Bytes base64_decode(std::string_view text) {
  return unbase64_with(text, sodium_base64_VARIANT_ORIGINAL, "base64");
}

std::string hex_encode(ByteView data) {
  crypto::init();
  std::string out(data.size() * 2 + 1, '\0');
  sodium_bin2hex(out.data(), out.size(), data.data(), data.size());
  out.pop_back();
  return out;
}

Bytes hex_decode(std::string_view text) {
  crypto::init();
  Bytes out(text.size() / 2);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_hex2bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len,
                     &end) != 0 ||
      end != text.data() + text.size()) {
    throw Error(Errc::syntax, "invalid hex text");
  }
  out.resize(len);
  return out;
}

ByteWriter& ByteWriter::raw(ByteView b) {
  out_.insert(out_.end(), b.begin(), b.end());
  return *this;
}

ByteWriter& ByteWriter::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  return *this;
}

ByteWriter& ByteWriter::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }
  return *this;
}

ByteWriter& ByteWriter::field(ByteView b) {
  u32(static_cast<std::uint32_t>(b.size()));
  return raw(b);
}

ByteView ByteReader::raw(std::size_t n) {
  if (in_.size() - pos_ < n) throw Error(Errc::integrity, "truncated frame");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (auto byte : b) v = (v << 8) | byte;
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (auto byte : b) v = (v << 8) | byte;
  return v;
}

ByteView ByteReader::field(std::size_t max_len) {
  auto len = u32();
  if (len > max_len) throw Error(Errc::integrity, "field length out of range");
  return raw(len);
}

std::string ByteReader::field_string(std::size_t max_len) {
  return to_string(field(max_len));
}

ByteView ByteReader::rest() { return raw(in_.size() - pos_); }

void ByteReader::expect_done() const {
  if (!done()) throw Error(Errc::integrity, "trailing bytes after frame");
}

}  // namespace didnf
