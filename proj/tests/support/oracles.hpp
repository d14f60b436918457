#pragma once

// Reference computations for tests. Deliberately independent of the library:
// OpenSSL for hashing, schoolbook big-number division for base58.

#include <openssl/sha.h>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace oracle {

inline std::vector<std::uint8_t> sha256(const std::vector<std::uint8_t>& in) {
  std::vector<std::uint8_t> out(SHA256_DIGEST_LENGTH);
  SHA256(in.data(), in.size(), out.data());
  return out;
}

// Divide the big-endian number by 58 until it is zero.
inline std::string base58(std::vector<std::uint8_t> num) {
  static const char* alphabet =
      "123456789ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz";
  std::string leading;
  for (auto b : num) {
    if (b != 0) break;
    leading.push_back('1');
  }
  std::string digits;
  auto is_zero = [&] {
    return std::all_of(num.begin(), num.end(), [](std::uint8_t b) { return b == 0; });
  };
  while (!is_zero()) {
    unsigned remainder = 0;
    for (auto& b : num) {
      unsigned cur = remainder * 256 + b;
      b = static_cast<std::uint8_t>(cur / 58);
      remainder = cur % 58;
    }
    digits.push_back(alphabet[remainder]);
  }
  std::reverse(digits.begin(), digits.end());
  return leading + digits;
}

inline std::vector<std::uint64_t> prefix_sums(const std::vector<std::uint64_t>& steps) {
  std::vector<std::uint64_t> out;
  std::uint64_t acc = 0;
  for (auto s : steps) out.push_back(acc += s);
  return out;
}

}  // namespace oracle
