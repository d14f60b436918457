#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "didnf/encoding.hpp"

// Thin typed layer over libsodium. Everything above this file works with
// these types only.
namespace didnf::crypto {

using Key32 = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;
using Nonce24 = std::array<std::uint8_t, 24>;
using Tag16 = std::array<std::uint8_t, 16>;
using Digest = std::array<std::uint8_t, 32>;

// Secret key material, wiped on destruction.
class SecretKey {
 public:
  SecretKey() = default;
  explicit SecretKey(const Key32& bytes) : bytes_(bytes) {}
  SecretKey(const SecretKey&) = default;
  SecretKey& operator=(const SecretKey&) = default;
  ~SecretKey();

  const Key32& bytes() const { return bytes_; }

 private:
  Key32 bytes_{};
};

void init();

Bytes random_bytes(std::size_t n);
template <std::size_t N>
std::array<std::uint8_t, N> random_array() {
  return to_array<N>(random_bytes(N));
}

Digest sha256(ByteView data);

// RFC 4122 version 4, lowercase, 36 characters.
std::string random_uuid();

// Ed25519. The secret is the 32-byte seed; the public key is derived from it.
Key32 ed25519_public_from_secret(const SecretKey& secret);
Signature ed25519_sign(const SecretKey& secret, ByteView message);
bool ed25519_verify(const Key32& public_key, ByteView message, ByteView signature);

// X25519.
Key32 x25519_public_from_secret(const SecretKey& secret);
SecretKey x25519_secret_from_seed(const Key32& seed);
// Throws Error(unauthorized) on a low-order peer key.
Key32 x25519(const SecretKey& secret, const Key32& peer_public);

// XChaCha20-Poly1305 (IETF), detached tag.
struct Sealed {
  Bytes ciphertext;
  Tag16 tag;
};
Sealed aead_encrypt(const Key32& key, const Nonce24& nonce, ByteView plaintext,
                    ByteView aad);
// nullopt when the tag does not verify.
std::optional<Bytes> aead_decrypt(const Key32& key, const Nonce24& nonce,
                                  ByteView ciphertext, const Tag16& tag, ByteView aad);

// Single-block concat KDF over SHA-256: H(counter=1 || secret || info).
Key32 concat_kdf(ByteView shared_secret, ByteView info);

}  // namespace didnf::crypto
