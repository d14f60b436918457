#include "didnf/crypto.hpp"

#include <sodium.h>

#include <stdexcept>

namespace didnf::crypto {

SecretKey::~SecretKey() { sodium_memzero(bytes_.data(), bytes_.size()); }

void init() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

Bytes random_bytes(std::size_t n) {
  init();
  Bytes out(n);
  randombytes_buf(out.data(), out.size());
  return out;
}

Digest sha256(ByteView data) {
  init();
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

std::string random_uuid() {
  auto b = random_array<16>();
  b[6] = static_cast<std::uint8_t>((b[6] & 0x0f) | 0x40);
  b[8] = static_cast<std::uint8_t>((b[8] & 0x3f) | 0x80);
  auto hex = hex_encode(b);
  return hex.substr(0, 8) + "-" + hex.substr(8, 4) + "-" + hex.substr(12, 4) + "-" +
         hex.substr(16, 4) + "-" + hex.substr(20);
}

namespace {

struct ExpandedSigningKey {
  std::array<std::uint8_t, crypto_sign_SECRETKEYBYTES> sk{};
  Key32 pk{};
  ~ExpandedSigningKey() { sodium_memzero(sk.data(), sk.size()); }
};

ExpandedSigningKey expand(const SecretKey& secret) {
  init();
  ExpandedSigningKey k;
  crypto_sign_seed_keypair(k.pk.data(), k.sk.data(), secret.bytes().data());
  return k;
}

}  // namespace

Key32 ed25519_public_from_secret(const SecretKey& secret) { return expand(secret).pk; }

Signature ed25519_sign(const SecretKey& secret, ByteView message) {
  auto k = expand(secret);
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), k.sk.data());
  return sig;
}

bool ed25519_verify(const Key32& public_key, ByteView message, ByteView signature) {
  init();
  if (signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     public_key.data()) == 0;
}

Key32 x25519_public_from_secret(const SecretKey& secret) {
  init();
  Key32 pk{};
  crypto_scalarmult_base(pk.data(), secret.bytes().data());
  return pk;
}

SecretKey x25519_secret_from_seed(const Key32& seed) {
  init();
  Key32 pk{};
  Key32 sk{};
  crypto_box_seed_keypair(pk.data(), sk.data(), seed.data());
  SecretKey out(sk);
  sodium_memzero(sk.data(), sk.size());
  return out;
}

Key32 x25519(const SecretKey& secret, const Key32& peer_public) {
  init();
  Key32 shared{};
  if (crypto_scalarmult(shared.data(), secret.bytes().data(), peer_public.data()) != 0) {
    throw Error(Errc::unauthorized, "key agreement with invalid public key");
  }
  return shared;
}

Sealed aead_encrypt(const Key32& key, const Nonce24& nonce, ByteView plaintext,
                    ByteView aad) {
  init();
  Sealed out{Bytes(plaintext.size()), {}};
  unsigned long long tag_len = 0;
  crypto_aead_xchacha20poly1305_ietf_encrypt_detached(
      out.ciphertext.data(), out.tag.data(), &tag_len, plaintext.data(), plaintext.size(),
      aad.data(), aad.size(), nullptr, nonce.data(), key.data());
  return out;
}

std::optional<Bytes> aead_decrypt(const Key32& key, const Nonce24& nonce,
                                  ByteView ciphertext, const Tag16& tag, ByteView aad) {
  init();
  Bytes out(ciphertext.size());
  if (crypto_aead_xchacha20poly1305_ietf_decrypt_detached(
          out.data(), nullptr, ciphertext.data(), ciphertext.size(), tag.data(),
          aad.data(), aad.size(), nonce.data(), key.data()) != 0) {
    return std::nullopt;
  }
  return out;
}

Key32 concat_kdf(ByteView shared_secret, ByteView info) {
  init();
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  const std::uint8_t counter[4] = {0, 0, 0, 1};
  crypto_hash_sha256_update(&st, counter, sizeof counter);
  crypto_hash_sha256_update(&st, shared_secret.data(), shared_secret.size());
  crypto_hash_sha256_update(&st, info.data(), info.size());
  Key32 out{};
  crypto_hash_sha256_final(&st, out.data());
  return out;
}

}  // namespace didnf::crypto
