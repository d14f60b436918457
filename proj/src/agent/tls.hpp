#pragma once

#include <openssl/evp.h>
#include <openssl/ssl.h>
#include <openssl/x509.h>

#include <atomic>
#include <memory>
#include <string>

#include "didnf/crypto.hpp"

namespace didnf::tls {

struct X509Deleter {
  void operator()(X509* x) const { X509_free(x); }
};
struct PkeyDeleter {
  void operator()(EVP_PKEY* k) const { EVP_PKEY_free(k); }
};
using X509Ptr = std::unique_ptr<X509, X509Deleter>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

// Self-signed P-256 certificate valid for 127.0.0.1 and localhost.
struct Credentials {
  X509Ptr certificate;
  PkeyPtr private_key;
  std::string certificate_pem;
};

Credentials generate_self_signed(const std::string& common_name);

X509Ptr parse_pem(const std::string& pem);  // throws Error(validation)

// SHA-256 over the DER encoding.
crypto::Digest fingerprint(X509* certificate);

// Counts handshake-layer bytes seen by a context's connections.
void count_handshake_bytes(SSL_CTX* ctx, std::atomic<std::uint64_t>* counter);

}  // namespace didnf::tls
