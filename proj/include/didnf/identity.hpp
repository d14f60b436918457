#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "didnf/crypto.hpp"
#include "json.hpp"

namespace didnf {

using Json = nlohmann::json;
using crypto::Key32;
using crypto::SecretKey;
using crypto::Signature;

// did:<method>:<subject>
struct Did {
  std::string method;
  std::string subject;

  static Did parse(std::string_view text);  // throws Error(syntax)
  std::string str() const { return "did:" + method + ":" + subject; }

  friend bool operator==(const Did&, const Did&) = default;
  friend auto operator<=>(const Did&, const Did&) = default;
};

inline constexpr std::string_view kDefaultMethod = "sba";

bool is_valid_method(std::string_view method);

// "<did>#<fragment>" -> (did, fragment)
std::pair<Did, std::string> split_key_id(std::string_view key_id);

enum class KeyKind { signing, key_agreement };
std::string_view to_string(KeyKind kind);

struct KeyPair {
  KeyKind kind = KeyKind::signing;
  Key32 public_key{};
  SecretKey secret_key;
  std::string key_id;
};

struct VerificationMethod {
  std::string key_id;
  KeyKind kind = KeyKind::signing;
  Key32 public_key{};

  friend bool operator==(const VerificationMethod&, const VerificationMethod&) = default;
};

struct ServiceEndpoint {
  std::string id;
  std::string type;
  std::string uri;

  friend bool operator==(const ServiceEndpoint&, const ServiceEndpoint&) = default;
};

struct DidDocument {
  Did id;
  std::vector<VerificationMethod> verification_methods;
  std::vector<ServiceEndpoint> service_endpoints;
  std::uint64_t version = 0;

  const VerificationMethod* first_of(KeyKind kind) const;
  const VerificationMethod* find(std::string_view key_id) const;
  std::optional<std::string> endpoint() const;

  friend bool operator==(const DidDocument&, const DidDocument&) = default;
};

// Multikey text: 'z' + base58(2-byte multicodec prefix || key).
std::string encode_multikey(KeyKind kind, const Key32& key);
std::pair<KeyKind, Key32> decode_multikey(std::string_view text);

Json to_json(const DidDocument& doc);
DidDocument document_from_json(const Json& j);  // throws Error(syntax)

// Compact JSON with lexicographically sorted keys. This is the signature base
// for registry proofs and for documents inlined in connection messages.
Bytes canonical_bytes(const DidDocument& doc);

// base58(sha256(signing_public)[0:16])
std::string derive_subject(const Key32& signing_public);

struct Identity {
  Did did;
  DidDocument document;
  std::vector<KeyPair> keys;

  const KeyPair& signing_key() const;
  const KeyPair& agreement_key() const;
};

Identity generate_identity(std::string_view method, std::string_view endpoint_uri);
// Deterministic variant for reproducible benchmark runs.
Identity generate_identity(std::string_view method, std::string_view endpoint_uri,
                           const Key32& seed);

// Throws Error(validation) if `key` is not a signing key.
Signature sign(const KeyPair& key, ByteView message);
bool verify(const Key32& signing_public, ByteView message, ByteView signature);

}  // namespace didnf
