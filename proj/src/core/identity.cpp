#include "didnf/identity.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "didnf/error.hpp"

namespace didnf {

namespace {

constexpr std::array<std::uint8_t, 2> kEd25519Prefix = {0xed, 0x01};
constexpr std::array<std::uint8_t, 2> kX25519Prefix = {0xec, 0x01};

constexpr std::string_view kSigningType = "Ed25519VerificationKey2020";
constexpr std::string_view kAgreementType = "X25519KeyAgreementKey2020";
constexpr std::string_view kServiceType = "DIDCommMessaging";

bool is_subject_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_';
}

}  // namespace

bool is_valid_method(std::string_view method) {
  return !method.empty() && std::all_of(method.begin(), method.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
  });
}

Did Did::parse(std::string_view text) {
  constexpr std::string_view prefix = "did:";
  if (!text.starts_with(prefix)) throw Error(Errc::syntax, "missing did: prefix");
  auto rest = text.substr(prefix.size());
  auto colon = rest.find(':');
  if (colon == std::string_view::npos) throw Error(Errc::syntax, "missing method separator");
  auto method = rest.substr(0, colon);
  auto subject = rest.substr(colon + 1);
  if (method.empty() || subject.empty()) throw Error(Errc::syntax, "empty DID segment");
  if (subject.find(':') != std::string_view::npos) {
    throw Error(Errc::syntax, "too many colon-separated parts");
  }
  if (!is_valid_method(method)) throw Error(Errc::syntax, "invalid method characters");
  if (!std::all_of(subject.begin(), subject.end(), is_subject_char)) {
    throw Error(Errc::syntax, "invalid subject characters");
  }
  return Did{std::string(method), std::string(subject)};
}

std::pair<Did, std::string> split_key_id(std::string_view key_id) {
  auto hash = key_id.find('#');
  if (hash == std::string_view::npos || hash + 1 == key_id.size()) {
    throw Error(Errc::syntax, "key id has no fragment");
  }
  return {Did::parse(key_id.substr(0, hash)), std::string(key_id.substr(hash + 1))};
}

std::string_view to_string(KeyKind kind) {
  return kind == KeyKind::signing ? "signing" : "key-agreement";
}

const VerificationMethod* DidDocument::first_of(KeyKind kind) const {
  for (const auto& vm : verification_methods) {
    if (vm.kind == kind) return &vm;
  }
  return nullptr;
}

const VerificationMethod* DidDocument::find(std::string_view key_id) const {
  for (const auto& vm : verification_methods) {
    if (vm.key_id == key_id) return &vm;
  }
  return nullptr;
}

std::optional<std::string> DidDocument::endpoint() const {
  if (service_endpoints.empty()) return std::nullopt;
  return service_endpoints.front().uri;
}

std::string encode_multikey(KeyKind kind, const Key32& key) {
  const auto& prefix = kind == KeyKind::signing ? kEd25519Prefix : kX25519Prefix;
  Bytes raw(prefix.begin(), prefix.end());
  raw.insert(raw.end(), key.begin(), key.end());
  return "z" + base58_encode(raw);
}

std::pair<KeyKind, Key32> decode_multikey(std::string_view text) {
  if (text.empty() || text.front() != 'z') throw Error(Errc::syntax, "multikey must start with 'z'");
  auto raw = base58_decode(text.substr(1));
  if (raw.size() != 34) throw Error(Errc::syntax, "multikey has wrong length");
  KeyKind kind;
  if (std::equal(kEd25519Prefix.begin(), kEd25519Prefix.end(), raw.begin())) {
    kind = KeyKind::signing;
  } else if (std::equal(kX25519Prefix.begin(), kX25519Prefix.end(), raw.begin())) {
    kind = KeyKind::key_agreement;
  } else {
    throw Error(Errc::syntax, "unknown multikey prefix");
  }
  return {kind, to_array<32>(ByteView(raw).subspan(2))};
}

Json to_json(const DidDocument& doc) {
  Json vms = Json::array();
  for (const auto& vm : doc.verification_methods) {
    vms.push_back({{"id", vm.key_id},
                   {"type", vm.kind == KeyKind::signing ? kSigningType : kAgreementType},
                   {"publicKeyMultibase", encode_multikey(vm.kind, vm.public_key)}});
  }
  Json services = Json::array();
  for (const auto& s : doc.service_endpoints) {
    services.push_back({{"id", s.id}, {"type", s.type}, {"serviceEndpoint", s.uri}});
  }
  return {{"id", doc.id.str()},
          {"verificationMethod", std::move(vms)},
          {"service", std::move(services)},
          {"version", doc.version}};
}

DidDocument document_from_json(const Json& j) {
  try {
    DidDocument doc;
    doc.id = Did::parse(j.at("id").get<std::string>());
    for (const auto& vm : j.at("verificationMethod")) {
      auto [kind, key] = decode_multikey(vm.at("publicKeyMultibase").get<std::string>());
      auto type = vm.at("type").get<std::string>();
      if ((kind == KeyKind::signing) != (type == kSigningType)) {
        throw Error(Errc::syntax, "verification method type does not match key");
      }
      doc.verification_methods.push_back({vm.at("id").get<std::string>(), kind, key});
    }
    for (const auto& s : j.at("service")) {
      doc.service_endpoints.push_back({s.at("id").get<std::string>(),
                                       s.at("type").get<std::string>(),
                                       s.at("serviceEndpoint").get<std::string>()});
    }
    doc.version = j.at("version").get<std::uint64_t>();
    return doc;
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("malformed DID document: ") + e.what());
  }
}

Bytes canonical_bytes(const DidDocument& doc) { return to_bytes(to_json(doc).dump()); }

std::string derive_subject(const Key32& signing_public) {
  auto digest = crypto::sha256(signing_public);
  return base58_encode(ByteView(digest).first(16));
}

const KeyPair& Identity::signing_key() const {
  for (const auto& k : keys) {
    if (k.kind == KeyKind::signing) return k;
  }
  throw Error(Errc::key_mismatch, "identity has no signing key");
}

const KeyPair& Identity::agreement_key() const {
  for (const auto& k : keys) {
    if (k.kind == KeyKind::key_agreement) return k;
  }
  throw Error(Errc::key_mismatch, "identity has no key-agreement key");
}

namespace {

Identity build_identity(std::string_view method, std::string_view endpoint_uri,
                        const SecretKey& signing_secret, const SecretKey& agreement_secret) {
  if (!is_valid_method(method)) throw Error(Errc::syntax, "invalid DID method");

  Identity id;
  KeyPair signing{KeyKind::signing, crypto::ed25519_public_from_secret(signing_secret),
                  signing_secret, {}};
  KeyPair agreement{KeyKind::key_agreement,
                    crypto::x25519_public_from_secret(agreement_secret), agreement_secret,
                    {}};

  id.did = Did{std::string(method), derive_subject(signing.public_key)};
  const auto base = id.did.str();
  signing.key_id = base + "#key-1";
  agreement.key_id = base + "#key-2";

  id.document.id = id.did;
  id.document.verification_methods = {
      {signing.key_id, KeyKind::signing, signing.public_key},
      {agreement.key_id, KeyKind::key_agreement, agreement.public_key}};
  id.document.service_endpoints = {
      {base + "#didcomm", std::string(kServiceType), std::string(endpoint_uri)}};
  id.keys = {std::move(signing), std::move(agreement)};
  return id;
}

}  // namespace

Identity generate_identity(std::string_view method, std::string_view endpoint_uri) {
  return build_identity(method, endpoint_uri, SecretKey(crypto::random_array<32>()),
                        SecretKey(crypto::random_array<32>()));
}

Identity generate_identity(std::string_view method, std::string_view endpoint_uri,
                           const Key32& seed) {
  auto sign_seed = crypto::concat_kdf(seed, as_bytes("signing"));
  auto agree_seed = crypto::concat_kdf(seed, as_bytes("key-agreement"));
  return build_identity(method, endpoint_uri, SecretKey(sign_seed),
                        crypto::x25519_secret_from_seed(agree_seed));
}

Signature sign(const KeyPair& key, ByteView message) {
  if (key.kind != KeyKind::signing) throw Error(Errc::validation, "not a signing key");
  return crypto::ed25519_sign(key.secret_key, message);
}

bool verify(const Key32& signing_public, ByteView message, ByteView signature) {
  return crypto::ed25519_verify(signing_public, message, signature);
}

}  // namespace didnf
