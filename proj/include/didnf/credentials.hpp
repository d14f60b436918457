#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "didnf/resolver.hpp"
#include "didnf/vdr.hpp"

namespace didnf {

using Claims = std::map<std::string, std::string>;
using PresentationNonce = std::array<std::uint8_t, 16>;

struct VerifiableCredential {
  std::string credential_id;
  std::string schema_id;
  Did issuer;
  Did subject;
  Claims claims;
  std::string registry_id;
  std::int64_t issuance_time = 0;  // unix seconds
  Signature issuer_signature{};

  friend bool operator==(const VerifiableCredential&, const VerifiableCredential&) = default;
};

struct VerifiablePresentation {
  VerifiableCredential credential;
  Did holder;
  PresentationNonce nonce{};
  Signature holder_signature{};

  friend bool operator==(const VerifiablePresentation&, const VerifiablePresentation&) = default;
};

enum class Verdict { granted, denied };

enum class DenialReason {
  ok,
  bad_issuer_signature,
  bad_holder_signature,
  revoked,
  schema_mismatch,
  nonce_mismatch,
  holder_mismatch,
  expired,
};

std::string_view to_string(DenialReason reason);

struct VerificationOutcome {
  Verdict verdict = Verdict::denied;
  DenialReason reason = DenialReason::ok;

  bool granted() const { return verdict == Verdict::granted; }
  static VerificationOutcome ok() { return {Verdict::granted, DenialReason::ok}; }
  static VerificationOutcome deny(DenialReason r) { return {Verdict::denied, r}; }
};

// Default authorization schema published by the NRF.
inline constexpr std::string_view kNfAuthorizationSchema = "nf-authorization/1.0";
inline const std::vector<std::string> kNfAuthorizationAttributes = {
    "nf_type", "allowed_service", "expiry"};

SchemaRecord define_schema(const Identity& issuer, std::string schema_id,
                           std::vector<std::string> attribute_names, Vdr& vdr);

void create_revocation_registry(const Identity& issuer, const std::string& registry_id,
                                Vdr& vdr);

VerifiableCredential issue(const Identity& issuer, const std::string& schema_id,
                           const std::string& registry_id, const Did& subject,
                           Claims claims, const Vdr& vdr, std::int64_t now);

void revoke(const Identity& issuer, const VerifiableCredential& credential, Vdr& vdr);

// Throws Error(validation) with "holder_mismatch" when the holder is not the
// credential subject.
VerifiablePresentation present(const Identity& holder, const VerifiableCredential& credential,
                               const PresentationNonce& nonce);

// Resolves issuer and holder documents (always exactly two resolver calls)
// and never throws for a bad presentation: every failure is a denial.
VerificationOutcome verify_presentation(const VerifiablePresentation& vp,
                                        const PresentationNonce& expected_nonce,
                                        std::int64_t now, Resolver& resolver,
                                        const Vdr& vdr);

// Signature bases.
Bytes canonical_bytes(const VerifiableCredential& vc);
Bytes holder_proof_message(const VerifiableCredential& vc, const PresentationNonce& nonce);

// Wire form: compact JSON, keys sorted, binary fields base64url.
Json to_json(const VerifiableCredential& vc);
VerifiableCredential credential_from_json(const Json& j);
Json to_json(const VerifiablePresentation& vp);
VerifiablePresentation presentation_from_json(const Json& j);
Bytes serialize(const VerifiablePresentation& vp);
VerifiablePresentation parse_presentation(ByteView bytes);  // throws Error(syntax)

}  // namespace didnf
