#include "didnf/credentials.hpp"

#include <charconv>
#include <optional>

#include "didnf/error.hpp"

namespace didnf {

std::string_view to_string(DenialReason reason) {
  switch (reason) {
    case DenialReason::ok: return "ok";
    case DenialReason::bad_issuer_signature: return "bad_issuer_signature";
    case DenialReason::bad_holder_signature: return "bad_holder_signature";
    case DenialReason::revoked: return "revoked";
    case DenialReason::schema_mismatch: return "schema_mismatch";
    case DenialReason::nonce_mismatch: return "nonce_mismatch";
    case DenialReason::holder_mismatch: return "holder_mismatch";
    case DenialReason::expired: return "expired";
  }
  return "unknown";
}

namespace {

Json unsigned_json(const VerifiableCredential& vc) {
  return {{"claims", vc.claims},
          {"credential_id", vc.credential_id},
          {"issuance_time", vc.issuance_time},
          {"issuer", vc.issuer.str()},
          {"registry_id", vc.registry_id},
          {"schema_id", vc.schema_id},
          {"subject", vc.subject.str()}};
}

template <std::size_t N>
std::array<std::uint8_t, N> b64_array(const Json& j) {
  auto raw = base64url_decode(j.get<std::string>());
  if (raw.size() != N) throw Error(Errc::syntax, "binary field has wrong length");
  return to_array<N>(raw);
}

bool claims_match(const Claims& claims, const std::vector<std::string>& attributes) {
  if (claims.size() != attributes.size()) return false;
  for (const auto& a : attributes) {
    if (!claims.contains(a)) return false;
  }
  return true;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

Bytes canonical_bytes(const VerifiableCredential& vc) {
  try {
    return to_bytes(unsigned_json(vc).dump());
  } catch (const Json::exception&) {
    throw Error(Errc::validation, "credential fields must be valid UTF-8");
  }
}

Bytes holder_proof_message(const VerifiableCredential& vc, const PresentationNonce& nonce) {
  auto msg = canonical_bytes(vc);
  msg.insert(msg.end(), nonce.begin(), nonce.end());
  return msg;
}

SchemaRecord define_schema(const Identity& issuer, std::string schema_id,
                           std::vector<std::string> attribute_names, Vdr& vdr) {
  SchemaRecord record{std::move(schema_id), std::move(attribute_names), issuer.did};
  if (record.attribute_names.empty()) {
    throw Error(Errc::validation, "schema needs at least one attribute");
  }
  vdr.put_schema(record, sign(issuer.signing_key(), schema_proof_message(record)));
  return record;
}

void create_revocation_registry(const Identity& issuer, const std::string& registry_id,
                                Vdr& vdr) {
  vdr.create_registry(registry_id, issuer.did,
                      sign(issuer.signing_key(), registry_proof_message(registry_id, issuer.did)));
}

VerifiableCredential issue(const Identity& issuer, const std::string& schema_id,
                           const std::string& registry_id, const Did& subject,
                           Claims claims, const Vdr& vdr, std::int64_t now) {
  auto schema = vdr.get_schema(schema_id);
  if (!claims_match(claims, schema.attribute_names)) {
    throw Error(Errc::validation, "claims do not match schema " + schema_id);
  }
  if (!vdr.contains(subject)) throw Error(Errc::not_found, "subject " + subject.str());
  if (vdr.registry_issuer(registry_id) != issuer.did) {
    throw Error(Errc::unauthorized, "revocation registry belongs to another issuer");
  }

  VerifiableCredential vc;
  vc.credential_id = "urn:uuid:" + crypto::random_uuid();
  vc.schema_id = schema_id;
  vc.issuer = issuer.did;
  vc.subject = subject;
  vc.claims = std::move(claims);
  vc.registry_id = registry_id;
  vc.issuance_time = now;
  vc.issuer_signature = sign(issuer.signing_key(), canonical_bytes(vc));
  return vc;
}

void revoke(const Identity& issuer, const VerifiableCredential& credential, Vdr& vdr) {
  vdr.revoke(credential.registry_id, credential.credential_id,
             sign(issuer.signing_key(),
                  revocation_proof_message(credential.registry_id, credential.credential_id)));
}

VerifiablePresentation present(const Identity& holder, const VerifiableCredential& credential,
                               const PresentationNonce& nonce) {
  if (holder.did != credential.subject) {
    throw Error(Errc::validation, "holder_mismatch: presenter is not the credential subject");
  }
  return {credential, holder.did, nonce,
          sign(holder.signing_key(), holder_proof_message(credential, nonce))};
}

VerificationOutcome verify_presentation(const VerifiablePresentation& vp,
                                        const PresentationNonce& expected_nonce,
                                        std::int64_t now, Resolver& resolver,
                                        const Vdr& vdr) {
  using R = DenialReason;
  const auto& vc = vp.credential;

  auto try_resolve = [&](const Did& did) -> std::optional<DidDocument> {
    try {
      return resolver.resolve(did);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  const auto issuer_doc = try_resolve(vc.issuer);
  const auto holder_doc = try_resolve(vp.holder);

  if (vp.holder != vc.subject) return VerificationOutcome::deny(R::holder_mismatch);

  Bytes base;
  try {
    base = canonical_bytes(vc);
  } catch (const Error&) {
    return VerificationOutcome::deny(R::bad_issuer_signature);
  }
  const auto* issuer_key = issuer_doc ? issuer_doc->first_of(KeyKind::signing) : nullptr;
  if (!issuer_key || !verify(issuer_key->public_key, base, vc.issuer_signature)) {
    return VerificationOutcome::deny(R::bad_issuer_signature);
  }

  std::optional<SchemaRecord> schema;
  try {
    schema = vdr.get_schema(vc.schema_id);
  } catch (const Error&) {
  }
  if (!schema || schema->issuer != vc.issuer ||
      !claims_match(vc.claims, schema->attribute_names)) {
    return VerificationOutcome::deny(R::schema_mismatch);
  }

  if (vp.nonce != expected_nonce) return VerificationOutcome::deny(R::nonce_mismatch);

  const auto* holder_key = holder_doc ? holder_doc->first_of(KeyKind::signing) : nullptr;
  base.insert(base.end(), vp.nonce.begin(), vp.nonce.end());
  if (!holder_key || !verify(holder_key->public_key, base, vp.holder_signature)) {
    return VerificationOutcome::deny(R::bad_holder_signature);
  }

  // An unknown or foreign registry cannot prove non-revocation.
  try {
    if (vdr.registry_issuer(vc.registry_id) != vc.issuer ||
        vdr.is_revoked(vc.registry_id, vc.credential_id)) {
      return VerificationOutcome::deny(R::revoked);
    }
  } catch (const Error&) {
    return VerificationOutcome::deny(R::revoked);
  }

  const auto& attrs = schema->attribute_names;
  if (std::find(attrs.begin(), attrs.end(), "expiry") != attrs.end()) {
    auto expiry = parse_int(vc.claims.at("expiry"));
    if (!expiry || now >= *expiry) return VerificationOutcome::deny(R::expired);
  }
  return VerificationOutcome::ok();
}

Json to_json(const VerifiableCredential& vc) {
  auto j = unsigned_json(vc);
  j["issuer_signature"] = base64url_encode(vc.issuer_signature);
  return j;
}

VerifiableCredential credential_from_json(const Json& j) {
  try {
    VerifiableCredential vc;
    vc.credential_id = j.at("credential_id").get<std::string>();
    vc.schema_id = j.at("schema_id").get<std::string>();
    vc.issuer = Did::parse(j.at("issuer").get<std::string>());
    vc.subject = Did::parse(j.at("subject").get<std::string>());
    vc.claims = j.at("claims").get<Claims>();
    vc.registry_id = j.at("registry_id").get<std::string>();
    vc.issuance_time = j.at("issuance_time").get<std::int64_t>();
    vc.issuer_signature = b64_array<64>(j.at("issuer_signature"));
    return vc;
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("malformed credential: ") + e.what());
  }
}

Json to_json(const VerifiablePresentation& vp) {
  return {{"credential", to_json(vp.credential)},
          {"holder", vp.holder.str()},
          {"holder_signature", base64url_encode(vp.holder_signature)},
          {"nonce", base64url_encode(vp.nonce)}};
}

VerifiablePresentation presentation_from_json(const Json& j) {
  try {
    VerifiablePresentation vp;
    vp.credential = credential_from_json(j.at("credential"));
    vp.holder = Did::parse(j.at("holder").get<std::string>());
    vp.nonce = b64_array<16>(j.at("nonce"));
    vp.holder_signature = b64_array<64>(j.at("holder_signature"));
    return vp;
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("malformed presentation: ") + e.what());
  }
}

Bytes serialize(const VerifiablePresentation& vp) { return to_bytes(to_json(vp).dump()); }

VerifiablePresentation parse_presentation(ByteView bytes) {
  Json j = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::syntax, "presentation is not JSON");
  return presentation_from_json(j);
}

}  // namespace didnf
