#include "didnf/didcomm_v2.hpp"

#include <algorithm>
#include <chrono>

#include <sodium.h>

#include "didnf/error.hpp"

namespace didnf::v2 {

namespace {

constexpr std::string_view kEncryptedType = "application/didcomm-encrypted+json";
constexpr std::string_view kKeyWrapAlg = "ECDH-1PU+XC20PKW";

void check_magic(ByteView frame) {
  auto kind = peek_frame_kind(frame);
  if (!kind) throw Error(Errc::integrity, "unrecognised frame header");
  if (*kind != FrameKind::v2_envelope) throw Error(Errc::format, "frame is not a v2 envelope");
}

// apv commits to the (sorted) recipient key ids.
std::string party_v_info(std::string_view kid) {
  return base64url_encode(crypto::sha256(as_bytes(kid)));
}

Key32 key_wrapping_key(const Key32& ze, const Key32& zs, std::string_view apu,
                       std::string_view apv, const Key32& epk) {
  Bytes z(ze.begin(), ze.end());
  z.insert(z.end(), zs.begin(), zs.end());
  ByteWriter info;
  info.field(kKeyWrapAlg).field(apu).field(apv).field(ByteView(epk));
  return crypto::concat_kdf(z, info.bytes());
}

Bytes aad_for(const EnvelopeV2& env) {
  ByteWriter w;
  w.field(env.protected_header).field(env.recipient_kid);
  return std::move(w).bytes();
}

Json parse_json(std::string_view text) {
  Json j = Json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::integrity, "header is not JSON");
  return j;
}

}  // namespace

Bytes canonical_jwm_bytes(const Jwm& jwm) {
  Json header{{"created_time", jwm.created_time},
              {"from", jwm.from.str()},
              {"id", jwm.id},
              {"to", jwm.to.str()},
              {"type", jwm.type}};
  ByteWriter w;
  w.field(header.dump()).raw(jwm.body);
  return std::move(w).bytes();
}

Jwm parse_jwm(ByteView bytes) {
  ByteReader r(bytes);
  auto header = parse_json(r.field_string(1u << 16));
  Jwm jwm;
  try {
    jwm.id = header.at("id").get<std::string>();
    jwm.type = header.at("type").get<std::string>();
    jwm.from = Did::parse(header.at("from").get<std::string>());
    jwm.to = Did::parse(header.at("to").get<std::string>());
    if (header.contains("created_time")) {
      jwm.created_time = header.at("created_time").get<std::int64_t>();
    }
  } catch (const Json::exception&) {
    throw Error(Errc::integrity, "message is missing a mandatory header");
  } catch (const Error&) {
    throw Error(Errc::integrity, "message header has an invalid DID");
  }
  if (jwm.id.empty() || jwm.type.empty()) {
    throw Error(Errc::integrity, "message id and type must be non-empty");
  }
  auto body = r.rest();
  jwm.body.assign(body.begin(), body.end());
  return jwm;
}

std::string SignedMessage::kid() const {
  try {
    return parse_json(protected_header).at("kid").get<std::string>();
  } catch (const Json::exception&) {
    throw Error(Errc::unauthorized, "signature header has no kid");
  }
}

Bytes SignedMessage::signing_input() const {
  ByteWriter w;
  w.field(protected_header).field(payload);
  return std::move(w).bytes();
}

Bytes SignedMessage::serialize() const {
  ByteWriter w;
  w.field(protected_header).field(payload).field(signature);
  return std::move(w).bytes();
}

SignedMessage SignedMessage::parse(ByteView bytes) {
  ByteReader r(bytes);
  SignedMessage m;
  m.protected_header = r.field_string(1u << 16);
  auto payload = r.field();
  m.payload.assign(payload.begin(), payload.end());
  m.signature = r.fixed_field<64>();
  r.expect_done();
  return m;
}

SignedMessage sign_jwm(const Identity& sender, const Jwm& jwm) {
  const auto& key = sender.signing_key();
  SignedMessage m;
  m.protected_header = Json{{"alg", "EdDSA"}, {"kid", key.key_id}}.dump();
  m.payload = canonical_jwm_bytes(jwm);
  m.signature = sign(key, m.signing_input());
  return m;
}

std::string EnvelopeV2::sender_kid() const {
  try {
    return parse_json(protected_header).at("skid").get<std::string>();
  } catch (const Json::exception&) {
    throw Error(Errc::integrity, "envelope header has no skid");
  }
}

Bytes EnvelopeV2::serialize() const {
  ByteWriter w;
  w.raw(kV2EnvelopeMagic)
      .field(protected_header)
      .field(recipient_kid)
      .field(encrypted_key)
      .field(nonce)
      .field(ciphertext)
      .field(tag);
  return std::move(w).bytes();
}

EnvelopeV2 EnvelopeV2::parse(ByteView frame) {
  check_magic(frame);
  ByteReader r(frame.subspan(4));
  EnvelopeV2 env;
  env.protected_header = r.field_string(1u << 16);
  env.recipient_kid = r.field_string(1u << 12);
  env.encrypted_key = r.fixed_field<72>();
  env.nonce = r.fixed_field<24>();
  auto ct = r.field();
  env.ciphertext.assign(ct.begin(), ct.end());
  env.tag = r.fixed_field<16>();
  r.expect_done();
  return env;
}

EnvelopeV2 encrypt_signed(const Identity& sender, const VerificationMethod& recipient_key,
                          ByteView signed_message) {
  if (recipient_key.kind != KeyKind::key_agreement) {
    throw Error(Errc::key_mismatch, "recipient key is not a key-agreement key");
  }
  const auto& mine = sender.agreement_key();
  SecretKey eph(crypto::random_array<32>());
  const auto epk = crypto::x25519_public_from_secret(eph);

  const auto apu = base64url_encode(as_bytes(mine.key_id));
  const auto apv = party_v_info(recipient_key.key_id);

  EnvelopeV2 env;
  env.protected_header = Json{{"alg", kKeyWrapAlg},
                              {"apu", apu},
                              {"apv", apv},
                              {"enc", "XC20P"},
                              {"epk", encode_multikey(KeyKind::key_agreement, epk)},
                              {"skid", mine.key_id},
                              {"typ", kEncryptedType}}
                             .dump();
  env.recipient_kid = recipient_key.key_id;
  env.nonce = crypto::random_array<24>();

  // Fresh content key, wrapped for the recipient under the 1PU-derived key.
  SecretKey cek(crypto::random_array<32>());
  auto kek = key_wrapping_key(crypto::x25519(eph, recipient_key.public_key),
                              crypto::x25519(mine.secret_key, recipient_key.public_key),
                              apu, apv, epk);
  const auto kw_nonce = crypto::random_array<24>();
  auto wrapped = crypto::aead_encrypt(kek, kw_nonce, cek.bytes(), {});
  std::copy(kw_nonce.begin(), kw_nonce.end(), env.encrypted_key.begin());
  std::copy(wrapped.ciphertext.begin(), wrapped.ciphertext.end(), env.encrypted_key.begin() + 24);
  std::copy(wrapped.tag.begin(), wrapped.tag.end(), env.encrypted_key.begin() + 56);

  auto sealed = crypto::aead_encrypt(cek.bytes(), env.nonce, signed_message, aad_for(env));
  env.ciphertext = std::move(sealed.ciphertext);
  env.tag = sealed.tag;
  return env;
}

EnvelopeV2 pack_v2(const Identity& sender, const Did& recipient,
                   std::string_view message_type, ByteView body, Resolver& resolver,
                   ResolutionTrace* trace, PackInfo* info) {
  auto own = resolve_traced(resolver, sender.did, trace);
  for (const auto* key : {&sender.signing_key(), &sender.agreement_key()}) {
    const auto* vm = own.find(key->key_id);
    if (!vm || vm->public_key != key->public_key) {
      throw Error(Errc::key_mismatch, "sender key " + key->key_id +
                                          " is not in the sender's current document");
    }
  }
  auto theirs = resolve_traced(resolver, recipient, trace);
  const auto* recipient_key = theirs.first_of(KeyKind::key_agreement);
  if (!recipient_key) throw Error(Errc::key_mismatch, "recipient has no key-agreement key");

  Jwm jwm;
  jwm.id = info && !info->message_id.empty() ? info->message_id : crypto::random_uuid();
  jwm.type = std::string(message_type);
  jwm.from = sender.did;
  jwm.to = recipient;
  jwm.created_time = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  jwm.body.assign(body.begin(), body.end());
  if (info) info->recipient_document = theirs;
  return encrypt_signed(sender, *recipient_key, sign_jwm(sender, jwm).serialize());
}

Jwm unpack_v2(const Identity& recipient, const EnvelopeV2& envelope, Resolver& resolver,
              ResolutionTrace* trace) {
  const auto& mine = recipient.agreement_key();
  Did addressed;
  try {
    addressed = split_key_id(envelope.recipient_kid).first;
  } catch (const Error&) {
    throw Error(Errc::integrity, "recipient kid is malformed");
  }
  if (addressed != recipient.did) {
    // A real party's address means the envelope went to the wrong agent; an
    // address nobody owns cannot have come from an honest sender.
    try {
      resolve_traced(resolver, addressed, trace);
    } catch (const Error& e) {
      if (e.code() != Errc::not_found) throw;
      throw Error(Errc::unauthorized, "envelope names unknown recipient " + addressed.str());
    }
    throw Error(Errc::misdelivery, "envelope addressed to " + addressed.str());
  }
  if (envelope.recipient_kid != mine.key_id) {
    throw Error(Errc::unauthorized, "envelope is not addressed to this key");
  }

  const auto skid = envelope.sender_kid();
  Did sender_did;
  try {
    sender_did = split_key_id(skid).first;
  } catch (const Error&) {
    throw Error(Errc::integrity, "sender kid is malformed");
  }
  Key32 epk{};
  std::string apu, apv;
  try {
    auto header = parse_json(envelope.protected_header);
    apu = header.at("apu").get<std::string>();
    apv = header.at("apv").get<std::string>();
    if (header.at("alg").get<std::string>() != kKeyWrapAlg) {
      throw Error(Errc::integrity, "unsupported key wrapping algorithm");
    }
    auto [kind, key] = decode_multikey(header.at("epk").get<std::string>());
    if (kind != KeyKind::key_agreement) throw Error(Errc::integrity, "epk has wrong kind");
    epk = key;
  } catch (const Json::exception&) {
    throw Error(Errc::integrity, "envelope header is incomplete");
  } catch (const Error&) {
    throw Error(Errc::integrity, "envelope header is malformed");
  }

  DidDocument sender_doc;
  try {
    sender_doc = resolve_traced(resolver, sender_did, trace);
  } catch (const Error& e) {
    if (e.code() != Errc::not_found) throw;
    throw Error(Errc::unauthorized, "sender " + sender_did.str() + " is not resolvable");
  }
  const auto* sender_key = sender_doc.find(skid);
  if (!sender_key || sender_key->kind != KeyKind::key_agreement) {
    throw Error(Errc::unauthorized, "sender key " + skid + " not in sender document");
  }
  auto own = resolve_traced(resolver, recipient.did, trace);
  const auto* own_key = own.find(envelope.recipient_kid);
  if (!own_key || own_key->public_key != mine.public_key) {
    throw Error(Errc::key_mismatch, "recipient kid is not this agent's current key");
  }

  auto kek = key_wrapping_key(crypto::x25519(mine.secret_key, epk),
                              crypto::x25519(mine.secret_key, sender_key->public_key), apu,
                              apv, epk);
  const auto& ek = envelope.encrypted_key;
  auto cek = crypto::aead_decrypt(kek, to_array<24>(ByteView(ek).subspan(0, 24)),
                                  ByteView(ek).subspan(24, 32),
                                  to_array<16>(ByteView(ek).subspan(56, 16)), {});
  if (!cek || cek->size() != 32) throw Error(Errc::integrity, "content key unwrap failed");
  auto plaintext =
      crypto::aead_decrypt(to_array<32>(*cek), envelope.nonce, envelope.ciphertext,
                           envelope.tag, aad_for(envelope));
  sodium_memzero(cek->data(), cek->size());
  if (!plaintext) throw Error(Errc::integrity, "envelope authentication failed");

  // Decryption succeeded: anything wrong from here on is the sender's doing.
  SignedMessage signed_msg;
  try {
    signed_msg = SignedMessage::parse(*plaintext);
  } catch (const Error&) {
    throw Error(Errc::unauthorized, "inner signature layer is malformed");
  }
  const auto kid = signed_msg.kid();
  const auto* signing = sender_doc.find(kid);
  if (!signing || signing->kind != KeyKind::signing) {
    throw Error(Errc::unauthorized, "signing key " + kid + " not in sender document");
  }
  if (!verify(signing->public_key, signed_msg.signing_input(), signed_msg.signature)) {
    throw Error(Errc::unauthorized, "message signature does not verify");
  }
  Jwm jwm;
  try {
    jwm = parse_jwm(signed_msg.payload);
  } catch (const Error&) {
    throw Error(Errc::unauthorized, "signed payload is not a valid message");
  }
  if (jwm.from != sender_did) {
    throw Error(Errc::unauthorized, "from header does not match the sending key");
  }
  if (jwm.to != recipient.did) {
    throw Error(Errc::misdelivery, "message addressed to " + jwm.to.str());
  }
  return jwm;
}

}  // namespace didnf::v2
