#include "didnf/didcomm_v1.hpp"

#include <algorithm>

#include "didnf/error.hpp"

namespace didnf::v1 {

namespace {

constexpr std::string_view kTypePrefix = "https://didcomm.org/didexchange/1.0/";

void check_magic(ByteView frame, const std::array<std::uint8_t, 4>& magic,
                 std::string_view what) {
  auto kind = peek_frame_kind(frame);
  if (!kind) throw Error(Errc::integrity, "unrecognised frame header");
  if (!std::equal(magic.begin(), magic.end(), frame.begin())) {
    throw Error(Errc::format, "frame is not a " + std::string(what));
  }
}

Bytes info(std::string_view label, const Key32& a, const Key32& b) {
  Bytes out = to_bytes(label);
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

const Key32& their_agreement_key(const ConnectionRecord& record) {
  if (!record.their_document) {
    throw Error(Errc::protocol_state, "connection has no peer document");
  }
  const auto* vm = record.their_document->first_of(KeyKind::key_agreement);
  if (!vm) throw Error(Errc::key_mismatch, "peer document has no key-agreement key");
  return vm->public_key;
}

void require_identity(const Identity& me, const ConnectionRecord& record) {
  if (me.did != record.my_did) {
    throw Error(Errc::key_mismatch, "identity does not own this connection");
  }
}

void require_state(const ConnectionRecord& record, ConnectionState expected,
                   const ExchangeMessage& msg) {
  if (record.state != expected) {
    throw Error(Errc::protocol_state, std::string(to_string(msg.kind)) +
                                          " not valid in state " +
                                          std::string(to_string(record.state)));
  }
  if (record.connection_id != msg.connection_id) {
    throw Error(Errc::protocol_state, "message belongs to another connection");
  }
}

// Inline documents are self-certifying: the DID subject is derived from the
// first signing key, and that key signs the document bytes.
DidDocument verify_inline_document(const ExchangeMessage& msg) {
  if (!msg.sender_did) throw Error(Errc::unauthorized, "exchange message has no sender");
  Json j = Json::parse(msg.sender_document.begin(), msg.sender_document.end(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::unauthorized, "inline document is not JSON");
  DidDocument doc;
  try {
    doc = document_from_json(j);
  } catch (const Error&) {
    throw Error(Errc::unauthorized, "inline document is malformed");
  }
  const auto* signing = doc.first_of(KeyKind::signing);
  if (doc.id != *msg.sender_did || !signing ||
      !doc.first_of(KeyKind::key_agreement) ||
      doc.id.subject != derive_subject(signing->public_key) ||
      !verify(signing->public_key, msg.sender_document, msg.document_signature)) {
    throw Error(Errc::unauthorized, "inline document signature mismatch");
  }
  return doc;
}

ExchangeMessage document_message(ExchangeKind kind, const Identity& me,
                                 const std::string& connection_id) {
  ExchangeMessage msg;
  msg.kind = kind;
  msg.connection_id = connection_id;
  msg.sender_did = me.did;
  msg.sender_document = canonical_bytes(me.document);
  auto sig = sign(me.signing_key(), msg.sender_document);
  msg.document_signature.assign(sig.begin(), sig.end());
  return msg;
}

// Sealed sender hint: ephemeral X25519 to the recipient, then AEAD over the
// sender's key-agreement key. Layout: epk(32) || ciphertext(32) || tag(16).
Bytes seal_sender(const Key32& sender_public, const Key32& recipient_public) {
  SecretKey eph(crypto::random_array<32>());
  auto epk = crypto::x25519_public_from_secret(eph);
  auto key = crypto::concat_kdf(crypto::x25519(eph, recipient_public),
                                info("didnf/v1/sender", epk, recipient_public));
  auto digest = crypto::sha256(info("", epk, recipient_public));
  auto nonce = to_array<24>(ByteView(digest).first(24));
  auto sealed = crypto::aead_encrypt(key, nonce, sender_public, {});
  Bytes out(epk.begin(), epk.end());
  out.insert(out.end(), sealed.ciphertext.begin(), sealed.ciphertext.end());
  out.insert(out.end(), sealed.tag.begin(), sealed.tag.end());
  return out;
}

Key32 unseal_sender(const KeyPair& recipient, ByteView sealed) {
  if (sealed.size() != 80) throw Error(Errc::integrity, "sealed sender has wrong length");
  auto epk = to_array<32>(sealed.first(32));
  auto key = crypto::concat_kdf(crypto::x25519(recipient.secret_key, epk),
                                info("didnf/v1/sender", epk, recipient.public_key));
  auto digest = crypto::sha256(info("", epk, recipient.public_key));
  auto nonce = to_array<24>(ByteView(digest).first(24));
  auto opened = crypto::aead_decrypt(key, nonce, sealed.subspan(32, 32),
                                     to_array<16>(sealed.subspan(64)), {});
  if (!opened) throw Error(Errc::integrity, "sealed sender does not open");
  return to_array<32>(*opened);
}

Key32 wrap_key(const SecretKey& my_secret, const Key32& my_public, const Key32& their_public,
               bool i_am_sender) {
  const auto& sender = i_am_sender ? my_public : their_public;
  const auto& recipient = i_am_sender ? their_public : my_public;
  return crypto::concat_kdf(crypto::x25519(my_secret, their_public),
                            info("didnf/v1/cek-wrap", sender, recipient));
}

struct RecipientEntry {
  std::string kid;
  Bytes encrypted_key;
  crypto::Nonce24 iv{};
  Bytes sender;
};

RecipientEntry first_recipient(const EnvelopeV1& envelope) {
  try {
    auto raw = base64url_decode(envelope.protected_header);
    Json j = Json::parse(raw.begin(), raw.end());
    const auto& r = j.at("recipients").at(0);
    const auto& h = r.at("header");
    RecipientEntry e;
    e.kid = h.at("kid").get<std::string>();
    e.encrypted_key = base64url_decode(r.at("encrypted_key").get<std::string>());
    auto iv = base64url_decode(h.at("iv").get<std::string>());
    if (iv.size() != 24 || e.encrypted_key.size() != 48) {
      throw Error(Errc::integrity, "recipient block has wrong field sizes");
    }
    e.iv = to_array<24>(iv);
    e.sender = base64url_decode(h.at("sender").get<std::string>());
    return e;
  } catch (const Json::exception&) {
    throw Error(Errc::integrity, "recipient block is malformed");
  } catch (const Error& e) {
    if (e.code() == Errc::integrity) throw;
    throw Error(Errc::integrity, "recipient block is malformed");
  }
}

}  // namespace

std::string_view to_string(ConnectionState state) {
  switch (state) {
    case ConnectionState::invited: return "invited";
    case ConnectionState::requested: return "requested";
    case ConnectionState::responded: return "responded";
    case ConnectionState::complete: return "complete";
  }
  return "unknown";
}

std::string_view to_string(ExchangeKind kind) {
  switch (kind) {
    case ExchangeKind::invitation: return "invitation";
    case ExchangeKind::request: return "request";
    case ExchangeKind::response: return "response";
    case ExchangeKind::complete: return "complete";
  }
  return "unknown";
}

std::optional<std::string> ConnectionRecord::their_endpoint() const {
  if (their_document) {
    if (auto ep = their_document->endpoint()) return ep;
  }
  if (!invitation_endpoint.empty()) return invitation_endpoint;
  return std::nullopt;
}

Bytes ExchangeMessage::serialize() const {
  Json j{{"@id", message_id},
         {"@type", std::string(kTypePrefix) + std::string(to_string(kind))},
         {"connection_id", connection_id}};
  if (kind != ExchangeKind::invitation) j["~thread"] = {{"thid", connection_id}};
  if (sender_did) j["did"] = sender_did->str();
  switch (kind) {
    case ExchangeKind::invitation:
      j["endpoint"] = endpoint;
      j["recipient_key"] = recipient_key;
      break;
    case ExchangeKind::request:
    case ExchangeKind::response:
      j["did_doc~attach"] = {{"data", {{"base64", base64url_encode(sender_document)}}},
                             {"jws", base64url_encode(document_signature)}};
      break;
    case ExchangeKind::complete:
      break;
  }
  ByteWriter w;
  w.raw(kV1ExchangeMagic).raw(as_bytes(j.dump()));
  return std::move(w).bytes();
}

ExchangeMessage ExchangeMessage::parse(ByteView frame) {
  check_magic(frame, kV1ExchangeMagic, "connection exchange message");
  auto body = frame.subspan(4);
  Json j = Json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::integrity, "exchange message is not JSON");
  try {
    ExchangeMessage msg;
    auto type = j.at("@type").get<std::string>();
    if (!type.starts_with(kTypePrefix)) throw Error(Errc::format, "unknown message type");
    auto kind = type.substr(kTypePrefix.size());
    if (kind == "invitation") {
      msg.kind = ExchangeKind::invitation;
    } else if (kind == "request") {
      msg.kind = ExchangeKind::request;
    } else if (kind == "response") {
      msg.kind = ExchangeKind::response;
    } else if (kind == "complete") {
      msg.kind = ExchangeKind::complete;
    } else {
      throw Error(Errc::format, "unknown exchange message kind " + kind);
    }
    msg.message_id = j.at("@id").get<std::string>();
    msg.connection_id = j.at("connection_id").get<std::string>();
    if (msg.kind != ExchangeKind::invitation &&
        j.at("~thread").at("thid").get<std::string>() != msg.connection_id) {
      throw Error(Errc::integrity, "thread id does not match the connection");
    }
    if (j.contains("did")) msg.sender_did = Did::parse(j.at("did").get<std::string>());
    if (msg.kind == ExchangeKind::invitation) {
      msg.endpoint = j.at("endpoint").get<std::string>();
      msg.recipient_key = j.at("recipient_key").get<std::string>();
    } else if (msg.kind != ExchangeKind::complete) {
      const auto& att = j.at("did_doc~attach");
      msg.sender_document = base64url_decode(att.at("data").at("base64").get<std::string>());
      msg.document_signature = base64url_decode(att.at("jws").get<std::string>());
    }
    return msg;
  } catch (const Json::exception& e) {
    throw Error(Errc::integrity, std::string("malformed exchange message: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::format || e.code() == Errc::integrity) throw;
    throw Error(Errc::integrity, std::string("malformed exchange message: ") + e.what());
  }
}

std::pair<ConnectionRecord, ExchangeMessage> create_invitation(const Identity& me) {
  ConnectionRecord record;
  record.connection_id = crypto::random_uuid();
  record.my_did = me.did;
  record.state = ConnectionState::invited;
  record.my_signing_key_id = me.signing_key().key_id;
  record.my_agreement_key_id = me.agreement_key().key_id;

  ExchangeMessage inv;
  inv.kind = ExchangeKind::invitation;
  inv.connection_id = record.connection_id;
  inv.endpoint = me.document.endpoint().value_or("");
  inv.recipient_key = encode_multikey(KeyKind::key_agreement, me.agreement_key().public_key);
  return {std::move(record), std::move(inv)};
}

std::pair<ConnectionRecord, ExchangeMessage> process_invitation(
    const Identity& me, const ExchangeMessage& invitation) {
  if (invitation.kind != ExchangeKind::invitation) {
    throw Error(Errc::protocol_state, "expected an invitation");
  }
  try {
    if (decode_multikey(invitation.recipient_key).first != KeyKind::key_agreement) {
      throw Error(Errc::validation, "invitation key is not a key-agreement key");
    }
  } catch (const Error&) {
    throw Error(Errc::validation, "invitation carries an invalid recipient key");
  }
  ConnectionRecord record;
  record.connection_id = invitation.connection_id;
  record.my_did = me.did;
  record.state = ConnectionState::requested;
  record.my_signing_key_id = me.signing_key().key_id;
  record.my_agreement_key_id = me.agreement_key().key_id;
  record.invitation_key = invitation.recipient_key;
  record.invitation_endpoint = invitation.endpoint;
  return {std::move(record),
          document_message(ExchangeKind::request, me, invitation.connection_id)};
}

ExchangeMessage process_request(const Identity& me, ConnectionRecord& record,
                                const ExchangeMessage& request) {
  require_identity(me, record);
  if (request.kind != ExchangeKind::request) {
    throw Error(Errc::protocol_state, "expected a connection request");
  }
  require_state(record, ConnectionState::invited, request);
  auto doc = verify_inline_document(request);
  record.their_did = doc.id;
  record.their_document = std::move(doc);
  record.state = ConnectionState::responded;
  return document_message(ExchangeKind::response, me, record.connection_id);
}

ExchangeMessage process_response(const Identity& me, ConnectionRecord& record,
                                 const ExchangeMessage& response) {
  require_identity(me, record);
  if (response.kind != ExchangeKind::response) {
    throw Error(Errc::protocol_state, "expected a connection response");
  }
  require_state(record, ConnectionState::requested, response);
  auto doc = verify_inline_document(response);
  const auto* agreement = doc.first_of(KeyKind::key_agreement);
  if (encode_multikey(KeyKind::key_agreement, agreement->public_key) != record.invitation_key) {
    throw Error(Errc::unauthorized, "responder key does not match the invitation");
  }
  record.their_did = doc.id;
  record.their_document = std::move(doc);
  record.state = ConnectionState::complete;

  ExchangeMessage ack;
  ack.kind = ExchangeKind::complete;
  ack.connection_id = record.connection_id;
  ack.sender_did = me.did;
  return ack;
}

void process_complete(ConnectionRecord& record, const ExchangeMessage& ack) {
  if (ack.kind != ExchangeKind::complete) {
    throw Error(Errc::protocol_state, "expected a completion message");
  }
  require_state(record, ConnectionState::responded, ack);
  if (!ack.sender_did || ack.sender_did != record.their_did) {
    throw Error(Errc::unauthorized, "completion sent by an unexpected party");
  }
  record.state = ConnectionState::complete;
}

Bytes EnvelopeV1::serialize() const {
  ByteWriter w;
  w.raw(kV1EnvelopeMagic).field(protected_header).field(iv).field(ciphertext).field(tag);
  return std::move(w).bytes();
}

EnvelopeV1 EnvelopeV1::parse(ByteView frame) {
  check_magic(frame, kV1EnvelopeMagic, "v1 envelope");
  ByteReader r(frame.subspan(4));
  EnvelopeV1 env;
  env.protected_header = r.field_string(1u << 16);
  env.iv = r.fixed_field<24>();
  auto ct = r.field();
  env.ciphertext.assign(ct.begin(), ct.end());
  env.tag = r.fixed_field<16>();
  r.expect_done();
  return env;
}

std::string recipient_kid(const EnvelopeV1& envelope) {
  return first_recipient(envelope).kid;
}

Key32 open_sender(const Identity& me, const EnvelopeV1& envelope) {
  auto entry = first_recipient(envelope);
  const auto& mine = me.agreement_key();
  if (entry.kid != encode_multikey(KeyKind::key_agreement, mine.public_key)) {
    throw Error(Errc::unauthorized, "envelope is not addressed to this key");
  }
  return unseal_sender(mine, entry.sender);
}

EnvelopeV1 pack_v1(const Identity& me, const ConnectionRecord& record, ByteView payload) {
  if (record.state != ConnectionState::complete) {
    throw Error(Errc::protocol_state, "connection is not complete");
  }
  require_identity(me, record);
  const auto& mine = me.agreement_key();
  const auto& theirs = their_agreement_key(record);

  auto cek = crypto::random_array<32>();
  auto wrap_iv = crypto::random_array<24>();
  auto kek = wrap_key(mine.secret_key, mine.public_key, theirs, true);
  auto wrapped = crypto::aead_encrypt(kek, wrap_iv, cek, {});
  Bytes encrypted_key = wrapped.ciphertext;
  encrypted_key.insert(encrypted_key.end(), wrapped.tag.begin(), wrapped.tag.end());

  Json header{{"alg", "Authcrypt"},
              {"enc", "xchacha20poly1305_ietf"},
              {"recipients",
               Json::array({{{"encrypted_key", base64url_encode(encrypted_key)},
                             {"header",
                              {{"iv", base64url_encode(wrap_iv)},
                               {"kid", encode_multikey(KeyKind::key_agreement, theirs)},
                               {"sender", base64url_encode(seal_sender(mine.public_key, theirs))}}}}})},
              {"typ", "JWM/1.0"}};

  EnvelopeV1 env;
  env.protected_header = base64url_encode(as_bytes(header.dump()));
  env.iv = crypto::random_array<24>();
  auto sealed = crypto::aead_encrypt(cek, env.iv, payload, as_bytes(env.protected_header));
  env.ciphertext = std::move(sealed.ciphertext);
  env.tag = sealed.tag;
  return env;
}

Bytes unpack_v1(const Identity& me, const ConnectionRecord& record,
                const EnvelopeV1& envelope) {
  if (record.state != ConnectionState::complete) {
    throw Error(Errc::protocol_state, "connection is not complete");
  }
  require_identity(me, record);
  const auto& mine = me.agreement_key();
  const auto& theirs = their_agreement_key(record);

  auto entry = first_recipient(envelope);
  if (entry.kid != encode_multikey(KeyKind::key_agreement, mine.public_key)) {
    throw Error(Errc::unauthorized, "envelope is not addressed to this key");
  }
  if (unseal_sender(mine, entry.sender) != theirs) {
    throw Error(Errc::unauthorized, "envelope sender is not the connection peer");
  }
  auto kek = wrap_key(mine.secret_key, mine.public_key, theirs, false);
  auto cek = crypto::aead_decrypt(kek, entry.iv, ByteView(entry.encrypted_key).first(32),
                                  to_array<16>(ByteView(entry.encrypted_key).subspan(32)), {});
  if (!cek || cek->size() != 32) throw Error(Errc::integrity, "content key does not unwrap");
  auto payload = crypto::aead_decrypt(to_array<32>(*cek), envelope.iv, envelope.ciphertext,
                                      envelope.tag, as_bytes(envelope.protected_header));
  if (!payload) throw Error(Errc::integrity, "payload authentication failed");
  return std::move(*payload);
}

}  // namespace didnf::v1
