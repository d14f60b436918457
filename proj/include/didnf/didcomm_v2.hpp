#pragma once

#include <array>

#include <string>

#include "didnf/identity.hpp"
#include "didnf/resolver.hpp"
#include "didnf/wire.hpp"

// Stateless variant: every message carries id/type/from/to headers, is signed
// by the sender and then encrypted with a key bound to both parties' static
// key-agreement keys. Both sides resolve both documents per message.
namespace didnf::v2 {

struct Jwm {
  std::string id;
  std::string type;
  Did from;
  Did to;
  std::int64_t created_time = 0;
  Bytes body;

  friend bool operator==(const Jwm&, const Jwm&) = default;
};

// u32 length || sorted-key header JSON || raw body
Bytes canonical_jwm_bytes(const Jwm& jwm);
Jwm parse_jwm(ByteView bytes);  // throws Error(integrity)

// Signature layer: field(protected) || field(payload) || field(signature),
// signature over field(protected) || field(payload).
struct SignedMessage {
  std::string protected_header;  // {"alg":"EdDSA","kid":...}
  Bytes payload;
  Signature signature{};

  std::string kid() const;
  Bytes signing_input() const;
  Bytes serialize() const;
  static SignedMessage parse(ByteView bytes);
};

SignedMessage sign_jwm(const Identity& sender, const Jwm& jwm);

struct EnvelopeV2 {
  std::string protected_header;  // alg, apu, apv, enc, epk, skid, typ
  std::string recipient_kid;
  // kw nonce || wrapped content key || kw tag, for the single recipient
  std::array<std::uint8_t, 72> encrypted_key{};
  crypto::Nonce24 nonce{};
  Bytes ciphertext;
  crypto::Tag16 tag{};

  std::string sender_kid() const;  // throws Error(integrity)
  Bytes serialize() const;
  static EnvelopeV2 parse(ByteView frame);  // throws Error(format|integrity)
};

// Encryption layer only; `recipient_key` must be a key-agreement method.
EnvelopeV2 encrypt_signed(const Identity& sender, const VerificationMethod& recipient_key,
                          ByteView signed_message);

// Optional in/out details for pack_v2.
struct PackInfo {
  std::string message_id;          // in: used as the message id when non-empty
  DidDocument recipient_document;  // out: as resolved during packing
};

EnvelopeV2 pack_v2(const Identity& sender, const Did& recipient,
                   std::string_view message_type, ByteView body, Resolver& resolver,
                   ResolutionTrace* trace = nullptr, PackInfo* info = nullptr);

Jwm unpack_v2(const Identity& recipient, const EnvelopeV2& envelope, Resolver& resolver,
              ResolutionTrace* trace = nullptr);

}  // namespace didnf::v2
