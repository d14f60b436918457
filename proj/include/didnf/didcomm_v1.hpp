#pragma once

#include <optional>
#include <string>
#include <utility>

#include "didnf/identity.hpp"
#include "didnf/wire.hpp"

// Stateful variant: a four-message connection handshake exchanges and caches
// both documents, after which envelopes carry only a recipient block and the
// AEAD output.
namespace didnf::v1 {

enum class ConnectionState { invited, requested, responded, complete };
std::string_view to_string(ConnectionState state);

struct ConnectionRecord {
  std::string connection_id;
  Did my_did;
  std::optional<Did> their_did;
  ConnectionState state = ConnectionState::invited;
  std::optional<DidDocument> their_document;
  std::string my_signing_key_id;
  std::string my_agreement_key_id;
  std::string invitation_key;  // multikey from the invitation (invitee side)
  std::string invitation_endpoint;

  std::optional<std::string> their_endpoint() const;
};

enum class ExchangeKind { invitation, request, response, complete };
std::string_view to_string(ExchangeKind kind);

struct ExchangeMessage {
  ExchangeKind kind = ExchangeKind::invitation;
  std::string message_id = crypto::random_uuid();
  std::string connection_id;  // also the thread id of every later message
  std::optional<Did> sender_did;
  // request/response: the canonical document bytes and a signature over them
  // by the document's first signing key.
  Bytes sender_document;
  Bytes document_signature;
  // invitation only
  std::string endpoint;
  std::string recipient_key;

  Bytes serialize() const;
  static ExchangeMessage parse(ByteView frame);  // throws Error(format|integrity)
};

std::pair<ConnectionRecord, ExchangeMessage> create_invitation(const Identity& me);
std::pair<ConnectionRecord, ExchangeMessage> process_invitation(
    const Identity& me, const ExchangeMessage& invitation);
ExchangeMessage process_request(const Identity& me, ConnectionRecord& record,
                                const ExchangeMessage& request);
ExchangeMessage process_response(const Identity& me, ConnectionRecord& record,
                                 const ExchangeMessage& response);
void process_complete(ConnectionRecord& record, const ExchangeMessage& ack);

struct EnvelopeV1 {
  std::string protected_header;  // base64url(JSON recipient block)
  crypto::Nonce24 iv{};
  Bytes ciphertext;
  crypto::Tag16 tag{};

  Bytes serialize() const;
  static EnvelopeV1 parse(ByteView frame);  // throws Error(format|integrity)
};

// Recipient key (multikey) named in the first recipient entry.
std::string recipient_kid(const EnvelopeV1& envelope);
// Opens the sealed sender hint; returns the sender's key-agreement key.
Key32 open_sender(const Identity& me, const EnvelopeV1& envelope);

EnvelopeV1 pack_v1(const Identity& me, const ConnectionRecord& record, ByteView payload);
Bytes unpack_v1(const Identity& me, const ConnectionRecord& record,
                const EnvelopeV1& envelope);

}  // namespace didnf::v1
