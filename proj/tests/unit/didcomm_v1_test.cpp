#include "didnf/didcomm_v1.hpp"

#include <gtest/gtest.h>

#include <random>

#include "didnf/wire.hpp"
#include "helpers.hpp"

namespace didnf::v1 {
namespace {

using didnf::testing::code_of;
using didnf::testing::registered_identity;

struct Pair {
  Identity alice, bob;
  ConnectionRecord a, b;  // alice invited, bob accepted
  std::vector<Bytes> frames;
};

Pair connect(Vdr& vdr) {
  Pair p{registered_identity(vdr, "http://127.0.0.1:40001/didcomm"),
         registered_identity(vdr, "http://127.0.0.1:40002/didcomm"),
         {},
         {},
         {}};
  auto [a, invitation] = create_invitation(p.alice);
  auto [b, request] = process_invitation(p.bob, ExchangeMessage::parse(invitation.serialize()));
  auto response = process_request(p.alice, a, ExchangeMessage::parse(request.serialize()));
  auto ack = process_response(p.bob, b, ExchangeMessage::parse(response.serialize()));
  process_complete(a, ExchangeMessage::parse(ack.serialize()));
  p.frames = {invitation.serialize(), request.serialize(), response.serialize(), ack.serialize()};
  p.a = a;
  p.b = b;
  return p;
}

TEST(DidExchangeTest, BothSidesComplete) {
  Vdr vdr;
  auto p = connect(vdr);
  EXPECT_EQ(p.a.state, ConnectionState::complete);
  EXPECT_EQ(p.b.state, ConnectionState::complete);
  EXPECT_EQ(p.a.connection_id, p.b.connection_id);
  EXPECT_EQ(p.a.their_did, p.bob.did);
  EXPECT_EQ(p.b.their_did, p.alice.did);
  EXPECT_EQ(p.a.their_document, p.bob.document);
  EXPECT_EQ(p.b.their_document, p.alice.document);
  EXPECT_EQ(p.b.their_endpoint(), "http://127.0.0.1:40001/didcomm");
  for (const auto& f : p.frames) EXPECT_EQ(peek_frame_kind(f), FrameKind::v1_exchange);
}

TEST(DidExchangeTest, StatesAdvanceInOrder) {
  Vdr vdr;
  auto alice = registered_identity(vdr);
  auto bob = registered_identity(vdr);
  auto [a, inv] = create_invitation(alice);
  EXPECT_EQ(a.state, ConnectionState::invited);
  auto [b, req] = process_invitation(bob, inv);
  EXPECT_EQ(b.state, ConnectionState::requested);
  auto resp = process_request(alice, a, req);
  EXPECT_EQ(a.state, ConnectionState::responded);
  auto ack = process_response(bob, b, resp);
  EXPECT_EQ(b.state, ConnectionState::complete);
  process_complete(a, ack);
  EXPECT_EQ(a.state, ConnectionState::complete);
}

TEST(DidExchangeTest, ReplayedRequestIsProtocolError) {
  Vdr vdr;
  auto alice = registered_identity(vdr);
  auto bob = registered_identity(vdr);
  auto [a, inv] = create_invitation(alice);
  auto [b, req] = process_invitation(bob, inv);
  process_request(alice, a, req);
  EXPECT_EQ(code_of([&] { process_request(alice, a, req); }), Errc::protocol_state);
}

TEST(DidExchangeTest, OutOfOrderMessagesAreProtocolErrors) {
  Vdr vdr;
  auto alice = registered_identity(vdr);
  auto bob = registered_identity(vdr);
  auto [a, inv] = create_invitation(alice);
  auto [b, req] = process_invitation(bob, inv);
  // response before request was processed
  EXPECT_EQ(code_of([&] { process_response(bob, b, req); }), Errc::protocol_state);
  EXPECT_EQ(code_of([&] { process_complete(a, req); }), Errc::protocol_state);
}

TEST(DidExchangeTest, RequestForOtherConnectionIsRejected) {
  Vdr vdr;
  auto alice = registered_identity(vdr);
  auto bob = registered_identity(vdr);
  auto [a1, inv1] = create_invitation(alice);
  auto [a2, inv2] = create_invitation(alice);
  auto [b, req2] = process_invitation(bob, inv2);
  EXPECT_EQ(code_of([&] { process_request(alice, a1, req2); }), Errc::protocol_state);
}

TEST(DidExchangeTest, ForgedInlineDocumentIsUnauthorized) {
  Vdr vdr;
  auto alice = registered_identity(vdr);
  auto bob = registered_identity(vdr);
  auto mallory = registered_identity(vdr);
  auto [a, inv] = create_invitation(alice);
  auto [b, req] = process_invitation(bob, inv);
  // Document signed by a key other than its own signing key.
  auto forged = sign(mallory.signing_key(), req.sender_document);
  req.document_signature.assign(forged.begin(), forged.end());
  EXPECT_EQ(code_of([&] { process_request(alice, a, req); }), Errc::unauthorized);
}

TEST(DidExchangeTest, ResponseFromWrongKeyIsUnauthorized) {
  Vdr vdr;
  auto alice = registered_identity(vdr);
  auto bob = registered_identity(vdr);
  auto mallory = registered_identity(vdr);
  auto [a, inv] = create_invitation(alice);
  auto [b, req] = process_invitation(bob, inv);
  // Mallory answers bob's request pretending to be the inviter.
  auto [m, _] = create_invitation(mallory);
  m.connection_id = b.connection_id;
  auto forged = process_request(mallory, m, req);
  EXPECT_EQ(code_of([&] { process_response(bob, b, forged); }), Errc::unauthorized);
}

TEST(DidExchangeTest, CrossProtocolFrameIsFormatError) {
  Bytes frame = {0x2E, 0x7B, 0x9A, 0x02, 0, 0, 0, 0};
  EXPECT_EQ(code_of([&] { ExchangeMessage::parse(frame); }), Errc::format);
  EXPECT_EQ(code_of([&] { EnvelopeV1::parse(frame); }), Errc::format);
  Bytes junk = {1, 2, 3, 4, 5};
  EXPECT_EQ(code_of([&] { EnvelopeV1::parse(junk); }), Errc::integrity);
}

TEST(EnvelopeV1Test, RoundTripsBothDirections) {
  Vdr vdr;
  auto p = connect(vdr);
  std::mt19937 rng(1);
  for (std::size_t size : {0u, 1u, 100u, 4096u, 65536u}) {
    Bytes payload(size);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    auto env = EnvelopeV1::parse(pack_v1(p.alice, p.a, payload).serialize());
    EXPECT_EQ(unpack_v1(p.bob, p.b, env), payload);
    auto back = EnvelopeV1::parse(pack_v1(p.bob, p.b, payload).serialize());
    EXPECT_EQ(unpack_v1(p.alice, p.a, back), payload);
  }
}

TEST(EnvelopeV1Test, OverheadIsConstant) {
  Vdr vdr;
  auto p = connect(vdr);
  std::optional<std::size_t> overhead;
  for (std::size_t size : {0u, 10u, 1000u, 30000u}) {
    auto wire = pack_v1(p.alice, p.a, Bytes(size, 0x41)).serialize();
    auto o = wire.size() - size;
    if (overhead) EXPECT_EQ(o, *overhead);
    overhead = o;
  }
}

TEST(EnvelopeV1Test, RequiresCompletedConnection) {
  Vdr vdr;
  auto alice = registered_identity(vdr);
  auto [a, inv] = create_invitation(alice);
  EXPECT_EQ(code_of([&] { pack_v1(alice, a, Bytes{1}); }), Errc::protocol_state);
}

TEST(EnvelopeV1Test, EveryByteFlipIsRejected) {
  Vdr vdr;
  auto p = connect(vdr);
  auto wire = pack_v1(p.alice, p.a, to_bytes("registration request")).serialize();
  for (std::size_t i = 0; i < wire.size(); ++i) {
    auto bad = wire;
    bad[i] ^= 0x01;
    auto code = code_of([&] { unpack_v1(p.bob, p.b, EnvelopeV1::parse(bad)); });
    EXPECT_TRUE(code == Errc::integrity || code == Errc::unauthorized)
        << "offset " << i << " -> " << to_string(code);
  }
}

TEST(EnvelopeV1Test, ThirdPartyCannotOpen) {
  Vdr vdr;
  auto p = connect(vdr);
  auto carol = registered_identity(vdr);
  auto [c, inv] = create_invitation(carol);
  auto env = pack_v1(p.alice, p.a, to_bytes("secret"));
  auto record = p.b;
  record.my_did = carol.did;
  EXPECT_EQ(code_of([&] { unpack_v1(carol, record, env); }), Errc::unauthorized);
}

TEST(EnvelopeV1Test, SenderOutsideConnectionIsUnauthorized) {
  Vdr vdr;
  auto p = connect(vdr);
  // Carol connects to bob separately, then replays into alice's connection.
  auto carol = registered_identity(vdr);
  auto [c, inv] = create_invitation(carol);
  auto [b2, req] = process_invitation(p.bob, inv);
  auto resp = process_request(carol, c, req);
  auto ack = process_response(p.bob, b2, resp);
  process_complete(c, ack);
  auto env = pack_v1(carol, c, to_bytes("hi"));
  EXPECT_EQ(unpack_v1(p.bob, b2, env), to_bytes("hi"));
  EXPECT_EQ(code_of([&] { unpack_v1(p.bob, p.b, env); }), Errc::unauthorized);
}

TEST(EnvelopeV1Test, SealedSenderOpensToPeerKey) {
  Vdr vdr;
  auto p = connect(vdr);
  auto env = pack_v1(p.alice, p.a, to_bytes("x"));
  EXPECT_EQ(open_sender(p.bob, env), p.alice.agreement_key().public_key);
  EXPECT_EQ(recipient_kid(env),
            encode_multikey(KeyKind::key_agreement, p.bob.agreement_key().public_key));
}

TEST(EnvelopeV1Test, FreshKeyPerMessage) {
  Vdr vdr;
  auto p = connect(vdr);
  auto a = pack_v1(p.alice, p.a, to_bytes("same"));
  auto b = pack_v1(p.alice, p.a, to_bytes("same"));
  EXPECT_NE(a.protected_header, b.protected_header);
  EXPECT_NE(a.ciphertext, b.ciphertext);
}

}  // namespace
}  // namespace didnf::v1
