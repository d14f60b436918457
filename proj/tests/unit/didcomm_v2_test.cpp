#include "didnf/didcomm_v2.hpp"

#include <gtest/gtest.h>

#include <random>

#include "didnf/didcomm_v1.hpp"
#include "didnf/wire.hpp"
#include "helpers.hpp"

namespace didnf::v2 {
namespace {

using didnf::testing::code_of;
using didnf::testing::registered_identity;

class V2Test : public ::testing::Test {
 protected:
  void SetUp() override {
    vdr = std::make_shared<Vdr>();
    alice = registered_identity(*vdr);
    bob = registered_identity(*vdr);
    ra = std::make_unique<Resolver>(vdr);
    rb = std::make_unique<Resolver>(vdr);
  }

  std::shared_ptr<Vdr> vdr;
  Identity alice, bob;
  std::unique_ptr<Resolver> ra, rb;
};

TEST_F(V2Test, RoundTripCarriesHeaders) {
  auto env = pack_v2(alice, bob.did, "nausf/auth", to_bytes("hello"), *ra);
  auto jwm = unpack_v2(bob, EnvelopeV2::parse(env.serialize()), *rb);
  EXPECT_EQ(jwm.body, to_bytes("hello"));
  EXPECT_EQ(jwm.from, alice.did);
  EXPECT_EQ(jwm.to, bob.did);
  EXPECT_EQ(jwm.type, "nausf/auth");
  EXPECT_EQ(jwm.id.size(), 36u);
  EXPECT_GT(jwm.created_time, 1'600'000'000);
  EXPECT_EQ(peek_frame_kind(env.serialize()), FrameKind::v2_envelope);
}

TEST_F(V2Test, RandomPayloadsRoundTrip) {
  std::mt19937 rng(2);
  for (int i = 0; i < 20; ++i) {
    Bytes payload(rng() % 65537);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    auto env = pack_v2(alice, bob.did, "t", payload, *ra);
    EXPECT_EQ(unpack_v2(bob, EnvelopeV2::parse(env.serialize()), *rb).body, payload);
  }
}

TEST_F(V2Test, EachSideResolvesBothDocuments) {
  ResolutionTrace pack_trace, unpack_trace;
  auto env = pack_v2(alice, bob.did, "t", to_bytes("x"), *ra, &pack_trace);
  unpack_v2(bob, env, *rb, &unpack_trace);
  EXPECT_EQ(pack_trace.calls, 2u);
  EXPECT_EQ(unpack_trace.calls, 2u);
  EXPECT_EQ(ra->snapshot_metrics().ledger_reads, 2u);
  EXPECT_EQ(rb->snapshot_metrics().ledger_reads, 2u);
}

TEST_F(V2Test, WarmCacheAvoidsLedger) {
  Resolver cached_a(vdr, CachePolicy::with_ttl(std::chrono::seconds(60)));
  Resolver cached_b(vdr, CachePolicy::with_ttl(std::chrono::seconds(60)));
  unpack_v2(bob, pack_v2(alice, bob.did, "t", to_bytes("warm"), cached_a), cached_b);
  cached_a.reset_metrics();
  cached_b.reset_metrics();
  unpack_v2(bob, pack_v2(alice, bob.did, "t", to_bytes("x"), cached_a), cached_b);
  EXPECT_EQ(cached_a.snapshot_metrics().ledger_reads, 0u);
  EXPECT_EQ(cached_b.snapshot_metrics().ledger_reads, 0u);
  EXPECT_EQ(cached_a.snapshot_metrics().cache_hits, 2u);
}

TEST_F(V2Test, OverheadIsConstantAndAboveV1) {
  std::optional<std::size_t> overhead;
  for (std::size_t size : {0u, 10u, 1000u, 30000u}) {
    auto wire = pack_v2(alice, bob.did, "t", Bytes(size, 0x42), *ra).serialize();
    auto o = wire.size() - size;
    if (overhead) EXPECT_EQ(o, *overhead);
    overhead = o;
  }

  Vdr v1vdr;
  auto a = registered_identity(v1vdr);
  auto b = registered_identity(v1vdr);
  auto [ra1, inv] = v1::create_invitation(a);
  auto [rb1, req] = v1::process_invitation(b, inv);
  auto resp = v1::process_request(a, ra1, req);
  v1::process_complete(ra1, v1::process_response(b, rb1, resp));
  auto o1 = v1::pack_v1(a, ra1, Bytes{}).serialize().size();
  EXPECT_GT(*overhead, o1);
}

TEST_F(V2Test, MisdirectedEnvelopeIsMisdelivery) {
  auto carol = registered_identity(*vdr);
  Resolver rc(vdr);
  auto env = pack_v2(alice, bob.did, "t", to_bytes("x"), *ra);
  EXPECT_EQ(code_of([&] { unpack_v2(carol, env, rc); }), Errc::misdelivery);
}

TEST_F(V2Test, UnknownOrForeignRecipientKeyIsUnauthorized) {
  auto env = pack_v2(alice, bob.did, "t", to_bytes("x"), *ra);
  auto nobody = env;
  nobody.recipient_kid = generate_identity("sba", "http://x").agreement_key().key_id;
  EXPECT_EQ(code_of([&] { unpack_v2(bob, nobody, *rb); }), Errc::unauthorized);
  auto other_fragment = env;
  other_fragment.recipient_kid = bob.signing_key().key_id;
  EXPECT_EQ(code_of([&] { unpack_v2(bob, other_fragment, *rb); }), Errc::unauthorized);
}

TEST_F(V2Test, InnerSignatureByWrongKeyIsUnauthorized) {
  auto mallory = registered_identity(*vdr);
  // Mallory signs a message claiming to be from alice, then encrypts as
  // herself: the outer sender and inner signer disagree.
  Jwm jwm{"11111111-1111-4111-8111-111111111111", "t", alice.did, bob.did, 1, to_bytes("x")};
  auto signed_msg = sign_jwm(mallory, jwm);
  auto env = encrypt_signed(mallory, *bob.document.first_of(KeyKind::key_agreement),
                            signed_msg.serialize());
  EXPECT_EQ(code_of([&] { unpack_v2(bob, env, *rb); }), Errc::unauthorized);

  // Properly signed by mallory but claiming alice in "from".
  auto env2 = encrypt_signed(mallory, *bob.document.first_of(KeyKind::key_agreement),
                             sign_jwm(mallory, Jwm{jwm.id, "t", mallory.did, bob.did, 1,
                                                   to_bytes("x")})
                                 .serialize());
  EXPECT_EQ(unpack_v2(bob, env2, *rb).from, mallory.did);
}

TEST_F(V2Test, TamperedSignatureIsUnauthorized) {
  Jwm jwm{"11111111-1111-4111-8111-111111111111", "t", alice.did, bob.did, 1, to_bytes("x")};
  auto s = sign_jwm(alice, jwm);
  s.signature[0] ^= 1;
  auto env = encrypt_signed(alice, *bob.document.first_of(KeyKind::key_agreement), s.serialize());
  EXPECT_EQ(code_of([&] { unpack_v2(bob, env, *rb); }), Errc::unauthorized);
}

TEST_F(V2Test, EveryByteFlipIsRejected) {
  auto wire = pack_v2(alice, bob.did, "t", to_bytes("payload"), *ra).serialize();
  for (std::size_t i = 0; i < wire.size(); i += 3) {
    auto bad = wire;
    bad[i] ^= 0x04;
    auto code = code_of([&] { unpack_v2(bob, EnvelopeV2::parse(bad), *rb); });
    EXPECT_TRUE(code == Errc::integrity || code == Errc::unauthorized)
        << "offset " << i << " -> " << to_string(code);
  }
}

TEST_F(V2Test, RotatedRecipientKeyIsKeyMismatch) {
  Resolver cached(vdr, CachePolicy::with_ttl(std::chrono::seconds(60)));
  cached.resolve(bob.did);  // stale copy of bob's document
  auto rotated = generate_identity("sba", "http://b");
  auto doc = bob.document;
  for (auto& vm : doc.verification_methods) {
    if (vm.kind == KeyKind::key_agreement) vm.public_key = rotated.agreement_key().public_key;
  }
  vdr->update(bob.did, doc, prove_document(bob, doc, 2));
  // bob still holds the old secret, so his current document disagrees.
  auto env = pack_v2(alice, bob.did, "t", to_bytes("x"), *ra);
  EXPECT_EQ(code_of([&] { unpack_v2(bob, env, *rb); }), Errc::key_mismatch);
}

TEST_F(V2Test, UnknownSenderIsUnauthorized) {
  auto ghost = generate_identity("sba", "http://ghost");
  auto env = encrypt_signed(
      ghost, *bob.document.first_of(KeyKind::key_agreement),
      sign_jwm(ghost, Jwm{"11111111-1111-4111-8111-111111111111", "t", ghost.did, bob.did, 1,
                          to_bytes("x")})
          .serialize());
  EXPECT_EQ(code_of([&] { unpack_v2(bob, env, *rb); }), Errc::unauthorized);
}

TEST_F(V2Test, StatelessAcrossFreshResolvers) {
  auto env = pack_v2(alice, bob.did, "t", to_bytes("no session"), *ra).serialize();
  Resolver fresh(vdr);
  EXPECT_EQ(unpack_v2(bob, EnvelopeV2::parse(env), fresh).body, to_bytes("no session"));
}

TEST(JwmTest, CanonicalBytesAreDeterministic) {
  auto a = generate_identity("sba", "x");
  auto b = generate_identity("sba", "y");
  Jwm jwm{"id-1", "type", a.did, b.did, 42, to_bytes("body")};
  EXPECT_EQ(canonical_jwm_bytes(jwm), canonical_jwm_bytes(jwm));
  EXPECT_EQ(parse_jwm(canonical_jwm_bytes(jwm)), jwm);
  auto copy = jwm;
  copy.body.push_back('!');
  EXPECT_NE(canonical_jwm_bytes(copy), canonical_jwm_bytes(jwm));
}

TEST(JwmTest, HeaderGrowsLinearlyWithDidLength) {
  Jwm jwm{"id", "t", Did{"sba", "a"}, Did{"sba", "b"}, 1, {}};
  auto base = canonical_jwm_bytes(jwm).size();
  for (std::size_t extra : {1u, 10u, 100u}) {
    auto longer = jwm;
    longer.from.subject += std::string(extra, 'x');
    EXPECT_EQ(canonical_jwm_bytes(longer).size(), base + extra);
  }
}

TEST(EnvelopeV2Test, CrossProtocolFrameIsFormatError) {
  Bytes v1 = {0xD1, 0xC0, 0x4D, 0x31, 0, 0, 0, 0};
  EXPECT_EQ(code_of([&] { EnvelopeV2::parse(v1); }), Errc::format);
  Bytes junk = {9, 9, 9, 9};
  EXPECT_EQ(code_of([&] { EnvelopeV2::parse(junk); }), Errc::integrity);
}

}  // namespace
}  // namespace didnf::v2
