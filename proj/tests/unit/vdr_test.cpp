#include "didnf/vdr.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <random>
#include <thread>

#include "helpers.hpp"

namespace didnf {
namespace {

using testing::code_of;
using testing::registered_identity;

TEST(VdrRegisterTest, FirstWriteIsVersionOne) {
  Vdr vdr;
  auto id = generate_identity("sba", "http://a/didcomm");
  EXPECT_EQ(vdr.register_document(id.document, prove_document(id, id.document, 1)), 1u);
  auto [doc, version] = vdr.read_document(id.did);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(doc.endpoint(), "http://a/didcomm");
}

TEST(VdrRegisterTest, DuplicateIsRejected) {
  Vdr vdr;
  auto id = registered_identity(vdr);
  EXPECT_EQ(code_of([&] {
              vdr.register_document(id.document, prove_document(id, id.document, 1));
            }),
            Errc::already_exists);
}

TEST(VdrRegisterTest, ProofFromUnrelatedKeyIsUnauthorized) {
  Vdr vdr;
  auto id = generate_identity("sba", "http://a");
  auto other = generate_identity("sba", "http://b");
  EXPECT_EQ(code_of([&] {
              vdr.register_document(id.document, prove_document(other, id.document, 1));
            }),
            Errc::unauthorized);
}

TEST(VdrRegisterTest, DocumentWithoutAgreementKeyIsInvalid) {
  Vdr vdr;
  auto id = generate_identity("sba", "http://a");
  id.document.verification_methods.pop_back();
  EXPECT_EQ(code_of([&] {
              vdr.register_document(id.document, prove_document(id, id.document, 1));
            }),
            Errc::validation);
}

TEST(VdrUpdateTest, OwnerUpdateIncrementsVersion) {
  Vdr vdr;
  auto id = registered_identity(vdr);
  auto doc = id.document;
  doc.service_endpoints[0].uri = "http://moved/didcomm";
  EXPECT_EQ(vdr.update(id.did, doc, prove_document(id, doc, 2)), 2u);
  auto [current, version] = vdr.read_document(id.did);
  EXPECT_EQ(version, 2u);
  EXPECT_EQ(current.endpoint(), "http://moved/didcomm");
}

TEST(VdrUpdateTest, UpdateSignedByAnotherIdentityIsUnauthorized) {
  Vdr vdr;
  auto id = registered_identity(vdr);
  auto intruder = registered_identity(vdr);
  auto doc = id.document;
  doc.service_endpoints[0].uri = "http://evil/didcomm";
  EXPECT_EQ(code_of([&] { vdr.update(id.did, doc, prove_document(intruder, doc, 2)); }),
            Errc::unauthorized);
  EXPECT_EQ(vdr.read_document(id.did).version, 1u);
}

TEST(VdrUpdateTest, ReplayedOwnerProofIsRejected) {
  Vdr vdr;
  auto id = registered_identity(vdr);
  auto doc = id.document;
  doc.service_endpoints[0].uri = "http://v2/didcomm";
  auto proof = prove_document(id, doc, 2);
  vdr.update(id.did, doc, proof);
  EXPECT_EQ(code_of([&] { vdr.update(id.did, doc, proof); }), Errc::unauthorized);
}

TEST(VdrUpdateTest, UnknownDidIsNotFound) {
  Vdr vdr;
  auto id = generate_identity("sba", "http://a");
  EXPECT_EQ(code_of([&] { vdr.update(id.did, id.document, prove_document(id, id.document, 2)); }),
            Errc::not_found);
  EXPECT_EQ(code_of([&] { vdr.read_document(id.did); }), Errc::not_found);
}

// Replays a random register/update log against a plain map and checks the
// registry agrees after every step.
TEST(VdrUpdateTest, MatchesSequentialReplayOracle) {
  Vdr vdr;
  std::mt19937 rng(3);
  std::vector<Identity> ids;
  std::map<std::string, std::pair<std::string, std::uint64_t>> model;  // did -> (endpoint, version)
  for (int step = 0; step < 300; ++step) {
    if (ids.empty() || rng() % 4 == 0) {
      ids.push_back(registered_identity(vdr, "http://e" + std::to_string(step)));
      model[ids.back().did.str()] = {"http://e" + std::to_string(step), 1};
    } else {
      auto& id = ids[rng() % ids.size()];
      auto& [endpoint, version] = model[id.did.str()];
      auto doc = id.document;
      doc.service_endpoints[0].uri = "http://u" + std::to_string(step);
      vdr.update(id.did, doc, prove_document(id, doc, version + 1));
      endpoint = doc.service_endpoints[0].uri;
      ++version;
    }
    for (const auto& id : ids) {
      auto [doc, version] = vdr.read_document(id.did);
      EXPECT_EQ(doc.endpoint(), model[id.did.str()].first);
      EXPECT_EQ(version, model[id.did.str()].second);
      EXPECT_EQ(doc.version, version);
    }
  }
}

TEST(VdrOwnershipTest, NonOwnersNeverChangeDocuments) {
  Vdr vdr;
  std::mt19937 rng(17);
  std::vector<Identity> ids;
  for (int i = 0; i < 6; ++i) ids.push_back(registered_identity(vdr));
  std::vector<std::uint64_t> versions(ids.size(), 1);
  for (int round = 0; round < 300; ++round) {
    auto target = rng() % ids.size();
    auto signer = rng() % ids.size();
    auto doc = ids[target].document;
    doc.service_endpoints[0].uri = "http://r" + std::to_string(round);
    auto proof = prove_document(ids[signer], doc, versions[target] + 1);
    if (signer == target) {
      EXPECT_EQ(vdr.update(ids[target].did, doc, proof), ++versions[target]);
    } else {
      auto before = vdr.read_document(ids[target].did);
      EXPECT_EQ(code_of([&] { vdr.update(ids[target].did, doc, proof); }), Errc::unauthorized);
      auto after = vdr.read_document(ids[target].did);
      EXPECT_EQ(before.document, after.document);
      EXPECT_EQ(before.version, after.version);
    }
  }
}

TEST(VdrConcurrencyTest, ReadsNeverGoBackwards) {
  Vdr vdr;
  auto id = registered_identity(vdr);
  std::atomic<bool> stop{false};
  std::atomic<int> regressions{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r) {
    readers.emplace_back([&] {
      std::uint64_t last = 0;
      while (!stop) {
        auto v = vdr.read_document(id.did).version;
        if (v < last) ++regressions;
        last = v;
      }
    });
  }
  for (std::uint64_t v = 2; v <= 200; ++v) {
    auto doc = id.document;
    doc.service_endpoints[0].uri = "http://c" + std::to_string(v);
    vdr.update(id.did, doc, prove_document(id, doc, v));
  }
  stop = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(regressions.load(), 0);
  EXPECT_EQ(vdr.read_document(id.did).version, 200u);
}

TEST(VdrDelayTest, ReadDelayIsApplied) {
  auto vdr = std::make_shared<Vdr>(VdrConfig{std::chrono::milliseconds(14), {}});
  auto id = registered_identity(*vdr);
  auto start = std::chrono::steady_clock::now();
  vdr->read_document(id.did);
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(14));
}

TEST(VdrDelayTest, NegativeDelayIsInvalid) {
  EXPECT_EQ(code_of([] { Vdr v(VdrConfig{std::chrono::milliseconds(-1), {}}); }),
            Errc::validation);
}

TEST(VdrSchemaTest, PutThenGetRoundTrips) {
  Vdr vdr;
  auto nrf = registered_identity(vdr);
  SchemaRecord s{"nf-auth", {"nf_type", "allowed_service", "expiry"}, nrf.did};
  vdr.put_schema(s, sign(nrf.signing_key(), schema_proof_message(s)));
  EXPECT_EQ(vdr.get_schema("nf-auth"), s);
  EXPECT_EQ(code_of([&] { vdr.put_schema(s, sign(nrf.signing_key(), schema_proof_message(s))); }),
            Errc::already_exists);
  EXPECT_EQ(code_of([&] { vdr.get_schema("missing"); }), Errc::not_found);
}

TEST(VdrSchemaTest, RejectsEmptyOrDuplicateAttributes) {
  Vdr vdr;
  auto nrf = registered_identity(vdr);
  SchemaRecord empty{"e", {}, nrf.did};
  EXPECT_EQ(code_of([&] { vdr.put_schema(empty, sign(nrf.signing_key(), schema_proof_message(empty))); }),
            Errc::validation);
  SchemaRecord dup{"d", {"a", "a"}, nrf.did};
  EXPECT_EQ(code_of([&] { vdr.put_schema(dup, sign(nrf.signing_key(), schema_proof_message(dup))); }),
            Errc::validation);
}

TEST(VdrRevocationTest, MonotoneAndIssuerOnly) {
  Vdr vdr;
  auto nrf = registered_identity(vdr);
  auto amf = registered_identity(vdr);
  vdr.create_registry("reg", nrf.did, sign(nrf.signing_key(), registry_proof_message("reg", nrf.did)));
  EXPECT_FALSE(vdr.is_revoked("reg", "c1"));

  EXPECT_EQ(code_of([&] {
              vdr.revoke("reg", "c1", sign(amf.signing_key(), revocation_proof_message("reg", "c1")));
            }),
            Errc::unauthorized);
  EXPECT_FALSE(vdr.is_revoked("reg", "c1"));

  vdr.revoke("reg", "c1", sign(nrf.signing_key(), revocation_proof_message("reg", "c1")));
  EXPECT_TRUE(vdr.is_revoked("reg", "c1"));
  vdr.revoke("reg", "c1", sign(nrf.signing_key(), revocation_proof_message("reg", "c1")));
  EXPECT_TRUE(vdr.is_revoked("reg", "c1"));
  EXPECT_FALSE(vdr.is_revoked("reg", "c2"));

  EXPECT_EQ(code_of([&] { vdr.is_revoked("nope", "c1"); }), Errc::not_found);
  EXPECT_EQ(code_of([&] {
              vdr.revoke("nope", "c1", sign(nrf.signing_key(), revocation_proof_message("nope", "c1")));
            }),
            Errc::not_found);
}

TEST(VdrSnapshotTest, ExportImportPreservesContents) {
  Vdr vdr;
  auto nrf = registered_identity(vdr);
  auto doc = nrf.document;
  doc.service_endpoints[0].uri = "http://x/didcomm";
  vdr.update(nrf.did, doc, prove_document(nrf, doc, 2));
  SchemaRecord s{"nf-auth", {"nf_type"}, nrf.did};
  vdr.put_schema(s, sign(nrf.signing_key(), schema_proof_message(s)));
  vdr.create_registry("reg", nrf.did, sign(nrf.signing_key(), registry_proof_message("reg", nrf.did)));
  vdr.revoke("reg", "c9", sign(nrf.signing_key(), revocation_proof_message("reg", "c9")));

  auto path = std::filesystem::temp_directory_path() / "didnf_vdr_snapshot_test.json";
  vdr.save_snapshot(path);
  Vdr copy;
  copy.load_snapshot(path);
  std::filesystem::remove(path);

  EXPECT_EQ(copy.export_snapshot(), vdr.export_snapshot());
  EXPECT_EQ(copy.read_document(nrf.did).version, 2u);
  EXPECT_TRUE(copy.is_revoked("reg", "c9"));
  // Ownership survives the round trip.
  auto doc3 = doc;
  doc3.service_endpoints[0].uri = "http://y/didcomm";
  EXPECT_EQ(copy.update(nrf.did, doc3, prove_document(nrf, doc3, 3)), 3u);
}

TEST(VdrSnapshotTest, UnreadablePathIsIoError) {
  Vdr vdr;
  EXPECT_EQ(code_of([&] { vdr.load_snapshot("/nonexistent/dir/snap.json"); }), Errc::io);
  EXPECT_EQ(code_of([&] { vdr.save_snapshot("/nonexistent/dir/snap.json"); }), Errc::io);
}

}  // namespace
}  // namespace didnf
