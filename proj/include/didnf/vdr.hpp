#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "didnf/identity.hpp"

namespace didnf {

struct VdrConfig {
  std::chrono::nanoseconds read_delay{0};
  std::chrono::nanoseconds write_delay{0};
};

struct LedgerEntry {
  Did did;
  DidDocument document;
  std::uint64_t version = 0;
  Key32 owner_key{};
};

struct SchemaRecord {
  std::string schema_id;
  std::vector<std::string> attribute_names;
  Did issuer;

  friend bool operator==(const SchemaRecord&, const SchemaRecord&) = default;
};

struct RevocationRegistry {
  std::string registry_id;
  Did issuer;
  std::set<std::string> revoked;
};

struct DocumentVersion {
  DidDocument document;
  std::uint64_t version = 0;
};

// Messages the registry expects proofs over. Owners sign these; the registry
// recomputes them and checks the signature.
Bytes document_proof_message(const DidDocument& doc, std::uint64_t version);
Bytes schema_proof_message(const SchemaRecord& schema);
Bytes registry_proof_message(std::string_view registry_id, const Did& issuer);
Bytes revocation_proof_message(std::string_view registry_id, std::string_view credential_id);

// Convenience signers used by identities writing to the registry.
Signature prove_document(const Identity& owner, const DidDocument& doc,
                         std::uint64_t version);

// Process-local verifiable data registry. Owner-only mutation, one current
// document per DID, monotone revocation sets. Reads and writes can be slowed
// down to model a remote ledger.
class Vdr {
 public:
  explicit Vdr(VdrConfig config = {});

  Vdr(const Vdr&) = delete;
  Vdr& operator=(const Vdr&) = delete;

  const VdrConfig& config() const { return config_; }

  std::uint64_t register_document(const DidDocument& document, ByteView proof);
  std::uint64_t update(const Did& did, const DidDocument& document, ByteView proof);
  DocumentVersion read_document(const Did& did) const;
  bool contains(const Did& did) const;
  std::size_t size() const;

  void put_schema(const SchemaRecord& schema, ByteView proof);
  SchemaRecord get_schema(const std::string& schema_id) const;

  void create_registry(const std::string& registry_id, const Did& issuer, ByteView proof);
  void revoke(const std::string& registry_id, const std::string& credential_id,
              ByteView proof);
  bool is_revoked(const std::string& registry_id, const std::string& credential_id) const;
  Did registry_issuer(const std::string& registry_id) const;

  // Canonical JSON snapshot of the whole registry.
  Json export_snapshot() const;
  void import_snapshot(const Json& snapshot);  // replaces current contents
  void save_snapshot(const std::filesystem::path& path) const;
  void load_snapshot(const std::filesystem::path& path);

 private:
  struct Slot {
    mutable std::shared_mutex mutex;
    LedgerEntry entry;
  };

  Key32 owner_of(const Did& did) const;
  void write_pause() const;

  VdrConfig config_;
  mutable std::shared_mutex mutex_;  // guards the maps, not the slots
  std::map<std::string, std::shared_ptr<Slot>> documents_;
  std::map<std::string, SchemaRecord> schemas_;
  std::map<std::string, RevocationRegistry> registries_;
};

}  // namespace didnf
