#include "didnf/vdr.hpp"

#include <fstream>
#include <thread>

#include "didnf/error.hpp"

namespace didnf {

Bytes document_proof_message(const DidDocument& doc, std::uint64_t version) {
  auto copy = doc;
  copy.version = version;
  return canonical_bytes(copy);
}

Bytes schema_proof_message(const SchemaRecord& schema) {
  Json j{{"attribute_names", schema.attribute_names},
         {"issuer", schema.issuer.str()},
         {"schema_id", schema.schema_id}};
  return to_bytes(j.dump());
}

Bytes registry_proof_message(std::string_view registry_id, const Did& issuer) {
  Json j{{"create_registry", registry_id}, {"issuer", issuer.str()}};
  return to_bytes(j.dump());
}

Bytes revocation_proof_message(std::string_view registry_id,
                               std::string_view credential_id) {
  Json j{{"credential_id", credential_id}, {"revoke", registry_id}};
  return to_bytes(j.dump());
}

Signature prove_document(const Identity& owner, const DidDocument& doc,
                         std::uint64_t version) {
  return sign(owner.signing_key(), document_proof_message(doc, version));
}

namespace {

void validate_document(const DidDocument& doc) {
  if (!doc.first_of(KeyKind::signing) || !doc.first_of(KeyKind::key_agreement)) {
    throw Error(Errc::validation,
                "document needs one signing and one key-agreement key");
  }
  std::set<std::string> ids;
  for (const auto& vm : doc.verification_methods) {
    if (!ids.insert(vm.key_id).second) {
      throw Error(Errc::validation, "duplicate key id " + vm.key_id);
    }
  }
}

}  // namespace

Vdr::Vdr(VdrConfig config) : config_(config) {
  if (config_.read_delay.count() < 0 || config_.write_delay.count() < 0) {
    throw Error(Errc::validation, "registry delays must be non-negative");
  }
}

void Vdr::write_pause() const {
  if (config_.write_delay.count() > 0) std::this_thread::sleep_for(config_.write_delay);
}

std::uint64_t Vdr::register_document(const DidDocument& document, ByteView proof) {
  validate_document(document);
  const auto* signing = document.first_of(KeyKind::signing);
  if (document.id.subject != derive_subject(signing->public_key)) {
    throw Error(Errc::unauthorized, "DID subject is not derived from the signing key");
  }
  if (!verify(signing->public_key, document_proof_message(document, 1), proof)) {
    throw Error(Errc::unauthorized, "registration proof does not verify");
  }
  write_pause();

  auto slot = std::make_shared<Slot>();
  slot->entry = LedgerEntry{document.id, document, 1, signing->public_key};
  slot->entry.document.version = 1;

  std::unique_lock lock(mutex_);
  auto [it, inserted] = documents_.try_emplace(document.id.str(), std::move(slot));
  if (!inserted) throw Error(Errc::already_exists, document.id.str());
  return 1;
}

std::uint64_t Vdr::update(const Did& did, const DidDocument& document, ByteView proof) {
  if (document.id != did) throw Error(Errc::validation, "document id does not match DID");
  validate_document(document);

  std::shared_ptr<Slot> slot;
  {
    std::shared_lock lock(mutex_);
    auto it = documents_.find(did.str());
    if (it == documents_.end()) throw Error(Errc::not_found, did.str());
    slot = it->second;
  }
  write_pause();

  std::unique_lock slot_lock(slot->mutex);
  const auto next = slot->entry.version + 1;
  if (!verify(slot->entry.owner_key, document_proof_message(document, next), proof)) {
    throw Error(Errc::unauthorized, "update not signed by the owner key");
  }
  slot->entry.document = document;
  slot->entry.document.version = next;
  slot->entry.version = next;
  return next;
}

DocumentVersion Vdr::read_document(const Did& did) const {
  if (config_.read_delay.count() > 0) std::this_thread::sleep_for(config_.read_delay);
  std::shared_ptr<Slot> slot;
  {
    std::shared_lock lock(mutex_);
    auto it = documents_.find(did.str());
    if (it == documents_.end()) throw Error(Errc::not_found, did.str());
    slot = it->second;
  }
  std::shared_lock slot_lock(slot->mutex);
  return {slot->entry.document, slot->entry.version};
}

bool Vdr::contains(const Did& did) const {
  std::shared_lock lock(mutex_);
  return documents_.contains(did.str());
}

std::size_t Vdr::size() const {
  std::shared_lock lock(mutex_);
  return documents_.size();
}

Key32 Vdr::owner_of(const Did& did) const {
  auto it = documents_.find(did.str());
  if (it == documents_.end()) throw Error(Errc::not_found, did.str());
  std::shared_lock slot_lock(it->second->mutex);
  return it->second->entry.owner_key;
}

void Vdr::put_schema(const SchemaRecord& schema, ByteView proof) {
  if (schema.attribute_names.empty()) {
    throw Error(Errc::validation, "schema needs at least one attribute");
  }
  std::set<std::string> unique(schema.attribute_names.begin(),
                               schema.attribute_names.end());
  if (unique.size() != schema.attribute_names.size()) {
    throw Error(Errc::validation, "schema attribute names must be unique");
  }
  write_pause();
  std::unique_lock lock(mutex_);
  if (!verify(owner_of(schema.issuer), schema_proof_message(schema), proof)) {
    throw Error(Errc::unauthorized, "schema not signed by its issuer");
  }
  if (!schemas_.try_emplace(schema.schema_id, schema).second) {
    throw Error(Errc::already_exists, "schema " + schema.schema_id);
  }
}

SchemaRecord Vdr::get_schema(const std::string& schema_id) const {
  std::shared_lock lock(mutex_);
  auto it = schemas_.find(schema_id);
  if (it == schemas_.end()) throw Error(Errc::not_found, "schema " + schema_id);
  return it->second;
}

void Vdr::create_registry(const std::string& registry_id, const Did& issuer,
                          ByteView proof) {
  write_pause();
  std::unique_lock lock(mutex_);
  if (!verify(owner_of(issuer), registry_proof_message(registry_id, issuer), proof)) {
    throw Error(Errc::unauthorized, "registry creation not signed by issuer");
  }
  if (!registries_.try_emplace(registry_id, RevocationRegistry{registry_id, issuer, {}})
           .second) {
    throw Error(Errc::already_exists, "registry " + registry_id);
  }
}

void Vdr::revoke(const std::string& registry_id, const std::string& credential_id,
                 ByteView proof) {
  write_pause();
  std::unique_lock lock(mutex_);
  auto it = registries_.find(registry_id);
  if (it == registries_.end()) throw Error(Errc::not_found, "registry " + registry_id);
  if (!verify(owner_of(it->second.issuer),
              revocation_proof_message(registry_id, credential_id), proof)) {
    throw Error(Errc::unauthorized, "revocation not signed by registry issuer");
  }
  it->second.revoked.insert(credential_id);
}

bool Vdr::is_revoked(const std::string& registry_id,
                     const std::string& credential_id) const {
  std::shared_lock lock(mutex_);
  auto it = registries_.find(registry_id);
  if (it == registries_.end()) throw Error(Errc::not_found, "registry " + registry_id);
  return it->second.revoked.contains(credential_id);
}

Did Vdr::registry_issuer(const std::string& registry_id) const {
  std::shared_lock lock(mutex_);
  auto it = registries_.find(registry_id);
  if (it == registries_.end()) throw Error(Errc::not_found, "registry " + registry_id);
  return it->second.issuer;
}

Json Vdr::export_snapshot() const {
  std::shared_lock lock(mutex_);
  Json docs = Json::object();
  for (const auto& [did, slot] : documents_) {
    std::shared_lock slot_lock(slot->mutex);
    docs[did] = {{"document", to_json(slot->entry.document)},
                 {"owner_key", encode_multikey(KeyKind::signing, slot->entry.owner_key)},
                 {"version", slot->entry.version}};
  }
  Json schemas = Json::object();
  for (const auto& [id, s] : schemas_) {
    schemas[id] = {{"attribute_names", s.attribute_names}, {"issuer", s.issuer.str()}};
  }
  Json registries = Json::object();
  for (const auto& [id, r] : registries_) {
    registries[id] = {{"issuer", r.issuer.str()}, {"revoked", r.revoked}};
  }
  return {{"documents", std::move(docs)},
          {"format", "didnf-vdr-snapshot/1"},
          {"registries", std::move(registries)},
          {"schemas", std::move(schemas)}};
}

void Vdr::import_snapshot(const Json& snapshot) {
  decltype(documents_) docs;
  decltype(schemas_) schemas;
  decltype(registries_) registries;
  try {
    if (snapshot.at("format") != "didnf-vdr-snapshot/1") {
      throw Error(Errc::syntax, "unsupported snapshot format");
    }
    for (const auto& [did, e] : snapshot.at("documents").items()) {
      auto slot = std::make_shared<Slot>();
      slot->entry.document = document_from_json(e.at("document"));
      slot->entry.did = slot->entry.document.id;
      slot->entry.version = e.at("version").get<std::uint64_t>();
      slot->entry.owner_key = decode_multikey(e.at("owner_key").get<std::string>()).second;
      if (slot->entry.did.str() != did) throw Error(Errc::syntax, "snapshot key mismatch");
      docs.emplace(did, std::move(slot));
    }
    for (const auto& [id, s] : snapshot.at("schemas").items()) {
      schemas.emplace(id, SchemaRecord{id, s.at("attribute_names").get<std::vector<std::string>>(),
                                       Did::parse(s.at("issuer").get<std::string>())});
    }
    for (const auto& [id, r] : snapshot.at("registries").items()) {
      registries.emplace(id, RevocationRegistry{id, Did::parse(r.at("issuer").get<std::string>()),
                                                r.at("revoked").get<std::set<std::string>>()});
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("malformed snapshot: ") + e.what());
  }
  std::unique_lock lock(mutex_);
  documents_ = std::move(docs);
  schemas_ = std::move(schemas);
  registries_ = std::move(registries);
}

void Vdr::save_snapshot(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << export_snapshot().dump(1) << '\n';
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

void Vdr::load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("snapshot is not JSON: ") + e.what());
  }
  import_snapshot(j);
}

}  // namespace didnf
