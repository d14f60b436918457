#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "didnf/agent.hpp"
#include "didnf/credentials.hpp"

namespace didnf::scenarios {

enum class NfType { AMF, SMF, NRF, AUSF, UDM };

inline constexpr NfType kAllNfTypes[] = {NfType::AMF, NfType::SMF, NfType::NRF, NfType::AUSF,
                                         NfType::UDM};

std::string_view to_string(NfType type);
NfType parse_nf_type(std::string_view text);  // throws Error(syntax)

inline constexpr std::string_view kRevocationRegistry = "nrf-revocations";
inline constexpr std::string_view kSmfService = "nsmf-pdusession";

struct TopologyOptions {
  CachePolicy cache;
  std::chrono::nanoseconds resolver_delay{0};
  // Seeds NF identities and synthetic payloads; equal seeds give equal bytes.
  std::uint64_t seed = 0;
  // Logical time (unix seconds) used for credential issuance and checks.
  std::function<std::int64_t()> clock;
};

struct NfInstance {
  NfType nf_type;
  Did did;
  Agent* agent;
};

// Five network functions, each with its own agent and DID, sharing one
// registry. The NRF also owns the authorization schema and the revocation
// registry used by the SM-context procedure.
class Topology {
 public:
  Topology(Protocol protocol, TopologyOptions options, std::shared_ptr<Vdr> vdr);
  ~Topology();

  Topology(const Topology&) = delete;
  Topology& operator=(const Topology&) = delete;

  Protocol protocol() const { return protocol_; }
  const TopologyOptions& options() const { return options_; }
  std::shared_ptr<Vdr> vdr() const { return vdr_; }

  Agent& agent(NfType type);
  NfInstance instance(NfType type);
  std::vector<NfInstance> instances();

  std::int64_t now() const;
  std::uint64_t sessions_created() const;
  // Drops receipts, inboxes and resolver counters so a scenario can be rerun
  // on the same topology. Connections and sessions stay.
  void reset_measurements();

  struct State;
  State* state() { return state_.get(); }

 private:
  Protocol protocol_;
  TopologyOptions options_;
  std::shared_ptr<Vdr> vdr_;
  std::vector<std::unique_ptr<Agent>> agents_;
  std::unique_ptr<State> state_;
};

// Starts the five agents on loopback and registers their DIDs. With a null
// registry a fresh one is created. Throws Error(startup) if anything fails.
std::unique_ptr<Topology> build_topology(Protocol protocol, TopologyOptions options = {},
                                         std::shared_ptr<Vdr> vdr = nullptr);

struct ScenarioStep {
  NfType sender;
  NfType receiver;
  std::string message_type;
  std::size_t payload_size = 0;
  bool expects_reply = true;

  friend bool operator==(const ScenarioStep&, const ScenarioStep&) = default;
};

struct ScenarioScript {
  std::string name;
  std::vector<ScenarioStep> steps;

  friend bool operator==(const ScenarioScript&, const ScenarioScript&) = default;
};

// Steps 0–2 AMF↔AUSF, 3–4 AMF↔UDM; mean payload 23,643 bytes.
ScenarioScript default_ue_registration_script();

// File format: {"name": ..., "steps": [{"sender","receiver","message_type",
// "payload_size","expects_reply"}, ...]}; a bare list of steps is accepted.
Json to_json(const ScenarioScript& script);
ScenarioScript script_from_json(const Json& j);  // throws Error(syntax|validation)
ScenarioScript load_script(const std::filesystem::path& path);

struct StepRecord {
  std::size_t index = 0;
  ScenarioStep step;
  DeliveryReceipt request;
  std::optional<DeliveryReceipt> reply;
  std::size_t step_bytes = 0;        // handshake + wire bytes in both directions
  std::size_t cumulative_bytes = 0;  // prefix sum of step_bytes
};

struct AuthorizationRecord {
  VerificationOutcome outcome;
  bool session_created = false;
};

struct ScenarioResult {
  std::string scenario;
  Protocol protocol = Protocol::v2;
  std::vector<StepRecord> steps;
  std::vector<AuthorizationRecord> authorizations;
  // Business payloads in delivery order (requests and replies).
  std::vector<Bytes> delivered;
  bool failed = false;
  std::string failure;

  std::size_t total_bytes() const { return steps.empty() ? 0 : steps.back().cumulative_bytes; }
  std::size_t handshake_bytes() const;
};

// Deterministic synthetic payload for a given seed and position.
Bytes synthetic_payload(std::uint64_t seed, std::size_t index, std::size_t size);

ScenarioResult run_ue_registration(Topology& topology,
                                   const ScenarioScript& script = default_ue_registration_script());

struct SmContextOptions {
  bool revoke_first = false;
  // Send a presentation bound to an earlier nonce instead of the fresh one.
  bool replay_previous = false;
  // Applied to the presentation after it is built and signed.
  std::function<void(VerifiablePresentation&)> tamper;
  std::size_t request_payload = 1024;
};

// AMF asks SMF for a nonce, then requests an SM context with a presentation
// of its NRF-issued credential. SMF creates a session only when the
// presentation verifies.
ScenarioResult run_sm_context(Topology& topology, const SmContextOptions& options = {});

// `count` fixed-size AMF→SMF messages, no replies.
ScenarioResult repeat_messages(Topology& topology, std::size_t count,
                               std::size_t payload_size = 23'643);

}  // namespace didnf::scenarios
