#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "didnf/credentials.hpp"
#include "didnf/didcomm_v1.hpp"
#include "didnf/resolver.hpp"

namespace didnf {

enum class Protocol { v1, v2, tls };

std::string_view to_string(Protocol protocol);
Protocol parse_protocol(std::string_view text);  // throws Error(syntax)

struct AgentConfig {
  std::string nf_name;
  std::string listen_address = "127.0.0.1:0";  // port 0 picks a free port
  Protocol protocol = Protocol::v2;
  CachePolicy cache_policy;
  // read_delay is paid by this agent's resolver on every ledger read;
  // write_delay on every registry write the agent performs.
  VdrConfig vdr_delays;
  std::string internal_address = "127.0.0.1:0";
  // Derive the primary identity deterministically when set.
  std::optional<Bytes> identity_seed;
};

using Clock = std::chrono::steady_clock;

struct PhaseTimestamps {
  Clock::time_point t_submit, t_encap_start, t_encap_end, t_wire_sent, t_wire_received,
      t_decap_start, t_decap_end, t_delivered;

  bool monotone() const;
};

struct DeliveryReceipt {
  std::string message_id;
  Protocol protocol = Protocol::v2;
  Did from;
  Did to;
  std::string message_type;
  PhaseTimestamps phases;

  std::size_t payload_bytes = 0;
  std::size_t wire_bytes = 0;      // envelope (or TLS body) bytes written by the sender
  std::size_t received_bytes = 0;  // bytes the receiver read off the request
  // Connection set-up performed on behalf of this send (v1 exchange, TLS
  // handshake); zero once the connection exists.
  std::size_t handshake_bytes = 0;
  std::chrono::nanoseconds handshake_time{0};

  ResolutionTrace handshake_resolution;
  ResolutionTrace encap_resolution;
  ResolutionTrace decap_resolution;

  std::shared_ptr<const DeliveryReceipt> reply;  // receipt of the handler's reply, if any

  std::chrono::nanoseconds total() const { return phases.t_delivered - phases.t_submit; }
  std::chrono::nanoseconds encapsulation() const {
    return phases.t_encap_end - phases.t_encap_start;
  }
  std::chrono::nanoseconds decapsulation() const {
    return phases.t_decap_end - phases.t_decap_start;
  }
  std::chrono::nanoseconds network_and_other() const {
    return total() - encapsulation() - decapsulation();
  }
};

Json to_json(const DeliveryReceipt& receipt);
DeliveryReceipt receipt_from_json(const Json& j);

struct InboundMessage {
  Did from;
  std::string message_type;
  std::string message_id;
  Bytes body;
};

struct Outgoing {
  std::string message_type;
  Bytes body;
};

// Business-logic hook. A returned message is sent back to the originator
// before the inbound request completes.
using Handler = std::function<std::optional<Outgoing>(const InboundMessage&)>;

struct AgentCounters {
  std::uint64_t delivered = 0;
  std::uint64_t integrity_failures = 0;  // also covers authenticity failures
  std::uint64_t format_errors = 0;
  std::uint64_t rejected_other = 0;
};

enum class WireKind { envelope, exchange, tls_body };

struct WireEvent {
  WireKind kind;
  std::string endpoint;
  std::size_t bytes;
};

struct SessionStats {
  std::size_t handshake_bytes = 0;
  std::chrono::nanoseconds handshake_time{0};
  ResolutionTrace resolution;
};

// Communication agent sitting next to one network function: wallet, v1/v2
// messaging or the TLS baseline, and the external/internal HTTP interfaces.
class Agent {
 public:
  Agent(AgentConfig config, std::shared_ptr<Vdr> vdr);
  ~Agent();

  Agent(const Agent&) = delete;
  Agent& operator=(const Agent&) = delete;

  // Binds both listeners, creates and registers the primary identity with
  // this agent's endpoint. Throws Error(startup) when an address is taken.
  void start();
  void stop();
  bool running() const;

  const AgentConfig& config() const;
  const Identity& identity() const;
  std::string endpoint() const;           // external DIDComm/TLS URL
  std::string internal_endpoint() const;  // base URL of the internal API
  std::uint16_t port() const;
  std::uint16_t internal_port() const;

  void set_handler(Handler handler);

  DeliveryReceipt send(const Did& destination, std::string_view message_type, ByteView body);
  // Establishes the v1 connection / TLS session ahead of time; no-op for v2.
  SessionStats connect(const Did& destination);

  // TLS baseline address book.
  std::string certificate_pem() const;
  void add_tls_peer(const Did& did, const std::string& endpoint, const std::string& cert_pem);

  // Wallet.
  Identity create_identity(std::optional<Bytes> seed = std::nullopt);
  std::vector<DidDocument> list_identities() const;
  void store_credential(const VerifiableCredential& credential);
  std::vector<VerifiableCredential> credentials() const;
  std::vector<v1::ConnectionRecord> connections() const;

  // Instrumentation.
  Resolver& resolver();
  AgentCounters counters() const;
  std::vector<InboundMessage> inbox() const;
  void clear_inbox();
  std::optional<DeliveryReceipt> find_receipt(const std::string& message_id) const;
  void set_wire_observer(std::function<void(const WireEvent&)> observer);
  // Test hook: rewrites outgoing envelopes after they are built.
  void set_wire_mutator(std::function<void(Bytes&)> mutator);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace didnf
