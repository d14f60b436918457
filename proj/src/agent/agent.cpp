#include "didnf/agent.hpp"

#include <httplib.h>
#include <sys/socket.h>

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "didnf/didcomm_v2.hpp"
#include "didnf/error.hpp"
#include "didnf/wire.hpp"
#include "tls.hpp"

namespace didnf {

std::string_view to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::v1: return "v1";
    case Protocol::v2: return "v2";
    case Protocol::tls: return "tls";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "v1") return Protocol::v1;
  if (text == "v2") return Protocol::v2;
  if (text == "tls") return Protocol::tls;
  throw Error(Errc::syntax, "protocol must be v1, v2 or tls, got '" + std::string(text) + "'");
}

bool PhaseTimestamps::monotone() const {
  const std::array<Clock::time_point, 8> order{t_submit,        t_encap_start, t_encap_end,
                                               t_wire_sent,     t_wire_received,
                                               t_decap_start,   t_decap_end,   t_delivered};
  return std::is_sorted(order.begin(), order.end());
}

namespace {

using namespace std::chrono_literals;

constexpr const char* kEnvelopePath = "/didcomm";
constexpr const char* kOctets = "application/octet-stream";
constexpr const char* kJson = "application/json";
constexpr const char* kSenderHint = "X-DIDComm-Sender";

std::int64_t ns_of(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t.time_since_epoch()).count();
}
Clock::time_point tp_of(std::int64_t ns) {
  return Clock::time_point(std::chrono::duration_cast<Clock::duration>(std::chrono::nanoseconds(ns)));
}

Json trace_json(const ResolutionTrace& t) {
  return {{"calls", t.calls}, {"ledger_reads", t.ledger_reads}, {"time_ns", t.time.count()}};
}
ResolutionTrace trace_from(const Json& j) {
  ResolutionTrace t;
  t.calls = j.at("calls").get<std::uint32_t>();
  t.ledger_reads = j.at("ledger_reads").get<std::uint32_t>();
  t.time = std::chrono::nanoseconds(j.at("time_ns").get<std::int64_t>());
  return t;
}

struct HostPort {
  std::string host;
  int port = 0;
};

HostPort split_address(std::string_view address) {
  auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(Errc::validation, "address must be host:port, got '" + std::string(address) + "'");
  }
  HostPort hp{std::string(address.substr(0, colon)), 0};
  auto port = address.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), hp.port);
  if (ec != std::errc{} || ptr != port.data() + port.size() || hp.port < 0 || hp.port > 65535) {
    throw Error(Errc::validation, "bad port in '" + std::string(address) + "'");
  }
  return hp;
}

struct Url {
  bool secure = false;
  HostPort where;
  std::string path;
};

Url parse_url(std::string_view url) {
  Url out;
  std::string_view rest;
  if (url.starts_with("http://")) {
    rest = url.substr(7);
  } else if (url.starts_with("https://")) {
    out.secure = true;
    rest = url.substr(8);
  } else {
    throw Error(Errc::validation, "unsupported endpoint '" + std::string(url) + "'");
  }
  auto slash = rest.find('/');
  out.where = split_address(rest.substr(0, slash));
  out.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
  return out;
}

int status_for(Errc code) {
  switch (code) {
    case Errc::syntax:
    case Errc::validation:
    case Errc::format: return 400;
    case Errc::unauthorized: return 401;
    case Errc::key_mismatch: return 403;
    case Errc::not_found: return 404;
    case Errc::already_exists:
    case Errc::protocol_state: return 409;
    case Errc::misdelivery: return 421;
    case Errc::integrity: return 422;
    case Errc::startup:
    case Errc::delivery:
    case Errc::io: return 502;
  }
  return 500;
}

void reply_error(httplib::Response& res, const Error& e) {
  res.status = status_for(e.code());
  res.set_content(Json{{"error", to_string(e.code())}, {"message", e.what()}}.dump(), kJson);
}

// Raises the error a peer reported in a non-success response.
[[noreturn]] void raise_remote(const std::string& endpoint, int status, const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_object() && j.contains("error")) {
    auto code = errc_from_string(j.value("error", "")).value_or(Errc::delivery);
    throw Error(code, "rejected by " + endpoint + ": " + j.value("message", ""));
  }
  throw Error(Errc::delivery, "peer " + endpoint + " answered HTTP " + std::to_string(status));
}

std::string as_string(ByteView b) { return std::string(b.begin(), b.end()); }
ByteView view_of(const std::string& s) { return as_bytes(s); }

bool same_keys(const DidDocument& a, const DidDocument& b) {
  return a.id == b.id && a.verification_methods == b.verification_methods;
}

// Per-sender FIFO lanes: a ticket is drawn on arrival and delivery waits for
// its turn, so one sender's messages reach the handler in arrival order.
class Lanes {
 public:
  class Turn {
   public:
    Turn(Lanes& lanes, std::string key) : lanes_(lanes), key_(std::move(key)) {
      std::unique_lock lock(lanes_.mutex_);
      auto& lane = lanes_.lanes_[key_];
      const auto ticket = lane.next++;
      lanes_.cv_.wait(lock, [&] { return lanes_.lanes_[key_].serving == ticket; });
    }
    ~Turn() {
      std::lock_guard lock(lanes_.mutex_);
      ++lanes_.lanes_[key_].serving;
      lanes_.cv_.notify_all();
    }
    Turn(const Turn&) = delete;
    Turn& operator=(const Turn&) = delete;

   private:
    Lanes& lanes_;
    std::string key_;
  };

 private:
  struct Lane {
    std::uint64_t next = 0;
    std::uint64_t serving = 0;
  };
  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::string, Lane> lanes_;
};

void configure_server(httplib::Server& server) {
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server.set_tcp_nodelay(true);
  server.set_keep_alive_max_count(1'000'000);
  server.set_keep_alive_timeout(30);
  server.set_read_timeout(60, 0);
  server.set_write_timeout(60, 0);
  server.set_payload_max_length(64u << 20);
  server.new_task_queue = [] { return new httplib::ThreadPool(32); };
}

void configure_client(httplib::ClientImpl& client) {
  client.set_keep_alive(true);
  client.set_tcp_nodelay(true);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(60, 0);
  client.set_write_timeout(60, 0);
}

}  // namespace

struct Agent::Impl {
  // Agents living in this process. A stopping agent asks the others to drop
  // their pooled connections to it; otherwise its server would wait for idle
  // keep-alive connections to time out.
  static inline std::mutex live_mutex;
  static inline std::set<Impl*> live_agents;

  struct ClientSlot {
    std::mutex mutex;  // one request in flight per destination
    std::unique_ptr<httplib::ClientImpl> client;
    std::atomic<std::uint64_t> handshake_bytes{0};
    bool tls_established = false;
  };

  struct Peer {
    std::string endpoint;
    std::string certificate_pem;
    crypto::Digest fingerprint;
  };

  AgentConfig config;
  std::shared_ptr<Vdr> vdr;
  Resolver resolver;

  mutable std::mutex wallet_mutex;
  std::deque<Identity> identities;  // front is the primary identity
  std::map<std::string, v1::ConnectionRecord> connections;
  std::vector<VerifiableCredential> credentials;

  std::unique_ptr<httplib::Server> external;
  std::unique_ptr<httplib::Server> internal;
  std::thread external_thread;
  std::thread internal_thread;
  int port = 0;
  int internal_port = 0;
  std::atomic<bool> running{false};

  std::optional<tls::Credentials> tls_credentials;
  X509_STORE* server_trust = nullptr;  // owned by the server context
  mutable std::mutex peers_mutex;
  std::map<std::string, Peer> peers;

  std::mutex clients_mutex;
  std::map<std::string, std::unique_ptr<ClientSlot>> clients;

  Lanes lanes;

  mutable std::mutex hooks_mutex;
  Handler handler;
  std::function<void(const WireEvent&)> observer;
  std::function<void(Bytes&)> mutator;

  mutable std::mutex stats_mutex;
  AgentCounters counters;
  std::vector<InboundMessage> inbox;
  std::map<std::string, DeliveryReceipt> receipts;

  Impl(AgentConfig c, std::shared_ptr<Vdr> v)
      : config(std::move(c)),
        vdr(std::move(v)),
        resolver(vdr, config.cache_policy, config.vdr_delays.read_delay) {
    if (config.nf_name.empty()) throw Error(Errc::validation, "agent needs an nf_name");
    if (config.vdr_delays.write_delay.count() < 0 || config.vdr_delays.read_delay.count() < 0) {
      throw Error(Errc::validation, "registry delays must be non-negative");
    }
  }

  const Identity& me() const { return identities.front(); }

  std::string scheme() const { return config.protocol == Protocol::tls ? "https" : "http"; }

  std::string endpoint() const {
    return scheme() + "://" + split_address(config.listen_address).host + ":" +
           std::to_string(port) + kEnvelopePath;
  }

  // ---- lifecycle -------------------------------------------------------

  void start() {
    if (running) throw Error(Errc::startup, config.nf_name + " is already running");
    const auto ext = split_address(config.listen_address);
    const auto intl = split_address(config.internal_address);

    if (config.protocol == Protocol::tls) {
      if (!tls_credentials) tls_credentials = tls::generate_self_signed(config.nf_name);
      external = std::make_unique<httplib::SSLServer>([this](SSL_CTX& ctx) {
        SSL_CTX_set_min_proto_version(&ctx, TLS1_2_VERSION);
        if (SSL_CTX_use_certificate(&ctx, tls_credentials->certificate.get()) != 1 ||
            SSL_CTX_use_PrivateKey(&ctx, tls_credentials->private_key.get()) != 1) {
          return false;
        }
        server_trust = X509_STORE_new();
        SSL_CTX_set_cert_store(&ctx, server_trust);
        std::lock_guard lock(peers_mutex);
        for (const auto& [did, peer] : peers) {
          X509_STORE_add_cert(server_trust, tls::parse_pem(peer.certificate_pem).get());
        }
        SSL_CTX_set_verify(&ctx, SSL_VERIFY_PEER | SSL_VERIFY_FAIL_IF_NO_PEER_CERT, nullptr);
        return true;
      });
    } else {
      external = std::make_unique<httplib::Server>();
    }
    if (!external->is_valid()) throw Error(Errc::startup, "could not set up the external listener");
    internal = std::make_unique<httplib::Server>();
    configure_server(*external);
    configure_server(*internal);
    external_routes();
    internal_routes();

    port = bind(*external, ext, "external");
    try {
      internal_port = bind(*internal, intl, "internal");
      ensure_identity();
    } catch (...) {
      external.reset();
      internal.reset();
      throw;
    }

    external_thread = std::thread([this] { external->listen_after_bind(); });
    internal_thread = std::thread([this] { internal->listen_after_bind(); });
    for (int i = 0; i < 2000 && !(external->is_running() && internal->is_running()); ++i) {
      std::this_thread::sleep_for(1ms);
    }
    running = true;
    std::lock_guard lock(live_mutex);
    live_agents.insert(this);
  }

  void drop_connections_to(const std::string& key) {
    std::lock_guard lock(clients_mutex);
    auto it = clients.find(key);
    if (it == clients.end()) return;
    it->second->client->stop();
  }

  static int bind(httplib::Server& server, const HostPort& where, const char* which) {
    if (where.port == 0) {
      int p = server.bind_to_any_port(where.host);
      if (p <= 0) throw Error(Errc::startup, std::string("cannot bind ") + which + " listener");
      return p;
    }
    if (!server.bind_to_port(where.host, where.port)) {
      throw Error(Errc::startup, std::string(which) + " address " + where.host + ":" +
                                     std::to_string(where.port) + " is in use");
    }
    return where.port;
  }

  void stop() {
    if (!external) return;
    {
      std::lock_guard lock(live_mutex);
      live_agents.erase(this);
      const auto key = split_address(config.listen_address).host + ":" + std::to_string(port);
      for (auto* other : live_agents) other->drop_connections_to(key);
    }
    external->stop();
    internal->stop();
    if (external_thread.joinable()) external_thread.join();
    if (internal_thread.joinable()) internal_thread.join();
    {
      std::lock_guard lock(clients_mutex);
      clients.clear();
    }
    external.reset();
    internal.reset();
    server_trust = nullptr;
    running = false;
  }

  void registry_write_pause() const {
    if (config.vdr_delays.write_delay.count() > 0) {
      std::this_thread::sleep_for(config.vdr_delays.write_delay);
    }
  }

  // Creates the primary identity on first start; after a restart on a new
  // port the owner updates its document's endpoint instead.
  void ensure_identity() {
    std::lock_guard lock(wallet_mutex);
    const auto url = endpoint();
    if (identities.empty()) {
      auto id = config.identity_seed
                    ? generate_identity(kDefaultMethod, url, crypto::sha256(*config.identity_seed))
                    : generate_identity(kDefaultMethod, url);
      registry_write_pause();
      try {
        vdr->register_document(id.document, prove_document(id, id.document, 1));
      } catch (const Error& e) {
        throw Error(Errc::startup, "registering " + config.nf_name + ": " + e.what());
      }
      id.document.version = 1;
      identities.push_back(std::move(id));
      return;
    }
    auto& id = identities.front();
    if (id.document.endpoint() == url) return;
    auto current = vdr->read_document(id.did);
    auto doc = current.document;
    for (auto& s : doc.service_endpoints) s.uri = url;
    registry_write_pause();
    doc.version = vdr->update(id.did, doc, prove_document(id, doc, current.version + 1));
    id.document = doc;
  }

  // ---- routes ----------------------------------------------------------

  Json health() const {
    std::lock_guard lock(wallet_mutex);
    Json j{{"nf_name", config.nf_name}, {"protocol", to_string(config.protocol)}};
    if (!identities.empty()) j["did"] = me().did.str();
    return j;
  }

  void external_routes() {
    external->Post(kEnvelopePath, [this](const httplib::Request& req, httplib::Response& res) {
      handle_inbound(req, res);
    });
    external->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(health().dump(), kJson);
    });
  }

  template <typename Fn>
  void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      reply_error(res, e);
    } catch (const Json::exception& e) {
      reply_error(res, Error(Errc::syntax, e.what()));
    }
  }

  void internal_routes() {
    internal->Get("/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(health().dump(), kJson);
    });
    internal->Post("/internal/send", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        Json j = Json::parse(req.body);
        auto body = base64_decode(j.at("body").get<std::string>());
        auto receipt = send(Did::parse(j.at("destination").get<std::string>()),
                            j.at("type").get<std::string>(), body);
        res.set_content(to_json(receipt).dump(), kJson);
      });
    });
    internal->Get("/internal/wallet/identities",
                  [this](const httplib::Request&, httplib::Response& res) {
                    Json out = Json::array();
                    for (const auto& doc : list_identities()) {
                      out.push_back({{"did", doc.id.str()}, {"document", to_json(doc)}});
                    }
                    res.set_content(out.dump(), kJson);
                  });
    internal->Post("/internal/wallet/identities",
                   [this](const httplib::Request& req, httplib::Response& res) {
                     guarded(res, [&] {
                       std::optional<Bytes> seed;
                       if (!req.body.empty()) {
                         Json j = Json::parse(req.body);
                         if (j.contains("seed")) seed = hex_decode(j.at("seed").get<std::string>());
                       }
                       auto id = create_identity(seed);
                       res.status = 201;
                       res.set_content(
                           Json{{"did", id.did.str()}, {"document", to_json(id.document)}}.dump(),
                           kJson);
                     });
                   });
    internal->Get("/internal/wallet/credentials",
                  [this](const httplib::Request&, httplib::Response& res) {
                    Json out = Json::array();
                    std::lock_guard lock(wallet_mutex);
                    for (const auto& vc : credentials) out.push_back(to_json(vc));
                    res.set_content(out.dump(), kJson);
                  });
    internal->Post("/internal/wallet/credentials",
                   [this](const httplib::Request& req, httplib::Response& res) {
                     guarded(res, [&] {
                       store_credential(credential_from_json(Json::parse(req.body)));
                       res.status = 201;
                     });
                   });
    internal->Get("/internal/wallet/connections",
                  [this](const httplib::Request&, httplib::Response& res) {
                    Json out = Json::array();
                    std::lock_guard lock(wallet_mutex);
                    for (const auto& [id, rec] : connections) {
                      Json r{{"connection_id", id}, {"state", v1::to_string(rec.state)}};
                      if (rec.their_did) r["their_did"] = rec.their_did->str();
                      out.push_back(r);
                    }
                    res.set_content(out.dump(), kJson);
                  });
    internal->Get(R"(/internal/receipts/([^/]+))",
                  [this](const httplib::Request& req, httplib::Response& res) {
                    auto receipt = find_receipt(req.matches[1]);
                    if (!receipt) {
                      reply_error(res, Error(Errc::not_found, "no receipt " + std::string(req.matches[1])));
                      return;
                    }
                    res.set_content(to_json(*receipt).dump(), kJson);
                  });
  }

  // ---- wallet ----------------------------------------------------------

  Identity create_identity(std::optional<Bytes> seed) {
    std::string url = endpoint();
    auto id = seed ? generate_identity(kDefaultMethod, url, crypto::sha256(*seed))
                   : generate_identity(kDefaultMethod, url);
    {
      std::lock_guard lock(wallet_mutex);
      for (const auto& existing : identities) {
        if (existing.did == id.did) throw Error(Errc::already_exists, id.did.str());
      }
    }
    registry_write_pause();
    vdr->register_document(id.document, prove_document(id, id.document, 1));
    id.document.version = 1;
    std::lock_guard lock(wallet_mutex);
    identities.push_back(id);
    return id;
  }

  std::vector<DidDocument> list_identities() const {
    std::lock_guard lock(wallet_mutex);
    std::vector<DidDocument> out;
    for (const auto& id : identities) out.push_back(id.document);
    return out;
  }

  void store_credential(const VerifiableCredential& vc) {
    std::lock_guard lock(wallet_mutex);
    bool mine = std::any_of(identities.begin(), identities.end(),
                            [&](const Identity& id) { return id.did == vc.subject; });
    if (!mine) throw Error(Errc::validation, "credential subject is not held by this wallet");
    credentials.push_back(vc);
  }

  // ---- instrumentation -------------------------------------------------

  std::optional<DeliveryReceipt> find_receipt(const std::string& id) const {
    std::lock_guard lock(stats_mutex);
    auto it = receipts.find(id);
    if (it == receipts.end()) return std::nullopt;
    return it->second;
  }

  void emit(WireKind kind, const std::string& where, std::size_t bytes) {
    std::function<void(const WireEvent&)> obs;
    {
      std::lock_guard lock(hooks_mutex);
      obs = observer;
    }
    if (obs) obs(WireEvent{kind, where, bytes});
  }

  void count_failure(Errc code) {
    std::lock_guard lock(stats_mutex);
    switch (code) {
      case Errc::integrity:
      case Errc::unauthorized:
      case Errc::key_mismatch:
      case Errc::misdelivery: ++counters.integrity_failures; break;
      case Errc::format: ++counters.format_errors; break;
      default: ++counters.rejected_other; break;
    }
  }

  // ---- outbound --------------------------------------------------------

  ClientSlot& client_for(const std::string& url) {
    auto parsed = parse_url(url);
    if (parsed.secure != (config.protocol == Protocol::tls)) {
      throw Error(Errc::validation, "endpoint " + url + " does not match protocol " +
                                        std::string(to_string(config.protocol)));
    }
    const auto key = parsed.where.host + ":" + std::to_string(parsed.where.port);
    std::lock_guard lock(clients_mutex);
    auto& slot = clients[key];
    if (slot) return *slot;
    slot = std::make_unique<ClientSlot>();
    if (parsed.secure) {
      auto c = std::make_unique<httplib::SSLClient>(parsed.where.host, parsed.where.port,
                                                    tls_credentials->certificate.get(),
                                                    tls_credentials->private_key.get());
      X509_STORE* trust = X509_STORE_new();
      {
        std::lock_guard peers_lock(peers_mutex);
        for (const auto& [did, peer] : peers) {
          X509_STORE_add_cert(trust, tls::parse_pem(peer.certificate_pem).get());
        }
      }
      c->set_ca_cert_store(trust);
      c->enable_server_certificate_verification(true);
      SSL_CTX_set_min_proto_version(c->ssl_context(), TLS1_2_VERSION);
      tls::count_handshake_bytes(c->ssl_context(), &slot->handshake_bytes);
      slot->client = std::move(c);
    } else {
      slot->client = std::make_unique<httplib::ClientImpl>(parsed.where.host, parsed.where.port);
    }
    configure_client(*slot->client);
    return *slot;
  }

  httplib::Result post(ClientSlot& slot, const std::string& url, const httplib::Headers& headers,
                       const Bytes& body, WireKind kind) {
    emit(kind, url, body.size());
    auto res = slot.client->Post(parse_url(url).path, headers,
                                 reinterpret_cast<const char*>(body.data()), body.size(), kOctets);
    if (!res) {
      throw Error(Errc::delivery, "wire phase: POST " + url + " failed: " +
                                      httplib::to_string(res.error()));
    }
    return res;
  }

  Bytes exchange(ClientSlot& slot, const std::string& url, const Bytes& frame) {
    auto res = post(slot, url, {}, frame, WireKind::exchange);
    if (res->status != 200) raise_remote(url, res->status, res->body);
    return Bytes(res->body.begin(), res->body.end());
  }

  std::optional<v1::ConnectionRecord> complete_connection_to(const Did& peer) const {
    std::lock_guard lock(wallet_mutex);
    for (const auto& [id, rec] : connections) {
      if (rec.state == v1::ConnectionState::complete && rec.their_did == peer) return rec;
    }
    return std::nullopt;
  }

  // DID Exchange initiated by this agent: the destination's document is
  // resolved once to find its endpoint, then four frames establish the
  // pairwise connection.
  std::pair<v1::ConnectionRecord, SessionStats> ensure_v1_connection(const Did& destination) {
    SessionStats stats;
    if (auto rec = complete_connection_to(destination)) return {*rec, stats};

    const auto started = Clock::now();
    auto doc = resolve_traced(resolver, destination, &stats.resolution);
    auto url = doc.endpoint();
    if (!url) throw Error(Errc::not_found, destination.str() + " publishes no endpoint");
    auto& slot = client_for(*url);
    std::lock_guard slot_lock(slot.mutex);
    if (auto rec = complete_connection_to(destination)) return {*rec, stats};

    Identity self;
    {
      std::lock_guard lock(wallet_mutex);
      self = me();
    }
    auto [record, invitation] = v1::create_invitation(self);
    const auto id = record.connection_id;
    {
      std::lock_guard lock(wallet_mutex);
      connections[id] = record;
    }
    auto fail = [&] {
      std::lock_guard lock(wallet_mutex);
      connections.erase(id);
    };
    try {
      const auto invitation_frame = invitation.serialize();
      const auto request_frame = exchange(slot, *url, invitation_frame);
      auto request = v1::ExchangeMessage::parse(request_frame);
      if (request.sender_did != destination) {
        throw Error(Errc::unauthorized, "invitation answered by someone other than " +
                                            destination.str());
      }
      v1::ExchangeMessage response;
      {
        std::lock_guard lock(wallet_mutex);
        auto& rec = connections.at(id);
        response = v1::process_request(self, rec, request);
        if (!rec.their_document || !same_keys(*rec.their_document, doc)) {
          throw Error(Errc::unauthorized, "inline document differs from the registry");
        }
      }
      const auto response_frame = response.serialize();
      const auto ack_frame = exchange(slot, *url, response_frame);
      auto ack = v1::ExchangeMessage::parse(ack_frame);
      {
        std::lock_guard lock(wallet_mutex);
        auto& rec = connections.at(id);
        v1::process_complete(rec, ack);
        record = rec;
      }
      stats.handshake_bytes = invitation_frame.size() + request_frame.size() +
                              response_frame.size() + ack_frame.size();
    } catch (...) {
      fail();
      throw;
    }
    stats.handshake_time = Clock::now() - started;
    return {record, stats};
  }

  Peer tls_peer(const Did& destination) const {
    std::lock_guard lock(peers_mutex);
    auto it = peers.find(destination.str());
    if (it == peers.end()) throw Error(Errc::not_found, "no TLS peer " + destination.str());
    return it->second;
  }

  SessionStats ensure_tls_session(ClientSlot& slot, const std::string& url) {
    SessionStats stats;
    if (slot.tls_established) return stats;
    const auto before = slot.handshake_bytes.load();
    const auto started = Clock::now();
    auto res = slot.client->Get("/health");
    if (!res) {
      throw Error(Errc::delivery, "TLS handshake with " + url + " failed: " +
                                      httplib::to_string(res.error()));
    }
    stats.handshake_time = Clock::now() - started;
    stats.handshake_bytes = slot.handshake_bytes.load() - before;
    slot.tls_established = true;
    return stats;
  }

  SessionStats connect(const Did& destination) {
    switch (config.protocol) {
      case Protocol::v1: return ensure_v1_connection(destination).second;
      case Protocol::v2: return {};
      case Protocol::tls: {
        auto peer = tls_peer(destination);
        auto& slot = client_for(peer.endpoint);
        std::lock_guard lock(slot.mutex);
        return ensure_tls_session(slot, peer.endpoint);
      }
    }
    return {};
  }

  DeliveryReceipt send(const Did& destination, std::string_view type, ByteView body) {
    if (!running) throw Error(Errc::delivery, config.nf_name + " is not running");
    DeliveryReceipt r;
    r.phases.t_submit = Clock::now();
    r.message_id = crypto::random_uuid();
    r.protocol = config.protocol;
    r.to = destination;
    r.message_type = std::string(type);
    r.payload_bytes = body.size();
    Identity self;
    {
      std::lock_guard lock(wallet_mutex);
      self = me();
    }
    r.from = self.did;

    Bytes frame;
    std::string url;
    httplib::Headers headers{{kSenderHint, self.did.str()}};
    WireKind kind = WireKind::envelope;
    ClientSlot* slot = nullptr;
    std::unique_lock<std::mutex> slot_lock;
    std::uint64_t tls_counter_before = 0;

    switch (config.protocol) {
      case Protocol::v2: {
        r.phases.t_encap_start = Clock::now();
        v2::PackInfo info{r.message_id, {}};
        auto env = v2::pack_v2(self, destination, type, body, resolver, &r.encap_resolution, &info);
        frame = env.serialize();
        r.phases.t_encap_end = Clock::now();
        auto ep = info.recipient_document.endpoint();
        if (!ep) throw Error(Errc::not_found, destination.str() + " publishes no endpoint");
        url = *ep;
        slot = &client_for(url);
        slot_lock = std::unique_lock(slot->mutex);
        break;
      }
      case Protocol::v1: {
        auto [record, stats] = ensure_v1_connection(destination);
        r.handshake_bytes = stats.handshake_bytes;
        r.handshake_time = stats.handshake_time;
        r.handshake_resolution = stats.resolution;
        auto ep = record.their_endpoint();
        if (!ep) throw Error(Errc::not_found, destination.str() + " has no endpoint");
        url = *ep;
        slot = &client_for(url);
        slot_lock = std::unique_lock(slot->mutex);
        r.phases.t_encap_start = Clock::now();
        ByteWriter plaintext;
        plaintext.field(type).field(std::string_view(r.message_id)).raw(body);
        frame = v1::pack_v1(self, record, plaintext.bytes()).serialize();
        r.phases.t_encap_end = Clock::now();
        break;
      }
      case Protocol::tls: {
        auto peer = tls_peer(destination);
        url = peer.endpoint;
        slot = &client_for(url);
        slot_lock = std::unique_lock(slot->mutex);
        auto stats = ensure_tls_session(*slot, url);
        r.handshake_bytes = stats.handshake_bytes;
        r.handshake_time = stats.handshake_time;
        tls_counter_before = slot->handshake_bytes.load();
        r.phases.t_encap_start = Clock::now();
        headers = {{"X-From", self.did.str()},
                   {"X-Message-Type", std::string(type)},
                   {"X-Message-Id", r.message_id}};
        frame.assign(body.begin(), body.end());
        r.phases.t_encap_end = Clock::now();
        kind = WireKind::tls_body;
        break;
      }
    }

    {
      std::function<void(Bytes&)> mut;
      {
        std::lock_guard lock(hooks_mutex);
        mut = mutator;
      }
      if (mut && kind == WireKind::envelope) mut(frame);
    }
    r.wire_bytes = frame.size();
    r.phases.t_wire_sent = Clock::now();
    auto res = post(*slot, url, headers, frame, kind);
    if (config.protocol == Protocol::tls) {
      // A dropped keep-alive connection is re-established transparently.
      r.handshake_bytes += slot->handshake_bytes.load() - tls_counter_before;
    }
    slot_lock.unlock();
    if (res->status != 202) raise_remote(url, res->status, res->body);

    Json j = Json::parse(res->body, nullptr, false);
    if (!j.is_object()) throw Error(Errc::delivery, "malformed acknowledgement from " + url);
    try {
      r.phases.t_wire_received = tp_of(j.at("t_wire_received").get<std::int64_t>());
      r.phases.t_decap_start = tp_of(j.at("t_decap_start").get<std::int64_t>());
      r.phases.t_decap_end = tp_of(j.at("t_decap_end").get<std::int64_t>());
      r.phases.t_delivered = tp_of(j.at("t_delivered").get<std::int64_t>());
      r.received_bytes = j.at("received_bytes").get<std::size_t>();
      r.decap_resolution = trace_from(j.at("decap_resolution"));
      if (j.contains("reply")) {
        r.reply = std::make_shared<const DeliveryReceipt>(receipt_from_json(j.at("reply")));
      }
    } catch (const Json::exception& e) {
      throw Error(Errc::delivery, std::string("malformed acknowledgement: ") + e.what());
    }
    {
      std::lock_guard lock(stats_mutex);
      receipts[r.message_id] = r;
    }
    if (j.contains("reply_error")) {
      throw Error(Errc::delivery, "reply from " + destination.str() +
                                      " failed: " + j.at("reply_error").get<std::string>());
    }
    return r;
  }

  // ---- inbound ---------------------------------------------------------

  void handle_inbound(const httplib::Request& req, httplib::Response& res) {
    const auto t_received = Clock::now();
    try {
      if (config.protocol == Protocol::tls) {
        handle_tls(req, res, t_received);
        return;
      }
      const ByteView frame = view_of(req.body);
      auto kind = peek_frame_kind(frame);
      if (!kind) throw Error(Errc::integrity, "unrecognised frame header");
      const bool v1_frame = *kind == FrameKind::v1_envelope || *kind == FrameKind::v1_exchange;
      if (v1_frame != (config.protocol == Protocol::v1)) {
        throw Error(Errc::format, config.nf_name + " speaks " +
                                      std::string(to_string(config.protocol)) +
                                      " and cannot accept this frame");
      }
      if (*kind == FrameKind::v1_exchange) {
        handle_exchange(frame, res);
        return;
      }
      handle_envelope(req, frame, *kind, t_received, res);
    } catch (const Error& e) {
      count_failure(e.code());
      reply_error(res, e);
    } catch (const std::exception& e) {
      count_failure(Errc::io);
      res.status = 500;
      res.set_content(Json{{"error", "io"}, {"message", e.what()}}.dump(), kJson);
    }
  }

  void handle_exchange(ByteView frame, httplib::Response& res) {
    auto msg = v1::ExchangeMessage::parse(frame);
    Bytes next;
    {
      std::lock_guard lock(wallet_mutex);
      switch (msg.kind) {
        case v1::ExchangeKind::invitation: {
          auto [record, request] = v1::process_invitation(me(), msg);
          connections[record.connection_id] = record;
          next = request.serialize();
          break;
        }
        case v1::ExchangeKind::response: {
          auto it = connections.find(msg.connection_id);
          if (it == connections.end()) {
            throw Error(Errc::protocol_state, "unknown connection " + msg.connection_id);
          }
          next = v1::process_response(me(), it->second, msg).serialize();
          break;
        }
        default:
          throw Error(Errc::protocol_state, "exchange " + std::string(v1::to_string(msg.kind)) +
                                                " is only valid as a reply");
      }
    }
    emit(WireKind::exchange, "reply", next.size());
    res.status = 200;
    res.set_content(as_string(next), kOctets);
  }

  v1::ConnectionRecord connection_by_peer_key(const Key32& key) const {
    std::lock_guard lock(wallet_mutex);
    for (const auto& [id, rec] : connections) {
      if (rec.state != v1::ConnectionState::complete || !rec.their_document) continue;
      const auto* vm = rec.their_document->first_of(KeyKind::key_agreement);
      if (vm && vm->public_key == key) return rec;
    }
    throw Error(Errc::unauthorized, "no connection with the sending key");
  }

  Identity identity_for(const Did& did) const {
    std::lock_guard lock(wallet_mutex);
    for (const auto& id : identities) {
      if (id.did == did) return id;
    }
    return me();
  }

  void handle_envelope(const httplib::Request& req, ByteView frame, FrameKind kind,
                       Clock::time_point t_received, httplib::Response& res) {
    const auto hint = req.get_header_value(kSenderHint);
    InboundMessage msg;
    ResolutionTrace trace;
    Clock::time_point t_decap_start, t_decap_end, t_delivered;
    std::optional<Outgoing> reply;
    {
      Lanes::Turn turn(lanes, hint);
      t_decap_start = Clock::now();
      if (kind == FrameKind::v2_envelope) {
        auto env = v2::EnvelopeV2::parse(frame);
        Did addressed;
        try {
          addressed = split_key_id(env.recipient_kid).first;
        } catch (const Error&) {
          throw Error(Errc::integrity, "recipient kid is malformed");
        }
        auto jwm = v2::unpack_v2(identity_for(addressed), env, resolver, &trace);
        msg = InboundMessage{jwm.from, jwm.type, jwm.id, std::move(jwm.body)};
      } else {
        auto env = v1::EnvelopeV1::parse(frame);
        Identity self = identity_for(Did{});
        auto record = connection_by_peer_key(v1::open_sender(self, env));
        auto plaintext = v1::unpack_v1(self, record, env);
        ByteReader reader(plaintext);
        msg.from = *record.their_did;
        msg.message_type = reader.field_string(1u << 12);
        msg.message_id = reader.field_string(1u << 12);
        auto rest = reader.rest();
        msg.body.assign(rest.begin(), rest.end());
      }
      if (!hint.empty() && hint != msg.from.str()) {
        throw Error(Errc::unauthorized, "sender hint does not match the authenticated sender");
      }
      t_decap_end = Clock::now();
      t_delivered = Clock::now();
      reply = deliver(msg);
    }
    respond(res, msg, {t_received, t_decap_start, t_decap_end, t_delivered}, req.body.size(), trace, reply);
  }

  void handle_tls(const httplib::Request& req, httplib::Response& res,
                  Clock::time_point t_received) {
    const auto from_header = req.get_header_value("X-From");
    InboundMessage msg;
    Clock::time_point t_decap_start, t_decap_end, t_delivered;
    std::optional<Outgoing> reply;
    {
      Lanes::Turn turn(lanes, from_header);
      t_decap_start = Clock::now();
      tls::X509Ptr cert(req.ssl ? SSL_get1_peer_certificate(req.ssl) : nullptr);
      if (!cert) throw Error(Errc::unauthorized, "no client certificate");
      const auto fp = tls::fingerprint(cert.get());
      std::optional<std::string> peer_did;
      {
        std::lock_guard lock(peers_mutex);
        for (const auto& [did, peer] : peers) {
          if (peer.fingerprint == fp) peer_did = did;
        }
      }
      if (!peer_did || *peer_did != from_header) {
        throw Error(Errc::unauthorized, "client certificate does not belong to " + from_header);
      }
      msg.from = Did::parse(*peer_did);
      msg.message_type = req.get_header_value("X-Message-Type");
      msg.message_id = req.get_header_value("X-Message-Id");
      msg.body.assign(req.body.begin(), req.body.end());
      t_decap_end = Clock::now();
      t_delivered = Clock::now();
      reply = deliver(msg);
    }
    respond(res, msg, {t_received, t_decap_start, t_decap_end, t_delivered}, req.body.size(), {}, reply);
  }

  std::optional<Outgoing> deliver(const InboundMessage& msg) {
    Handler h;
    {
      std::lock_guard lock(hooks_mutex);
      h = handler;
    }
    {
      std::lock_guard lock(stats_mutex);
      ++counters.delivered;
      inbox.push_back(msg);
    }
    return h ? h(msg) : std::nullopt;
  }

  struct ReceiverPhases {
    Clock::time_point received, decap_start, decap_end, delivered;
  };

  void respond(httplib::Response& res, const InboundMessage& msg, const ReceiverPhases& t,
               std::size_t received_bytes, const ResolutionTrace& trace,
               const std::optional<Outgoing>& reply) {
    Json j{{"t_wire_received", ns_of(t.received)},
           {"t_decap_start", ns_of(t.decap_start)},
           {"t_decap_end", ns_of(t.decap_end)},
           {"t_delivered", ns_of(t.delivered)},
           {"received_bytes", received_bytes},
           {"decap_resolution", trace_json(trace)},
           {"message_id", msg.message_id}};
    if (reply) {
      try {
        j["reply"] = to_json(send(msg.from, reply->message_type, reply->body));
      } catch (const Error& e) {
        j["reply_error"] = e.what();
      }
    }
    res.status = 202;
    res.set_content(j.dump(), kJson);
  }
};

// ---- receipts --------------------------------------------------------------

Json to_json(const DeliveryReceipt& r) {
  const auto& p = r.phases;
  Json j{{"message_id", r.message_id},
         {"protocol", to_string(r.protocol)},
         {"from", r.from.str()},
         {"to", r.to.str()},
         {"message_type", r.message_type},
         {"phases",
          {{"t_submit", ns_of(p.t_submit)},
           {"t_encap_start", ns_of(p.t_encap_start)},
           {"t_encap_end", ns_of(p.t_encap_end)},
           {"t_wire_sent", ns_of(p.t_wire_sent)},
           {"t_wire_received", ns_of(p.t_wire_received)},
           {"t_decap_start", ns_of(p.t_decap_start)},
           {"t_decap_end", ns_of(p.t_decap_end)},
           {"t_delivered", ns_of(p.t_delivered)}}},
         {"payload_bytes", r.payload_bytes},
         {"wire_bytes", r.wire_bytes},
         {"received_bytes", r.received_bytes},
         {"handshake_bytes", r.handshake_bytes},
         {"handshake_time_ns", r.handshake_time.count()},
         {"handshake_resolution", trace_json(r.handshake_resolution)},
         {"encap_resolution", trace_json(r.encap_resolution)},
         {"decap_resolution", trace_json(r.decap_resolution)}};
  if (r.reply) j["reply"] = to_json(*r.reply);
  return j;
}

DeliveryReceipt receipt_from_json(const Json& j) {
  try {
    DeliveryReceipt r;
    r.message_id = j.at("message_id").get<std::string>();
    r.protocol = parse_protocol(j.at("protocol").get<std::string>());
    r.from = Did::parse(j.at("from").get<std::string>());
    r.to = Did::parse(j.at("to").get<std::string>());
    r.message_type = j.at("message_type").get<std::string>();
    const auto& p = j.at("phases");
    r.phases.t_submit = tp_of(p.at("t_submit").get<std::int64_t>());
    r.phases.t_encap_start = tp_of(p.at("t_encap_start").get<std::int64_t>());
    r.phases.t_encap_end = tp_of(p.at("t_encap_end").get<std::int64_t>());
    r.phases.t_wire_sent = tp_of(p.at("t_wire_sent").get<std::int64_t>());
    r.phases.t_wire_received = tp_of(p.at("t_wire_received").get<std::int64_t>());
    r.phases.t_decap_start = tp_of(p.at("t_decap_start").get<std::int64_t>());
    r.phases.t_decap_end = tp_of(p.at("t_decap_end").get<std::int64_t>());
    r.phases.t_delivered = tp_of(p.at("t_delivered").get<std::int64_t>());
    r.payload_bytes = j.at("payload_bytes").get<std::size_t>();
    r.wire_bytes = j.at("wire_bytes").get<std::size_t>();
    r.received_bytes = j.at("received_bytes").get<std::size_t>();
    r.handshake_bytes = j.at("handshake_bytes").get<std::size_t>();
    r.handshake_time = std::chrono::nanoseconds(j.at("handshake_time_ns").get<std::int64_t>());
    r.handshake_resolution = trace_from(j.at("handshake_resolution"));
    r.encap_resolution = trace_from(j.at("encap_resolution"));
    r.decap_resolution = trace_from(j.at("decap_resolution"));
    if (j.contains("reply")) {
      r.reply = std::make_shared<const DeliveryReceipt>(receipt_from_json(j.at("reply")));
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("malformed receipt: ") + e.what());
  }
}

// ---- Agent facade ------------------------------------------------------------

Agent::Agent(AgentConfig config, std::shared_ptr<Vdr> vdr)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(vdr))) {}

Agent::~Agent() { impl_->stop(); }

void Agent::start() { impl_->start(); }
void Agent::stop() { impl_->stop(); }
bool Agent::running() const { return impl_->running; }
const AgentConfig& Agent::config() const { return impl_->config; }

const Identity& Agent::identity() const {
  std::lock_guard lock(impl_->wallet_mutex);
  if (impl_->identities.empty()) throw Error(Errc::protocol_state, "agent was never started");
  return impl_->identities.front();
}

std::string Agent::endpoint() const { return impl_->endpoint(); }
std::string Agent::internal_endpoint() const {
  return "http://" + split_address(impl_->config.internal_address).host + ":" +
         std::to_string(impl_->internal_port);
}
std::uint16_t Agent::port() const { return static_cast<std::uint16_t>(impl_->port); }
std::uint16_t Agent::internal_port() const {
  return static_cast<std::uint16_t>(impl_->internal_port);
}

void Agent::set_handler(Handler handler) {
  std::lock_guard lock(impl_->hooks_mutex);
  impl_->handler = std::move(handler);
}

DeliveryReceipt Agent::send(const Did& destination, std::string_view message_type, ByteView body) {
  return impl_->send(destination, message_type, body);
}

SessionStats Agent::connect(const Did& destination) { return impl_->connect(destination); }

std::string Agent::certificate_pem() const {
  if (!impl_->tls_credentials) {
    throw Error(Errc::protocol_state, "certificates exist only for started tls agents");
  }
  return impl_->tls_credentials->certificate_pem;
}

void Agent::add_tls_peer(const Did& did, const std::string& endpoint, const std::string& pem) {
  auto cert = tls::parse_pem(pem);
  Impl::Peer peer{endpoint, pem, tls::fingerprint(cert.get())};
  std::lock_guard lock(impl_->peers_mutex);
  impl_->peers[did.str()] = peer;
  if (impl_->server_trust) X509_STORE_add_cert(impl_->server_trust, cert.get());
}

Identity Agent::create_identity(std::optional<Bytes> seed) {
  if (!impl_->running) throw Error(Errc::protocol_state, "agent is not running");
  return impl_->create_identity(std::move(seed));
}

std::vector<DidDocument> Agent::list_identities() const { return impl_->list_identities(); }

void Agent::store_credential(const VerifiableCredential& credential) {
  impl_->store_credential(credential);
}

std::vector<VerifiableCredential> Agent::credentials() const {
  std::lock_guard lock(impl_->wallet_mutex);
  return impl_->credentials;
}

std::vector<v1::ConnectionRecord> Agent::connections() const {
  std::lock_guard lock(impl_->wallet_mutex);
  std::vector<v1::ConnectionRecord> out;
  for (const auto& [id, rec] : impl_->connections) out.push_back(rec);
  return out;
}

Resolver& Agent::resolver() { return impl_->resolver; }

AgentCounters Agent::counters() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->counters;
}

std::vector<InboundMessage> Agent::inbox() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->inbox;
}

void Agent::clear_inbox() {
  std::lock_guard lock(impl_->stats_mutex);
  impl_->inbox.clear();
}

std::optional<DeliveryReceipt> Agent::find_receipt(const std::string& message_id) const {
  return impl_->find_receipt(message_id);
}

void Agent::set_wire_observer(std::function<void(const WireEvent&)> observer) {
  std::lock_guard lock(impl_->hooks_mutex);
  impl_->observer = std::move(observer);
}

void Agent::set_wire_mutator(std::function<void(Bytes&)> mutator) {
  std::lock_guard lock(impl_->hooks_mutex);
  impl_->mutator = std::move(mutator);
}

}  // namespace didnf
