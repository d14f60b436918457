#include "didnf/scenarios.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <random>

#include "didnf/crypto.hpp"
#include "didnf/encoding.hpp"
#include "didnf/error.hpp"

namespace didnf::scenarios {

namespace {

constexpr std::string_view kNonceRequest = "nsmf/nonce-request";
constexpr std::string_view kNonce = "nsmf/nonce";
constexpr std::string_view kSmContextCreate = "nsmf/sm-context-create";
constexpr std::string_view kSmContextAck = "nsmf/sm-context-ack";
constexpr std::string_view kSmContextReject = "nsmf/sm-context-reject";
constexpr std::string_view kReplySuffix = "/response";

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Responses carry the request bytes under a fixed mask: same size, fully
// determined by the request.
Bytes response_body(ByteView request) {
  Bytes out(request.begin(), request.end());
  for (auto& b : out) b ^= 0xA5;
  return out;
}

Key32 nf_seed(std::uint64_t seed, NfType type) {
  return crypto::sha256(as_bytes("didnf-topology/" + std::to_string(seed) + "/" +
                                 std::string(to_string(type))));
}

}  // namespace

std::string_view to_string(NfType type) {
  switch (type) {
    case NfType::AMF: return "AMF";
    case NfType::SMF: return "SMF";
    case NfType::NRF: return "NRF";
    case NfType::AUSF: return "AUSF";
    case NfType::UDM: return "UDM";
  }
  return "?";
}

NfType parse_nf_type(std::string_view text) {
  for (auto t : kAllNfTypes) {
    if (to_string(t) == text) return t;
  }
  throw Error(Errc::syntax, "unknown network function '" + std::string(text) + "'");
}

// Shared between the scenario drivers and the agents' handlers, which run on
// server threads.
struct Topology::State {
  std::mutex mutex;
  Identity nrf;
  std::map<std::string, PresentationNonce> pending_nonces;  // by requester DID
  std::uint64_t sessions = 0;
  std::optional<VerificationOutcome> last_outcome;
  std::optional<VerifiablePresentation> last_presentation;
  bool reply_expected = true;
  std::vector<Bytes> delivered;
};

Topology::Topology(Protocol protocol, TopologyOptions options, std::shared_ptr<Vdr> vdr)
    : protocol_(protocol),
      options_(std::move(options)),
      vdr_(vdr ? std::move(vdr) : std::make_shared<Vdr>()),
      state_(std::make_unique<State>()) {
  for (auto type : kAllNfTypes) {
    AgentConfig config;
    config.nf_name = std::string(to_string(type));
    config.protocol = protocol_;
    config.cache_policy = options_.cache;
    config.vdr_delays.read_delay = options_.resolver_delay;
    auto seed = nf_seed(options_.seed, type);
    config.identity_seed = Bytes(seed.begin(), seed.end());
    agents_.push_back(std::make_unique<Agent>(std::move(config), vdr_));
  }
  try {
    for (auto& a : agents_) a->start();
  } catch (const Error& e) {
    throw Error(Errc::startup, std::string("topology: ") + e.what());
  }
  if (protocol_ == Protocol::tls) {
    for (auto& a : agents_) {
      for (auto& b : agents_) {
        if (a != b) a->add_tls_peer(b->identity().did, b->endpoint(), b->certificate_pem());
      }
    }
  }

  state_->nrf = agent(NfType::NRF).identity();
  define_schema(state_->nrf, std::string(kNfAuthorizationSchema), kNfAuthorizationAttributes,
                *vdr_);
  create_revocation_registry(state_->nrf, std::string(kRevocationRegistry), *vdr_);

  auto& smf = agent(NfType::SMF);
  for (auto type : kAllNfTypes) {
    Agent* self = &agent(type);
    State* st = state_.get();
    self->set_handler([this, st, self, &smf](const InboundMessage& m) -> std::optional<Outgoing> {
      {
        std::lock_guard lock(st->mutex);
        st->delivered.push_back(m.body);
      }
      if (self == &smf && m.message_type == kNonceRequest) {
        auto nonce = crypto::random_array<16>();
        std::lock_guard lock(st->mutex);
        st->pending_nonces[m.from.str()] = nonce;
        return Outgoing{std::string(kNonce), Bytes(nonce.begin(), nonce.end())};
      }
      if (self == &smf && m.message_type == kSmContextCreate) {
        PresentationNonce expected{};
        {
          // A nonce answers exactly one request.
          std::lock_guard lock(st->mutex);
          auto it = st->pending_nonces.find(m.from.str());
          if (it != st->pending_nonces.end()) {
            expected = it->second;
            st->pending_nonces.erase(it);
          }
        }
        VerificationOutcome outcome{Verdict::denied, DenialReason::bad_issuer_signature};
        try {
          ByteReader r(m.body);
          auto vp = parse_presentation(r.field());
          if (vp.holder != m.from) {
            outcome = {Verdict::denied, DenialReason::holder_mismatch};
          } else {
            outcome = verify_presentation(vp, expected, now(), smf.resolver(), *vdr_);
          }
        } catch (const Error&) {
          // Unparseable presentation: nothing about the issuer can be shown.
        }
        std::lock_guard lock(st->mutex);
        st->last_outcome = outcome;
        if (!outcome.granted()) {
          return Outgoing{std::string(kSmContextReject), to_bytes(to_string(outcome.reason))};
        }
        ++st->sessions;
        return Outgoing{std::string(kSmContextAck),
                        to_bytes("sm-context-" + std::to_string(st->sessions))};
      }
      if (ends_with(m.message_type, kReplySuffix) || m.message_type == kNonce ||
          m.message_type == kSmContextAck || m.message_type == kSmContextReject) {
        return std::nullopt;
      }
      std::lock_guard lock(st->mutex);
      if (!st->reply_expected) return std::nullopt;
      return Outgoing{m.message_type + std::string(kReplySuffix), response_body(m.body)};
    });
  }
}

Topology::~Topology() {
  for (auto& a : agents_) a->set_handler(nullptr);
  for (auto& a : agents_) a->stop();
}

Agent& Topology::agent(NfType type) { return *agents_.at(static_cast<std::size_t>(type)); }

NfInstance Topology::instance(NfType type) {
  auto& a = agent(type);
  return {type, a.identity().did, &a};
}

std::vector<NfInstance> Topology::instances() {
  std::vector<NfInstance> out;
  for (auto t : kAllNfTypes) out.push_back(instance(t));
  return out;
}

std::int64_t Topology::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::uint64_t Topology::sessions_created() const {
  std::lock_guard lock(state_->mutex);
  return state_->sessions;
}

void Topology::reset_measurements() {
  for (auto& a : agents_) {
    a->clear_inbox();
    a->resolver().reset_metrics();
  }
  std::lock_guard lock(state_->mutex);
  state_->delivered.clear();
}

std::unique_ptr<Topology> build_topology(Protocol protocol, TopologyOptions options,
                                         std::shared_ptr<Vdr> vdr) {
  return std::make_unique<Topology>(protocol, std::move(options), std::move(vdr));
}

// ---- scripts ---------------------------------------------------------------

ScenarioScript default_ue_registration_script() {
  using enum NfType;
  return {"ue-registration",
          {{AMF, AUSF, "nausf/ue-authentication", 30000, true},
           {AMF, AUSF, "nausf/ue-authentication-confirm", 20000, true},
           {AMF, AUSF, "nausf/security-mode", 25000, true},
           {AMF, UDM, "nudm/uecm-registration", 22215, true},
           {AMF, UDM, "nudm/sdm-get", 21000, true}}};
}

Json to_json(const ScenarioScript& script) {
  Json steps = Json::array();
  for (const auto& s : script.steps) {
    steps.push_back({{"sender", to_string(s.sender)},
                     {"receiver", to_string(s.receiver)},
                     {"message_type", s.message_type},
                     {"payload_size", s.payload_size},
                     {"expects_reply", s.expects_reply}});
  }
  return {{"name", script.name}, {"steps", steps}};
}

ScenarioScript script_from_json(const Json& j) {
  ScenarioScript script;
  const Json* steps = &j;
  try {
    if (j.is_object()) {
      script.name = j.value("name", "custom");
      steps = &j.at("steps");
    } else {
      script.name = "custom";
    }
    if (!steps->is_array()) throw Error(Errc::syntax, "script steps must be a list");
    for (const auto& s : *steps) {
      ScenarioStep step;
      step.sender = parse_nf_type(s.at("sender").get<std::string>());
      step.receiver = parse_nf_type(s.at("receiver").get<std::string>());
      step.message_type = s.at("message_type").get<std::string>();
      auto size = s.at("payload_size").get<std::int64_t>();
      if (size < 0) throw Error(Errc::validation, "payload_size must be >= 0");
      step.payload_size = static_cast<std::size_t>(size);
      step.expects_reply = s.value("expects_reply", true);
      if (step.sender == step.receiver) {
        throw Error(Errc::validation, "step sender and receiver must differ");
      }
      if (step.message_type.empty()) throw Error(Errc::validation, "empty message_type");
      script.steps.push_back(std::move(step));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("malformed script: ") + e.what());
  }
  return script;
}

ScenarioScript load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read script " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, "script " + path.string() + ": " + e.what());
  }
  return script_from_json(j);
}

// ---- drivers ---------------------------------------------------------------

std::size_t ScenarioResult::handshake_bytes() const {
  std::size_t n = 0;
  for (const auto& s : steps) {
    n += s.request.handshake_bytes;
    if (s.reply) n += s.reply->handshake_bytes;
  }
  return n;
}

Bytes synthetic_payload(std::uint64_t seed, std::size_t index, std::size_t size) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  Bytes out(size);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

namespace {

// DID Exchange bytes belong to the byte curve; TLS handshake bytes are kept
// separate (they depend on certificates and session tickets, not the seed).
std::size_t counted_bytes(const DeliveryReceipt& r) {
  return r.wire_bytes + (r.protocol == Protocol::tls ? 0 : r.handshake_bytes);
}

struct Driver {
  Topology& topology;
  ScenarioResult result;

  Driver(Topology& t, std::string name) : topology(t) {
    result.scenario = std::move(name);
    result.protocol = t.protocol();
  }

  const StepRecord& step(const ScenarioStep& s, ByteView body) {
    auto& sender = topology.agent(s.sender);
    auto receiver = topology.instance(s.receiver).did;
    StepRecord rec;
    rec.index = result.steps.size();
    rec.step = s;
    rec.request = sender.send(receiver, s.message_type, body);
    if (rec.request.reply) rec.reply = *rec.request.reply;
    if (s.expects_reply && !rec.reply) {
      throw Error(Errc::protocol_state, "step " + std::to_string(rec.index) + " got no reply");
    }
    rec.step_bytes = counted_bytes(rec.request) + (rec.reply ? counted_bytes(*rec.reply) : 0);
    rec.cumulative_bytes = result.total_bytes() + rec.step_bytes;
    result.steps.push_back(std::move(rec));
    return result.steps.back();
  }

  template <typename Fn>
  ScenarioResult run(Fn&& body) {
    try {
      body();
    } catch (const Error& e) {
      result.failed = true;
      result.failure = "step " + std::to_string(result.steps.size()) + ": " + e.what();
    }
    return std::move(result);
  }
};

}  // namespace

ScenarioResult run_ue_registration(Topology& topology, const ScenarioScript& script) {
  Driver d(topology, script.name);
  auto* state = topology.state();
  {
    std::lock_guard lock(state->mutex);
    state->delivered.clear();
  }
  auto result = d.run([&] {
    for (std::size_t i = 0; i < script.steps.size(); ++i) {
      const auto& s = script.steps[i];
      {
        std::lock_guard lock(state->mutex);
        state->reply_expected = s.expects_reply;
      }
      d.step(s, synthetic_payload(topology.options().seed, i, s.payload_size));
    }
  });
  std::lock_guard lock(state->mutex);
  state->reply_expected = true;
  result.delivered = state->delivered;
  return result;
}

ScenarioResult run_sm_context(Topology& topology, const SmContextOptions& options) {
  Driver d(topology, "sm-context");
  auto* state = topology.state();
  auto& amf = topology.agent(NfType::AMF);
  const auto amf_did = amf.identity().did;
  {
    std::lock_guard lock(state->mutex);
    state->delivered.clear();
    state->last_outcome.reset();
  }
  const auto sessions_before = topology.sessions_created();

  auto result = d.run([&] {
    auto vc = issue(state->nrf, std::string(kNfAuthorizationSchema),
                    std::string(kRevocationRegistry), amf_did,
                    {{"nf_type", "AMF"},
                     {"allowed_service", std::string(kSmfService)},
                     {"expiry", std::to_string(topology.now() + 3600)}},
                    *topology.vdr(), topology.now());
    amf.store_credential(vc);
    if (options.revoke_first) revoke(state->nrf, vc, *topology.vdr());

    const auto smf = NfType::SMF;
    d.step({NfType::AMF, smf, std::string(kNonceRequest), 0, true}, {});
    PresentationNonce nonce;
    {
      std::lock_guard lock(state->mutex);
      nonce = to_array<16>(state->delivered.back());  // the SMF's reply
    }

    VerifiablePresentation vp;
    std::optional<VerifiablePresentation> previous;
    {
      std::lock_guard lock(state->mutex);
      previous = state->last_presentation;
    }
    if (options.replay_previous) {
      vp = previous ? *previous : present(amf.identity(), vc, crypto::random_array<16>());
    } else {
      vp = present(amf.identity(), vc, nonce);
      std::lock_guard lock(state->mutex);
      state->last_presentation = vp;
    }
    if (options.tamper) options.tamper(vp);

    ByteWriter w;
    w.field(serialize(vp));
    w.field(synthetic_payload(topology.options().seed, 0, options.request_payload));
    d.step({NfType::AMF, smf, std::string(kSmContextCreate), w.bytes().size(), true}, w.bytes());
  });

  AuthorizationRecord auth;
  {
    std::lock_guard lock(state->mutex);
    auth.outcome = state->last_outcome.value_or(
        VerificationOutcome{Verdict::denied, DenialReason::bad_issuer_signature});
    result.delivered = state->delivered;
  }
  auth.session_created = topology.sessions_created() > sessions_before;
  result.authorizations.push_back(auth);
  return result;
}

ScenarioResult repeat_messages(Topology& topology, std::size_t count, std::size_t payload_size) {
  Driver d(topology, "repeat");
  auto* state = topology.state();
  {
    std::lock_guard lock(state->mutex);
    state->delivered.clear();
    state->reply_expected = false;
  }
  auto result = d.run([&] {
    for (std::size_t i = 0; i < count; ++i) {
      d.step({NfType::AMF, NfType::SMF, "repeat/data", payload_size, false},
             synthetic_payload(topology.options().seed, i, payload_size));
    }
  });
  std::lock_guard lock(state->mutex);
  state->reply_expected = true;
  result.delivered = state->delivered;
  return result;
}

}  // namespace didnf::scenarios
