#include "didnf/bench.hpp"

#include <algorithm>
#include <numeric>

#include "didnf/error.hpp"

namespace didnf::bench {

namespace {

double ms(std::int64_t ns) { return static_cast<double>(ns) / 1e6; }

constexpr std::pair<ScenarioKind, std::string_view> kScenarioNames[] = {
    {ScenarioKind::ue_registration, "ue-registration"},
    {ScenarioKind::sm_context, "sm-context"},
    {ScenarioKind::repeat, "repeat"}};

constexpr std::pair<Format, std::string_view> kFormatNames[] = {
    {Format::csv, "csv"}, {Format::json, "json"}, {Format::md, "md"}};

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  for (const auto& [k, n] : kScenarioNames) {
    if (k == kind) return n;
  }
  return "?";
}

ScenarioKind parse_scenario(std::string_view text) {
  for (const auto& [k, n] : kScenarioNames) {
    if (n == text) return k;
  }
  throw Error(Errc::syntax, "unknown scenario '" + std::string(text) + "'");
}

std::string_view to_string(Format format) {
  for (const auto& [f, n] : kFormatNames) {
    if (f == format) return n;
  }
  return "?";
}

Format parse_format(std::string_view text) {
  for (const auto& [f, n] : kFormatNames) {
    if (n == text) return f;
  }
  throw Error(Errc::syntax, "unknown format '" + std::string(text) + "'");
}

std::vector<Protocol> parse_protocols(std::string_view csv) {
  std::vector<Protocol> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    auto item = csv.substr(start, comma == std::string_view::npos ? csv.npos : comma - start);
    auto p = parse_protocol(item);
    if (std::find(out.begin(), out.end(), p) != out.end()) {
      throw Error(Errc::validation, "protocol listed twice: " + std::string(item));
    }
    out.push_back(p);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void BenchConfig::validate() const {
  if (protocols.empty()) throw Error(Errc::validation, "no protocols selected");
  if (iterations < 1) throw Error(Errc::validation, "iterations must be >= 1");
  if (resolver_delay.count() < 0) throw Error(Errc::validation, "resolver delay must be >= 0");
  if (scenario == ScenarioKind::repeat && repeat_count == 0) {
    throw Error(Errc::validation, "repeat count must be >= 1");
  }
  if (script && script->steps.empty()) throw Error(Errc::validation, "script has no steps");
}

MessageSample sample_of(const DeliveryReceipt& r) {
  MessageSample s;
  s.total = r.total().count();
  s.encapsulation = r.encapsulation().count();
  s.decapsulation = r.decapsulation().count();
  s.network_and_other = r.network_and_other().count();
  s.encap_resolution = r.encap_resolution.time.count();
  s.decap_resolution = r.decap_resolution.time.count();
  s.encap_ledger_reads = r.encap_resolution.ledger_reads;
  s.decap_ledger_reads = r.decap_resolution.ledger_reads;
  return s;
}

Stats summarize(std::vector<double> v) {
  Stats s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  const auto n = v.size();
  s.median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
  return s;
}

double LatencyBreakdown::encap_resolution_share() const {
  return encapsulation.mean > 0 ? encap_resolution.mean / encapsulation.mean : 0;
}

double LatencyBreakdown::decap_resolution_share() const {
  return decapsulation.mean > 0 ? decap_resolution.mean / decapsulation.mean : 0;
}

LatencyBreakdown aggregate(Protocol protocol, int iterations,
                           const std::vector<MessageSample>& samples) {
  LatencyBreakdown b;
  b.protocol = protocol;
  b.iterations = iterations;
  b.messages = samples.size();
  auto column = [&](auto field) {
    std::vector<double> v;
    v.reserve(samples.size());
    for (const auto& s : samples) v.push_back(ms(s.*field));
    return summarize(std::move(v));
  };
  b.total = column(&MessageSample::total);
  b.encapsulation = column(&MessageSample::encapsulation);
  b.decapsulation = column(&MessageSample::decapsulation);
  b.network_and_other = column(&MessageSample::network_and_other);
  b.encap_resolution = column(&MessageSample::encap_resolution);
  b.decap_resolution = column(&MessageSample::decap_resolution);
  if (!samples.empty()) {
    double er = 0, dr = 0;
    for (const auto& s : samples) {
      er += s.encap_ledger_reads;
      dr += s.decap_ledger_reads;
    }
    b.encap_ledger_reads = er / static_cast<double>(samples.size());
    b.decap_ledger_reads = dr / static_cast<double>(samples.size());
  }
  return b;
}

ByteLedger ledger_of(const scenarios::ScenarioResult& result) {
  ByteLedger l;
  l.protocol = result.protocol;
  l.handshake_bytes = result.handshake_bytes();
  for (const auto& s : result.steps) {
    l.steps.push_back({s.index, s.step.message_type, s.step_bytes, s.cumulative_bytes});
  }
  return l;
}

bool BenchReport::failed() const {
  return std::any_of(results.begin(), results.end(), [](const auto& r) { return r.failed; });
}

const ProtocolResult* BenchReport::find(Protocol protocol) const {
  for (const auto& r : results) {
    if (r.protocol == protocol) return &r;
  }
  return nullptr;
}

namespace {

scenarios::ScenarioResult run_once(const BenchConfig& config, scenarios::Topology& topology) {
  switch (config.scenario) {
    case ScenarioKind::ue_registration:
      return scenarios::run_ue_registration(
          topology, config.script ? *config.script : scenarios::default_ue_registration_script());
    case ScenarioKind::sm_context:
      return scenarios::run_sm_context(topology);
    case ScenarioKind::repeat:
      return scenarios::repeat_messages(topology, config.repeat_count, config.repeat_payload);
  }
  throw Error(Errc::validation, "unknown scenario");
}

ProtocolResult run_protocol(const BenchConfig& config, Protocol protocol) {
  ProtocolResult out;
  out.protocol = protocol;
  std::unique_ptr<scenarios::Topology> topology;
  try {
    scenarios::TopologyOptions options;
    options.cache = config.cache;
    options.resolver_delay = config.resolver_delay;
    options.seed = config.seed;
    topology = scenarios::build_topology(protocol, options);
  } catch (const Error& e) {
    out.failed = true;
    out.failure = std::string("topology: ") + e.what();
    return out;
  }

  auto warmup = run_once(config, *topology);
  out.bytes = ledger_of(warmup);
  if (warmup.failed) {
    out.failed = true;
    out.failure = "warm-up: " + warmup.failure;
    return out;
  }
  for (int i = 0; i < config.iterations; ++i) {
    auto r = run_once(config, *topology);
    for (const auto& s : r.steps) {
      out.samples.push_back(sample_of(s.request));
      if (s.reply) out.samples.push_back(sample_of(*s.reply));
    }
    for (const auto& a : r.authorizations) out.authorizations.push_back(a.outcome.granted());
    if (r.failed) {
      out.failed = true;
      out.failure = "iteration " + std::to_string(i) + ": " + r.failure;
      break;
    }
  }
  out.latency = aggregate(protocol, config.iterations, out.samples);
  return out;
}

}  // namespace

BenchReport run_bench(const BenchConfig& config) {
  config.validate();
  BenchReport report;
  report.scenario = config.scenario;
  report.iterations = config.iterations;
  report.resolver_delay_ms = ms(config.resolver_delay.count());
  report.cache = config.cache.str();
  report.seed = config.seed;
  // Topologies are never shared across protocols.
  for (auto p : config.protocols) report.results.push_back(run_protocol(config, p));
  return report;
}

std::vector<std::string> check_contracts(const BenchReport& report, const CachePolicy& cache) {
  std::vector<std::string> v;
  for (const auto& r : report.results) {
    const std::string p(to_string(r.protocol));
    if (r.failed) v.push_back(p + ": scenario failed: " + r.failure);
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      const auto& s = r.samples[i];
      const auto where = p + " message " + std::to_string(i);
      if (s.encapsulation < 0 || s.decapsulation < 0 || s.network_and_other < 0) {
        v.push_back(where + ": negative phase duration");
      }
      if (s.encapsulation + s.decapsulation + s.network_and_other != s.total) {
        v.push_back(where + ": phases do not sum to total");
      }
      std::uint32_t want = r.protocol == Protocol::v2 ? 2 : 0;
      bool counted = r.protocol != Protocol::v2 || cache.mode == CachePolicy::Mode::none;
      if (counted && (s.encap_ledger_reads != want || s.decap_ledger_reads != want)) {
        v.push_back(where + ": ledger reads " + std::to_string(s.encap_ledger_reads) + "+" +
                    std::to_string(s.decap_ledger_reads) + ", expected " +
                    std::to_string(want) + "+" + std::to_string(want));
      }
    }
    std::size_t sum = 0;
    for (const auto& step : r.bytes.steps) {
      sum += step.step_bytes;
      if (step.cumulative_bytes != sum) {
        v.push_back(p + " step " + std::to_string(step.index) + ": cumulative bytes " +
                    std::to_string(step.cumulative_bytes) + " != prefix sum " +
                    std::to_string(sum));
      }
    }
  }
  return v;
}

SessionStats tls_baseline_session(Agent& a, Agent& b) {
  if (a.config().protocol != Protocol::tls || b.config().protocol != Protocol::tls) {
    throw Error(Errc::validation, "TLS baseline needs two agents in tls mode");
  }
  a.add_tls_peer(b.identity().did, b.endpoint(), b.certificate_pem());
  b.add_tls_peer(a.identity().did, a.endpoint(), a.certificate_pem());
  return a.connect(b.identity().did);
}

}  // namespace didnf::bench
