#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "didnf/scenarios.hpp"

namespace didnf::bench {

inline constexpr int kReportSchemaVersion = 1;

enum class ScenarioKind { ue_registration, sm_context, repeat };
enum class Format { csv, json, md };

std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_scenario(std::string_view text);  // throws Error(syntax)
std::string_view to_string(Format format);
Format parse_format(std::string_view text);  // throws Error(syntax)
std::vector<Protocol> parse_protocols(std::string_view csv);

struct BenchConfig {
  std::vector<Protocol> protocols{Protocol::v1, Protocol::v2, Protocol::tls};
  ScenarioKind scenario = ScenarioKind::ue_registration;
  int iterations = 10;  // measured runs; one extra warm-up run precedes them
  std::chrono::nanoseconds resolver_delay = std::chrono::milliseconds(14);
  CachePolicy cache;
  std::uint64_t seed = 0;
  std::optional<scenarios::ScenarioScript> script;  // ue-registration only
  std::size_t repeat_count = 20;
  std::size_t repeat_payload = 23'643;

  void validate() const;  // throws Error(validation)
};

// One delivered message, durations in nanoseconds.
struct MessageSample {
  std::int64_t total = 0;
  std::int64_t encapsulation = 0;
  std::int64_t decapsulation = 0;
  std::int64_t network_and_other = 0;
  std::int64_t encap_resolution = 0;
  std::int64_t decap_resolution = 0;
  std::uint32_t encap_ledger_reads = 0;
  std::uint32_t decap_ledger_reads = 0;

  friend bool operator==(const MessageSample&, const MessageSample&) = default;
};

MessageSample sample_of(const DeliveryReceipt& receipt);

// Milliseconds.
struct Stats {
  double mean = 0, median = 0, min = 0, max = 0;

  friend bool operator==(const Stats&, const Stats&) = default;
};

Stats summarize(std::vector<double> values);

struct LatencyBreakdown {
  Protocol protocol = Protocol::v2;
  int iterations = 0;
  std::size_t messages = 0;
  Stats total, encapsulation, decapsulation, network_and_other;
  Stats encap_resolution, decap_resolution;
  double encap_ledger_reads = 0;  // mean per message
  double decap_ledger_reads = 0;

  double encap_resolution_share() const;
  double decap_resolution_share() const;

  friend bool operator==(const LatencyBreakdown&, const LatencyBreakdown&) = default;
};

LatencyBreakdown aggregate(Protocol protocol, int iterations,
                           const std::vector<MessageSample>& samples);

struct LedgerStep {
  std::size_t index = 0;
  std::string message_type;
  std::size_t step_bytes = 0;
  std::size_t cumulative_bytes = 0;

  friend bool operator==(const LedgerStep&, const LedgerStep&) = default;
};

struct ByteLedger {
  Protocol protocol = Protocol::v2;
  std::vector<LedgerStep> steps;
  std::size_t handshake_bytes = 0;  // DID Exchange (v1) or TLS handshake

  std::size_t total() const { return steps.empty() ? 0 : steps.back().cumulative_bytes; }

  friend bool operator==(const ByteLedger&, const ByteLedger&) = default;
};

ByteLedger ledger_of(const scenarios::ScenarioResult& result);

struct ProtocolResult {
  Protocol protocol = Protocol::v2;
  LatencyBreakdown latency;
  ByteLedger bytes;
  std::vector<MessageSample> samples;
  std::vector<bool> authorizations;  // sm-context: granted per measured run
  bool failed = false;
  std::string failure;

  friend bool operator==(const ProtocolResult&, const ProtocolResult&) = default;
};

struct BenchReport {
  int schema_version = kReportSchemaVersion;
  ScenarioKind scenario = ScenarioKind::ue_registration;
  int iterations = 0;
  double resolver_delay_ms = 0;
  std::string cache;
  std::uint64_t seed = 0;
  std::vector<ProtocolResult> results;

  bool failed() const;
  const ProtocolResult* find(Protocol protocol) const;

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

// Fresh topology per protocol; a warm-up run (which also sets up connections
// and fills caches) supplies the byte ledger and is left out of the latency
// aggregates. Scenario failures are reported in the result, not thrown.
BenchReport run_bench(const BenchConfig& config);

// Count and shape contracts every report must satisfy; empty when clean.
std::vector<std::string> check_contracts(const BenchReport& report, const CachePolicy& cache);

Json to_json(const BenchReport& report);
BenchReport report_from_json(const Json& j);

std::string latency_csv(const BenchReport& report);  // protocol,phase,statistic,value
std::string bytes_csv(const BenchReport& report);    // protocol,step,message_type,step_bytes,cumulative_bytes
std::string markdown(const BenchReport& report);

// Writes the report; csv also writes "<stem>.bytes.csv" next to `path`.
// Returns the files written. Throws Error(io) when a file cannot be written.
std::vector<std::filesystem::path> write_report(const BenchReport& report, Format format,
                                                const std::filesystem::path& path);

// Mutually authenticated TLS session between two tls-mode agents, set up once.
SessionStats tls_baseline_session(Agent& a, Agent& b);

}  // namespace didnf::bench
