#include <cstdio>
#include <fstream>
#include <sstream>

#include "didnf/bench.hpp"
#include "didnf/error.hpp"

namespace didnf::bench {

namespace {

Json stats_json(const Stats& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"min", s.min}, {"max", s.max}};
}

Stats stats_from(const Json& j) {
  return {j.at("mean").get<double>(), j.at("median").get<double>(), j.at("min").get<double>(),
          j.at("max").get<double>()};
}

constexpr std::pair<std::string_view, Stats LatencyBreakdown::*> kPhases[] = {
    {"total", &LatencyBreakdown::total},
    {"encapsulation", &LatencyBreakdown::encapsulation},
    {"decapsulation", &LatencyBreakdown::decapsulation},
    {"network_and_other", &LatencyBreakdown::network_and_other},
    {"encap_resolution", &LatencyBreakdown::encap_resolution},
    {"decap_resolution", &LatencyBreakdown::decap_resolution}};

constexpr std::pair<std::string_view, std::int64_t MessageSample::*> kSampleTimes[] = {
    {"total_ns", &MessageSample::total},
    {"encapsulation_ns", &MessageSample::encapsulation},
    {"decapsulation_ns", &MessageSample::decapsulation},
    {"network_and_other_ns", &MessageSample::network_and_other},
    {"encap_resolution_ns", &MessageSample::encap_resolution},
    {"decap_resolution_ns", &MessageSample::decap_resolution}};

Json latency_json(const LatencyBreakdown& b) {
  Json j{{"iterations", b.iterations},
         {"messages", b.messages},
         {"encap_ledger_reads", b.encap_ledger_reads},
         {"decap_ledger_reads", b.decap_ledger_reads}};
  for (const auto& [name, field] : kPhases) j[std::string(name)] = stats_json(b.*field);
  return j;
}

LatencyBreakdown latency_from(Protocol p, const Json& j) {
  LatencyBreakdown b;
  b.protocol = p;
  b.iterations = j.at("iterations").get<int>();
  b.messages = j.at("messages").get<std::size_t>();
  b.encap_ledger_reads = j.at("encap_ledger_reads").get<double>();
  b.decap_ledger_reads = j.at("decap_ledger_reads").get<double>();
  for (const auto& [name, field] : kPhases) b.*field = stats_from(j.at(std::string(name)));
  return b;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Json to_json(const BenchReport& report) {
  Json results = Json::array();
  for (const auto& r : report.results) {
    Json steps = Json::array();
    for (const auto& s : r.bytes.steps) {
      steps.push_back({{"index", s.index},
                       {"message_type", s.message_type},
                       {"step_bytes", s.step_bytes},
                       {"cumulative_bytes", s.cumulative_bytes}});
    }
    Json samples = Json::array();
    for (const auto& s : r.samples) {
      Json row{{"encap_ledger_reads", s.encap_ledger_reads},
               {"decap_ledger_reads", s.decap_ledger_reads}};
      for (const auto& [name, field] : kSampleTimes) row[std::string(name)] = s.*field;
      samples.push_back(row);
    }
    Json entry{{"protocol", to_string(r.protocol)},
               {"latency", latency_json(r.latency)},
               {"bytes", {{"handshake_bytes", r.bytes.handshake_bytes}, {"steps", steps}}},
               {"samples", samples},
               {"authorizations", r.authorizations},
               {"failed", r.failed}};
    if (r.failed) entry["failure"] = r.failure;
    results.push_back(entry);
  }
  return {{"schema_version", report.schema_version},
          {"scenario", to_string(report.scenario)},
          {"iterations", report.iterations},
          {"resolver_delay_ms", report.resolver_delay_ms},
          {"cache", report.cache},
          {"seed", report.seed},
          {"results", results}};
}

BenchReport report_from_json(const Json& j) {
  BenchReport report;
  try {
    report.schema_version = j.at("schema_version").get<int>();
    if (report.schema_version != kReportSchemaVersion) {
      throw Error(Errc::validation,
                  "unsupported report schema version " + std::to_string(report.schema_version));
    }
    report.scenario = parse_scenario(j.at("scenario").get<std::string>());
    report.iterations = j.at("iterations").get<int>();
    report.resolver_delay_ms = j.at("resolver_delay_ms").get<double>();
    report.cache = j.at("cache").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& e : j.at("results")) {
      ProtocolResult r;
      r.protocol = parse_protocol(e.at("protocol").get<std::string>());
      r.latency = latency_from(r.protocol, e.at("latency"));
      r.bytes.protocol = r.protocol;
      r.bytes.handshake_bytes = e.at("bytes").at("handshake_bytes").get<std::size_t>();
      for (const auto& s : e.at("bytes").at("steps")) {
        r.bytes.steps.push_back({s.at("index").get<std::size_t>(),
                                 s.at("message_type").get<std::string>(),
                                 s.at("step_bytes").get<std::size_t>(),
                                 s.at("cumulative_bytes").get<std::size_t>()});
      }
      for (const auto& s : e.at("samples")) {
        MessageSample m;
        m.encap_ledger_reads = s.at("encap_ledger_reads").get<std::uint32_t>();
        m.decap_ledger_reads = s.at("decap_ledger_reads").get<std::uint32_t>();
        for (const auto& [name, field] : kSampleTimes) {
          m.*field = s.at(std::string(name)).get<std::int64_t>();
        }
        r.samples.push_back(m);
      }
      r.authorizations = e.at("authorizations").get<std::vector<bool>>();
      r.failed = e.at("failed").get<bool>();
      r.failure = e.value("failure", "");
      report.results.push_back(std::move(r));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::syntax, std::string("malformed report: ") + e.what());
  }
  return report;
}

std::string latency_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "protocol,phase,statistic,value\n";
  for (const auto& r : report.results) {
    const auto p = to_string(r.protocol);
    for (const auto& [name, field] : kPhases) {
      const Stats& s = r.latency.*field;
      out << p << ',' << name << ",mean_ms," << fixed(s.mean, 6) << '\n';
      out << p << ',' << name << ",median_ms," << fixed(s.median, 6) << '\n';
      out << p << ',' << name << ",min_ms," << fixed(s.min, 6) << '\n';
      out << p << ',' << name << ",max_ms," << fixed(s.max, 6) << '\n';
    }
    out << p << ",encapsulation,ledger_reads_mean," << fixed(r.latency.encap_ledger_reads) << '\n';
    out << p << ",decapsulation,ledger_reads_mean," << fixed(r.latency.decap_ledger_reads) << '\n';
  }
  return out.str();
}

std::string bytes_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "protocol,step,message_type,step_bytes,cumulative_bytes\n";
  for (const auto& r : report.results) {
    for (const auto& s : r.bytes.steps) {
      out << to_string(r.protocol) << ',' << s.index << ',' << s.message_type << ','
          << s.step_bytes << ',' << s.cumulative_bytes << '\n';
    }
  }
  return out.str();
}

std::string markdown(const BenchReport& report) {
  std::ostringstream out;
  out << "# Benchmark: " << to_string(report.scenario) << "\n\n"
      << "schema_version " << report.schema_version << " · iterations " << report.iterations
      << " (+1 warm-up) · resolver delay " << fixed(report.resolver_delay_ms, 1)
      << " ms · cache " << report.cache << " · seed " << report.seed << "\n\n";

  out << "## Per-message latency (mean ms)\n\n"
      << "| protocol | messages | encapsulation | of which resolution | decapsulation | "
         "of which resolution | network & other | total |\n"
      << "|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : report.results) {
    const auto& l = r.latency;
    out << "| " << to_string(r.protocol) << " | " << l.messages << " | "
        << fixed(l.encapsulation.mean) << " | " << fixed(l.encap_resolution.mean) << " ("
        << fixed(100 * l.encap_resolution_share(), 0) << "%) | " << fixed(l.decapsulation.mean)
        << " | " << fixed(l.decap_resolution.mean) << " ("
        << fixed(100 * l.decap_resolution_share(), 0) << "%) | "
        << fixed(l.network_and_other.mean) << " | " << fixed(l.total.mean) << " |\n";
  }

  out << "\n## Cumulative bytes per step\n\n| step | message |";
  for (const auto& r : report.results) out << ' ' << to_string(r.protocol) << " |";
  out << "\n|---:|---|";
  for (std::size_t i = 0; i < report.results.size(); ++i) out << "---:|";
  out << '\n';
  std::size_t rows = 0;
  for (const auto& r : report.results) rows = std::max(rows, r.bytes.steps.size());
  for (std::size_t i = 0; i < rows; ++i) {
    std::string type;
    for (const auto& r : report.results) {
      if (i < r.bytes.steps.size()) type = r.bytes.steps[i].message_type;
    }
    out << "| " << i << " | " << type << " |";
    for (const auto& r : report.results) {
      if (i < r.bytes.steps.size()) {
        out << ' ' << r.bytes.steps[i].cumulative_bytes << " |";
      } else {
        out << " – |";
      }
    }
    out << '\n';
  }
  out << "\nConnection set-up bytes:";
  for (const auto& r : report.results) {
    out << ' ' << to_string(r.protocol) << ' ' << r.bytes.handshake_bytes << ';';
  }
  out << " TLS handshake bytes are not part of the step totals.\n";

  for (const auto& r : report.results) {
    if (r.failed) out << "\n**" << to_string(r.protocol) << " FAILED:** " << r.failure << '\n';
  }
  return out.str();
}

std::vector<std::filesystem::path> write_report(const BenchReport& report, Format format,
                                                const std::filesystem::path& path) {
  auto write = [](const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw Error(Errc::io, "cannot write " + p.string());
  };
  switch (format) {
    case Format::json:
      write(path, to_json(report).dump(2) + "\n");
      return {path};
    case Format::md:
      write(path, markdown(report));
      return {path};
    case Format::csv: {
      auto bytes_path = path;
      bytes_path.replace_filename(path.stem().string() + ".bytes.csv");
      write(path, latency_csv(report));
      write(bytes_path, bytes_csv(report));
      return {path, bytes_path};
    }
  }
  throw Error(Errc::validation, "unknown format");
}

}  // namespace didnf::bench
