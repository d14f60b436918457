// bench: runs a scenario over v1, v2 and the TLS baseline and reports
// per-phase latency and per-step bytes.
#include <CLI11.hpp>

#include <chrono>
#include <iostream>

#include "didnf/bench.hpp"
#include "didnf/error.hpp"

int main(int argc, char** argv) {
  using namespace didnf;

  CLI::App app{"DID-based NF communication benchmark"};
  std::string protocols = "v1,v2,tls";
  std::string scenario = "ue-registration";
  int iterations = 10;
  double delay_ms = 14;
  std::string cache = "none";
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "md";
  std::string script;
  std::size_t repeat_count = 20;
  std::size_t repeat_payload = 23'643;

  app.add_option("--protocols", protocols, "comma-separated subset of v1,v2,tls")
      ->capture_default_str();
  app.add_option("--scenario", scenario, "ue-registration | sm-context | repeat")
      ->capture_default_str();
  app.add_option("--iterations", iterations, "measured runs (a warm-up run is added)")
      ->capture_default_str();
  app.add_option("--resolver-delay-ms", delay_ms, "delay per ledger read")->capture_default_str();
  app.add_option("--cache", cache, "none | ttl:<secs>")->capture_default_str();
  app.add_option("--seed", seed, "seed for identities and payloads")->capture_default_str();
  app.add_option("--out", out, "output path (stdout when omitted)");
  app.add_option("--format", format, "csv | json | md")->capture_default_str();
  app.add_option("--script", script, "UE-registration script file (JSON)");
  app.add_option("--repeat-count", repeat_count, "messages per repeat run")->capture_default_str();
  app.add_option("--repeat-payload", repeat_payload, "payload bytes per repeat message")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  bench::BenchConfig config;
  bench::Format fmt;
  try {
    config.protocols = bench::parse_protocols(protocols);
    config.scenario = bench::parse_scenario(scenario);
    config.iterations = iterations;
    if (delay_ms < 0) throw Error(Errc::validation, "--resolver-delay-ms must be >= 0");
    config.resolver_delay = std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::duration<double, std::milli>(delay_ms));
    config.cache = CachePolicy::parse(cache);
    config.seed = seed;
    if (!script.empty()) config.script = scenarios::load_script(script);
    config.repeat_count = repeat_count;
    config.repeat_payload = repeat_payload;
    config.validate();
    fmt = bench::parse_format(format);
  } catch (const Error& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return 2;
  }

  try {
    auto report = bench::run_bench(config);
    if (out.empty()) {
      switch (fmt) {
        case bench::Format::json: std::cout << bench::to_json(report).dump(2) << "\n"; break;
        case bench::Format::md: std::cout << bench::markdown(report); break;
        case bench::Format::csv:
          std::cout << bench::latency_csv(report) << "\n" << bench::bytes_csv(report);
          break;
      }
    } else {
      for (const auto& p : bench::write_report(report, fmt, out)) {
        std::cerr << "wrote " << p.string() << "\n";
      }
    }
    auto violations = bench::check_contracts(report, config.cache);
    for (const auto& v : violations) std::cerr << "bench: contract violated: " << v << "\n";
    return violations.empty() ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "bench: " << e.what() << "\n";
    return 1;
  }
}
