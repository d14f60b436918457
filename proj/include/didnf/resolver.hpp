#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "didnf/vdr.hpp"

namespace didnf {

struct CachePolicy {
  enum class Mode { none, ttl };
  Mode mode = Mode::none;
  std::chrono::nanoseconds ttl{0};

  static CachePolicy none() { return {}; }
  static CachePolicy with_ttl(std::chrono::nanoseconds ttl);
  // "none" or "ttl:<seconds>"
  static CachePolicy parse(std::string_view text);
  std::string str() const;

  friend bool operator==(const CachePolicy&, const CachePolicy&) = default;
};

struct ResolverMetrics {
  std::uint64_t resolve_calls = 0;
  std::uint64_t ledger_reads = 0;
  std::uint64_t cache_hits = 0;
  std::chrono::nanoseconds total_resolve_time{0};
};

// DID resolution over the registry. With the default policy every call is a
// ledger read; the ttl policy serves repeated lookups from a local cache that
// is never invalidated by registry writes.
class Resolver {
 public:
  using Clock = std::chrono::steady_clock;
  using ClockFn = std::function<Clock::time_point()>;

  Resolver(std::shared_ptr<const Vdr> vdr, CachePolicy policy = {},
           std::chrono::nanoseconds access_delay = {}, ClockFn clock = {});

  // `from_cache` (optional) reports whether the ledger was skipped.
  DidDocument resolve(const Did& did, bool* from_cache = nullptr);

  const CachePolicy& policy() const { return policy_; }
  ResolverMetrics snapshot_metrics() const;
  void reset_metrics();
  void clear_cache();

 private:
  struct CacheEntry {
    DidDocument document;
    Clock::time_point fetched;
  };

  Clock::time_point now() const { return clock_ ? clock_() : Clock::now(); }

  std::shared_ptr<const Vdr> vdr_;
  CachePolicy policy_;
  std::chrono::nanoseconds access_delay_;
  ClockFn clock_;

  mutable std::mutex cache_mutex_;
  std::map<std::string, CacheEntry> cache_;

  // Updated once per call so that snapshots always satisfy
  // resolve_calls == ledger_reads + cache_hits.
  mutable std::mutex metrics_mutex_;
  ResolverMetrics metrics_;
};

// Per-operation accounting of time spent inside resolve().
struct ResolutionTrace {
  std::chrono::nanoseconds time{0};
  std::uint32_t calls = 0;
  std::uint32_t ledger_reads = 0;

  ResolutionTrace& operator+=(const ResolutionTrace& other) {
    time += other.time;
    calls += other.calls;
    ledger_reads += other.ledger_reads;
    return *this;
  }
};

DidDocument resolve_traced(Resolver& resolver, const Did& did, ResolutionTrace* trace);

}  // namespace didnf
