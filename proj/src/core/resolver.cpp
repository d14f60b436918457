#include "didnf/resolver.hpp"

#include <charconv>
#include <thread>

#include "didnf/error.hpp"

namespace didnf {

CachePolicy CachePolicy::with_ttl(std::chrono::nanoseconds ttl) {
  if (ttl.count() <= 0) throw Error(Errc::validation, "ttl must be positive");
  return {Mode::ttl, ttl};
}

CachePolicy CachePolicy::parse(std::string_view text) {
  if (text == "none") return none();
  if (text.starts_with("ttl:")) {
    auto num = text.substr(4);
    double seconds = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), seconds);
    if (ec != std::errc{} || ptr != num.data() + num.size()) {
      throw Error(Errc::syntax, "bad ttl seconds: " + std::string(num));
    }
    return with_ttl(std::chrono::duration_cast<std::chrono::nanoseconds>(
        std::chrono::duration<double>(seconds)));
  }
  throw Error(Errc::syntax, "cache policy must be 'none' or 'ttl:<secs>'");
}

std::string CachePolicy::str() const {
  if (mode == Mode::none) return "none";
  auto secs = std::chrono::duration<double>(ttl).count();
  auto s = std::to_string(secs);
  s.erase(s.find_last_not_of('0') + 1);
  if (s.back() == '.') s.pop_back();
  return "ttl:" + s;
}

Resolver::Resolver(std::shared_ptr<const Vdr> vdr, CachePolicy policy,
                   std::chrono::nanoseconds access_delay, ClockFn clock)
    : vdr_(std::move(vdr)),
      policy_(policy),
      access_delay_(access_delay),
      clock_(std::move(clock)) {
  if (!vdr_) throw Error(Errc::validation, "resolver needs a registry");
  if (policy_.mode == CachePolicy::Mode::ttl && policy_.ttl.count() <= 0) {
    throw Error(Errc::validation, "ttl must be positive");
  }
}

DidDocument Resolver::resolve(const Did& did, bool* from_cache) {
  const auto started = Clock::now();
  bool hit = false;
  auto account = [&] {
    if (from_cache) *from_cache = hit;
    std::lock_guard lock(metrics_mutex_);
    ++metrics_.resolve_calls;
    ++(hit ? metrics_.cache_hits : metrics_.ledger_reads);
    metrics_.total_resolve_time += Clock::now() - started;
  };

  if (policy_.mode == CachePolicy::Mode::ttl) {
    std::lock_guard lock(cache_mutex_);
    auto it = cache_.find(did.str());
    if (it != cache_.end() && now() - it->second.fetched < policy_.ttl) {
      hit = true;
      auto doc = it->second.document;
      account();
      return doc;
    }
  }

  const auto fetched = now();
  try {
    if (access_delay_.count() > 0) std::this_thread::sleep_for(access_delay_);
    auto doc = vdr_->read_document(did).document;
    if (policy_.mode == CachePolicy::Mode::ttl) {
      std::lock_guard lock(cache_mutex_);
      cache_.insert_or_assign(did.str(), CacheEntry{doc, fetched});
    }
    account();
    return doc;
  } catch (...) {
    account();
    throw;
  }
}

ResolverMetrics Resolver::snapshot_metrics() const {
  std::lock_guard lock(metrics_mutex_);
  return metrics_;
}

void Resolver::reset_metrics() {
  std::lock_guard lock(metrics_mutex_);
  metrics_ = {};
}

void Resolver::clear_cache() {
  std::lock_guard lock(cache_mutex_);
  cache_.clear();
}

DidDocument resolve_traced(Resolver& resolver, const Did& did, ResolutionTrace* trace) {
  if (!trace) return resolver.resolve(did);
  const auto started = std::chrono::steady_clock::now();
  bool hit = false;
  auto account = [&] {
    trace->time += std::chrono::steady_clock::now() - started;
    ++trace->calls;
    if (!hit) ++trace->ledger_reads;
  };
  try {
    auto doc = resolver.resolve(did, &hit);
    account();
    return doc;
  } catch (...) {
    account();
    throw;
  }
}

}  // namespace didnf
