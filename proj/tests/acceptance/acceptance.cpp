// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "didnf/agent.hpp"
#include "didnf/bench.hpp"
#include "didnf/credentials.hpp"
#include "didnf/didcomm_v1.hpp"
#include "didnf/didcomm_v2.hpp"
#include "didnf/error.hpp"
#include "didnf/scenarios.hpp"

using namespace didnf;
using namespace std::chrono_literals;
using Steady = std::chrono::steady_clock;

namespace {

struct Check {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
  void note(const std::string& what) {
    if (!pass) return;
    if (!detail.empty()) detail += ", ";
    detail += what;
  }
};

double seconds_since(Steady::time_point start) {
  return std::chrono::duration<double>(Steady::now() - start).count();
}

std::string num(double v, int digits = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Identity registered(Vdr& vdr, const std::string& endpoint = "http://127.0.0.1:1/didcomm") {
  auto id = generate_identity("sba", endpoint);
  vdr.register_document(id.document, prove_document(id, id.document, 1));
  id.document.version = 1;
  return id;
}

std::optional<Errc> error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

// Completed v1 connection between two fresh identities, through the wire form.
struct V1Pair {
  Identity alice, bob;
  v1::ConnectionRecord a, b;
};

V1Pair v1_connect(Vdr& vdr) {
  V1Pair p{registered(vdr), registered(vdr), {}, {}};
  auto [a, invitation] = v1::create_invitation(p.alice);
  auto [b, request] =
      v1::process_invitation(p.bob, v1::ExchangeMessage::parse(invitation.serialize()));
  auto response = v1::process_request(p.alice, a, v1::ExchangeMessage::parse(request.serialize()));
  auto ack = v1::process_response(p.bob, b, v1::ExchangeMessage::parse(response.serialize()));
  v1::process_complete(a, v1::ExchangeMessage::parse(ack.serialize()));
  p.a = a;
  p.b = b;
  return p;
}

// ---- 1 -----------------------------------------------------------------------

Check envelope_round_trip() {
  Check v;
  auto start = Steady::now();
  std::mt19937_64 rng(1);
  auto vdr = std::make_shared<Vdr>();
  auto p = v1_connect(*vdr);
  Resolver ra(vdr), rb(vdr);
  std::size_t largest = 0;
  for (int i = 0; i < 100; ++i) {
    auto payload = random_bytes(rng, rng() % (64 * 1024 + 1));
    largest = std::max(largest, payload.size());
    auto w1 = v1::pack_v1(p.alice, p.a, payload).serialize();
    if (v1::unpack_v1(p.bob, p.b, v1::EnvelopeV1::parse(w1)) != payload) {
      v.fail("v1 payload " + std::to_string(i) + " differs");
    }
    auto w2 = v2::pack_v2(p.alice, p.bob.did, "t", payload, ra).serialize();
    if (v2::unpack_v2(p.bob, v2::EnvelopeV2::parse(w2), rb).body != payload) {
      v.fail("v2 payload " + std::to_string(i) + " differs");
    }
  }
  auto t = seconds_since(start);
  if (t >= 10) v.fail("took " + num(t) + " s");
  v.note("100 payloads x {v1,v2}, up to " + std::to_string(largest) + " B, " + num(t, 2) + " s");
  return v;
}

// ---- 2 -----------------------------------------------------------------------

Check tamper_evidence() {
  Check v;
  std::mt19937_64 rng(2);
  auto vdr = std::make_shared<Vdr>();
  auto p = v1_connect(*vdr);
  Resolver ra(vdr), rb(vdr);
  std::map<std::string, int> seen;
  auto check = [&](const std::string& proto, const std::function<void()>& unpack) {
    try {
      unpack();
      v.fail(proto + ": tampered envelope was delivered");
    } catch (const Error& e) {
      seen[proto + ":" + std::string(to_string(e.code()))]++;
      if (e.code() != Errc::integrity && e.code() != Errc::unauthorized) {
        v.fail(proto + ": flip gave " + std::string(to_string(e.code())));
      }
    } catch (const std::exception& e) {
      v.fail(proto + ": unexpected exception " + e.what());
    }
  };
  for (int i = 0; i < 100; ++i) {
    auto payload = random_bytes(rng, rng() % 4096);
    auto w1 = v1::pack_v1(p.alice, p.a, payload).serialize();
    auto bad1 = w1;
    bad1[rng() % bad1.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    check("v1", [&] { v1::unpack_v1(p.bob, p.b, v1::EnvelopeV1::parse(bad1)); });

    auto w2 = v2::pack_v2(p.alice, p.bob.did, "t", payload, ra).serialize();
    auto bad2 = w2;
    bad2[rng() % bad2.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    check("v2", [&] { v2::unpack_v2(p.bob, v2::EnvelopeV2::parse(bad2), rb); });
  }
  std::string tally;
  for (const auto& [k, n] : seen) tally += (tally.empty() ? "" : " ") + k + "=" + std::to_string(n);
  v.note("100 flips per protocol: " + tally);
  return v;
}

// ---- 3 -----------------------------------------------------------------------

Check vdr_ownership() {
  Check v;
  std::mt19937_64 rng(3);
  std::size_t rejected = 0, accepted = 0;
  for (int round = 0; round < 1000 && v.pass; ++round) {
    Vdr vdr;
    std::vector<Identity> owners{registered(vdr), registered(vdr)};
    std::vector<std::uint64_t> version{1, 1};  // model
    std::vector<std::optional<std::pair<DidDocument, Bytes>>> last_proof(2);
    auto intruder = registered(vdr);
    for (int op = 0; op < 8; ++op) {
      auto target = rng() % 2;
      auto& owner = owners[target];
      auto doc = vdr.read_document(owner.did).document;
      doc.service_endpoints.at(0).uri = "http://127.0.0.1:" + std::to_string(rng() % 60000) + "/x";
      const auto next = version[target] + 1;
      switch (rng() % 4) {
        case 0:
        case 1: {  // owner
          auto sig = prove_document(owner, doc, next);
          Bytes proof(sig.begin(), sig.end());
          auto got = vdr.update(owner.did, doc, proof);
          if (got != next) v.fail("owner update gave version " + std::to_string(got));
          version[target] = next;
          last_proof[target] = {doc, proof};
          ++accepted;
          break;
        }
        case 2: {  // non-owner, otherwise well-formed
          const Identity& signer = rng() % 2 ? intruder : owners[1 - target];
          auto sig = prove_document(signer, doc, next);
          auto code = error_of([&] { vdr.update(owner.did, doc, sig); });
          if (code != Errc::unauthorized) v.fail("non-owner update not rejected");
          ++rejected;
          break;
        }
        case 3: {  // replay of the owner's previous proof
          if (!last_proof[target]) break;
          auto code = error_of([&] {
            vdr.update(owner.did, last_proof[target]->first, last_proof[target]->second);
          });
          if (code != Errc::unauthorized) v.fail("replayed proof not rejected");
          ++rejected;
          break;
        }
      }
      for (int k = 0; k < 2; ++k) {
        if (vdr.read_document(owners[k].did).version != version[k]) {
          v.fail("version diverged from the sequential model");
        }
      }
    }
  }
  v.note("1000 interleavings, " + std::to_string(accepted) + " owner updates, " +
         std::to_string(rejected) + " foreign/replayed attempts rejected");
  return v;
}

// ---- 4 -----------------------------------------------------------------------

Check vc_lifecycle() {
  Check v;
  auto vdr = std::make_shared<Vdr>();
  auto nrf = registered(*vdr);
  auto amf = registered(*vdr);
  define_schema(nrf, std::string(kNfAuthorizationSchema), kNfAuthorizationAttributes, *vdr);
  create_revocation_registry(nrf, "nrf-revocations", *vdr);
  Resolver resolver(vdr);
  const std::int64_t now = 1'700'000'000;
  auto vc = issue(nrf, std::string(kNfAuthorizationSchema), "nrf-revocations", amf.did,
                  {{"nf_type", "AMF"}, {"allowed_service", "nsmf-pdusession"},
                   {"expiry", std::to_string(now + 3600)}},
                  *vdr, now);
  auto expect = [&](const std::string& what, VerificationOutcome got, didnf::Verdict want_verdict,
                    DenialReason want_reason) {
    if (got.verdict != want_verdict || got.reason != want_reason) {
      v.fail(what + " gave " + std::string(to_string(got.reason)));
    } else {
      v.note(what + "=" + (got.granted() ? "granted" : "denied/" + std::string(to_string(got.reason))));
    }
  };
  PresentationNonce n1{}, n2{};
  n1[0] = 1;
  n2[0] = 2;
  auto vp = present(amf, vc, n1);
  expect("fresh", verify_presentation(vp, n1, now, resolver, *vdr), didnf::Verdict::granted,
         DenialReason::ok);
  expect("replayed", verify_presentation(vp, n2, now, resolver, *vdr), didnf::Verdict::denied,
         DenialReason::nonce_mismatch);
  auto tampered = vp;
  tampered.credential.claims["nf_type"] = "SMF";
  expect("tampered", verify_presentation(tampered, n1, now, resolver, *vdr),
         didnf::Verdict::denied, DenialReason::bad_issuer_signature);
  revoke(nrf, vc, *vdr);
  expect("revoked", verify_presentation(present(amf, vc, n2), n2, now, resolver, *vdr),
         didnf::Verdict::denied, DenialReason::revoked);
  return v;
}

// ---- 5 -----------------------------------------------------------------------

Check resolution_counts() {
  Check v;
  {
    auto vdr = std::make_shared<Vdr>();
    auto alice = registered(*vdr), bob = registered(*vdr);
    Resolver ra(vdr), rb(vdr);  // cache none
    for (int i = 0; i < 5; ++i) {
      ResolutionTrace pack, unpack;
      auto env = v2::pack_v2(alice, bob.did, "t", to_bytes("x"), ra, &pack);
      v2::unpack_v2(bob, env, rb, &unpack);
      if (pack.ledger_reads != 2 || unpack.ledger_reads != 2) {
        v.fail("core v2 reads " + std::to_string(pack.ledger_reads) + "+" +
               std::to_string(unpack.ledger_reads));
      }
    }
    v.note("core v2 pack=2 unpack=2");
  }
  for (auto protocol : {Protocol::v1, Protocol::v2, Protocol::tls}) {
    auto vdr = std::make_shared<Vdr>();
    AgentConfig ca, cb;
    ca.nf_name = "AMF";
    cb.nf_name = "SMF";
    ca.protocol = cb.protocol = protocol;
    Agent a(ca, vdr), b(cb, vdr);
    a.start();
    b.start();
    if (protocol == Protocol::tls) bench::tls_baseline_session(a, b);
    a.send(b.identity().did, "warm", to_bytes("x"));  // v1: DID Exchange happens here
    const std::uint32_t want = protocol == Protocol::v2 ? 2 : 0;
    for (int i = 0; i < 5; ++i) {
      auto ra0 = a.resolver().snapshot_metrics().ledger_reads;
      auto rb0 = b.resolver().snapshot_metrics().ledger_reads;
      auto r = a.send(b.identity().did, "t", to_bytes("steady"));
      auto ra1 = a.resolver().snapshot_metrics().ledger_reads - ra0;
      auto rb1 = b.resolver().snapshot_metrics().ledger_reads - rb0;
      if (r.encap_resolution.ledger_reads != want || r.decap_resolution.ledger_reads != want ||
          ra1 != want || rb1 != want) {
        v.fail(std::string(to_string(protocol)) + " reads " +
               std::to_string(r.encap_resolution.ledger_reads) + "+" +
               std::to_string(r.decap_resolution.ledger_reads) + " (resolvers " +
               std::to_string(ra1) + "+" + std::to_string(rb1) + ")");
      }
    }
    v.note(std::string(to_string(protocol)) + " steady=" + std::to_string(want) + "+" +
           std::to_string(want));
  }
  return v;
}

// ---- 6 -----------------------------------------------------------------------

Check byte_curve() {
  Check v;
  auto script = scenarios::default_ue_registration_script();
  std::map<Protocol, std::vector<std::size_t>> curves;
  for (auto protocol : {Protocol::v1, Protocol::v2}) {
    std::vector<std::size_t> first;
    for (int run = 0; run < 2; ++run) {
      scenarios::TopologyOptions o;
      o.seed = 2024;
      auto t = scenarios::build_topology(protocol, o);
      auto r = scenarios::run_ue_registration(*t, script);
      if (r.failed) {
        v.fail(std::string(to_string(protocol)) + " run failed: " + r.failure);
        return v;
      }
      // Recompute the curve from the receipts alone.
      std::vector<std::size_t> recomputed, reported;
      std::size_t sum = 0;
      for (const auto& s : r.steps) {
        sum += s.request.wire_bytes + s.request.handshake_bytes;
        if (s.reply) sum += s.reply->wire_bytes + s.reply->handshake_bytes;
        recomputed.push_back(sum);
        reported.push_back(s.cumulative_bytes);
      }
      if (recomputed != reported) v.fail(std::string(to_string(protocol)) + " prefix sums differ");
      if (run == 0) {
        first = reported;
      } else if (reported != first) {
        v.fail(std::string(to_string(protocol)) + " bytes differ between runs with one seed");
      }
    }
    curves[protocol] = first;
  }
  const auto& c1 = curves[Protocol::v1];
  const auto& c2 = curves[Protocol::v2];
  if (!(c1.front() > c2.front())) v.fail("v1 <= v2 at step 0");
  if (!(c1.back() > c2.back())) v.fail("v1 <= v2 at the final step");
  v.note("step0 v1=" + std::to_string(c1.front()) + " v2=" + std::to_string(c2.front()) +
         ", final v1=" + std::to_string(c1.back()) + " v2=" + std::to_string(c2.back()));
  return v;
}

// ---- 7 -----------------------------------------------------------------------

Check crossover() {
  Check v;
  scenarios::TopologyOptions o;
  o.seed = 7;
  auto t1 = scenarios::build_topology(Protocol::v1, o);
  auto t2 = scenarios::build_topology(Protocol::v2, o);
  auto r1 = scenarios::repeat_messages(*t1, 1000);
  auto r2 = scenarios::repeat_messages(*t2, 1000);
  if (r1.failed || r2.failed) {
    v.fail("repeat run failed: " + r1.failure + r2.failure);
    return v;
  }
  std::optional<std::size_t> n;
  for (std::size_t i = 0; i < r1.steps.size(); ++i) {
    if (r2.steps[i].cumulative_bytes > r1.steps[i].cumulative_bytes) {
      n = i + 1;
      break;
    }
  }
  // Closed form from constant per-message overheads measured on steady-state
  // messages and the v1 connection set-up cost.
  const auto& m1 = r1.steps.back().request;
  const auto& m2 = r2.steps.back().request;
  const double o1 = static_cast<double>(m1.wire_bytes - m1.payload_bytes);
  const double o2 = static_cast<double>(m2.wire_bytes - m2.payload_bytes);
  const double h = static_cast<double>(r1.handshake_bytes());
  if (!n) {
    v.fail("no crossover within 1000 messages");
    return v;
  }
  if (o2 <= o1) {
    v.fail("O2 <= O1");
    return v;
  }
  const auto predicted = static_cast<long>(std::ceil(h / (o2 - o1)));
  if (std::labs(static_cast<long>(*n) - predicted) > 1) {
    v.fail("crossover " + std::to_string(*n) + " vs predicted " + std::to_string(predicted));
  }
  v.note("n=" + std::to_string(*n) + ", ceil(H/(O2-O1)) = ceil(" + num(h, 0) + "/(" + num(o2, 0) +
         "-" + num(o1, 0) + ")) = " + std::to_string(predicted));
  return v;
}

// ---- 8, 9 --------------------------------------------------------------------

struct LatencyRun {
  bench::BenchReport none, ttl;
  double seconds = 0;
};

const LatencyRun& latency_run() {
  static LatencyRun run = [] {
    LatencyRun r;
    auto start = Steady::now();
    bench::BenchConfig c;
    c.protocols = {Protocol::v1, Protocol::v2, Protocol::tls};
    c.iterations = 10;
    c.resolver_delay = 14ms;
    c.seed = 8;
    r.none = bench::run_bench(c);
    r.seconds = seconds_since(start);
    c.protocols = {Protocol::v2};
    c.cache = CachePolicy::with_ttl(60s);
    r.ttl = bench::run_bench(c);
    return r;
  }();
  return run;
}

Check latency_ordering() {
  Check v;
  const auto& run = latency_run();
  if (run.none.failed()) {
    v.fail("benchmark failed");
    return v;
  }
  for (const auto& violation : bench::check_contracts(run.none, CachePolicy::none())) {
    v.fail(violation);
  }
  const double tls = run.none.find(Protocol::tls)->latency.total.mean;
  const double v1 = run.none.find(Protocol::v1)->latency.total.mean;
  const double v2 = run.none.find(Protocol::v2)->latency.total.mean;
  if (!(tls < v1)) v.fail("tls >= v1");
  if (!(v1 < v2)) v.fail("v1 >= v2");
  if (v2 - v1 < 40) v.fail("v2 - v1 = " + num(v2 - v1, 2) + " ms < 40 ms");
  if (run.seconds >= 60) v.fail("took " + num(run.seconds) + " s");
  v.note("mean total tls=" + num(tls, 3) + " v1=" + num(v1, 3) + " v2=" + num(v2, 3) +
         " ms over " + std::to_string(run.none.find(Protocol::v2)->latency.messages) +
         " messages, " + num(run.seconds) + " s");
  return v;
}

Check resolution_dominance() {
  Check v;
  const auto& run = latency_run();
  if (run.none.failed() || run.ttl.failed()) {
    v.fail("benchmark failed");
    return v;
  }
  const auto& cold = run.none.find(Protocol::v2)->latency;
  const auto& warm = run.ttl.find(Protocol::v2)->latency;
  const double enc = cold.encap_resolution_share(), dec = cold.decap_resolution_share();
  if (enc < 0.5) v.fail("resolution/encapsulation = " + num(enc, 3));
  if (dec < 0.5) v.fail("resolution/decapsulation = " + num(dec, 3));
  const double cut = 1 - warm.encapsulation.mean / cold.encapsulation.mean;
  if (cut < 0.5) v.fail("warm cache cut encapsulation by only " + num(100 * cut) + "%");
  v.note("resolution share encap=" + num(100 * enc) + "% decap=" + num(100 * dec) +
         "%, warm ttl encap " + num(cold.encapsulation.mean, 2) + " -> " +
         num(warm.encapsulation.mean, 3) + " ms (-" + num(100 * cut) + "%)");
  return v;
}

// ---- 10 ----------------------------------------------------------------------

Check authorization_soundness() {
  Check v;
  std::mt19937_64 rng(10);
  std::size_t invalid = 0;
  std::map<std::string, int> reasons;
  for (auto protocol : {Protocol::v2, Protocol::v1, Protocol::tls}) {
    std::int64_t clock = 1'700'000'000;
    scenarios::TopologyOptions o;
    o.seed = 10;
    o.clock = [&clock] { return clock; };
    auto t = scenarios::build_topology(protocol, o);
    const auto others = std::vector<Did>{t->instance(scenarios::NfType::SMF).did,
                                         t->instance(scenarios::NfType::UDM).did,
                                         t->instance(scenarios::NfType::NRF).did};

    auto valid = scenarios::run_sm_context(*t);
    if (valid.failed || !valid.authorizations.at(0).outcome.granted() ||
        !valid.authorizations[0].session_created) {
      v.fail(std::string(to_string(protocol)) + ": valid presentation not granted");
    }
    const auto sessions = t->sessions_created();

    const int variants = protocol == Protocol::v2 ? 50 : 17;
    for (int i = 0; i < variants; ++i, ++invalid) {
      scenarios::SmContextOptions opts;
      auto pick = rng() % 10;
      auto byte = [&](std::size_t n) { return rng() % n; };
      auto mask = static_cast<std::uint8_t>(1u << (rng() % 8));
      switch (pick) {
        case 0: opts.revoke_first = true; break;
        case 1: opts.replay_previous = true; break;
        case 2:
          opts.tamper = [&](VerifiablePresentation& vp) {
            auto it = std::next(vp.credential.claims.begin(),
                                static_cast<long>(byte(vp.credential.claims.size())));
            it->second += "x";
          };
          break;
        case 3:
          opts.tamper = [&](VerifiablePresentation& vp) { vp.nonce[byte(16)] ^= mask; };
          break;
        case 4:
          opts.tamper = [&](VerifiablePresentation& vp) {
            vp.holder_signature[byte(vp.holder_signature.size())] ^= mask;
          };
          break;
        case 5:
          opts.tamper = [&](VerifiablePresentation& vp) {
            vp.credential.issuer_signature[byte(vp.credential.issuer_signature.size())] ^= mask;
          };
          break;
        case 6:
          opts.tamper = [&](VerifiablePresentation& vp) { vp.holder = others[byte(3)]; };
          break;
        case 7:
          opts.tamper = [&](VerifiablePresentation& vp) {
            vp.credential.subject = vp.holder = others[byte(2)];
          };
          break;
        case 8:
          opts.tamper = [&](VerifiablePresentation& vp) {
            vp.credential.issuer = others[byte(2)];
          };
          break;
        case 9:
          // Verification happens more than an hour after issuance.
          opts.tamper = [&](VerifiablePresentation&) { clock += 3601 + byte(1000); };
          break;
      }
      auto r = scenarios::run_sm_context(*t, opts);
      clock = 1'700'000'000;
      if (r.authorizations.empty()) {
        v.fail("variant without an authorization record");
        continue;
      }
      const auto& a = r.authorizations[0];
      reasons[std::string(to_string(a.outcome.reason))]++;
      if (a.outcome.granted() || a.session_created) {
        v.fail(std::string(to_string(protocol)) + ": invalid variant " + std::to_string(pick) +
               " was granted");
      }
    }
    if (t->sessions_created() != sessions) {
      v.fail(std::string(to_string(protocol)) + ": sessions created by invalid presentations");
    }
    auto again = scenarios::run_sm_context(*t);
    if (!again.authorizations.at(0).outcome.granted()) {
      v.fail(std::string(to_string(protocol)) + ": valid presentation denied after variants");
    }
  }
  std::string tally;
  for (const auto& [k, n] : reasons) tally += (tally.empty() ? "" : " ") + k + "=" + std::to_string(n);
  v.note(std::to_string(invalid) + " invalid variants (50 over v2), 0 sessions; " + tally);
  return v;
}

// ---- 11 ----------------------------------------------------------------------

Check transparency() {
  Check v;
  auto script = scenarios::default_ue_registration_script();
  std::vector<std::vector<Bytes>> delivered;
  for (auto protocol : {Protocol::v1, Protocol::v2, Protocol::tls}) {
    scenarios::TopologyOptions o;
    o.seed = 11;
    auto t = scenarios::build_topology(protocol, o);
    auto r = scenarios::run_ue_registration(*t, script);
    if (r.failed) v.fail(std::string(to_string(protocol)) + " failed: " + r.failure);
    delivered.push_back(r.delivered);
  }
  // What the business logic must see: each request, then its masked echo.
  std::vector<Bytes> expected;
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    auto req = scenarios::synthetic_payload(11, i, script.steps[i].payload_size);
    auto resp = req;
    for (auto& b : resp) b ^= 0xA5;
    expected.push_back(req);
    expected.push_back(resp);
  }
  const char* names[] = {"v1", "v2", "tls"};
  for (int i = 0; i < 3; ++i) {
    if (delivered[i] != expected) v.fail(std::string(names[i]) + " delivered sequence differs");
  }
  std::size_t bytes = 0;
  for (const auto& b : expected) bytes += b.size();
  v.note(std::to_string(expected.size()) + " payloads, " + std::to_string(bytes) +
         " bytes identical across v1/v2/tls");
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    Check (*run)();
  };
  const Criterion criteria[] = {
      {1, "envelope round trip", envelope_round_trip},
      {2, "tamper evidence", tamper_evidence},
      {3, "registry ownership", vdr_ownership},
      {4, "credential lifecycle", vc_lifecycle},
      {5, "resolution-count contracts", resolution_counts},
      {6, "byte-curve shape", byte_curve},
      {7, "crossover", crossover},
      {8, "latency ordering", latency_ordering},
      {9, "resolution dominance", resolution_dominance},
      {10, "authorization soundness", authorization_soundness},
      {11, "transparency", transparency},
  };
  int failed = 0;
  auto start = Steady::now();
  for (const auto& c : criteria) {
    Check v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    if (!v.pass) ++failed;
    std::printf("criterion %2d: %s  %s — %s\n", c.id, v.pass ? "PASS" : "FAIL", c.name,
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria), seconds_since(start));
  return failed == 0 ? 0 : 1;
}
