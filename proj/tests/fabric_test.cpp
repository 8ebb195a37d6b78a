#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "modstack/fabric/io.hpp"
#include "modstack/fabric/network.hpp"
#include "support/topologies.hpp"

using namespace modstack::fabric;
using modstack::Errc;
using modstack::Error;
using modstack::KeyExpr;

namespace {

KeyExpr K(std::string_view s) { return KeyExpr::parse(s); }

template <typename F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::InvalidDocument;
}

ProtocolParams quiet() {
  ProtocolParams p;
  p.keepalive_period_ms = 0;
  p.announce_period_ms = 0;
  return p;
}

std::uint64_t link_messages(const Network& net, LinkId l) { return net.metrics().links[index(l)].messages; }

// Every simple path between two nodes, as sets of link indices.
void simple_paths(const TopologySpec& t, const std::string& at, const std::string& to, std::set<std::string>& visited,
                  std::vector<int>& path, std::vector<std::vector<int>>& out) {
  if (at == to) {
    out.push_back(path);
    return;
  }
  visited.insert(at);
  for (int i = 0; i < static_cast<int>(t.links.size()); ++i) {
    const auto& l = t.links[i];
    std::string next;
    if (l.a == at) next = l.b;
    if (l.b == at) next = l.a;
    if (next.empty() || visited.contains(next)) continue;
    path.push_back(i);
    simple_paths(t, next, to, visited, path, out);
    path.pop_back();
  }
  visited.erase(at);
}

// Brute force: largest family of pairwise link-disjoint simple paths.
int disjoint_path_oracle(const TopologySpec& t, const std::string& a, const std::string& b) {
  std::vector<std::vector<int>> paths;
  std::set<std::string> visited;
  std::vector<int> path;
  simple_paths(t, a, b, visited, path, paths);
  int best = 0;
  std::function<void(std::size_t, std::set<int>&, int)> pick = [&](std::size_t i, std::set<int>& used, int count) {
    best = std::max(best, count);
    for (std::size_t k = i; k < paths.size(); ++k) {
      bool clash = false;
      for (int l : paths[k]) clash |= used.contains(l);
      if (clash) continue;
      for (int l : paths[k]) used.insert(l);
      pick(k + 1, used, count + 1);
      for (int l : paths[k]) used.erase(l);
    }
  };
  std::set<int> used;
  pick(0, used, 0);
  return best;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += std::log(x[i]);
    sy += std::log(y[i]);
    sxx += std::log(x[i]) * std::log(x[i]);
    sxy += std::log(x[i]) * std::log(y[i]);
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Every node declares a state publisher and a wildcard subscriber at t = 0.
std::uint64_t storm_declaration_bytes(int n, Mode mode) {
  auto t = testtopo::star(n, mode);
  t.params = quiet();
  Network net(t);
  for (int i = 0; i < n; ++i) {
    const auto node = net.node("p" + std::to_string(i));
    net.declare_endpoint(node, EndpointKind::publisher, K("robots/p" + std::to_string(i) + "/state"));
    net.declare_endpoint(node, EndpointKind::subscriber, K("robots/*/state"));
  }
  return net.run_until(from_ms(5000)).discovery_bytes;
}

}  // namespace

TEST(FabricCreate, TwoPeersOneLink) {
  TopologySpec t;
  t.nodes = {{"a", Role::peer}, {"b", Role::peer}};
  t.links = {LinkSpec{"a", "b", 1.0}};
  Network net(t);
  EXPECT_EQ(net.link_count(), 1u);
  EXPECT_TRUE(net.link_up(LinkId(0)));
  EXPECT_EQ(net.now(), SimTime{0});
  EXPECT_TRUE(net.routing_table(net.node("a")).empty());
}

TEST(FabricCreate, RejectsBadSpecs) {
  TopologySpec dangling;
  dangling.nodes = {{"a", Role::peer}};
  dangling.links = {LinkSpec{"a", "ghost", 1.0}};
  EXPECT_EQ(error_of([&] { Network n(dangling); }), Errc::DanglingLink);

  TopologySpec dup;
  dup.nodes = {{"a", Role::peer}, {"a", Role::router}};
  EXPECT_EQ(error_of([&] { Network n(dup); }), Errc::DuplicateNode);

  TopologySpec self;
  self.nodes = {{"a", Role::peer}};
  self.links = {LinkSpec{"a", "a", 1.0}};
  EXPECT_EQ(error_of([&] { Network n(self); }), Errc::InvalidLink);

  TopologySpec order;
  order.nodes = {{"a", Role::peer}, {"b", Role::peer}};
  LinkSpec l{"a", "b", 1.0};
  l.schedule = {{from_ms(10), LinkState::down}, {from_ms(10), LinkState::up}};
  order.links = {l};
  EXPECT_EQ(error_of([&] { Network n(order); }), Errc::InvalidLink);
}

TEST(FabricCreate, DisconnectedRoutedGraphIsAWarning) {
  TopologySpec t;
  t.nodes = {{"a", Role::peer}, {"b", Role::peer}};
  Network net(t);
  ASSERT_EQ(net.warnings().size(), 1u);
  EXPECT_NE(net.warnings()[0].find("DisconnectedRoutedGraph"), std::string::npos);

  t.mode = Mode::full_mesh;
  Network mesh(t);
  EXPECT_TRUE(mesh.warnings().empty());
}

TEST(FabricCreate, ScheduleAtTimeZeroAppliesImmediately) {
  TopologySpec t;
  t.nodes = {{"a", Role::peer}, {"b", Role::peer}};
  LinkSpec l{"a", "b", 1.0};
  l.schedule = {{SimTime{0}, LinkState::down}};
  t.links = {l};
  Network net(t);
  EXPECT_FALSE(net.link_up(LinkId(0)));
}

TEST(FabricCreate, MoonBaseFixtureHasTwoDisjointPathsBetweenBases) {
  const auto t = load_topology(std::string(MODSTACK_DATA_DIR) + "/topologies/moon_bases.json");
  Network net(t);
  EXPECT_TRUE(net.warnings().empty());
  const std::vector<std::string> bases{"base1", "base2", "base3"};
  for (const auto& a : bases) {
    for (const auto& b : bases) {
      if (a >= b) continue;
      EXPECT_EQ(disjoint_path_oracle(t, a, b), 2) << a << " " << b;
      EXPECT_EQ(net.edge_disjoint_paths(net.node(a), net.node(b)), 2) << a << " " << b;
    }
  }
  // the max-flow count agrees with the brute force on every node pair
  for (const auto& x : t.nodes) {
    for (const auto& y : t.nodes) {
      if (x.name >= y.name) continue;
      EXPECT_EQ(net.edge_disjoint_paths(net.node(x.name), net.node(y.name)), disjoint_path_oracle(t, x.name, y.name))
          << x.name << " " << y.name;
    }
  }
}

TEST(FabricDeclare, LoneNodeEmitsNothing) {
  TopologySpec t;
  t.nodes = {{"solo", Role::peer}};
  Network net(t);
  net.declare_endpoint(net.node("solo"), EndpointKind::subscriber, K("x/**"));
  EXPECT_EQ(net.run_until(from_ms(1000)).total_link_bytes(), 0u);
}

TEST(FabricDeclare, FullMeshReachesEveryOtherParticipant) {
  auto t = testtopo::full_peers(4, Mode::full_mesh);
  t.params = quiet();
  Network net(t);
  for (int i = 0; i < 4; ++i) net.open_session(net.node("p" + std::to_string(i)));
  net.run_until(from_ms(100));
  EXPECT_EQ(net.frames_sent(FrameKind::declare), 0u);
  net.declare_endpoint(net.node("p0"), EndpointKind::subscriber, K("x"));
  net.run_until(from_ms(200));
  EXPECT_EQ(net.frames_sent(FrameKind::declare), 3u);
}

TEST(FabricDeclare, RoutedStarSendsOneMessageToTheRouter) {
  auto t = testtopo::star(4, Mode::routed);
  t.params = quiet();
  Network net(t);
  net.declare_endpoint(net.node("p0"), EndpointKind::subscriber, K("x"));
  net.run_until(from_ms(100));
  EXPECT_EQ(net.frames_sent(FrameKind::declare), 1u);
  const auto link = net.link("router", "p0");
  EXPECT_EQ(link_messages(net, link), 1u);
}

TEST(FabricDeclare, UnknownNode) {
  auto t = testtopo::star(1, Mode::routed);
  Network net(t);
  EXPECT_EQ(error_of([&] { net.declare_endpoint(NodeId(99), EndpointKind::subscriber, K("x")); }), Errc::UnknownNode);
  EXPECT_EQ(error_of([&] { net.node("nope"); }), Errc::UnknownNode);
}

TEST(FabricPublish, NoInterestMeansSilence) {
  auto t = testtopo::star(3, Mode::routed);
  t.params = quiet();
  Network net(t);
  const auto pub = net.declare_endpoint(net.node("p0"), EndpointKind::publisher, K("a/b"));
  net.declare_endpoint(net.node("p1"), EndpointKind::subscriber, K("c/**"));
  net.run_until(from_ms(500));
  const auto before = net.metrics().total_link_bytes();
  for (int i = 0; i < 10; ++i) net.publish(pub, modstack::fabric::Bytes(100, 1));
  const auto m = net.run_until(from_ms(1000));
  EXPECT_EQ(m.total_link_bytes(), before);
  EXPECT_EQ(m.data_bytes, 0u);
}

TEST(FabricPublish, DeliveryTimeIsLatencyPlusSerialization) {
  TopologySpec t;
  t.nodes = {{"a", Role::peer}, {"b", Role::peer}};
  t.links = {LinkSpec{"a", "b", 5.0, 1'000'000.0}};
  t.params = quiet();
  Network net(t);
  SimTime got{-1};
  net.declare_endpoint(net.node("b"), EndpointKind::subscriber, K("x/**"), [&](const Sample&) { got = net.now(); });
  const auto pub = net.declare_endpoint(net.node("a"), EndpointKind::publisher, K("x/y"));
  net.run_until(from_ms(100));
  net.publish(pub, modstack::fabric::Bytes(1000, 0));
  net.run_until(from_ms(200));
  const auto frame = t.params.header_bytes + t.params.routed_data_overhead + 3 + 1000;
  const auto serialization = SimTime(static_cast<std::int64_t>(std::ceil(frame * 8000.0 / 1'000'000.0)));
  EXPECT_EQ(got, from_ms(105) + serialization);
}

TEST(FabricPublish, RouterFansOutOneCopyPerBranch) {
  auto t = testtopo::star(3, Mode::routed);
  t.params = quiet();
  Network net(t);
  const auto pub = net.declare_endpoint(net.node("p0"), EndpointKind::publisher, K("cmd/go"));
  net.declare_endpoint(net.node("p1"), EndpointKind::subscriber, K("cmd/*"));
  net.declare_endpoint(net.node("p2"), EndpointKind::subscriber, K("cmd/**"));
  net.run_until(from_ms(500));
  const auto l0 = net.link("router", "p0"), l1 = net.link("router", "p1"), l2 = net.link("router", "p2");
  const auto b0 = link_messages(net, l0), b1 = link_messages(net, l1), b2 = link_messages(net, l2);
  net.publish(pub, {1});
  const auto m = net.run_until(from_ms(1000));
  EXPECT_EQ(link_messages(net, l0) - b0, 1u);
  EXPECT_EQ(link_messages(net, l1) - b1, 1u);
  EXPECT_EQ(link_messages(net, l2) - b2, 1u);
  EXPECT_EQ(m.delivered, 2u);
}

TEST(FabricPublish, Errors) {
  auto t = testtopo::star(1, Mode::routed);
  Network net(t);
  const auto sub = net.declare_endpoint(net.node("p0"), EndpointKind::subscriber, K("x"));
  EXPECT_EQ(error_of([&] { net.publish(sub, {}); }), Errc::NotAPublisher);
  EXPECT_EQ(error_of([&] { net.publish(EndpointId(42), {}); }), Errc::UnknownEndpoint);
}

TEST(FabricPublish, SequencesIncreasePerSourceAndKey) {
  auto t = testtopo::star(2, Mode::routed);
  Network net(t);
  std::vector<std::uint64_t> seen;
  net.declare_endpoint(net.node("p1"), EndpointKind::subscriber, K("s/**"), [&](const Sample& s) {
    EXPECT_TRUE(s.key.is_concrete());
    EXPECT_EQ(s.source, "p0");
    seen.push_back(s.sequence);
  });
  const auto a = net.declare_endpoint(net.node("p0"), EndpointKind::publisher, K("s/x"));
  const auto b = net.declare_endpoint(net.node("p0"), EndpointKind::publisher, K("s/x"));
  net.run_until(from_ms(200));
  for (int i = 0; i < 5; ++i) {
    net.publish(a, {});
    net.publish(b, {});
  }
  net.run_until(from_ms(400));
  ASSERT_EQ(seen.size(), 10u);
  for (std::size_t i = 1; i < seen.size(); ++i) EXPECT_LT(seen[i - 1], seen[i]);
}

TEST(FabricLinks, EventInThePast) {
  auto t = testtopo::star(1, Mode::routed);
  Network net(t);
  net.run_until(from_ms(100));
  EXPECT_EQ(error_of([&] { net.schedule_link_event(LinkId(0), from_ms(50), LinkState::down); }), Errc::TimeInPast);
  EXPECT_EQ(error_of([&] { net.schedule_link_event(LinkId(7), from_ms(150), LinkState::down); }), Errc::UnknownLink);
  EXPECT_EQ(error_of([&] { net.run_until(from_ms(10)); }), Errc::TimeInPast);
}

TEST(FabricLinks, DownForeverCountsDrops) {
  for (auto mode : {Mode::full_mesh, Mode::routed}) {
    TopologySpec t;
    t.mode = mode;
    t.nodes = {{"a", Role::peer}, {"b", Role::peer}};
    t.links = {LinkSpec{"a", "b", 5.0}};
    Network net(t);
    net.declare_endpoint(net.node("b"), EndpointKind::subscriber, K("x"));
    const auto pub = net.declare_endpoint(net.node("a"), EndpointKind::publisher, K("x"));
    net.run_until(from_ms(500));
    net.schedule_link_event(LinkId(0), from_ms(600), LinkState::down);
    net.run_until(from_ms(700));
    const auto delivered = net.metrics().delivered;
    for (int i = 0; i < 5; ++i) net.publish(pub, {1, 2});
    const auto m = net.run_until(from_ms(1000));
    if (mode == Mode::full_mesh) {
      // the writer still believes in the reader until the lease runs out
      EXPECT_EQ(m.links[0].messages_dropped, 5u);
      EXPECT_EQ(net.dropped_samples(K("x"), from_ms(700), from_ms(1000)), 5u);
    } else {
      // routed state is purged on link loss, so nothing is even attempted
      EXPECT_EQ(m.data_bytes, 0u);
    }
    EXPECT_EQ(m.delivered, delivered);
  }
}

TEST(FabricLinks, FlapResumesDeliveryAndRoutedResyncIsCheaper) {
  std::map<Mode, std::uint64_t> resync;
  for (auto mode : {Mode::full_mesh, Mode::routed}) {
    auto t = testtopo::two_islands(3, mode);
    Network net(t);
    std::vector<EndpointId> pubs;
    for (int i = 0; i < 3; ++i) {
      for (const char* side : {"a", "b"}) {
        const auto name = std::string(side) + std::to_string(i);
        net.declare_endpoint(net.node(name), EndpointKind::subscriber, K("fleet/*/pose"));
        pubs.push_back(net.declare_endpoint(net.node(name), EndpointKind::publisher, K("fleet/" + name + "/pose")));
      }
    }
    for (int k = 1; k <= 100; ++k) {
      net.schedule(from_ms(100.0 * k), [&net, pubs] {
        for (auto p : pubs) net.publish(p, modstack::fabric::Bytes(32, 0));
      });
    }
    net.schedule_link_event(LinkId(0), from_ms(3000), LinkState::down);
    net.schedule_link_event(LinkId(0), from_ms(7000), LinkState::up);
    net.run_until(from_ms(6999));
    const auto before = net.metrics().discovery_bytes;
    const auto m = net.run_until(from_ms(10'000));
    resync[mode] = m.discovery_bytes - before;
    ASSERT_EQ(m.recoveries.size(), 1u);
    EXPECT_GE(m.recoveries[0].recovery_ms, 0.0) << to_string(mode);
    EXPECT_GT(m.recoveries[0].flows, 0u);
    EXPECT_GT(net.remote_deliveries_between(from_ms(9000), from_ms(10'000)), 0u);
  }
  EXPECT_LT(resync[Mode::routed], resync[Mode::full_mesh]);
}

TEST(FabricRun, FreshNetworkHasZeroMetrics) {
  auto t = testtopo::star(3, Mode::routed);
  Network net(t);
  const auto m = net.run_until(SimTime{0});
  EXPECT_EQ(m.total_link_bytes(), 0u);
  EXPECT_EQ(m.published, 0u);
  EXPECT_EQ(m.delivered, 0u);
  EXPECT_EQ(m.dropped, 0u);
  EXPECT_EQ(m.peak_kbps, 0.0);
  EXPECT_EQ(m.mean_latency_ms, 0.0);
  for (const auto& n : m.nodes) {
    EXPECT_EQ(n.bytes_sent, 0u);
    EXPECT_EQ(n.startup_bytes, 0.0);
  }
}

TEST(FabricRun, EventsAtTheSameTimeRunInInsertionOrder) {
  auto t = testtopo::star(1, Mode::routed);
  Network net(t);
  std::vector<int> order;
  for (int i = 0; i < 5; ++i) net.schedule(from_ms(10), [&order, i] { order.push_back(i); });
  net.run_until(from_ms(10));
  EXPECT_EQ(order, (std::vector<int>{0, 1, 2, 3, 4}));
}

namespace {

struct RunResult {
  FabricMetrics metrics;
  std::uint64_t digest;
};

RunResult lossy_run(Mode mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto t = testtopo::random_routed(rng, mode);
  for (auto& l : t.links) l.loss = 0.05;
  t.seed = seed;
  Network net(t);
  std::vector<EndpointId> pubs;
  for (std::size_t i = 0; i < net.node_count(); ++i) {
    const auto n = NodeId(i);
    net.declare_endpoint(n, EndpointKind::subscriber, K("data/**"));
    pubs.push_back(net.declare_endpoint(n, EndpointKind::publisher, K("data/" + net.node_name(n))));
  }
  for (int k = 1; k <= 20; ++k) {
    net.schedule(from_ms(50.0 * k), [&net, pubs] {
      for (auto p : pubs) net.publish(p, {1, 2, 3, 4});
    });
  }
  net.schedule_link_event(LinkId(0), from_ms(400), LinkState::down);
  net.schedule_link_event(LinkId(0), from_ms(700), LinkState::up);
  auto m = net.run_until(from_ms(2000));
  return {m, net.trace_digest()};
}

}  // namespace

TEST(FabricProperties, Determinism) {
  for (auto mode : {Mode::full_mesh, Mode::routed}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto a = lossy_run(mode, seed);
      const auto b = lossy_run(mode, seed);
      EXPECT_EQ(a.metrics, b.metrics);
      EXPECT_EQ(a.digest, b.digest);
      EXPECT_EQ(metrics_summary(a.metrics).dump(), metrics_summary(b.metrics).dump());
    }
  }
}

TEST(FabricProperties, ConservationAndAudit) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const auto mode = trial % 2 ? Mode::routed : Mode::full_mesh;
    const auto t = testtopo::random_routed(rng, mode);
    Network net(t);
    net.record_deliveries(true);
    const std::vector<std::string> sub_keys{"data/**", "data/*/x", "data/n0/*", "other/**", "*/n1/x"};
    const std::vector<std::string> pub_keys{"data/n0/x", "data/n1/x", "data/r0/y", "other/z"};
    std::uniform_int_distribution<std::size_t> sk(0, sub_keys.size() - 1), pk(0, pub_keys.size() - 1);
    std::vector<KeyExpr> subs, pub_of;
    std::vector<EndpointId> pubs;
    for (std::size_t i = 0; i < net.node_count(); ++i) {
      const auto n = NodeId(i);
      subs.push_back(K(sub_keys[sk(rng)]));
      net.declare_endpoint(n, EndpointKind::subscriber, subs.back());
      pub_of.push_back(K(pub_keys[pk(rng)]));
      pubs.push_back(net.declare_endpoint(n, EndpointKind::publisher, pub_of.back()));
    }
    net.run_until(from_ms(2000));
    constexpr int kRounds = 5;
    for (int round = 0; round < kRounds; ++round) {
      for (auto p : pubs) net.publish(p, {7});
      net.run_until(net.now() + from_ms(300));
    }
    std::uint64_t expected = 0;
    for (const auto& pk_ : pub_of) {
      for (const auto& s : subs) expected += modstack::matches(s, pk_) ? kRounds : 0;
    }
    for (const auto& d : net.deliveries()) {
      EXPECT_TRUE(modstack::intersects(d.subscriber_key, d.sample_key));
    }
    const auto m = net.metrics();
    EXPECT_EQ(m.published, kRounds * pubs.size());
    EXPECT_EQ(m.dropped, 0u);
    EXPECT_EQ(m.delivered, expected) << "trial " << trial << " " << to_string(mode);
    EXPECT_EQ(m.delivered, net.deliveries().size());
  }
}

TEST(FabricProperties, LossyRunsNeverOverDeliver) {
  for (auto mode : {Mode::full_mesh, Mode::routed}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto r = lossy_run(mode, seed);
      std::uint64_t nodes = r.metrics.nodes.size();
      EXPECT_LE(r.metrics.delivered, r.metrics.published * nodes);
      EXPECT_GT(r.metrics.dropped, 0u);
    }
  }
}

TEST(FabricProperties, DeclarationScaling) {
  const std::vector<double> sizes{2, 4, 8, 16};
  for (auto mode : {Mode::full_mesh, Mode::routed}) {
    std::vector<double> bytes;
    for (double n : sizes) bytes.push_back(static_cast<double>(storm_declaration_bytes(static_cast<int>(n), mode)));
    const double k = slope(sizes, bytes);
    if (mode == Mode::full_mesh) {
      EXPECT_GE(k, 1.8);
    } else {
      EXPECT_LE(k, 1.2);
    }
  }
}

TEST(FabricProperties, BandwidthCapPerWindow) {
  for (auto mode : {Mode::full_mesh, Mode::routed}) {
    auto t = testtopo::star(6, mode, 2.0, 300.0);
    for (auto& l : t.links) l.medium = "air";
    Network net(t);
    std::vector<EndpointId> pubs;
    for (int i = 0; i < 6; ++i) {
      const auto n = net.node("p" + std::to_string(i));
      net.declare_endpoint(n, EndpointKind::subscriber, K("x/**"));
      pubs.push_back(net.declare_endpoint(n, EndpointKind::publisher, K("x/" + std::to_string(i))));
    }
    for (int k = 1; k <= 200; ++k) {
      net.schedule(from_ms(20.0 * k), [&net, pubs] {
        for (auto p : pubs) net.publish(p, modstack::fabric::Bytes(200, 0));
      });
    }
    const auto m = net.run_until(from_ms(5000));
    for (const auto& u : net.channel_usage()) {
      EXPECT_LE(u.peak_bytes_per_window, u.capacity_bytes_per_window * (1 + 1e-9)) << u.channel;
    }
    EXPECT_GT(m.dropped, 0u);  // the offered load exceeds the medium
    for (const auto& l : m.links) EXPECT_LE(l.peak_kbps, 300.0 * (1 + 1e-9));
  }
}

TEST(FabricIo, TopologyRoundTrip) {
  const auto t = load_topology(std::string(MODSTACK_DATA_DIR) + "/topologies/moon_bases.json");
  const auto again = topology_from_json(topology_to_json(t));
  EXPECT_EQ(topology_to_json(again).dump(), topology_to_json(t).dump());
  EXPECT_EQ(t.nodes.size(), 9u);
  EXPECT_EQ(error_of([] { topology_from_json(json{{"nodes", json::array({{{"name", "a"}, {"role", "king"}}})}}); }),
            Errc::InvalidDocument);
}

TEST(FabricIo, CsvHasOneRowPerNodeAndLink) {
  auto t = testtopo::star(3, Mode::routed);
  Network net(t);
  const auto m = net.run_until(from_ms(10));
  const auto nodes = node_metrics_csv(m), links = link_metrics_csv(m);
  EXPECT_EQ(std::count(nodes.begin(), nodes.end(), '\n'), 1 + 4);
  EXPECT_EQ(std::count(links.begin(), links.end(), '\n'), 1 + 3);
}
