#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "modstack/keyspace.hpp"

namespace modstack::fabric {

/// Simulated clock. Never coupled to wall time.
using SimTime = std::chrono::microseconds;

inline constexpr double to_ms(SimTime t) { return static_cast<double>(t.count()) / 1000.0; }
inline SimTime from_ms(double ms) { return SimTime(std::llround(ms * 1000.0)); }

using Bytes = std::vector<std::uint8_t>;

enum class NodeId : std::uint32_t {};
enum class LinkId : std::uint32_t {};
enum class SessionId : std::uint32_t {};
enum class EndpointId : std::uint32_t {};

template <typename Id>
constexpr std::uint32_t index(Id id) noexcept {
  return static_cast<std::uint32_t>(id);
}

enum class Role { peer, client, router };
enum class Mode { full_mesh, routed };
enum class EndpointKind { subscriber, publisher };
enum class LinkState { up, down };
enum class SampleKind { put, del, query, reply };

struct NodeSpec {
  std::string name;
  Role role = Role::peer;
};

struct LinkEvent {
  SimTime at{};
  LinkState state = LinkState::up;
};

struct LinkSpec {
  std::string a;
  std::string b;
  double latency_ms = 0.0;
  double bandwidth_kbps = 100'000.0;
  double loss = 0.0;
  std::vector<LinkEvent> schedule;
  /// Links naming the same medium share one transmitter (shared airtime).
  std::string medium;
};

/// Wire-cost and timing constants of the two discovery regimes.
struct ProtocolParams {
  std::uint32_t header_bytes = 24;
  // full_mesh: per-participant discovery, one unicast per remote participant
  std::uint32_t endpoint_info_bytes = 160;
  std::uint32_t announce_bytes = 240;
  std::uint32_t mesh_data_overhead = 40;
  double announce_period_ms = 3000.0;
  double lease_ms = 3000.0;
  // routed: node-aggregated declarations, router-owned state
  std::uint32_t declare_bytes = 8;
  std::uint32_t entry_bytes = 4;
  std::uint32_t routed_data_overhead = 16;
  double keepalive_period_ms = 1000.0;
  // transport
  double queue_limit_ms = 500.0;
  double retransmit_ms = 200.0;
  /// Flows that crossed a link this long before it failed must recover after it returns.
  double recovery_lookback_ms = 2000.0;

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

struct TopologySpec {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  Mode mode = Mode::routed;
  std::uint64_t seed = 0;
  ProtocolParams params;
};

struct Sample {
  KeyExpr key;
  Bytes payload;
  SampleKind kind = SampleKind::put;
  std::string source;
  std::uint64_t sequence = 0;
  SimTime timestamp{};
};

/// Interest entries known at one node: (key, kind) -> next hops.
struct RoutingTable {
  std::map<std::pair<KeyExpr, EndpointKind>, std::set<std::string>> entries;
  bool empty() const { return entries.empty(); }
};

struct NodeMetrics {
  std::string node;
  double startup_time_ms = 0.0;  // -1 when some subscriber never received its first remote sample
  double startup_bytes = 0.0;
  double stutter_window_ms = 0.0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t deliveries = 0;
  double median_latency_ms = 0.0;
  friend bool operator==(const NodeMetrics&, const NodeMetrics&) = default;
};

struct LinkMetrics {
  std::string link;
  std::uint64_t bytes_transferred = 0;
  std::uint64_t messages = 0;
  std::uint64_t messages_dropped = 0;
  double peak_kbps = 0.0;
  friend bool operator==(const LinkMetrics&, const LinkMetrics&) = default;
};

struct RecoveryRecord {
  std::string link;
  double down_ms = 0.0;
  double up_ms = 0.0;
  double recovery_ms = -1.0;  // -1 while some interrupted flow has not delivered again
  std::uint64_t flows = 0;
  friend bool operator==(const RecoveryRecord&, const RecoveryRecord&) = default;
};

struct FabricMetrics {
  double now_ms = 0.0;
  std::vector<NodeMetrics> nodes;
  std::vector<LinkMetrics> links;
  double mean_latency_ms = 0.0;
  double peak_kbps = 0.0;
  std::vector<RecoveryRecord> recoveries;
  std::uint64_t published = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t discovery_bytes = 0;
  std::uint64_t maintenance_bytes = 0;
  std::uint64_t data_bytes = 0;
  double startup_end_ms = 0.0;
  double startup_phase_bytes = 0.0;
  friend bool operator==(const FabricMetrics&, const FabricMetrics&) = default;

  const NodeMetrics* node(const std::string& name) const {
    for (const auto& n : nodes) {
      if (n.node == name) return &n;
    }
    return nullptr;
  }
  std::uint64_t total_link_bytes() const {
    std::uint64_t s = 0;
    for (const auto& l : links) s += l.bytes_transferred;
    return s;
  }
};

inline const char* to_string(Mode m) { return m == Mode::full_mesh ? "full_mesh" : "routed"; }
inline const char* to_string(Role r) {
  switch (r) {
    case Role::peer: return "peer";
    case Role::client: return "client";
    case Role::router: return "router";
  }
  return "peer";
}
inline const char* to_string(EndpointKind k) { return k == EndpointKind::subscriber ? "subscriber" : "publisher"; }

}  // namespace modstack::fabric
