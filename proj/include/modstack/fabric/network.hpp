#pragma once

// Deterministic discrete-event model of the data fabric.
//
// Two discovery/routing regimes share one transport model:
//
//  * full_mesh: every session is a participant. Each endpoint declaration is
//    unicast to every other participant, participants re-announce themselves
//    periodically, and publishers unicast one copy per remote participant that
//    holds a matching reader. Non-participant forwarding is plain relaying.
//  * routed: declarations are aggregated per node and sent only to adjacent
//    routers/peers. Routers own all routing state (path-vector between
//    routers), push interest to adjacent publishers, and forward one copy per
//    downstream branch. Publishers without remote interest stay silent.
//
// Links are half-duplex channels; links naming the same medium share a single
// transmitter. Each hop costs queueing + serialization + latency and may drop
// the frame with the link's loss probability (seeded, deterministic).

#include <algorithm>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "modstack/error.hpp"
#include "modstack/fabric/types.hpp"
#include "modstack/keyspace.hpp"

namespace modstack::fabric {

enum class FrameKind : std::uint8_t { announce, declare, undeclare, interest, summary, keepalive, data };
enum class Traffic : std::uint8_t { discovery, maintenance, data };

struct DeliveryRecord {
  SimTime at{};
  EndpointId subscriber{};
  EndpointId publisher{};
  KeyExpr subscriber_key;
  KeyExpr sample_key;
  SimTime latency{};
  bool remote = false;
};

struct ChannelUsage {
  std::string channel;
  double capacity_bytes_per_window = 0.0;  // per 100 ms
  double peak_bytes_per_window = 0.0;
};

class Network {
 public:
  using Callback = std::function<void(const Sample&)>;

  static constexpr SimTime kBucket{10'000};     // 10 ms accounting buckets
  static constexpr int kBucketsPerWindow = 10;  // 100 ms windows

  explicit Network(TopologySpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
    build();
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  // ---- topology -----------------------------------------------------------

  Mode mode() const noexcept { return spec_.mode; }
  SimTime now() const noexcept { return now_; }
  const TopologySpec& spec() const noexcept { return spec_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t link_count() const noexcept { return links_.size(); }

  NodeId node(std::string_view name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].spec.name == name) return NodeId(i);
    }
    throw Error(Errc::UnknownNode, std::string(name));
  }
  const std::string& node_name(NodeId n) const { return nodes_.at(index(n)).spec.name; }
  Role role(NodeId n) const { return nodes_.at(index(n)).spec.role; }

  /// The `nth` declared link joining `a` and `b` (either orientation).
  LinkId link(std::string_view a, std::string_view b, std::size_t nth = 0) const {
    for (std::size_t i = 0; i < links_.size(); ++i) {
      const auto& s = links_[i].spec;
      if ((s.a == a && s.b == b) || (s.a == b && s.b == a)) {
        if (nth-- == 0) return LinkId(i);
      }
    }
    throw Error(Errc::UnknownLink, std::string(a) + "--" + std::string(b));
  }
  bool link_up(LinkId l) const { return links_.at(index(l)).up; }
  std::string link_name(LinkId l) const { return link_label(index(l)); }

  /// Maximum number of pairwise link-disjoint paths between two nodes.
  int edge_disjoint_paths(NodeId from, NodeId to) const {
    if (from == to) return 0;
    const auto n = nodes_.size();
    std::vector<std::vector<int>> cap(n, std::vector<int>(n, 0));
    for (const auto& l : links_) {
      cap[index(l.a)][index(l.b)] += 1;
      cap[index(l.b)][index(l.a)] += 1;
    }
    int flow = 0;
    while (true) {
      std::vector<int> parent(n, -1);
      parent[index(from)] = static_cast<int>(index(from));
      std::queue<std::size_t> q;
      q.push(index(from));
      while (!q.empty() && parent[index(to)] < 0) {
        const auto u = q.front();
        q.pop();
        for (std::size_t v = 0; v < n; ++v) {
          if (parent[v] < 0 && cap[u][v] > 0) {
            parent[v] = static_cast<int>(u);
            q.push(v);
          }
        }
      }
      if (parent[index(to)] < 0) return flow;
      for (auto v = index(to); v != index(from); v = static_cast<std::uint32_t>(parent[v])) {
        const auto u = static_cast<std::uint32_t>(parent[v]);
        cap[u][v] -= 1;
        cap[v][u] += 1;
      }
      ++flow;
    }
  }

  // ---- participants and endpoints ------------------------------------------

  SessionId open_session(NodeId n, std::string name = {}) {
    check_node(n);
    const SessionId id = SessionId(sessions_.size());
    if (name.empty()) name = node_name(n) + "#" + std::to_string(index(id));
    sessions_.push_back(SessionState{n, std::move(name)});
    nodes_[index(n)].sessions.push_back(id);
    if (!nodes_[index(n)].default_session) nodes_[index(n)].default_session = id;
    if (spec_.mode == Mode::full_mesh) mesh_open(id);
    return id;
  }

  void close_session(SessionId s) {
    auto& st = session(s);
    if (!st.live) return;
    for (auto e : std::vector<EndpointId>(st.endpoints)) undeclare(e);
    st.live = false;
    if (spec_.mode == Mode::full_mesh) {
      for (auto& other : sessions_) {
        other.known_readers.erase(s);
        other.met.erase(s);
        other.sent.erase(s);
        ++other.knowledge_version;
      }
    }
  }

  EndpointId declare_endpoint(SessionId s, EndpointKind kind, const KeyExpr& key, Callback cb = {}) {
    auto& st = session(s);
    if (!st.live) throw Error(Errc::UnknownSession, "session is closed");
    if (key.empty()) throw Error(Errc::EmptyKey, "endpoint key");
    const EndpointId id = EndpointId(endpoints_.size());
    endpoints_.push_back(EndpointState{id, s, st.node, kind, key, true, now_, std::move(cb)});
    st.endpoints.push_back(id);
    auto& node = nodes_[index(st.node)];
    if (!node.first_declaration) node.first_declaration = now_;
    if (!first_declaration_) first_declaration_ = now_;
    if (spec_.mode == Mode::full_mesh) {
      mesh_declare(id);
    } else {
      routed_local_ref(st.node, kind, key, +1);
    }
    return id;
  }

  /// Declares on the node's default session.
  EndpointId declare_endpoint(NodeId n, EndpointKind kind, const KeyExpr& key, Callback cb = {}) {
    check_node(n);
    auto& node = nodes_[index(n)];
    if (!node.default_session) node.default_session = open_session(n, node.spec.name);
    return declare_endpoint(*node.default_session, kind, key, std::move(cb));
  }

  void undeclare(EndpointId e) {
    auto& ep = endpoint(e);
    if (!ep.live) return;
    ep.live = false;
    auto& st = sessions_[index(ep.session)];
    std::erase(st.endpoints, e);
    for (auto& l : links_) l.pending.erase_endpoint(e);
    if (spec_.mode == Mode::full_mesh) {
      mesh_undeclare(e);
    } else {
      routed_local_ref(ep.node, ep.kind, ep.key, -1);
    }
  }

  /// Publishes on the endpoint's key, or on `key` when given; `key` must be
  /// concrete and covered by the publisher's declaration.
  void publish(EndpointId e, Bytes payload, SampleKind kind = SampleKind::put, const std::optional<KeyExpr>& key = std::nullopt) {
    if (index(e) >= endpoints_.size() || !endpoints_[index(e)].live) {
      throw Error(Errc::UnknownEndpoint, "endpoint " + std::to_string(index(e)));
    }
    auto& ep = endpoints_[index(e)];
    if (ep.kind != EndpointKind::publisher) throw Error(Errc::NotAPublisher, ep.key.str());
    if (key && (!key->is_concrete() || !matches(ep.key, *key))) {
      throw Error(Errc::NotAPublisher, key->str() + " is outside " + ep.key.str());
    }
    auto& node = nodes_[index(ep.node)];
    auto sample = std::make_shared<Sample>();
    sample->key = key ? *key : ep.key;
    sample->payload = std::move(payload);
    sample->kind = kind;
    sample->source = node.spec.name;
    sample->sequence = ++node.sequences[ep.key.str()];
    sample->timestamp = now_;
    ++published_;
    ep.last_publish = now_;
    mix(0x50, index(e), sample->sequence);
    if (publish_hook_) publish_hook_(e, *sample);

    // same-node subscribers, one engine turn later
    for (const auto& sid : node.sessions) {
      for (auto sub : sessions_[index(sid)].endpoints) {
        const auto& s = endpoints_[index(sub)];
        if (s.kind == EndpointKind::subscriber && matches(s.key, sample->key)) {
          at(now_, [this, sub, e, sample] { deliver(sub, e, sample, {}, false); });
        }
      }
    }
    if (spec_.mode == Mode::full_mesh) {
      mesh_publish(ep, sample);
    } else {
      node.seen.insert({index(e), sample->sequence});
      routed_forward(ep.node, std::nullopt, e, sample, {});
    }
  }

  // ---- time -----------------------------------------------------------------

  void schedule_link_event(LinkId l, SimTime when, LinkState state) {
    if (index(l) >= links_.size()) throw Error(Errc::UnknownLink, "link " + std::to_string(index(l)));
    if (when < now_) throw Error(Errc::TimeInPast, "link event at " + std::to_string(to_ms(when)) + " ms");
    at(when, [this, l, state] { apply_link_state(l, state); });
  }

  /// Runs `fn` at simulated time `when` (component timers, scripted events).
  void schedule(SimTime when, std::function<void()> fn) {
    if (when < now_) throw Error(Errc::TimeInPast, "timer at " + std::to_string(to_ms(when)) + " ms");
    at(when, std::move(fn));
  }

  FabricMetrics run_until(SimTime t) {
    if (t < now_) throw Error(Errc::TimeInPast, "run_until " + std::to_string(to_ms(t)) + " ms");
    while (!queue_.empty() && queue_.front().at <= t) {
      std::pop_heap(queue_.begin(), queue_.end(), Later{});
      Event ev = std::move(queue_.back());
      queue_.pop_back();
      now_ = ev.at;
      ev.fn();
    }
    now_ = t;
    return metrics();
  }

  // ---- inspection -------------------------------------------------------------

  RoutingTable routing_table(NodeId n) const {
    check_node(n);
    RoutingTable out;
    const auto& node = nodes_[index(n)];
    if (spec_.mode == Mode::routed) {
      for (const auto& [key, origins] : node.subs) {
        for (const auto& [origin, route] : origins) {
          if (auto hop = best_hop(route); hop && *hop != n) {
            out.entries[{key, EndpointKind::subscriber}].insert(node_name(*hop));
          }
        }
      }
      for (const auto& [nb, keys] : node.pubs_by) {
        for (const auto& k : keys) out.entries[{k, EndpointKind::publisher}].insert(node_name(nb));
      }
    } else {
      for (const auto& sid : node.sessions) {
        const auto& st = sessions_[index(sid)];
        if (!st.live) continue;
        for (const auto& [remote, readers] : st.known_readers) {
          const auto dst = sessions_[index(remote)].node;
          if (dst == n) continue;
          const auto hop = next_hop(n, dst);
          for (auto r : readers) {
            out.entries[{endpoints_[index(r)].key, EndpointKind::subscriber}].insert(hop ? node_name(*hop) : "?");
          }
        }
      }
    }
    return out;
  }

  void record_deliveries(bool on) { record_deliveries_ = on; }
  /// Instrumentation: sees every sample as it is published; declares nothing.
  void on_publish(std::function<void(EndpointId, const Sample&)> fn) { publish_hook_ = std::move(fn); }
  const std::vector<DeliveryRecord>& deliveries() const noexcept { return delivery_log_; }

  /// Transmissions (per hop) of a frame kind so far.
  std::uint64_t frames_sent(FrameKind k) const { return frames_by_kind_[static_cast<std::size_t>(k)]; }
  std::uint64_t bytes_of(Traffic t) const { return bytes_by_traffic_[static_cast<std::size_t>(t)]; }
  std::uint64_t trace_digest() const noexcept { return digest_; }

  std::vector<ChannelUsage> channel_usage() const {
    std::vector<ChannelUsage> out;
    for (const auto& c : channels_) {
      ChannelUsage u{c.name, c.kbps * 1000.0 / 8.0 * 0.1, 0.0};
      u.peak_bytes_per_window = peak_window(c.buckets);
      out.push_back(u);
    }
    return out;
  }

  /// Median one-way latency of remote deliveries with delivery time in [from, to).
  double median_latency_ms(SimTime from, SimTime to) const {
    std::vector<SimTime> lat;
    for (const auto& n : nodes_) {
      for (const auto& [t, l] : n.remote_deliveries) {
        if (t >= from && t < to) lat.push_back(l);
      }
    }
    return lat.empty() ? 0.0 : to_ms(median(lat));
  }

  std::uint64_t remote_deliveries_between(SimTime from, SimTime to) const {
    std::uint64_t c = 0;
    for (const auto& n : nodes_) {
      for (const auto& [t, l] : n.remote_deliveries) c += (t >= from && t < to);
    }
    return c;
  }

  /// Data samples on keys matched by `pattern` lost anywhere in [from, to).
  std::uint64_t dropped_samples(const KeyExpr& pattern, SimTime from, SimTime to) const {
    std::uint64_t c = 0;
    for (const auto& [t, key] : sample_drops_) {
      if (t >= from && t < to && matches(pattern, key)) ++c;
    }
    return c;
  }

  FabricMetrics metrics() const {
    FabricMetrics m;
    m.now_ms = to_ms(now_);
    m.published = published_;
    m.delivered = delivered_;
    m.dropped = dropped_;
    m.discovery_bytes = bytes_of(Traffic::discovery);
    m.maintenance_bytes = bytes_of(Traffic::maintenance);
    m.data_bytes = bytes_of(Traffic::data);
    m.mean_latency_ms = latency_count_ ? to_ms(latency_sum_) / static_cast<double>(latency_count_) : 0.0;
    m.peak_kbps = peak_window(global_buckets_) * 8.0 / 1000.0 / 0.1;

    const auto startup = startup_completion();
    SimTime startup_end = first_declaration_.value_or(SimTime{0});
    bool all_started = true;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      NodeMetrics nm;
      nm.node = n.spec.name;
      nm.bytes_sent = n.bytes_sent;
      nm.bytes_received = n.bytes_received;
      nm.deliveries = n.remote_deliveries.size();
      if (!n.remote_deliveries.empty()) {
        std::vector<SimTime> lat;
        lat.reserve(n.remote_deliveries.size());
        for (const auto& d : n.remote_deliveries) lat.push_back(d.second);
        nm.median_latency_ms = to_ms(median(lat));
      }
      if (n.first_declaration) {
        const auto begin = *n.first_declaration;
        const auto done = startup[i];
        nm.startup_time_ms = done ? to_ms(*done - begin) : -1.0;
        const auto end = done.value_or(now_);
        nm.startup_bytes = bucket_sum(n.buckets, begin, end);
        nm.stutter_window_ms = stutter_window(n);
        if (done) {
          startup_end = std::max(startup_end, *done);
        } else {
          all_started = false;
        }
      }
      m.nodes.push_back(std::move(nm));
    }
    if (!all_started) startup_end = now_;
    m.startup_end_ms = to_ms(startup_end);
    m.startup_phase_bytes = bucket_sum(global_buckets_, SimTime{0}, startup_end);

    for (std::size_t i = 0; i < links_.size(); ++i) {
      const auto& l = links_[i];
      m.links.push_back(LinkMetrics{link_label(i), l.bytes, l.messages, l.dropped,
                                    peak_window(l.buckets) * 8.0 / 1000.0 / 0.1});
    }
    m.recoveries = recoveries_;
    return m;
  }

 private:
  // ---- state ------------------------------------------------------------------

  struct Event {
    SimTime at;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& x, const Event& y) const {
      return x.at != y.at ? x.at > y.at : x.seq > y.seq;
    }
  };

  struct RouteEntry {
    KeyExpr key;
    EndpointKind kind = EndpointKind::subscriber;
    NodeId origin{};
    std::vector<NodeId> path;  // path[0] is the sender
    bool remove = false;
  };

  struct Frame {
    FrameKind kind = FrameKind::data;
    Traffic traffic = Traffic::data;
    std::uint32_t bytes = 0;
    bool reliable = true;
    NodeId dst{};  // final destination of mesh unicasts
    SessionId from_session{};
    SessionId to_session{};
    EndpointId endpoint{};
    std::shared_ptr<const Sample> sample;
    std::vector<RouteEntry> entries;
    std::vector<LinkId> path;
  };

  // Route toward one origin's declaration, one candidate per neighbor.
  struct SubRoute {
    std::map<NodeId, std::vector<NodeId>> via;
    bool local = false;
    std::optional<std::vector<NodeId>> advertised;
  };

  struct NodeState {
    NodeSpec spec;
    std::vector<LinkId> links;
    std::vector<SessionId> sessions;
    std::optional<SessionId> default_session;
    std::optional<SimTime> first_declaration;
    std::map<std::string, std::uint64_t> sequences;
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
    std::vector<double> buckets;
    std::vector<std::pair<SimTime, SimTime>> remote_deliveries;  // (time, latency)
    // routed
    std::map<std::pair<KeyExpr, EndpointKind>, int> local_refs;
    std::map<KeyExpr, std::map<NodeId, SubRoute>> subs;
    std::map<NodeId, std::set<KeyExpr>> pubs_by;
    std::map<NodeId, std::set<KeyExpr>> told;
    std::set<std::pair<std::uint32_t, std::uint64_t>> seen;
    std::unordered_map<std::string, std::vector<NodeId>> hop_cache;
  };

  struct SessionState {
    NodeId node{};
    std::string name;
    bool live = true;
    std::vector<EndpointId> endpoints;
    std::map<SessionId, std::set<EndpointId>> known_readers;
    std::set<SessionId> met;
    std::map<SessionId, std::set<EndpointId>> sent;
    std::uint64_t knowledge_version = 0;
    std::map<std::pair<EndpointId, std::string>, std::pair<std::uint64_t, std::vector<SessionId>>> targets;
  };

  struct EndpointState {
    EndpointId id{};
    SessionId session{};
    NodeId node{};
    EndpointKind kind = EndpointKind::subscriber;
    KeyExpr key;
    bool live = true;
    SimTime declared{};
    Callback cb;
    std::optional<SimTime> last_publish;
    std::optional<SimTime> first_remote_delivery;
  };

  using Flow = std::pair<EndpointId, EndpointId>;  // (subscriber, publisher)

  struct PendingFlows {
    std::set<Flow> flows;
    std::optional<std::size_t> record;  // index into recoveries_
    void erase_endpoint(EndpointId e) {
      std::erase_if(flows, [e](const Flow& f) { return f.first == e || f.second == e; });
    }
  };

  struct Channel {
    std::string name;
    double kbps = 0.0;
    SimTime busy_until{};
    std::vector<double> buckets;
  };

  struct LinkRuntime {
    LinkSpec spec;
    NodeId a{};
    NodeId b{};
    std::size_t channel = 0;
    bool up = true;
    std::uint64_t generation = 0;
    std::uint64_t bytes = 0;
    std::uint64_t messages = 0;
    std::uint64_t dropped = 0;
    std::vector<double> buckets;
    std::map<Flow, SimTime> last_cross;
    SimTime down_at{};
    std::set<Flow> interrupted;
    PendingFlows pending;
  };

  TopologySpec spec_;
  std::mt19937_64 rng_;
  SimTime now_{0};
  std::uint64_t next_seq_ = 0;
  std::vector<Event> queue_;

  std::vector<NodeState> nodes_;
  std::vector<LinkRuntime> links_;
  std::vector<Channel> channels_;
  std::vector<SessionState> sessions_;
  std::vector<EndpointState> endpoints_;
  std::vector<std::string> warnings_;

  // shortest paths over up links, recomputed lazily
  mutable std::uint64_t topo_version_ = 0;
  mutable std::map<std::uint32_t, std::pair<std::uint64_t, std::vector<std::optional<NodeId>>>> hop_tables_;

  std::optional<SimTime> first_declaration_;
  std::uint64_t published_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  SimTime latency_sum_{0};
  std::uint64_t latency_count_ = 0;
  std::array<std::uint64_t, 7> frames_by_kind_{};
  std::array<std::uint64_t, 3> bytes_by_traffic_{};
  std::vector<double> global_buckets_;
  std::vector<std::pair<SimTime, KeyExpr>> sample_drops_;
  std::vector<RecoveryRecord> recoveries_;
  bool record_deliveries_ = false;
  std::function<void(EndpointId, const Sample&)> publish_hook_;
  std::vector<DeliveryRecord> delivery_log_;
  std::uint64_t digest_ = 0xcbf29ce484222325ull;

  const ProtocolParams& params() const { return spec_.params; }

  // ---- construction ------------------------------------------------------------

  void build() {
    std::set<std::string> names;
    for (const auto& n : spec_.nodes) {
      if (n.name.empty()) throw Error(Errc::DuplicateNode, "node with empty name");
      if (!names.insert(n.name).second) throw Error(Errc::DuplicateNode, n.name);
      nodes_.push_back(NodeState{n});
    }
    std::map<std::string, std::size_t> media;
    for (std::size_t i = 0; i < spec_.links.size(); ++i) {
      const auto& ls = spec_.links[i];
      if (!names.contains(ls.a) || !names.contains(ls.b)) {
        throw Error(Errc::DanglingLink, ls.a + "--" + ls.b);
      }
      if (ls.a == ls.b) throw Error(Errc::InvalidLink, "self link on " + ls.a);
      if (ls.latency_ms < 0.0 || !(ls.bandwidth_kbps > 0.0) || ls.loss < 0.0 || ls.loss > 1.0) {
        throw Error(Errc::InvalidLink, ls.a + "--" + ls.b + ": latency/bandwidth/loss out of range");
      }
      for (std::size_t k = 1; k < ls.schedule.size(); ++k) {
        if (!(ls.schedule[k - 1].at < ls.schedule[k].at)) {
          throw Error(Errc::InvalidLink, ls.a + "--" + ls.b + ": schedule times must strictly increase");
        }
      }
      LinkRuntime lr{ls, node(ls.a), node(ls.b)};
      if (ls.medium.empty()) {
        lr.channel = channels_.size();
        channels_.push_back(Channel{ls.a + "--" + ls.b, ls.bandwidth_kbps});
      } else if (auto it = media.find(ls.medium); it != media.end()) {
        if (channels_[it->second].kbps != ls.bandwidth_kbps) {
          throw Error(Errc::InvalidLink, "medium " + ls.medium + " mixes bandwidths");
        }
        lr.channel = it->second;
      } else {
        lr.channel = channels_.size();
        media.emplace(ls.medium, channels_.size());
        channels_.push_back(Channel{ls.medium, ls.bandwidth_kbps});
      }
      nodes_[index(lr.a)].links.push_back(LinkId(i));
      nodes_[index(lr.b)].links.push_back(LinkId(i));
      links_.push_back(std::move(lr));
    }
    if (spec_.mode == Mode::routed && !connected()) {
      warnings_.push_back("DisconnectedRoutedGraph: declared links do not connect every node");
    }
    for (std::size_t i = 0; i < links_.size(); ++i) {
      for (const auto& ev : links_[i].spec.schedule) {
        if (ev.at <= SimTime{0}) {
          links_[i].up = ev.state == LinkState::up;
        } else {
          schedule_link_event(LinkId(i), ev.at, ev.state);
        }
      }
    }
    if (spec_.mode == Mode::routed && params().keepalive_period_ms > 0.0) {
      for (std::size_t i = 0; i < links_.size(); ++i) {
        at(from_ms(params().keepalive_period_ms), [this, i] { keepalive(LinkId(i)); });
      }
    }
  }

  bool connected() const {
    if (nodes_.empty()) return true;
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto l : nodes_[u].links) {
        const auto v = index(other_end(l, NodeId(u)));
        if (!seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  }

  // ---- small helpers -------------------------------------------------------------

  void check_node(NodeId n) const {
    if (index(n) >= nodes_.size()) throw Error(Errc::UnknownNode, "node " + std::to_string(index(n)));
  }
  SessionState& session(SessionId s) {
    if (index(s) >= sessions_.size()) throw Error(Errc::UnknownSession, "session " + std::to_string(index(s)));
    return sessions_[index(s)];
  }
  EndpointState& endpoint(EndpointId e) {
    if (index(e) >= endpoints_.size()) throw Error(Errc::UnknownEndpoint, "endpoint " + std::to_string(index(e)));
    return endpoints_[index(e)];
  }

  std::string link_label(std::size_t i) const {
    const auto& s = links_[i].spec;
    return s.a + "--" + s.b + "#" + std::to_string(i);
  }

  NodeId other_end(LinkId l, NodeId from) const {
    const auto& lr = links_[index(l)];
    return lr.a == from ? lr.b : lr.a;
  }

  void at(SimTime when, std::function<void()> fn) {
    queue_.push_back(Event{when, next_seq_++, std::move(fn)});
    std::push_heap(queue_.begin(), queue_.end(), Later{});
  }

  void mix(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    for (std::uint64_t v : {static_cast<std::uint64_t>(now_.count()), a, b, c}) {
      for (int i = 0; i < 8; ++i) {
        digest_ ^= (v >> (8 * i)) & 0xffu;
        digest_ *= 0x100000001b3ull;
      }
    }
  }

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  static SimTime median(std::vector<SimTime> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  }

  static void add_to_buckets(std::vector<double>& buckets, SimTime start, SimTime end, double bytes) {
    const auto span = end - start;
    if (span <= SimTime{0}) {
      const auto b = static_cast<std::size_t>(start / kBucket);
      if (buckets.size() <= b) buckets.resize(b + 1, 0.0);
      buckets[b] += bytes;
      return;
    }
    auto t = start;
    while (t < end) {
      const auto b = static_cast<std::size_t>(t / kBucket);
      const auto bucket_end = std::min(end, SimTime((static_cast<std::int64_t>(b) + 1) * kBucket.count()));
      if (buckets.size() <= b) buckets.resize(b + 1, 0.0);
      buckets[b] += bytes * static_cast<double>((bucket_end - t).count()) / static_cast<double>(span.count());
      t = bucket_end;
    }
  }

  static double bucket_sum(const std::vector<double>& buckets, SimTime from, SimTime to) {
    double s = 0.0;
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      const SimTime lo(static_cast<std::int64_t>(b) * kBucket.count());
      const SimTime hi = lo + kBucket;
      const auto a = std::max(lo, from), z = std::min(hi, to);
      if (z > a) s += buckets[b] * static_cast<double>((z - a).count()) / static_cast<double>(kBucket.count());
    }
    return s;
  }

  static double peak_window(const std::vector<double>& buckets) {
    double peak = 0.0;
    for (std::size_t w = 0; w * kBucketsPerWindow < buckets.size(); ++w) {
      double s = 0.0;
      for (std::size_t k = 0; k < kBucketsPerWindow && w * kBucketsPerWindow + k < buckets.size(); ++k) {
        s += buckets[w * kBucketsPerWindow + k];
      }
      peak = std::max(peak, s);
    }
    return peak;
  }

  std::uint32_t key_bytes(const KeyExpr& k) const { return static_cast<std::uint32_t>(k.str().size()); }

  std::uint32_t entries_bytes(const std::vector<RouteEntry>& entries) const {
    std::uint32_t b = params().header_bytes;
    for (const auto& e : entries) {
      b += params().entry_bytes + key_bytes(e.key) + 4u * static_cast<std::uint32_t>(e.path.size());
    }
    return b;
  }

  // ---- transport -------------------------------------------------------------------

  std::optional<LinkId> link_between(NodeId a, NodeId b, bool require_up) const {
    std::optional<LinkId> any;
    for (auto l : nodes_[index(a)].links) {
      if (other_end(l, a) != b) continue;
      if (links_[index(l)].up) return l;
      if (!any) any = l;
    }
    return require_up ? std::nullopt : any;
  }

  void count_drop(LinkRuntime& link, const Frame& f) {
    ++link.dropped;
    ++dropped_;
    if (f.kind == FrameKind::data && f.sample) sample_drops_.emplace_back(now_, f.sample->key);
    mix(0xd0, static_cast<std::uint64_t>(f.kind), f.bytes);
  }

  void transmit(LinkId lid, NodeId from, Frame f) {
    auto& link = links_[index(lid)];
    if (!link.up) {
      count_drop(link, f);
      return;
    }
    auto& ch = channels_[link.channel];
    const auto start = std::max(now_, ch.busy_until);
    if (f.traffic == Traffic::data && to_ms(start - now_) > params().queue_limit_ms) {
      count_drop(link, f);
      return;
    }
    const auto serialization =
        SimTime(static_cast<std::int64_t>(std::ceil(static_cast<double>(f.bytes) * 8000.0 / ch.kbps)));
    const auto done = start + serialization;
    ch.busy_until = done;

    const double bytes = static_cast<double>(f.bytes);
    add_to_buckets(ch.buckets, start, done, bytes);
    add_to_buckets(link.buckets, start, done, bytes);
    add_to_buckets(global_buckets_, start, done, bytes);
    const auto to = other_end(lid, from);
    add_to_buckets(nodes_[index(from)].buckets, start, done, bytes);
    add_to_buckets(nodes_[index(to)].buckets, start, done, bytes);
    link.bytes += f.bytes;
    ++link.messages;
    nodes_[index(from)].bytes_sent += f.bytes;
    nodes_[index(to)].bytes_received += f.bytes;
    ++frames_by_kind_[static_cast<std::size_t>(f.kind)];
    bytes_by_traffic_[static_cast<std::size_t>(f.traffic)] += f.bytes;

    const bool lost = link.spec.loss > 0.0 && uniform() < link.spec.loss;
    if (lost) {
      count_drop(link, f);
      if (f.reliable) {
        at(done + from_ms(params().retransmit_ms), [this, lid, from, f = std::move(f)]() mutable {
          transmit(lid, from, std::move(f));
        });
      }
      return;
    }
    const auto arrival = done + from_ms(link.spec.latency_ms);
    const auto gen = link.generation;
    f.path.push_back(lid);
    at(arrival, [this, lid, to, gen, f = std::move(f)]() mutable {
      auto& l = links_[index(lid)];
      if (!l.up || l.generation != gen) {
        count_drop(l, f);
        return;
      }
      mix(0xa0, index(lid), f.bytes);
      arrive(to, lid, std::move(f));
    });
  }

  // shortest path next hop over up links; falls back to any link so that frames
  // toward a cut-off destination are sent and lost rather than silently held
  std::optional<NodeId> next_hop(NodeId from, NodeId to) const {
    if (auto h = hop_table(from, true)[index(to)]) return h;
    return hop_table(from, false)[index(to)];
  }

  const std::vector<std::optional<NodeId>>& hop_table(NodeId from, bool up_only) const {
    const auto slot = index(from) * 2 + (up_only ? 1u : 0u);
    auto& cached = hop_tables_[slot];
    if (cached.first == topo_version_ + 1 && !cached.second.empty()) return cached.second;
    const auto n = nodes_.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<std::optional<NodeId>> first(n);
    using Item = std::tuple<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[index(from)] = 0.0;
    pq.emplace(0.0, index(from));
    while (!pq.empty()) {
      const auto [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) continue;
      for (auto l : nodes_[u].links) {
        const auto& lr = links_[index(l)];
        if (up_only && !lr.up) continue;
        const auto v = index(other_end(l, NodeId(u)));
        const double nd = d + lr.spec.latency_ms + 1e-3;
        if (nd < dist[v] - 1e-12) {
          dist[v] = nd;
          first[v] = u == index(from) ? std::optional<NodeId>(NodeId(v)) : first[u];
          pq.emplace(nd, v);
        }
      }
    }
    cached = {topo_version_ + 1, std::move(first)};
    return cached.second;
  }

  std::vector<std::uint32_t> components() const {
    std::vector<std::uint32_t> comp(nodes_.size(), std::numeric_limits<std::uint32_t>::max());
    std::uint32_t next = 0;
    for (std::uint32_t s = 0; s < nodes_.size(); ++s) {
      if (comp[s] != std::numeric_limits<std::uint32_t>::max()) continue;
      std::vector<std::uint32_t> stack{s};
      comp[s] = next;
      while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto l : nodes_[u].links) {
          if (!links_[index(l)].up) continue;
          const auto v = index(other_end(l, NodeId(u)));
          if (comp[v] == std::numeric_limits<std::uint32_t>::max()) {
            comp[v] = next;
            stack.push_back(v);
          }
        }
      }
      ++next;
    }
    return comp;
  }

  void send_unicast(NodeId from, Frame f) {
    const auto hop = next_hop(from, f.dst);
    if (!hop) {
      ++dropped_;
      if (f.kind == FrameKind::data && f.sample) sample_drops_.emplace_back(now_, f.sample->key);
      return;
    }
    const auto l = link_between(from, *hop, false);
    transmit(*l, from, std::move(f));
  }

  void send_to_neighbor(NodeId from, NodeId to, Frame f) {
    if (auto l = link_between(from, to, false)) transmit(*l, from, std::move(f));
  }

  void arrive(NodeId at_node, LinkId via, Frame f) {
    const NodeId from = other_end(via, at_node);
    if (spec_.mode == Mode::full_mesh) {
      if (at_node != f.dst) {
        send_unicast(at_node, std::move(f));
        return;
      }
      mesh_receive(std::move(f));
      return;
    }
    switch (f.kind) {
      case FrameKind::declare:
      case FrameKind::undeclare:
      case FrameKind::summary:
        routed_receive_entries(at_node, from, f.entries, f.kind == FrameKind::summary);
        break;
      case FrameKind::interest:
        routed_receive_interest(at_node, from, f.entries);
        break;
      case FrameKind::data:
        routed_data_arrive(at_node, from, std::move(f));
        break;
      default:
        break;
    }
  }

  void deliver(EndpointId sub, EndpointId pub, const std::shared_ptr<const Sample>& sample,
               const std::vector<LinkId>& path, bool remote) {
    auto& s = endpoints_[index(sub)];
    if (!s.live) return;
    ++delivered_;
    const auto latency = now_ - sample->timestamp;
    mix(0xde, index(sub), sample->sequence);
    if (remote) {
      auto& node = nodes_[index(s.node)];
      node.remote_deliveries.emplace_back(now_, latency);
      latency_sum_ += latency;
      ++latency_count_;
      if (!s.first_remote_delivery) s.first_remote_delivery = now_;
      const Flow flow{sub, pub};
      for (auto l : path) links_[index(l)].last_cross[flow] = now_;
      for (auto& l : links_) {
        if (l.pending.record && l.pending.flows.erase(flow) && l.pending.flows.empty()) {
          recoveries_[*l.pending.record].recovery_ms = to_ms(now_) - recoveries_[*l.pending.record].up_ms;
          l.pending.record.reset();
        }
      }
    }
    if (record_deliveries_) {
      delivery_log_.push_back(DeliveryRecord{now_, sub, pub, s.key, sample->key, latency, remote});
    }
    if (s.cb) s.cb(*sample);
  }

  // ---- link state ----------------------------------------------------------------------

  void apply_link_state(LinkId lid, LinkState state) {
    auto& link = links_[index(lid)];
    const bool up = state == LinkState::up;
    if (link.up == up) return;
    mix(0x1e, index(lid), up);
    if (!up) {
      const auto before = components();
      link.up = false;
      ++link.generation;
      ++topo_version_;
      link.down_at = now_;
      link.interrupted.clear();
      for (const auto& [flow, t] : link.last_cross) {
        if (to_ms(now_ - t) <= params().recovery_lookback_ms && endpoints_[index(flow.first)].live &&
            endpoints_[index(flow.second)].live) {
          link.interrupted.insert(flow);
        }
      }
      link.pending.flows.clear();
      link.pending.record.reset();
      if (spec_.mode == Mode::routed) {
        routed_link_lost(link.a, link.b);
        routed_link_lost(link.b, link.a);
      } else {
        const auto gen = link.generation;
        (void)before;
        at(now_ + from_ms(params().lease_ms), [this, lid, gen] {
          const auto& l = links_[index(lid)];
          if (!l.up && l.generation == gen) mesh_expire_unreachable();
        });
      }
      return;
    }
    const auto before = components();
    link.up = true;
    ++topo_version_;
    recoveries_.push_back(RecoveryRecord{link_label(index(lid)), to_ms(link.down_at), to_ms(now_), 0.0,
                                         link.interrupted.size()});
    if (!link.interrupted.empty()) {
      recoveries_.back().recovery_ms = -1.0;
      link.pending.flows = link.interrupted;
      link.pending.record = recoveries_.size() - 1;
    }
    if (spec_.mode == Mode::routed) {
      routed_resync(link.a, link.b);
      routed_resync(link.b, link.a);
    } else {
      mesh_rediscover(before, components());
    }
  }

  void keepalive(LinkId lid) {
    const auto& link = links_[index(lid)];
    if (link.up) {
      for (auto from : {link.a, link.b}) {
        Frame f;
        f.kind = FrameKind::keepalive;
        f.traffic = Traffic::maintenance;
        f.bytes = params().header_bytes;
        f.reliable = false;
        transmit(lid, from, std::move(f));
      }
    }
    at(now_ + from_ms(params().keepalive_period_ms), [this, lid] { keepalive(lid); });
  }

  // ---- full_mesh ---------------------------------------------------------------------

  bool mesh_remote(SessionId a, SessionId b) const {
    return sessions_[index(a)].node != sessions_[index(b)].node;
  }

  void mesh_open(SessionId id) {
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      const SessionId other = SessionId(i);
      if (other == id || !sessions_[i].live) continue;
      if (!mesh_remote(id, other)) {
        sessions_[index(id)].met.insert(other);
        sessions_[i].met.insert(id);
        continue;
      }
      mesh_send_announce(id, other, Traffic::discovery);
    }
    const double period = params().announce_period_ms;
    if (period > 0.0) {
      // golden-ratio phase spread keeps participants from announcing in lockstep
      const double phase = std::fmod(static_cast<double>(index(id)) * 0.6180339887498949, 1.0) * period;
      at(now_ + from_ms(phase + period), [this, id] { mesh_periodic_announce(id); });
    }
  }

  void mesh_periodic_announce(SessionId id) {
    if (!sessions_[index(id)].live) return;
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      const SessionId other = SessionId(i);
      if (other != id && sessions_[i].live && mesh_remote(id, other)) {
        mesh_send_announce(id, other, Traffic::maintenance);
      }
    }
    at(now_ + from_ms(params().announce_period_ms), [this, id] { mesh_periodic_announce(id); });
  }

  void mesh_send_announce(SessionId from, SessionId to, Traffic traffic) {
    Frame f;
    f.kind = FrameKind::announce;
    f.traffic = traffic;
    f.bytes = params().header_bytes + params().announce_bytes;
    f.reliable = traffic == Traffic::discovery;
    f.dst = sessions_[index(to)].node;
    f.from_session = from;
    f.to_session = to;
    send_unicast(sessions_[index(from)].node, std::move(f));
  }

  void mesh_send_endpoint(SessionId from, SessionId to, EndpointId e, bool remove) {
    auto& src = sessions_[index(from)];
    if (!mesh_remote(from, to)) {
      mesh_learn(to, from, e, remove);
      return;
    }
    Frame f;
    f.kind = remove ? FrameKind::undeclare : FrameKind::declare;
    f.traffic = Traffic::discovery;
    f.bytes = params().header_bytes + (remove ? 16u : params().endpoint_info_bytes + key_bytes(endpoints_[index(e)].key));
    f.dst = sessions_[index(to)].node;
    f.from_session = from;
    f.to_session = to;
    f.endpoint = e;
    if (remove) {
      src.sent[to].erase(e);
    } else {
      src.sent[to].insert(e);
    }
    send_unicast(src.node, std::move(f));
  }

  void mesh_declare(EndpointId e) {
    const auto from = endpoints_[index(e)].session;
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      const SessionId other = SessionId(i);
      if (other == from || !sessions_[i].live) continue;
      mesh_send_endpoint(from, other, e, false);
    }
  }

  void mesh_undeclare(EndpointId e) {
    const auto from = endpoints_[index(e)].session;
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      const SessionId other = SessionId(i);
      if (other == from || !sessions_[i].live) continue;
      const auto& sent = sessions_[index(from)].sent;
      const bool was_sent = !mesh_remote(from, other) || (sent.contains(other) && sent.at(other).contains(e));
      if (was_sent) mesh_send_endpoint(from, other, e, true);
    }
  }

  void mesh_learn(SessionId at_session, SessionId from, EndpointId e, bool remove) {
    auto& st = sessions_[index(at_session)];
    if (!st.live) return;
    if (endpoints_[index(e)].kind != EndpointKind::subscriber) return;
    if (remove || !endpoints_[index(e)].live) {
      if (auto it = st.known_readers.find(from); it != st.known_readers.end()) {
        it->second.erase(e);
        if (it->second.empty()) st.known_readers.erase(it);
      }
    } else {
      st.known_readers[from].insert(e);
    }
    ++st.knowledge_version;
  }

  void mesh_receive(Frame f) {
    const auto to = f.to_session;
    const auto from = f.from_session;
    auto& st = sessions_[index(to)];
    switch (f.kind) {
      case FrameKind::announce: {
        if (!st.live || !sessions_[index(from)].live) return;
        if (st.met.insert(from).second) {
          // new participant: hand it every endpoint it has not seen yet
          for (auto e : std::vector<EndpointId>(st.endpoints)) {
            if (!st.sent[from].contains(e)) mesh_send_endpoint(to, from, e, false);
          }
        }
        return;
      }
      case FrameKind::declare:
        st.met.insert(from);
        mesh_learn(to, from, f.endpoint, false);
        return;
      case FrameKind::undeclare:
        mesh_learn(to, from, f.endpoint, true);
        return;
      case FrameKind::data: {
        if (!st.live) return;
        for (auto sub : std::vector<EndpointId>(st.endpoints)) {
          const auto& s = endpoints_[index(sub)];
          if (s.kind == EndpointKind::subscriber && matches(s.key, f.sample->key)) {
            deliver(sub, f.endpoint, f.sample, f.path, true);
          }
        }
        return;
      }
      default:
        return;
    }
  }

  void mesh_publish(const EndpointState& ep, const std::shared_ptr<const Sample>& sample) {
    auto& st = sessions_[index(ep.session)];
    auto& cache = st.targets[{ep.id, sample->key.str()}];
    if (cache.first != st.knowledge_version + 1) {
      cache.second.clear();
      for (const auto& [remote, readers] : st.known_readers) {
        if (!mesh_remote(ep.session, remote)) continue;
        for (auto r : readers) {
          if (intersects(endpoints_[index(r)].key, sample->key)) {
            cache.second.push_back(remote);
            break;
          }
        }
      }
      cache.first = st.knowledge_version + 1;
    }
    for (auto remote : cache.second) {
      Frame f;
      f.kind = FrameKind::data;
      f.traffic = Traffic::data;
      f.bytes = params().header_bytes + params().mesh_data_overhead + static_cast<std::uint32_t>(sample->payload.size());
      f.reliable = false;
      f.dst = sessions_[index(remote)].node;
      f.from_session = ep.session;
      f.to_session = remote;
      f.endpoint = ep.id;
      f.sample = sample;
      send_unicast(ep.node, std::move(f));
    }
  }

  void mesh_expire_unreachable() {
    const auto comp = components();
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      auto& st = sessions_[i];
      const auto ci = comp[index(st.node)];
      for (std::size_t j = 0; j < sessions_.size(); ++j) {
        if (comp[index(sessions_[j].node)] == ci) continue;
        const SessionId other = SessionId(j);
        st.known_readers.erase(other);
        st.met.erase(other);
        st.sent.erase(other);
      }
      ++st.knowledge_version;
    }
  }

  void mesh_rediscover(const std::vector<std::uint32_t>& before, const std::vector<std::uint32_t>& after) {
    for (std::size_t i = 0; i < sessions_.size(); ++i) {
      if (!sessions_[i].live) continue;
      const auto ni = index(sessions_[i].node);
      for (std::size_t j = 0; j < sessions_.size(); ++j) {
        if (i == j || !sessions_[j].live) continue;
        const auto nj = index(sessions_[j].node);
        if (before[ni] == before[nj] || after[ni] != after[nj]) continue;
        for (auto e : std::vector<EndpointId>(sessions_[i].endpoints)) {
          mesh_send_endpoint(SessionId(i), SessionId(j), e, false);
        }
        sessions_[i].met.insert(SessionId(j));
      }
    }
  }

  // ---- routed ---------------------------------------------------------------------------

  bool is_router(NodeId n) const { return nodes_[index(n)].spec.role == Role::router; }

  std::vector<NodeId> neighbors(NodeId n, bool up_only = true) const {
    std::vector<NodeId> out;
    for (auto l : nodes_[index(n)].links) {
      if (up_only && !links_[index(l)].up) continue;
      const auto o = other_end(l, n);
      if (std::find(out.begin(), out.end(), o) == out.end()) out.push_back(o);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  // Destinations for a node's own declarations: adjacent routers and peers.
  std::vector<NodeId> declaration_targets(NodeId n) const {
    std::vector<NodeId> out;
    for (auto nb : neighbors(n)) {
      if (role(nb) != Role::client) out.push_back(nb);
    }
    return out;
  }

  std::optional<NodeId> best_hop(const SubRoute& r) const {
    if (r.local) return std::nullopt;
    std::optional<NodeId> best;
    std::size_t best_len = std::numeric_limits<std::size_t>::max();
    for (const auto& [nb, path] : r.via) {
      if (path.size() < best_len) {
        best = nb;
        best_len = path.size();
      }
    }
    return best;
  }

  std::optional<std::vector<NodeId>> best_path(const SubRoute& r) const {
    if (r.local) return std::vector<NodeId>{};
    if (auto hop = best_hop(r)) return r.via.at(*hop);
    return std::nullopt;
  }

  Frame control_frame(FrameKind kind, std::vector<RouteEntry> entries) const {
    Frame f;
    f.kind = kind;
    f.traffic = Traffic::discovery;
    f.bytes = kind == FrameKind::interest || kind == FrameKind::summary
                  ? entries_bytes(entries)
                  : params().header_bytes + params().declare_bytes + key_bytes(entries.front().key) +
                        4u * static_cast<std::uint32_t>(entries.front().path.size());
    f.entries = std::move(entries);
    return f;
  }

  void routed_local_ref(NodeId n, EndpointKind kind, const KeyExpr& key, int delta) {
    auto& node = nodes_[index(n)];
    auto& ref = node.local_refs[{key, kind}];
    const int before = ref;
    ref += delta;
    if (ref == 0) node.local_refs.erase({key, kind});
    const bool appeared = before == 0 && delta > 0;
    const bool vanished = before > 0 && before + delta == 0;
    if (!appeared && !vanished) return;

    if (kind == EndpointKind::subscriber) {
      if (appeared) {
        node.subs[key][n].local = true;
      } else if (auto it = node.subs.find(key); it != node.subs.end()) {
        it->second.erase(n);
        if (it->second.empty()) node.subs.erase(it);
      }
      node.hop_cache.clear();
      if (is_router(n)) {
        routed_route_changed(n, key, n);
        return;
      }
    } else if (is_router(n)) {
      return;  // routers forward from their own table, nothing to announce
    }
    for (auto nb : declaration_targets(n)) {
      RouteEntry e{key, kind, n, {n}, vanished};
      send_to_neighbor(n, nb, control_frame(vanished ? FrameKind::undeclare : FrameKind::declare, {std::move(e)}));
    }
  }

  void routed_receive_entries(NodeId n, NodeId from, const std::vector<RouteEntry>& entries, bool summary) {
    auto& node = nodes_[index(n)];
    std::set<KeyExpr> changed_subs;
    bool pubs_changed = false;
    for (const auto& e : entries) {
      if (e.kind == EndpointKind::publisher) {
        if (e.remove) {
          pubs_changed |= node.pubs_by[from].erase(e.key) > 0;
        } else {
          pubs_changed |= node.pubs_by[from].insert(e.key).second;
        }
        continue;
      }
      auto& route = node.subs[e.key][e.origin];
      const bool loops = std::find(e.path.begin(), e.path.end(), n) != e.path.end();
      if (e.remove || loops) {
        route.via.erase(from);
      } else {
        route.via[from] = e.path;
      }
      if (route.via.empty() && !route.local) {
        node.subs[e.key].erase(e.origin);
        if (node.subs[e.key].empty()) node.subs.erase(e.key);
      }
      changed_subs.insert(e.key);
      node.hop_cache.clear();
    }
    (void)summary;
    if (!is_router(n)) return;
    for (const auto& key : changed_subs) {
      // re-advertise every origin of the key whose best path moved
      std::vector<NodeId> origins;
      if (auto it = node.subs.find(key); it != node.subs.end()) {
        for (const auto& [o, r] : it->second) origins.push_back(o);
      }
      for (const auto& e : entries) {
        if (e.key == key && e.kind == EndpointKind::subscriber) origins.push_back(e.origin);
      }
      std::sort(origins.begin(), origins.end());
      origins.erase(std::unique(origins.begin(), origins.end()), origins.end());
      for (auto o : origins) routed_route_changed(n, key, o);
    }
    if (pubs_changed) {
      std::set<KeyExpr> keys;
      for (const auto& [k, _] : node.subs) keys.insert(k);
      for (const auto& k : node.told[from]) keys.insert(k);
      routed_reconcile(n, from, keys);
    }
  }

  // Called on a router when the route set for (key, origin) may have changed.
  void routed_route_changed(NodeId n, const KeyExpr& key, NodeId origin) {
    auto& node = nodes_[index(n)];
    std::optional<std::vector<NodeId>> path;
    std::optional<NodeId> hop;
    SubRoute* route = nullptr;
    if (auto it = node.subs.find(key); it != node.subs.end()) {
      if (auto jt = it->second.find(origin); jt != it->second.end()) route = &jt->second;
    }
    if (route) {
      path = best_path(*route);
      hop = best_hop(*route);
    }
    // advertised state is kept in a side table so erased routes can still be withdrawn
    auto& adv = advertised_[{index(n), key.str(), index(origin)}];
    std::optional<std::vector<NodeId>> want;
    if (path) {
      want = std::vector<NodeId>{n};
      want->insert(want->end(), path->begin(), path->end());
    }
    if (adv != want) {
      for (auto nb : neighbors(n)) {
        if (!is_router(nb) || (hop && nb == *hop)) continue;
        if (want) {
          send_to_neighbor(n, nb, control_frame(FrameKind::declare, {RouteEntry{key, EndpointKind::subscriber, origin, *want, false}}));
        } else if (adv) {
          send_to_neighbor(n, nb, control_frame(FrameKind::undeclare, {RouteEntry{key, EndpointKind::subscriber, origin, {n}, true}}));
        }
      }
      adv = want;
    }
    for (auto nb : neighbors(n)) {
      if (is_router(nb)) continue;
      auto pit = node.pubs_by.find(nb);
      const bool told = node.told.contains(nb) && node.told[nb].contains(key);
      if ((pit != node.pubs_by.end() && !pit->second.empty()) || told) routed_reconcile(n, nb, {key});
    }
  }

  bool routed_wants(NodeId n, NodeId nb, const KeyExpr& key) const {
    const auto& node = nodes_[index(n)];
    auto it = node.subs.find(key);
    if (it == node.subs.end()) return false;
    bool elsewhere = false;
    for (const auto& [o, r] : it->second) {
      if (r.local || (best_hop(r) && *best_hop(r) != nb)) {
        elsewhere = true;
        break;
      }
    }
    if (!elsewhere) return false;
    auto pit = node.pubs_by.find(nb);
    if (pit == node.pubs_by.end()) return false;
    return std::any_of(pit->second.begin(), pit->second.end(), [&](const KeyExpr& p) { return intersects(p, key); });
  }

  void routed_reconcile(NodeId n, NodeId nb, const std::set<KeyExpr>& keys, bool force_summary = false) {
    auto& told = nodes_[index(n)].told[nb];
    std::vector<RouteEntry> diff;
    for (const auto& k : keys) {
      const bool want = routed_wants(n, nb, k);
      const bool has = told.contains(k);
      if (want && (!has || force_summary)) {
        told.insert(k);
        diff.push_back(RouteEntry{k, EndpointKind::subscriber, n, {n}, false});
      } else if (!want && has) {
        told.erase(k);
        diff.push_back(RouteEntry{k, EndpointKind::subscriber, n, {n}, true});
      }
    }
    if (!diff.empty()) send_to_neighbor(n, nb, control_frame(FrameKind::interest, std::move(diff)));
  }

  void routed_receive_interest(NodeId n, NodeId from, const std::vector<RouteEntry>& entries) {
    auto& node = nodes_[index(n)];
    for (const auto& e : entries) {
      if (e.remove) {
        if (auto it = node.subs.find(e.key); it != node.subs.end()) {
          it->second.erase(from);
          if (it->second.empty()) node.subs.erase(it);
        }
      } else {
        node.subs[e.key][from].via[from] = {from};
      }
    }
    node.hop_cache.clear();
  }

  void routed_link_lost(NodeId n, NodeId gone) {
    if (link_between(n, gone, true)) return;  // a parallel link still joins them
    auto& node = nodes_[index(n)];
    node.hop_cache.clear();
    std::vector<std::pair<KeyExpr, NodeId>> touched;
    for (auto it = node.subs.begin(); it != node.subs.end();) {
      for (auto jt = it->second.begin(); jt != it->second.end();) {
        if (jt->second.via.erase(gone)) touched.emplace_back(it->first, jt->first);
        if (jt->second.via.empty() && !jt->second.local) {
          jt = it->second.erase(jt);
        } else {
          ++jt;
        }
      }
      it = it->second.empty() ? node.subs.erase(it) : std::next(it);
    }
    node.pubs_by.erase(gone);
    node.told.erase(gone);
    if (!is_router(n)) return;
    for (const auto& [key, origin] : touched) routed_route_changed(n, key, origin);
  }

  void routed_resync(NodeId n, NodeId nb) {
    auto& node = nodes_[index(n)];
    if (is_router(n)) {
      if (is_router(nb)) {
        std::vector<RouteEntry> entries;
        for (const auto& [key, origins] : node.subs) {
          for (const auto& [o, r] : origins) {
            auto hop = best_hop(r);
            if (hop && *hop == nb) continue;
            if (auto p = best_path(r)) {
              std::vector<NodeId> path{n};
              path.insert(path.end(), p->begin(), p->end());
              entries.push_back(RouteEntry{key, EndpointKind::subscriber, o, std::move(path), false});
            }
          }
        }
        if (!entries.empty()) send_to_neighbor(n, nb, control_frame(FrameKind::summary, std::move(entries)));
      }
      return;  // clients and peers re-declare themselves; interest follows
    }
    if (role(nb) == Role::client) return;
    std::vector<RouteEntry> entries;
    for (const auto& [kk, ref] : node.local_refs) {
      entries.push_back(RouteEntry{kk.first, kk.second, n, {n}, false});
    }
    if (!entries.empty()) send_to_neighbor(n, nb, control_frame(FrameKind::summary, std::move(entries)));
  }

  void routed_forward(NodeId n, std::optional<NodeId> from, EndpointId pub, const std::shared_ptr<const Sample>& sample,
                      const std::vector<LinkId>& path) {
    auto& node = nodes_[index(n)];
    const bool originating = !from.has_value();
    if (!originating && !is_router(n)) return;
    const auto key = sample->key.str();
    auto cached = node.hop_cache.find(key);
    if (cached == node.hop_cache.end()) {
      std::vector<NodeId> hops;
      for (const auto& [k, origins] : node.subs) {
        if (!matches(k, sample->key)) continue;
        for (const auto& [o, r] : origins) {
          if (o == n) continue;
          if (auto h = best_hop(r)) hops.push_back(*h);
        }
      }
      std::sort(hops.begin(), hops.end());
      hops.erase(std::unique(hops.begin(), hops.end()), hops.end());
      cached = node.hop_cache.emplace(key, std::move(hops)).first;
    }
    for (auto hop : cached->second) {
      if (from && hop == *from) continue;
      Frame f;
      f.kind = FrameKind::data;
      f.traffic = Traffic::data;
      f.bytes = params().header_bytes + params().routed_data_overhead + key_bytes(sample->key) +
                static_cast<std::uint32_t>(sample->payload.size());
      f.reliable = false;
      f.endpoint = pub;
      f.sample = sample;
      f.path = path;
      send_to_neighbor(n, hop, std::move(f));
    }
  }

  void routed_data_arrive(NodeId n, NodeId from, Frame f) {
    auto& node = nodes_[index(n)];
    if (!node.seen.insert({index(f.endpoint), f.sample->sequence}).second) return;
    for (const auto& sid : node.sessions) {
      for (auto sub : std::vector<EndpointId>(sessions_[index(sid)].endpoints)) {
        const auto& s = endpoints_[index(sub)];
        if (s.kind == EndpointKind::subscriber && matches(s.key, f.sample->key)) {
          deliver(sub, f.endpoint, f.sample, f.path, true);
        }
      }
    }
    routed_forward(n, from, f.endpoint, f.sample, f.path);
  }

  std::map<std::tuple<std::uint32_t, std::string, std::uint32_t>, std::optional<std::vector<NodeId>>> advertised_;

  // ---- metrics helpers ------------------------------------------------------------------

  // Per node: the time every subscriber with a remote, actively publishing match
  // has received its first remote sample (nullopt if some never did).
  std::vector<std::optional<SimTime>> startup_completion() const {
    std::vector<std::optional<SimTime>> out(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].first_declaration) out[i] = *nodes_[i].first_declaration;
    }
    for (const auto& s : endpoints_) {
      if (s.kind != EndpointKind::subscriber) continue;
      const auto ni = index(s.node);
      bool expects = false;
      for (const auto& p : endpoints_) {
        if (p.kind != EndpointKind::publisher || p.node == s.node || !p.last_publish) continue;
        if (*p.last_publish < s.declared) continue;
        if (intersects(s.key, p.key)) {
          expects = true;
          break;
        }
      }
      if (!expects || !out[ni]) continue;
      if (!s.first_remote_delivery) {
        out[ni].reset();
        continue;
      }
      out[ni] = std::max(*out[ni], *s.first_remote_delivery);
    }
    // a node that lost one subscriber's startup stays incomplete
    for (const auto& s : endpoints_) {
      if (s.kind != EndpointKind::subscriber || s.first_remote_delivery) continue;
      const auto ni = index(s.node);
      for (const auto& p : endpoints_) {
        if (p.kind == EndpointKind::publisher && p.node != s.node && p.last_publish &&
            *p.last_publish >= s.declared && intersects(s.key, p.key)) {
          out[ni].reset();
          break;
        }
      }
    }
    return out;
  }

  // Window after the node's first declaration during which remote delivery
  // latency still exceeded 10x the steady-state median. The steady state is the
  // final third of the run.
  double stutter_window(const NodeState& n) const {
    if (n.remote_deliveries.empty() || !n.first_declaration) return 0.0;
    const auto begin = first_declaration_.value_or(SimTime{0});
    const auto steady_from = begin + (now_ - begin) * 2 / 3;
    std::vector<SimTime> steady;
    for (const auto& [t, l] : n.remote_deliveries) {
      if (t >= steady_from) steady.push_back(l);
    }
    if (steady.empty()) {
      for (const auto& d : n.remote_deliveries) steady.push_back(d.second);
    }
    const auto threshold = median(steady) * 10;
    std::optional<SimTime> last_bad;
    for (const auto& [t, l] : n.remote_deliveries) {
      if (t >= steady_from) break;
      if (l > threshold) last_bad = t;
    }
    if (!last_bad) return 0.0;
    return std::max(0.0, to_ms(*last_bad - *n.first_declaration));
  }
};

}  // namespace modstack::fabric
