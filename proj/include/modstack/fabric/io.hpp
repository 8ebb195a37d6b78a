#pragma once

// JSON topology documents and metrics export.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "modstack/error.hpp"
#include "modstack/fabric/types.hpp"

namespace modstack::fabric {

using json = nlohmann::json;

inline Role parse_role(const std::string& s) {
  if (s == "peer") return Role::peer;
  if (s == "client") return Role::client;
  if (s == "router") return Role::router;
  throw Error(Errc::InvalidDocument, "unknown node role '" + s + "'");
}

inline Mode parse_mode(const std::string& s) {
  if (s == "full_mesh") return Mode::full_mesh;
  if (s == "routed") return Mode::routed;
  throw Error(Errc::InvalidDocument, "unknown mode '" + s + "'");
}

inline ProtocolParams params_from_json(const json& j, ProtocolParams p = {}) {
  auto get = [&](const char* name, auto& field) {
    if (j.contains(name)) field = j.at(name).get<std::remove_reference_t<decltype(field)>>();
  };
  get("header_bytes", p.header_bytes);
  get("endpoint_info_bytes", p.endpoint_info_bytes);
  get("announce_bytes", p.announce_bytes);
  get("mesh_data_overhead", p.mesh_data_overhead);
  get("announce_period_ms", p.announce_period_ms);
  get("lease_ms", p.lease_ms);
  get("declare_bytes", p.declare_bytes);
  get("entry_bytes", p.entry_bytes);
  get("routed_data_overhead", p.routed_data_overhead);
  get("keepalive_period_ms", p.keepalive_period_ms);
  get("queue_limit_ms", p.queue_limit_ms);
  get("retransmit_ms", p.retransmit_ms);
  get("recovery_lookback_ms", p.recovery_lookback_ms);
  return p;
}

inline json params_to_json(const ProtocolParams& p) {
  return json{{"header_bytes", p.header_bytes},
              {"endpoint_info_bytes", p.endpoint_info_bytes},
              {"announce_bytes", p.announce_bytes},
              {"mesh_data_overhead", p.mesh_data_overhead},
              {"announce_period_ms", p.announce_period_ms},
              {"lease_ms", p.lease_ms},
              {"declare_bytes", p.declare_bytes},
              {"entry_bytes", p.entry_bytes},
              {"routed_data_overhead", p.routed_data_overhead},
              {"keepalive_period_ms", p.keepalive_period_ms},
              {"queue_limit_ms", p.queue_limit_ms},
              {"retransmit_ms", p.retransmit_ms},
              {"recovery_lookback_ms", p.recovery_lookback_ms}};
}

inline TopologySpec topology_from_json(const json& j) {
  try {
    TopologySpec t;
    for (const auto& n : j.at("nodes")) {
      t.nodes.push_back(NodeSpec{n.at("name").get<std::string>(), parse_role(n.value("role", "peer"))});
    }
    for (const auto& l : j.value("links", json::array())) {
      LinkSpec s;
      s.a = l.at("a").get<std::string>();
      s.b = l.at("b").get<std::string>();
      s.latency_ms = l.value("latency_ms", 0.0);
      s.bandwidth_kbps = l.value("bandwidth_kbps", s.bandwidth_kbps);
      s.loss = l.value("loss", 0.0);
      s.medium = l.value("medium", "");
      for (const auto& e : l.value("schedule", json::array())) {
        const auto state = e.at("state").get<std::string>();
        if (state != "up" && state != "down") throw Error(Errc::InvalidDocument, "link state '" + state + "'");
        s.schedule.push_back(LinkEvent{from_ms(e.at("at_ms").get<double>()), state == "up" ? LinkState::up : LinkState::down});
      }
      t.links.push_back(std::move(s));
    }
    t.mode = parse_mode(j.value("mode", "routed"));
    t.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("params")) t.params = params_from_json(j.at("params"));
    return t;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("topology: ") + e.what());
  }
}

inline json topology_to_json(const TopologySpec& t) {
  json nodes = json::array(), links = json::array();
  for (const auto& n : t.nodes) nodes.push_back({{"name", n.name}, {"role", to_string(n.role)}});
  for (const auto& l : t.links) {
    json sched = json::array();
    for (const auto& e : l.schedule) {
      sched.push_back({{"at_ms", to_ms(e.at)}, {"state", e.state == LinkState::up ? "up" : "down"}});
    }
    json jl{{"a", l.a}, {"b", l.b}, {"latency_ms", l.latency_ms}, {"bandwidth_kbps", l.bandwidth_kbps},
            {"loss", l.loss}, {"schedule", sched}};
    if (!l.medium.empty()) jl["medium"] = l.medium;
    links.push_back(std::move(jl));
  }
  return json{{"nodes", nodes}, {"links", links}, {"mode", to_string(t.mode)}, {"seed", t.seed},
              {"params", params_to_json(t.params)}};
}

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::InvalidDocument, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, p.string() + ": " + e.what());
  }
}

inline TopologySpec load_topology(const std::filesystem::path& p) { return topology_from_json(read_json_file(p)); }

namespace detail {
inline std::string fixed(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}
}  // namespace detail

inline std::string node_metrics_csv(const FabricMetrics& m) {
  std::string out = "node,startup_time_ms,startup_bytes,stutter_window_ms,bytes_sent,bytes_received,deliveries,median_latency_ms\n";
  for (const auto& n : m.nodes) {
    out += n.node + "," + detail::fixed(n.startup_time_ms) + "," + detail::fixed(n.startup_bytes) + "," +
           detail::fixed(n.stutter_window_ms) + "," + std::to_string(n.bytes_sent) + "," +
           std::to_string(n.bytes_received) + "," + std::to_string(n.deliveries) + "," +
           detail::fixed(n.median_latency_ms) + "\n";
  }
  return out;
}

inline std::string link_metrics_csv(const FabricMetrics& m) {
  std::string out = "link,bytes_transferred,messages,messages_dropped,peak_kbps\n";
  for (const auto& l : m.links) {
    out += l.link + "," + std::to_string(l.bytes_transferred) + "," + std::to_string(l.messages) + "," +
           std::to_string(l.messages_dropped) + "," + detail::fixed(l.peak_kbps) + "\n";
  }
  return out;
}

inline json metrics_summary(const FabricMetrics& m) {
  json rec = json::array();
  for (const auto& r : m.recoveries) {
    rec.push_back({{"link", r.link}, {"down_ms", r.down_ms}, {"up_ms", r.up_ms}, {"recovery_ms", r.recovery_ms},
                   {"flows", r.flows}});
  }
  return json{{"now_ms", m.now_ms},
              {"mean_latency_ms", m.mean_latency_ms},
              {"peak_kbps", m.peak_kbps},
              {"published", m.published},
              {"delivered", m.delivered},
              {"dropped", m.dropped},
              {"discovery_bytes", m.discovery_bytes},
              {"maintenance_bytes", m.maintenance_bytes},
              {"data_bytes", m.data_bytes},
              {"total_link_bytes", m.total_link_bytes()},
              {"startup_end_ms", m.startup_end_ms},
              {"startup_phase_bytes", m.startup_phase_bytes},
              {"recoveries", rec}};
}

}  // namespace modstack::fabric
