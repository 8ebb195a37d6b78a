#pragma once

// Scenario runner: spawns an assembly roster plus ground-control services on
// a simulated fabric, plays a timed script, and compares the two fabric
// modes on the metrics of one observed node.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "modstack/assembly/io.hpp"
#include "modstack/fabric/io.hpp"
#include "modstack/fabric/network.hpp"
#include "modstack/launcher.hpp"

namespace modstack::bench {

namespace fs = std::filesystem;
using assembly::AssemblySpec;
using fabric::FabricMetrics;
using fabric::Mode;
using runtime::json;

/// N identical single-module robots on a shared wireless channel to one
/// access-point router, with ground control wired to the router.
struct FleetSpec {
  int robots = 7;
  std::string module = "g_limb_a1";
  double cap_kbps = 2000.0;
  double latency_ms = 2.0;
  double loss = 0.0;
};

struct ScriptEvent {
  double at_ms = 0.0;
  std::string kind;  // link | start | stop | publish
  std::string a, b;  // link endpoints
  fabric::LinkState state = fabric::LinkState::up;
  std::string component;
  std::string node, key;
  std::size_t bytes = 0;
};

/// A subscriber whose received payload bytes are compared with the bytes the
/// publisher's host put on the same key. Both sides count only samples
/// published at or after `from_ms`, so startup discovery does not skew them.
struct Observer {
  std::string node;
  std::string key;
  std::string publisher;  // a component; its host is tapped
  double from_ms = 0.0;
};

struct Threshold {
  std::string metric;
  double min_ratio = 1.0;
  bool strict = false;      // ratio must exceed min_ratio
  bool every_seed = false;  // checked per seed instead of on the median
};

struct CapacitySpec {
  std::vector<double> caps_kbps;
  double reference_kbps = 2000.0;
  int max_robots = 16;
  double window_ms = 30'000.0;
  double min_ratio = 2.5;
};

struct ScenarioSpec {
  std::string name;
  fabric::TopologySpec topology;
  std::vector<AssemblySpec> assemblies;
  assembly::Registry modules;
  std::vector<launch::ServiceAssignment> services;
  std::vector<ScriptEvent> events;
  double duration_ms = 10'000.0;
  std::vector<std::string> metrics;
  std::string observe_node;
  std::optional<Observer> observer;
  bool aggregate_tf = false;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<Threshold> thresholds;
  double start_jitter_ms = 500.0;
  std::optional<FleetSpec> fleet;
  std::optional<CapacitySpec> capacity;
};

// ---- fleet generation -----------------------------------------------------------

inline std::string robot_name(int i) { return "r" + std::to_string(i); }

/// Fills topology, assemblies, modules, and services of `s` from `f`, using
/// `base` for the module template. Scripted events are kept.
inline void expand_fleet(ScenarioSpec& s, const FleetSpec& f, const assembly::Registry& base) {
  const auto tmpl = base.find(f.module);
  if (tmpl == base.end()) throw Error(Errc::InvalidDocument, "fleet module " + f.module + " not found");
  s.fleet = f;
  s.topology.nodes = {{"ap", fabric::Role::router}, {"gc", fabric::Role::peer}};
  s.topology.links = {fabric::LinkSpec{"ap", "gc", 1.0, 100'000.0}};
  s.assemblies.clear();
  s.modules.clear();
  s.services.clear();
  for (int i = 0; i < f.robots; ++i) {
    const auto r = robot_name(i);
    auto m = tmpl->second;
    m.id = f.module + "@" + r;
    m.host = r;
    s.modules.emplace(m.id, m);
    s.assemblies.push_back(AssemblySpec{r, {{r, m.id}}, {}, r});
    s.topology.nodes.push_back({r, fabric::Role::peer});
    s.topology.links.push_back(fabric::LinkSpec{"ap", r, f.latency_ms, f.cap_kbps, f.loss, {}, "wifi"});
    std::vector<std::string> joints;
    for (const auto& j : m.joints) joints.push_back(assembly::global_joint(r, j.name));
    auto op = launch::detail::make("gc/operator_" + r, "operator", {{"target", "joints/*/*/target"}},
                                   {{"joints", joints}, {"phase", 0.3 * i}});
    s.services.push_back({op, "gc", "autonomous_operator"});
  }
  s.services.push_back({launch::detail::make("gc/data_monitor", "data_monitor", {{"input", "health/**"}}), "gc", "data_monitor"});
  s.services.push_back({launch::detail::make("gc/archiver", "archiver", {{"input", "joints/*/*/state"}}), "gc", "archiver"});
  if (s.observe_node.empty()) s.observe_node = robot_name(0);
}

// ---- documents -------------------------------------------------------------------

inline ScenarioSpec scenario_from_json(const json& j, const fs::path& base_dir) {
  try {
    ScenarioSpec s;
    s.name = j.at("name").get<std::string>();
    const auto modules_dir = base_dir / j.value("modules", "../modules");
    if (j.contains("modules") || j.contains("assemblies") || j.contains("fleet")) {
      s.modules = assembly::load_registry(modules_dir);
    }
    if (j.contains("topology")) {
      const auto& t = j.at("topology");
      s.topology = t.is_string() ? fabric::load_topology(base_dir / t.get<std::string>()) : fabric::topology_from_json(t);
    }
    for (const auto& a : j.value("assemblies", json::array())) {
      s.assemblies.push_back(a.is_string() ? assembly::load_assembly(base_dir / a.get<std::string>()) : assembly::assembly_from_json(a));
    }
    s.services = launch::services_from_json(j.value("services", json::array()));
    s.duration_ms = j.value("duration_ms", s.duration_ms);
    s.metrics = j.value("metrics", std::vector<std::string>{});
    s.observe_node = j.value("observe_node", "");
    if (j.contains("observer")) {
      const auto& o = j.at("observer");
      s.observer = Observer{o.at("node").get<std::string>(), o.at("key").get<std::string>(), o.value("publisher", ""),
                            o.value("from_ms", 0.0)};
    }
    s.aggregate_tf = j.value("tf_mode", "scoped") == "aggregate";
    s.seeds = j.value("seeds", s.seeds);
    s.start_jitter_ms = j.value("start_jitter_ms", s.start_jitter_ms);
    for (const auto& t : j.value("thresholds", json::array())) {
      s.thresholds.push_back({t.at("metric").get<std::string>(), t.at("min_ratio").get<double>(), t.value("strict", false),
                              t.value("every_seed", false)});
    }
    if (j.contains("fleet")) {
      const auto& f = j.at("fleet");
      FleetSpec fs;
      fs.robots = f.value("robots", fs.robots);
      fs.module = f.value("module", fs.module);
      fs.cap_kbps = f.value("cap_kbps", fs.cap_kbps);
      fs.latency_ms = f.value("latency_ms", fs.latency_ms);
      fs.loss = f.value("loss", fs.loss);
      const auto base = s.modules;
      expand_fleet(s, fs, base);
      if (f.contains("params")) s.topology.params = fabric::params_from_json(f.at("params"), s.topology.params);
    }
    for (const auto& e : j.value("events", json::array())) {
      ScriptEvent ev;
      ev.at_ms = e.at("at_ms").get<double>();
      if (e.contains("link")) {
        ev.kind = "link";
        ev.a = e.at("link").at(0).get<std::string>();
        ev.b = e.at("link").at(1).get<std::string>();
        ev.state = e.value("state", "down") == "up" ? fabric::LinkState::up : fabric::LinkState::down;
      } else if (e.contains("start")) {
        ev.kind = "start";
        ev.component = e.at("start").get<std::string>();
      } else if (e.contains("stop")) {
        ev.kind = "stop";
        ev.component = e.at("stop").get<std::string>();
      } else if (e.contains("publish")) {
        ev.kind = "publish";
        ev.key = e.at("publish").get<std::string>();
        ev.node = e.at("node").get<std::string>();
        ev.bytes = e.value("bytes", std::size_t{0});
      } else {
        throw Error(Errc::InvalidDocument, "event needs link, start, stop, or publish");
      }
      s.events.push_back(std::move(ev));
    }
    if (j.contains("capacity")) {
      const auto& c = j.at("capacity");
      CapacitySpec cs;
      cs.caps_kbps = c.at("caps_kbps").get<std::vector<double>>();
      cs.reference_kbps = c.value("reference_kbps", cs.reference_kbps);
      cs.max_robots = c.value("max_robots", cs.max_robots);
      cs.window_ms = c.value("window_ms", cs.window_ms);
      cs.min_ratio = c.value("min_ratio", cs.min_ratio);
      s.capacity = cs;
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("scenario: ") + e.what());
  }
}

inline ScenarioSpec load_scenario(const fs::path& p) {
  return scenario_from_json(fabric::read_json_file(p), p.parent_path());
}

// ---- running ---------------------------------------------------------------------

struct RunResult {
  Mode mode = Mode::routed;
  std::uint64_t seed = 0;
  FabricMetrics metrics;
  std::map<std::string, std::size_t> roles;  // spawned components per role
  std::size_t components = 0;
  std::map<std::string, runtime::ComponentTrace> traces;
  std::map<std::string, runtime::Status> statuses;
  std::uint64_t observer_bytes = 0;   // received by the observer in its window
  std::uint64_t publisher_bytes = 0;  // published on the observer key by the publisher's host in that window
  double steady_latency_ms = 0.0;     // median remote latency over the final window
  std::uint64_t heartbeat_drops = 0;  // lost `health/**` samples over the final window
  bool startup_complete = false;
  std::uint64_t digest = 0;
  std::map<std::string, double> observed;  // metric -> value at the observed node
};

/// `location_publisher_0` counts as `location_publisher`.
inline std::string role_of(const std::string& component) {
  auto role = component.substr(component.rfind('/') + 1);
  if (role.size() > 2 && role[role.size() - 2] == '_' && std::isdigit(static_cast<unsigned char>(role.back()))) {
    role.resize(role.size() - 2);
  }
  return role;
}

namespace detail {

struct Planned {
  runtime::ComponentSpec spec;
  std::string host;
  std::string role;
};

inline std::vector<Planned> plan_all(const ScenarioSpec& s) {
  std::vector<Planned> out;
  const launch::LaunchOptions options{false, s.aggregate_tf};
  for (const auto& a : s.assemblies) {
    for (const auto& host : launch::robot_hosts(a, s.modules)) {
      for (auto& e : launch::plan_launch(a, host, s.modules, {}, options).entries) {
        out.push_back({e.spec, host, role_of(e.spec.name)});
      }
    }
  }
  for (const auto& svc : s.services) out.push_back({svc.spec, svc.host, svc.role});
  return out;
}

inline double floor_ratio(double a, double b, double floor) { return std::max(a, floor) / std::max(b, floor); }

}  // namespace detail

/// Checks every reference before anything runs.
inline void validate(const ScenarioSpec& s, const std::vector<detail::Planned>& planned) {
  std::set<std::string> nodes, names;
  for (const auto& n : s.topology.nodes) nodes.insert(n.name);
  auto need_node = [&](const std::string& n, const std::string& what) {
    if (!nodes.contains(n)) throw Error(Errc::InvalidDocument, what + " names unknown node " + n);
  };
  for (const auto& p : planned) {
    need_node(p.host, p.spec.name);
    if (!names.insert(p.spec.name).second) throw Error(Errc::InvalidDocument, "component " + p.spec.name + " spawned twice");
  }
  if (!s.observe_node.empty()) need_node(s.observe_node, "observe_node");
  if (s.observer) {
    need_node(s.observer->node, "observer");
    if (!s.observer->publisher.empty() && !names.contains(s.observer->publisher)) {
      throw Error(Errc::InvalidDocument, "observer publisher " + s.observer->publisher + " is not spawned");
    }
  }
  for (const auto& e : s.events) {
    if (e.at_ms < 0 || e.at_ms > s.duration_ms) {
      throw Error(Errc::InvalidDocument, "event at " + std::to_string(e.at_ms) + " ms is outside the run");
    }
    if (e.kind == "link") {
      const bool found = std::any_of(s.topology.links.begin(), s.topology.links.end(), [&](const fabric::LinkSpec& l) {
        return (l.a == e.a && l.b == e.b) || (l.a == e.b && l.b == e.a);
      });
      if (!found) throw Error(Errc::InvalidDocument, "event names unknown link " + e.a + "-" + e.b);
    } else if (e.kind == "publish") {
      need_node(e.node, "publish event");
    } else if (!names.contains(e.component)) {
      throw Error(Errc::InvalidDocument, "event names unknown component " + e.component);
    }
  }
}

inline RunResult run_scenario(const ScenarioSpec& s, Mode mode, std::uint64_t seed) {
  const auto planned = detail::plan_all(s);
  validate(s, planned);
  const auto registry = runtime::standard_registry();
  std::vector<runtime::ComposedComponent> composed;
  for (const auto& p : planned) composed.push_back(runtime::compose(p.spec, registry));

  auto topo = s.topology;
  topo.mode = mode;
  topo.seed = seed;
  for (const auto& e : s.events) {
    if (e.kind != "link") continue;
    for (auto& l : topo.links) {
      if ((l.a == e.a && l.b == e.b) || (l.a == e.b && l.b == e.a)) {
        l.schedule.push_back({fabric::from_ms(e.at_ms), e.state});
        break;
      }
    }
  }
  fabric::Network net(topo);
  RunResult r;
  r.mode = mode;
  r.seed = seed;

  std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
  std::uniform_real_distribution<double> jitter(0.0, s.start_jitter_ms);
  std::vector<std::unique_ptr<runtime::ComponentInstance>> instances;
  std::map<std::string, runtime::ComponentInstance*> by_name;
  const bool scripted_start = std::any_of(s.events.begin(), s.events.end(), [](const ScriptEvent& e) { return e.kind == "start"; });
  for (std::size_t i = 0; i < planned.size(); ++i) {
    instances.push_back(std::make_unique<runtime::ComponentInstance>(composed[i], net, net.node(planned[i].host)));
    auto* inst = instances.back().get();
    by_name[planned[i].spec.name] = inst;
    ++r.roles[planned[i].role];
    const double at = jitter(rng);
    bool deferred = false;
    for (const auto& e : s.events) deferred |= scripted_start && e.kind == "start" && e.component == planned[i].spec.name;
    if (!deferred) net.schedule(fabric::from_ms(at), [inst] { inst->start(); });
  }
  r.components = instances.size();

  if (s.observer) {
    const auto from = fabric::from_ms(s.observer->from_ms);
    const auto key = KeyExpr::parse(s.observer->key);
    net.declare_endpoint(net.node(s.observer->node), fabric::EndpointKind::subscriber, key, [&r, from](const fabric::Sample& x) {
      if (x.timestamp >= from) r.observer_bytes += x.payload.size();
    });
    if (!s.observer->publisher.empty()) {
      std::string host;
      for (const auto& p : planned) {
        if (p.spec.name == s.observer->publisher) host = p.host;
      }
      net.on_publish([&r, from, host, key](fabric::EndpointId, const fabric::Sample& x) {
        if (x.timestamp >= from && x.source == host && matches(key, x.key)) r.publisher_bytes += x.payload.size();
      });
    }
  }
  for (const auto& e : s.events) {
    if (e.kind == "start" || e.kind == "stop") {
      auto* inst = by_name.at(e.component);
      const bool start = e.kind == "start";
      net.schedule(fabric::from_ms(e.at_ms), [inst, start] { start ? inst->start() : inst->stop(); });
    } else if (e.kind == "publish") {
      const auto node = net.node(e.node);
      const auto key = KeyExpr::parse(e.key);
      const auto bytes = e.bytes;
      net.schedule(fabric::from_ms(e.at_ms), [&net, node, key, bytes] {
        const auto pub = net.declare_endpoint(node, fabric::EndpointKind::publisher, key);
        net.publish(pub, fabric::Bytes(bytes, 0x5a));
        net.undeclare(pub);
      });
    }
  }

  const auto end = fabric::from_ms(s.duration_ms);
  r.metrics = net.run_until(end);
  const double from = std::max(0.0, s.duration_ms - (s.capacity ? s.capacity->window_ms : s.duration_ms / 3.0));
  r.steady_latency_ms = net.median_latency_ms(fabric::from_ms(from), end);
  r.heartbeat_drops = net.dropped_samples(KeyExpr::parse("health/**"), fabric::from_ms(from), end);
  r.startup_complete = std::all_of(r.metrics.nodes.begin(), r.metrics.nodes.end(),
                                   [](const fabric::NodeMetrics& n) { return n.startup_time_ms >= 0.0; });
  r.digest = net.trace_digest();

  if (!s.observe_node.empty()) {
    const auto* n = r.metrics.node(s.observe_node);
    r.observed["startup_bytes"] = n->startup_bytes;
    r.observed["startup_time"] = n->startup_time_ms >= 0 ? n->startup_time_ms : s.duration_ms;
    // samples that never arrive have unbounded latency, so the stutter spans the run
    r.observed["stutter"] = n->startup_time_ms >= 0 ? n->stutter_window_ms : s.duration_ms;
    r.observed["received_kbps"] = s.duration_ms > 0 ? static_cast<double>(n->bytes_received) * 8.0 / s.duration_ms : 0.0;
  }
  if (!r.metrics.recoveries.empty()) {
    const auto& rec = r.metrics.recoveries.front();
    r.observed["recovery_time"] = rec.recovery_ms >= 0 ? rec.recovery_ms : s.duration_ms - rec.up_ms;
  }

  // stop everything and let in-flight samples land
  for (auto& inst : instances) inst->stop();
  net.run_until(end + fabric::from_ms(1000));
  for (const auto& inst : instances) {
    r.traces[inst->name()] = inst->trace();
    r.statuses[inst->name()] = inst->status();
  }
  return r;
}

// ---- comparison ------------------------------------------------------------------

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

/// Values below this are treated as equal to it when forming ratios, so a
/// metric that is zero in one mode yields a finite ratio.
inline double metric_floor(const std::string& metric) { return metric == "startup_bytes" ? 1.0 : 1.0 /* ms */; }

struct Check {
  std::string metric;
  double threshold = 0.0;
  double value = 0.0;
  bool pass = false;
};

struct ComparisonReport {
  std::string scenario;
  Mode a = Mode::full_mesh;
  Mode b = Mode::routed;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::vector<double>> values_a, values_b;  // metric -> per seed
  std::map<std::string, std::vector<double>> seed_ratios;         // metric -> per seed a/b
  std::map<std::string, double> ratios;                           // metric -> median of per-seed ratios
  std::vector<Check> checks;
  std::map<std::string, std::vector<std::uint64_t>> digests;
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

inline ComparisonReport compare(const ScenarioSpec& s, const std::vector<std::uint64_t>& seeds, Mode a = Mode::full_mesh,
                                Mode b = Mode::routed) {
  ComparisonReport rep;
  rep.scenario = s.name;
  rep.a = a;
  rep.b = b;
  rep.seeds = seeds;
  for (const auto seed : seeds) {
    const auto ra = run_scenario(s, a, seed);
    const auto rb = run_scenario(s, b, seed);
    rep.digests[fabric::to_string(a)].push_back(ra.digest);
    if (a != b) rep.digests[fabric::to_string(b)].push_back(rb.digest);
    for (const auto& m : s.metrics) {
      const double va = ra.observed.count(m) ? ra.observed.at(m) : 0.0;
      const double vb = rb.observed.count(m) ? rb.observed.at(m) : 0.0;
      rep.values_a[m].push_back(va);
      rep.values_b[m].push_back(vb);
      rep.seed_ratios[m].push_back(detail::floor_ratio(va, vb, metric_floor(m)));
    }
  }
  for (const auto& m : s.metrics) rep.ratios[m] = median(rep.seed_ratios[m]);
  for (const auto& t : s.thresholds) {
    Check c{t.metric, t.min_ratio, rep.ratios.count(t.metric) ? rep.ratios.at(t.metric) : 0.0, false};
    auto ok = [&](double v) { return t.strict ? v > t.min_ratio : v >= t.min_ratio; };
    if (t.every_seed) {
      const auto& per = rep.seed_ratios[t.metric];
      c.value = per.empty() ? 0.0 : *std::min_element(per.begin(), per.end());
      c.pass = !per.empty() && std::all_of(per.begin(), per.end(), ok);
    } else {
      c.pass = ok(c.value);
    }
    rep.checks.push_back(c);
  }
  return rep;
}

// ---- capacity --------------------------------------------------------------------

struct CapacityPoint {
  int robots = 0;
  bool stable = false;
  double steady_latency_ms = 0.0;
  std::uint64_t heartbeat_drops = 0;
  bool startup_complete = false;
};

struct CapacityResult {
  Mode mode = Mode::routed;
  double cap_kbps = 0.0;
  double baseline_latency_ms = 0.0;
  int max_stable = 0;
  std::vector<CapacityPoint> points;
};

/// Largest N such that every fleet of 1..N robots starts completely, keeps
/// its steady median latency within 2x the single-robot baseline, and drops
/// no heartbeat over the final window.
inline CapacityResult max_stable_count(const ScenarioSpec& s, Mode mode, double cap_kbps, std::uint64_t seed) {
  if (!s.fleet || !s.capacity) throw Error(Errc::InvalidDocument, s.name + " has no fleet/capacity section");
  CapacityResult out;
  out.mode = mode;
  out.cap_kbps = cap_kbps;
  const auto base = s.modules;
  assembly::Registry templates;
  for (const auto& [id, m] : base) {
    const auto at = id.find('@');
    templates.emplace(at == std::string::npos ? id : id.substr(0, at), m);
  }
  for (int n = 1; n <= s.capacity->max_robots; ++n) {
    auto spec = s;
    auto fleet = *s.fleet;
    fleet.robots = n;
    fleet.cap_kbps = cap_kbps;
    expand_fleet(spec, fleet, templates);
    spec.events.clear();
    spec.observe_node = robot_name(0);
    const auto r = run_scenario(spec, mode, seed);
    if (n == 1) out.baseline_latency_ms = r.steady_latency_ms;
    CapacityPoint p{n, false, r.steady_latency_ms, r.heartbeat_drops, r.startup_complete};
    p.stable = r.startup_complete && r.heartbeat_drops == 0 && r.steady_latency_ms <= 2.0 * out.baseline_latency_ms;
    out.points.push_back(p);
    if (!p.stable) break;
    out.max_stable = n;
  }
  return out;
}

struct CapacitySweep {
  std::vector<CapacityResult> results;  // per cap, full_mesh then routed
  double reference_ratio = 0.0;         // routed / full_mesh at the reference cap
  bool monotone = true;                 // per mode, the count never grows as the cap shrinks
  double min_ratio = 0.0;
  bool pass() const { return monotone && reference_ratio >= min_ratio; }
};

inline CapacitySweep capacity_sweep(const ScenarioSpec& s) {
  if (!s.capacity) throw Error(Errc::InvalidDocument, s.name + " has no capacity section");
  const auto& c = *s.capacity;
  const auto seed = s.seeds.empty() ? 1 : s.seeds.front();
  CapacitySweep out;
  out.min_ratio = c.min_ratio;
  auto caps = c.caps_kbps;
  std::sort(caps.begin(), caps.end());
  std::map<Mode, int> previous;
  int ref_mesh = 0, ref_routed = 0;
  for (const auto cap : caps) {
    for (const auto mode : {Mode::full_mesh, Mode::routed}) {
      auto r = max_stable_count(s, mode, cap, seed);
      if (previous.count(mode) && r.max_stable < previous[mode]) out.monotone = false;
      previous[mode] = r.max_stable;
      if (cap == c.reference_kbps) (mode == Mode::routed ? ref_routed : ref_mesh) = r.max_stable;
      out.results.push_back(std::move(r));
    }
  }
  out.reference_ratio = static_cast<double>(ref_routed) / std::max(ref_mesh, 1);
  return out;
}

// ---- reports ---------------------------------------------------------------------

inline json to_json(const CapacityResult& c);

inline json to_json(const RunResult& r) {
  json roles = json::object();
  for (const auto& [k, v] : r.roles) roles[k] = v;
  json observed = json::object();
  for (const auto& [k, v] : r.observed) observed[k] = v;
  return json{{"mode", fabric::to_string(r.mode)},
              {"seed", r.seed},
              {"components", r.components},
              {"roles", roles},
              {"observed", observed},
              {"observer_bytes", r.observer_bytes},
              {"publisher_bytes", r.publisher_bytes},
              {"steady_latency_ms", r.steady_latency_ms},
              {"heartbeat_drops", r.heartbeat_drops},
              {"startup_complete", r.startup_complete},
              {"digest", r.digest},
              {"fabric", fabric::metrics_summary(r.metrics)}};
}

inline json to_json(const ComparisonReport& r) {
  json values = json::object(), ratios = json::object(), per_seed = json::object(), checks = json::array();
  for (const auto& [m, v] : r.values_a) values[m][fabric::to_string(r.a)] = v;
  for (const auto& [m, v] : r.values_b) values[m][fabric::to_string(r.b)] = v;
  for (const auto& [m, v] : r.ratios) ratios[m] = v;
  for (const auto& [m, v] : r.seed_ratios) per_seed[m] = v;
  for (const auto& c : r.checks) {
    checks.push_back({{"metric", c.metric}, {"threshold", c.threshold}, {"value", c.value}, {"pass", c.pass}});
  }
  json digests = json::object();
  for (const auto& [m, d] : r.digests) digests[m] = d;
  return json{{"scenario", r.scenario}, {"modes", {fabric::to_string(r.a), fabric::to_string(r.b)}},
              {"seeds", r.seeds},       {"values", values},
              {"ratios", ratios},       {"seed_ratios", per_seed},
              {"checks", checks},       {"digests", digests},
              {"pass", r.pass()}};
}

inline json to_json(const CapacityResult& c) {
  json points = json::array();
  for (const auto& p : c.points) {
    points.push_back({{"robots", p.robots},
                      {"stable", p.stable},
                      {"steady_latency_ms", p.steady_latency_ms},
                      {"heartbeat_drops", p.heartbeat_drops},
                      {"startup_complete", p.startup_complete}});
  }
  return json{{"mode", fabric::to_string(c.mode)},
              {"cap_kbps", c.cap_kbps},
              {"baseline_latency_ms", c.baseline_latency_ms},
              {"max_stable", c.max_stable},
              {"points", points}};
}

/// `<metric>.csv` with one `mode,seed,value` row per run.
inline std::map<std::string, std::string> metric_csvs(const ComparisonReport& r) {
  std::map<std::string, std::string> out;
  for (const auto& [m, va] : r.values_a) {
    std::string text = "mode,seed,value\n";
    const auto& vb = r.values_b.at(m);
    for (std::size_t i = 0; i < r.seeds.size(); ++i) {
      text += std::string(fabric::to_string(r.a)) + "," + std::to_string(r.seeds[i]) + "," + fabric::detail::fixed(va[i]) + "\n";
      text += std::string(fabric::to_string(r.b)) + "," + std::to_string(r.seeds[i]) + "," + fabric::detail::fixed(vb[i]) + "\n";
    }
    out[m + ".csv"] = text;
  }
  return out;
}

inline json to_json(const CapacitySweep& s) {
  json results = json::array();
  for (const auto& r : s.results) results.push_back(to_json(r));
  return json{{"capacity", results},
              {"reference_ratio", s.reference_ratio},
              {"min_ratio", s.min_ratio},
              {"monotone", s.monotone},
              {"pass", s.pass()}};
}

}  // namespace modstack::bench
