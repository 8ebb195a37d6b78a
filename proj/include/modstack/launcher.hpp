#pragma once

// Per-host launch plans for an assembly, and in-process start/stop of the
// planned components on a fabric node.

#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "modstack/assembly/io.hpp"
#include "modstack/buildgraph.hpp"
#include "modstack/runtime/cores.hpp"

namespace modstack::launch {

using assembly::AssemblySpec;
using runtime::ComponentSpec;
using runtime::json;

inline constexpr const char* kHostEnv = "MODSTACK_HOST";

struct LaunchOptions {
  bool sim = false;           // the host stands in for every robot computer
  bool aggregate_tf = false;  // comparison fixture: every transform on one `tf` key
};

/// A ground-control component pinned to a host.
struct ServiceAssignment {
  ComponentSpec spec;
  std::string host;
  std::string role;  // e.g. human_operator, archiver
};

struct LaunchEntry {
  ComponentSpec spec;
  std::string instance;  // empty for services
  bool virtual_substitution = false;
};

struct LaunchPlan {
  std::string host;
  std::vector<LaunchEntry> entries;
};

namespace detail {

inline ComponentSpec make(std::string name, std::string core, std::map<std::string, std::string> bindings,
                          json params = json::object()) {
  ComponentSpec s;
  s.name = std::move(name);
  s.core = std::move(core);
  for (const auto& [p, k] : bindings) s.bindings.emplace(p, KeyExpr::parse(k));
  s.parameters = std::move(params);
  return s;
}

}  // namespace detail

/// The components of one module instance, in role order.
inline std::vector<ComponentSpec> module_components(const AssemblySpec& spec, const assembly::Registry& registry,
                                                    const assembly::RobotDescription& description,
                                                    const std::string& instance, bool virtual_hw,
                                                    const LaunchOptions& options = {}) {
  const assembly::Instance* inst = nullptr;
  for (const auto& i : spec.instances) {
    if (i.id == instance) inst = &i;
  }
  if (!inst) throw Error(Errc::InvalidAssembly, "no instance " + instance);
  const auto& m = registry.at(inst->module);
  std::vector<std::string> joints;
  for (const auto& j : m.joints) joints.push_back(assembly::global_joint(instance, j.name));
  json calibration = json::object();
  for (const auto& [k, v] : m.calibration) calibration[k] = v;
  const auto jk = [&](const std::string& what) { return "joints/" + instance + "/*/" + what; };
  const std::string tf = options.aggregate_tf ? "tf" : "tf/*/*";

  std::map<std::string, double> zero;
  for (const auto& j : description.joints) zero[j] = 0.0;
  const auto placed = runtime::forward_kinematics(description, zero, instance).translation;

  std::vector<ComponentSpec> out;
  for (const auto& role : assembly::module_roles(m.kind)) {
    const auto name = assembly::component_name(instance, role);
    if (role == "motor_interface") {
      out.push_back(detail::make(name, virtual_hw ? "motor_interface_virtual" : "motor_interface",
                                 {{"command", jk("command")}, {"state", jk("state")}},
                                 {{"joints", joints}, {"tau_ms", 80.0}, {"calibration", calibration}}));
    } else if (role == "joint_manager") {
      auto s = detail::make(name, "joint_manager",
                            {{"target", jk("target")}, {"state", jk("state")}, {"command", jk("command")},
                             {"telemetry", "telemetry/" + instance}},
                            {{"joints", joints}, {"max_step", 0.05}, {"calibration", calibration}});
      s.injections = m.injections;
      s.overrides = m.overrides;
      if (calibration.contains("broken_joint")) s.parameters["broken_joint"] = calibration["broken_joint"];
      out.push_back(std::move(s));
    } else if (role == "kinematics_manager") {
      out.push_back(detail::make(name, "kinematics_manager", {{"state", jk("state")}, {"pose", tf}},
                                 {{"description", assembly::to_json(description)},
                                  {"tip", joints.empty() ? instance : joints.back()},
                                  {"frame", instance + "_tip"}}));
    } else if (role == "health_monitor") {
      out.push_back(detail::make(name, "health_monitor",
                                 {{"alive", "health/" + instance + "/**"}, {"diagnostics", "diagnostics/" + instance}}));
    } else if (role == "location_publisher_0") {
      out.push_back(detail::make(name, "location_publisher", {{"tf", tf}},
                                 {{"parent", "world"},
                                  {"frame", instance + "_base"},
                                  {"origin", {placed[0], placed[1], placed[2]}},
                                  {"radius", 0.5}}));
    } else if (role == "location_publisher_1") {
      out.push_back(detail::make(name, "location_publisher", {{"tf", tf}},
                                 {{"parent", instance + "_base"}, {"frame", instance + "_imu"}, {"origin", {0.0, 0.0, 0.05}}}));
    }
  }
  return out;
}

/// Hosts that are robot computers for this assembly.
inline std::set<std::string> robot_hosts(const AssemblySpec& spec, const assembly::Registry& registry) {
  std::set<std::string> out;
  for (const auto& h : assembly::derive_host_configs(spec, registry)) out.insert(h.host);
  return out;
}

/// Components `host` must run. A robot computer gets its own modules with
/// real hardware; with `sim`, any host runs every module on virtual
/// hardware. Services assigned to `host` are appended in declaration order.
inline LaunchPlan plan_launch(const AssemblySpec& spec, const std::string& host, const assembly::Registry& registry,
                              const std::vector<ServiceAssignment>& services = {}, const LaunchOptions& options = {}) {
  const auto configs = assembly::derive_host_configs(spec, registry);
  const auto description = assembly::derive_kinematics(spec, registry);
  LaunchPlan plan{host, {}};
  bool known = options.sim;
  for (const auto& cfg : configs) {
    if (!options.sim && cfg.host != host) continue;
    known = true;
    const bool virtual_hw = options.sim || cfg.host != host;
    for (const auto& instance : cfg.instances) {
      for (auto& c : module_components(spec, registry, description, instance, virtual_hw, options)) {
        plan.entries.push_back({std::move(c), instance, virtual_hw});
      }
    }
  }
  for (const auto& s : services) {
    if (s.host != host) continue;
    known = true;
    plan.entries.push_back({s.spec, "", false});
  }
  if (!known) throw Error(Errc::UnknownHost, host);
  return plan;
}

/// Every component the assembly and its services need, across all hosts.
inline std::vector<std::string> roster(const AssemblySpec& spec, const assembly::Registry& registry,
                                       const std::vector<ServiceAssignment>& services = {}) {
  std::vector<std::string> out;
  for (const auto& cfg : assembly::derive_host_configs(spec, registry)) {
    for (const auto& c : cfg.components) out.push_back(c);
  }
  for (const auto& s : services) out.push_back(s.spec.name);
  return out;
}

/// `--host`, then the environment, then the machine's hostname.
inline std::string resolve_host(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kHostEnv); env && *env) return env;
  if (const char* h = std::getenv("HOSTNAME"); h && *h) return h;
  return "localhost";
}

struct EntryStatus {
  std::string component;
  runtime::Status state = runtime::Status::pending;
  std::optional<double> started_ms;
  std::optional<double> stopped_ms;
  bool virtual_substitution = false;
  std::string error;
};

struct LaunchStatus {
  std::string host;
  std::vector<EntryStatus> entries;
  std::size_t count(runtime::Status s) const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.state == s;
    return n;
  }
};

/// A started plan. Entries that fail to compose are quarantined without
/// affecting their siblings.
class Launch {
 public:
  Launch(const LaunchPlan& plan, runtime::Network& net, runtime::NodeId node, const runtime::ComponentRegistry& registry)
      : host_(plan.host) {
    for (const auto& e : plan.entries) {
      Slot slot{e.spec.name, e.virtual_substitution, nullptr, ""};
      try {
        slot.instance = std::make_unique<runtime::ComponentInstance>(runtime::compose(e.spec, registry), net, node);
      } catch (const Error& err) {
        slot.error = err.what();
      }
      slots_.push_back(std::move(slot));
    }
    // each entry declares on the fabric inside start(), before its on_init
    for (auto& s : slots_) {
      if (s.instance) s.instance->start();
    }
  }

  LaunchStatus status() const {
    LaunchStatus out{host_, {}};
    for (const auto& s : slots_) {
      EntryStatus e{s.name, runtime::Status::quarantined, std::nullopt, std::nullopt, s.virtual_substitution, s.error};
      if (s.instance) {
        e.state = s.instance->status();
        e.started_ms = s.instance->started_ms();
        e.stopped_ms = s.instance->stopped_ms();
      }
      out.entries.push_back(std::move(e));
    }
    return out;
  }

  /// Shuts every entry down and withdraws its declarations.
  LaunchStatus stop() {
    for (auto& s : slots_) {
      if (s.instance) s.instance->stop();
    }
    return status();
  }

  const runtime::ComponentInstance* find(const std::string& name) const {
    for (const auto& s : slots_) {
      if (s.name == name) return s.instance.get();
    }
    return nullptr;
  }

 private:
  struct Slot {
    std::string name;
    bool virtual_substitution = false;
    std::unique_ptr<runtime::ComponentInstance> instance;
    std::string error;
  };
  std::string host_;
  std::vector<Slot> slots_;
};

inline std::unique_ptr<Launch> start(const LaunchPlan& plan, runtime::Network& net, runtime::NodeId node,
                                     const runtime::ComponentRegistry& registry = runtime::standard_registry()) {
  return std::make_unique<Launch>(plan, net, node, registry);
}

// ---- documents ----------------------------------------------------------------

inline ComponentSpec component_from_json(const json& j) {
  try {
    ComponentSpec s;
    s.name = j.at("name").get<std::string>();
    s.core = j.at("core").get<std::string>();
    s.injections = j.value("injections", std::vector<std::string>{});
    s.overrides = j.value("overrides", std::vector<std::string>{});
    const auto bindings = j.value("bindings", json::object());
    for (const auto& [point, key] : bindings.items()) s.bindings.emplace(point, KeyExpr::parse(key.get<std::string>()));
    if (j.contains("period_ms")) s.executor = runtime::ExecutorPolicy::periodic(j.at("period_ms").get<double>());
    s.parameters = j.value("parameters", json::object());
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("component: ") + e.what());
  }
}

inline json to_json(const ComponentSpec& s) {
  json bindings = json::object();
  for (const auto& [p, k] : s.bindings) bindings[p] = k.str();
  json j{{"name", s.name},           {"core", s.core},         {"injections", s.injections},
         {"overrides", s.overrides}, {"bindings", bindings},   {"parameters", s.parameters}};
  if (s.executor.kind == runtime::ExecutorPolicy::Kind::periodic) j["period_ms"] = s.executor.period_ms;
  return j;
}

inline std::vector<ServiceAssignment> services_from_json(const json& j) {
  std::vector<ServiceAssignment> out;
  for (const auto& s : j) {
    auto spec = component_from_json(s);
    const auto role = s.value("role", spec.core);
    out.push_back({std::move(spec), s.at("host").get<std::string>(), role});
  }
  return out;
}

inline json to_json(const LaunchPlan& p) {
  json entries = json::array();
  for (const auto& e : p.entries) {
    entries.push_back({{"component", to_json(e.spec)}, {"instance", e.instance}, {"virtual_substitution", e.virtual_substitution}});
  }
  return json{{"host", p.host}, {"entries", entries}};
}

inline json to_json(const LaunchStatus& s) {
  json entries = json::array();
  for (const auto& e : s.entries) {
    json je{{"component", e.component}, {"state", runtime::to_string(e.state)}, {"virtual", e.virtual_substitution}};
    if (e.started_ms) je["started_ms"] = *e.started_ms;
    if (e.stopped_ms) je["stopped_ms"] = *e.stopped_ms;
    if (!e.error.empty()) je["error"] = e.error;
    entries.push_back(std::move(je));
  }
  return json{{"host", s.host}, {"entries", entries}};
}

/// The builtin build actions plus `assemble`, which derives an assembly's
/// description and host configurations:
///   {"kind": "assemble", "assembly": "...", "modules": "...", "out": "..."}
inline std::optional<std::string> orchestrator_runner(const build::TaskSpec& t, const build::fs::path& workspace) {
  if (t.action.value("kind", "") != "assemble") return build::builtin_runner(t, workspace);
  try {
    const auto registry = assembly::load_registry(workspace / t.action.value("modules", "modules"));
    const auto spec = assembly::load_assembly(workspace / t.action.at("assembly").get<std::string>());
    assembly::write_generated(workspace / t.action.value("out", "generated"), spec, registry);
    return std::nullopt;
  } catch (const std::exception& e) {
    return std::string(e.what());
  }
}

}  // namespace modstack::launch
