#pragma once

// Components: a core's handler slots extended by injections and altered by
// overrides, bound to the fabric through key expressions. Handlers only see a
// Context, which reaches other components exclusively through the fabric.

#include <any>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "modstack/error.hpp"
#include "modstack/fabric/network.hpp"
#include "modstack/keyspace.hpp"

namespace modstack::runtime {

using json = nlohmann::json;
using fabric::Network;
using fabric::NodeId;
using fabric::Sample;
using fabric::SimTime;

inline constexpr const char* kOnInit = "on_init";
inline constexpr const char* kOnTick = "on_tick";
inline constexpr const char* kOnShutdown = "on_shutdown";
inline constexpr double kHeartbeatPeriodMs = 1000.0;

struct ExecutorPolicy {
  enum class Kind { event_driven, periodic } kind = Kind::event_driven;
  double period_ms = 0.0;
  static ExecutorPolicy event_driven() { return {}; }
  static ExecutorPolicy periodic(double ms) { return {Kind::periodic, ms}; }
  friend bool operator==(const ExecutorPolicy&, const ExecutorPolicy&) = default;
};

struct ComponentSpec {
  std::string name;
  std::string core;
  std::vector<std::string> injections;
  std::vector<std::string> overrides;
  std::map<std::string, KeyExpr> bindings;
  ExecutorPolicy executor;
  json parameters = json::object();
};

class Context;

struct Event {
  std::string point;
  const Sample* sample = nullptr;
  std::any data;
};

using Handler = std::function<void(Context&, const Event&)>;

struct NamedHandler {
  std::string origin;
  Handler fn;
};

struct CoreDef {
  std::string name;
  std::vector<std::string> inputs;          // points subscribed through their binding
  std::vector<std::string> outputs;         // points published through their binding
  std::map<std::string, Handler> defaults;  // every slot, including lifecycle ones
  ExecutorPolicy executor;                  // used when the spec leaves it event_driven
};

struct PatchDef {
  std::string name;
  std::string point;
  Handler fn;
};

struct ComponentRegistry {
  std::map<std::string, CoreDef> cores;
  std::map<std::string, PatchDef> injections;
  std::map<std::string, PatchDef> overrides;
};

struct ComposedComponent {
  ComponentSpec spec;
  CoreDef core;
  std::map<std::string, std::vector<NamedHandler>> slots;

  std::vector<std::string> origins(const std::string& point) const {
    std::vector<std::string> out;
    if (auto it = slots.find(point); it != slots.end()) {
      for (const auto& h : it->second) out.push_back(h.origin);
    }
    return out;
  }
};

/// Core defaults, then injections appended in order, then each override
/// replaces the whole slot it targets.
inline ComposedComponent compose(const ComponentSpec& spec, const ComponentRegistry& registry) {
  const auto core = registry.cores.find(spec.core);
  if (core == registry.cores.end()) throw Error(Errc::UnknownCore, spec.name + ": " + spec.core);
  ComposedComponent c{spec, core->second, {}};
  for (const auto& [point, fn] : core->second.defaults) c.slots[point].push_back({core->second.name, fn});
  for (const auto& id : spec.injections) {
    const auto it = registry.injections.find(id);
    if (it == registry.injections.end()) throw Error(Errc::UnknownInjection, spec.name + ": " + id);
    if (!c.slots.contains(it->second.point)) {
      throw Error(Errc::UnknownInjection, id + " targets " + it->second.point + ", absent from " + spec.core);
    }
    c.slots[it->second.point].push_back({id, it->second.fn});
  }
  std::map<std::string, std::string> claimed;
  for (const auto& id : spec.overrides) {
    const auto it = registry.overrides.find(id);
    if (it == registry.overrides.end()) throw Error(Errc::UnknownOverride, spec.name + ": " + id);
    const auto& point = it->second.point;
    if (!c.slots.contains(point)) throw Error(Errc::UnknownOverride, id + " targets " + point + ", absent from " + spec.core);
    if (auto [prev, fresh] = claimed.emplace(point, id); !fresh) {
      throw Error(Errc::OverrideConflict, prev->second + " and " + id + " both override " + point);
    }
    c.slots[point] = {{id, it->second.fn}};
  }
  if (c.spec.executor.kind == ExecutorPolicy::Kind::event_driven) c.spec.executor = core->second.executor;
  return c;
}

enum class Status { pending, running, quarantined, stopped };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pending: return "pending";
    case Status::running: return "running";
    case Status::quarantined: return "quarantined";
    case Status::stopped: return "stopped";
  }
  return "?";
}

struct TraceEntry {
  double at_ms = 0.0;
  std::string event;  // on_init | on_sample | on_tick | on_shutdown | panic
  std::string point;
  std::vector<std::string> handlers;
  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

using ComponentTrace = std::vector<TraceEntry>;

/// One line per event: `<ms> <event> <point> <handler,...>`.
inline std::string to_lines(const ComponentTrace& trace) {
  std::ostringstream out;
  for (const auto& e : trace) {
    out << e.at_ms << ' ' << e.event << ' ' << (e.point.empty() ? "-" : e.point) << ' ';
    for (std::size_t i = 0; i < e.handlers.size(); ++i) out << (i ? "," : "") << e.handlers[i];
    out << '\n';
  }
  return out.str();
}

inline std::string health_key(const std::string& component, const std::string& what) {
  return "health/" + component + "/" + what;
}

class ComponentInstance;

/// Everything a handler may touch: its own parameters, state, clock, and
/// bound publication points.
class Context {
 public:
  const std::string& name() const;
  const json& params() const;
  double now_ms() const;
  bool bound(const std::string& point) const;
  const KeyExpr& binding(const std::string& point) const;
  /// Publishes on the point's binding; a wildcard binding needs a concrete
  /// `key` inside it.
  void publish(const std::string& point, fabric::Bytes payload, const std::string& key = "");
  /// Runs every handler in `point`'s slot.
  void invoke(const std::string& point, std::any data = {});

  template <typename T>
  T& local(const std::string& tag) {
    auto& slot = state_[tag];
    if (!slot.has_value()) slot = T{};
    return std::any_cast<T&>(slot);
  }

 private:
  friend class ComponentInstance;
  explicit Context(ComponentInstance& self) : self_(self) {}
  ComponentInstance& self_;
  std::map<std::string, std::any> state_;
};

class ComponentInstance {
 public:
  ComponentInstance(ComposedComponent c, Network& net, NodeId node)
      : c_(std::move(c)), net_(net), node_(node), ctx_(*this), alive_(std::make_shared<bool>(true)) {}
  ~ComponentInstance() { *alive_ = false; }
  ComponentInstance(const ComponentInstance&) = delete;
  ComponentInstance& operator=(const ComponentInstance&) = delete;

  const std::string& name() const noexcept { return c_.spec.name; }
  const ComposedComponent& composed() const noexcept { return c_; }
  Status status() const noexcept { return status_; }
  const ComponentTrace& trace() const noexcept { return trace_; }
  NodeId node() const noexcept { return node_; }
  std::optional<double> started_ms() const noexcept { return started_; }
  std::optional<double> stopped_ms() const noexcept { return stopped_; }
  const std::vector<fabric::EndpointId>& subscriptions() const noexcept { return subs_; }
  std::uint64_t samples_received() const noexcept { return received_; }
  /// Payload bytes this component published on bound points.
  std::uint64_t bytes_published() const noexcept { return published_bytes_; }

  /// Declares every bound point, then runs on_init and arms the timers.
  void start() {
    if (status_ != Status::pending) return;
    session_ = net_.open_session(node_, name());
    health_ = net_.declare_endpoint(*session_, fabric::EndpointKind::publisher, KeyExpr::parse(health_key(name(), "*")));
    for (const auto& point : c_.core.outputs) {
      if (auto it = c_.spec.bindings.find(point); it != c_.spec.bindings.end()) {
        pubs_[point] = net_.declare_endpoint(*session_, fabric::EndpointKind::publisher, it->second);
      }
    }
    for (const auto& point : c_.core.inputs) {
      auto it = c_.spec.bindings.find(point);
      if (it == c_.spec.bindings.end()) continue;
      std::weak_ptr<bool> alive = alive_;
      subs_.push_back(net_.declare_endpoint(*session_, fabric::EndpointKind::subscriber, it->second,
                                            [this, alive, point](const Sample& s) {
                                              if (auto a = alive.lock(); a && *a) on_sample(point, s);
                                            }));
    }
    status_ = Status::running;
    started_ = net_.now().count() / 1000.0;
    dispatch(kOnInit, kOnInit, Event{kOnInit});
    if (status_ != Status::running) return;
    heartbeat();
    if (c_.spec.executor.kind == ExecutorPolicy::Kind::periodic && c_.spec.executor.period_ms > 0) {
      arm_tick(net_.now() + fabric::from_ms(c_.spec.executor.period_ms));
    }
  }

  /// Runs on_shutdown (if still healthy) and withdraws every declaration.
  void stop() {
    if (status_ == Status::stopped || status_ == Status::pending) return;
    if (status_ == Status::running) dispatch(kOnShutdown, kOnShutdown, Event{kOnShutdown});
    if (status_ == Status::running) status_ = Status::stopped;
    if (session_) net_.close_session(*session_);
    session_.reset();
    pubs_.clear();
    stopped_ = net_.now().count() / 1000.0;
    if (status_ != Status::quarantined) status_ = Status::stopped;
  }

  /// Marks a component that never ran (e.g. composition failed elsewhere).
  void quarantine_now(const std::string& reason) { quarantine(reason); }

 private:
  friend class Context;

  void on_sample(const std::string& point, const Sample& s) {
    if (status_ != Status::running) return;
    ++received_;
    dispatch("on_sample", point, Event{point, &s, {}});
  }

  void dispatch(const std::string& event, const std::string& point, const Event& ev) {
    trace_.push_back({net_.now().count() / 1000.0, event, event == "on_sample" ? point : "", c_.origins(point)});
    run_slot(point, ev);
  }

  void run_slot(const std::string& point, const Event& ev) {
    auto it = c_.slots.find(point);
    if (it == c_.slots.end()) return;
    for (const auto& h : it->second) {
      if (status_ != Status::running) return;
      try {
        h.fn(ctx_, ev);
      } catch (const std::exception& e) {
        quarantine(h.origin + " at " + point + ": " + e.what());
      }
    }
  }

  void quarantine(const std::string& reason) {
    trace_.push_back({net_.now().count() / 1000.0, "panic", "", {reason}});
    status_ = Status::quarantined;
    if (session_ && health_) {
      net_.publish(*health_, fabric::Bytes(reason.begin(), reason.end()), fabric::SampleKind::put,
                   KeyExpr::parse(health_key(name(), "quarantined")));
    }
  }

  void heartbeat() {
    if (status_ != Status::running || !health_) return;
    net_.publish(*health_, fabric::Bytes(name().begin(), name().end()), fabric::SampleKind::put,
                 KeyExpr::parse(health_key(name(), "alive")));
    std::weak_ptr<bool> alive = alive_;
    net_.schedule(net_.now() + fabric::from_ms(kHeartbeatPeriodMs), [this, alive] {
      if (auto a = alive.lock(); a && *a) heartbeat();
    });
  }

  void arm_tick(SimTime when) {
    std::weak_ptr<bool> alive = alive_;
    net_.schedule(when, [this, alive, when] {
      auto a = alive.lock();
      if (!a || !*a || status_ != Status::running) return;
      dispatch(kOnTick, kOnTick, Event{kOnTick});
      arm_tick(when + fabric::from_ms(c_.spec.executor.period_ms));
    });
  }

  ComposedComponent c_;
  Network& net_;
  NodeId node_;
  Context ctx_;
  std::shared_ptr<bool> alive_;
  Status status_ = Status::pending;
  std::optional<fabric::SessionId> session_;
  std::optional<fabric::EndpointId> health_;
  std::map<std::string, fabric::EndpointId> pubs_;
  std::vector<fabric::EndpointId> subs_;
  ComponentTrace trace_;
  std::optional<double> started_, stopped_;
  std::uint64_t received_ = 0;
  std::uint64_t published_bytes_ = 0;
};

inline const std::string& Context::name() const { return self_.name(); }
inline const json& Context::params() const { return self_.c_.spec.parameters; }
inline double Context::now_ms() const { return self_.net_.now().count() / 1000.0; }
inline bool Context::bound(const std::string& point) const { return self_.c_.spec.bindings.contains(point); }

inline const KeyExpr& Context::binding(const std::string& point) const {
  auto it = self_.c_.spec.bindings.find(point);
  if (it == self_.c_.spec.bindings.end()) throw Error(Errc::UnboundPoint, self_.name() + ": " + point);
  return it->second;
}

inline void Context::publish(const std::string& point, fabric::Bytes payload, const std::string& key) {
  auto it = self_.pubs_.find(point);
  if (it == self_.pubs_.end()) throw Error(Errc::UnboundPoint, self_.name() + ": " + point);
  self_.published_bytes_ += payload.size();
  if (binding(point).is_concrete()) {
    self_.net_.publish(it->second, std::move(payload));
  } else {
    self_.net_.publish(it->second, std::move(payload), fabric::SampleKind::put, KeyExpr::parse(key));
  }
}

inline void Context::invoke(const std::string& point, std::any data) {
  self_.run_slot(point, Event{point, nullptr, std::move(data)});
}

/// Runs one component alone on `net` from now until `until_ms`.
inline ComponentTrace run_component(const ComposedComponent& c, Network& net, NodeId node, double until_ms) {
  ComponentInstance inst(c, net, node);
  inst.start();
  net.run_until(fabric::from_ms(until_ms));
  return inst.trace();
}

}  // namespace modstack::runtime
