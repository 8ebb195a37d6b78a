#pragma once

// The stock component cores, plus the telemetry injection and the
// broken-joint override. Cores talk to each other only through bound keys.
//
// Key conventions (joint names are `<instance>/<joint>`):
//   joints/<instance>/<joint>/{state,target,command}
//   tf/<parent>/<frame>
//   health/<component>/{alive,quarantined}
//   diagnostics/<component>, telemetry/<component>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "modstack/assembly/io.hpp"
#include "modstack/runtime/component.hpp"
#include "modstack/runtime/kinematics.hpp"
#include "modstack/runtime/payload.hpp"

namespace modstack::runtime {

inline std::string joint_key(const std::string& joint, const std::string& what) { return "joints/" + joint + "/" + what; }

/// Splits `<instance>/<joint>` at the last slash.
inline std::pair<std::string, std::string> split_joint(const std::string& global) {
  const auto slash = global.rfind('/');
  if (slash == std::string::npos) return {"", global};
  return {global.substr(0, slash), global.substr(slash + 1)};
}

/// The joint a `joints/<instance>/<joint>/...` sample refers to.
inline std::string joint_of(const KeyExpr& key) {
  const auto& c = key.chunks();
  if (c.size() < 3) return "";
  std::string out;
  for (std::size_t i = 1; i + 1 < c.size(); ++i) out += (i > 1 ? "/" : "") + c[i];
  return out;
}

/// Publishes `tf` on the point's scoped `tf/<parent>/<frame>` binding.
inline void publish_transform(Context& ctx, const std::string& point, const Transform& tf) {
  ctx.publish(point, encode(tf), "tf/" + tf.parent + "/" + tf.frame);
}

namespace cores {

struct MotorState {
  std::map<std::string, JointState> joints;
  std::map<std::string, double> goals;
};

/// Shared body of the hardware and virtual motor interfaces. `advance`
/// moves each joint towards its goal over `dt` milliseconds.
template <typename Advance>
CoreDef motor_core(std::string name, Advance advance) {
  CoreDef c{std::move(name), {"command"}, {"state", "telemetry"}, {}, ExecutorPolicy::periodic(50)};
  c.defaults[kOnInit] = [](Context& ctx, const Event&) {
    auto& st = ctx.local<MotorState>("motor");
    for (const auto& j : ctx.params().value("joints", std::vector<std::string>{})) {
      st.joints[j] = JointState{j, 0.0, 0.0, 0.0, ctx.now_ms()};
      st.goals[j] = 0.0;
    }
  };
  c.defaults["command"] = [](Context& ctx, const Event& ev) {
    auto& st = ctx.local<MotorState>("motor");
    const auto cmd = decode_joint(ev.sample->payload);
    if (st.goals.contains(cmd.joint)) st.goals[cmd.joint] = cmd.position;
  };
  c.defaults[kOnTick] = [advance](Context& ctx, const Event&) {
    auto& st = ctx.local<MotorState>("motor");
    for (auto& [j, s] : st.joints) {
      const double dt = ctx.now_ms() - s.stamp_ms;
      advance(ctx, s, st.goals[j], dt);
      s.stamp_ms = ctx.now_ms();
      ctx.invoke("dispatch", s);
    }
  };
  c.defaults["dispatch"] = [](Context& ctx, const Event& ev) {
    const auto& s = std::any_cast<const JointState&>(ev.data);
    ctx.publish("state", encode(s), joint_key(s.joint, "state"));
  };
  c.defaults[kOnShutdown] = [](Context&, const Event&) {};
  return c;
}

/// Hardware bus stand-in: the encoder reads back the last accepted setpoint.
inline CoreDef motor_interface() {
  return motor_core("motor_interface", [](Context&, JointState& s, double goal, double dt) {
    s.velocity = dt > 0 ? (goal - s.position) * 1000.0 / dt : 0.0;
    s.position = goal;
    s.effort = 0.0;
  });
}

/// First-order joint dynamics with time constant `tau_ms`.
inline CoreDef motor_interface_virtual() {
  return motor_core("motor_interface_virtual", [](Context& ctx, JointState& s, double goal, double dt) {
    const double tau = ctx.params().value("tau_ms", 100.0);
    const double before = s.position;
    s.position = goal + (before - goal) * std::exp(-dt / tau);
    s.velocity = dt > 0 ? (s.position - before) * 1000.0 / dt : 0.0;
    s.effort = (goal - s.position) / std::max(tau, 1.0);
  });
}

struct JointManagerState {
  std::map<std::string, JointState> current;
  std::map<std::string, double> goals;
};

/// Tracks targets and states and emits synchronized commands each tick.
inline CoreDef joint_manager() {
  CoreDef c{"joint_manager", {"target", "state"}, {"command", "telemetry"}, {}, ExecutorPolicy::periodic(50)};
  c.defaults[kOnInit] = [](Context&, const Event&) {};
  c.defaults["target"] = [](Context& ctx, const Event& ev) {
    auto& st = ctx.local<JointManagerState>("joint_manager");
    const auto t = decode_joint(ev.sample->payload);
    st.goals[t.joint] = t.position;
  };
  c.defaults["state"] = [](Context& ctx, const Event& ev) {
    auto& st = ctx.local<JointManagerState>("joint_manager");
    const auto s = decode_joint(ev.sample->payload);
    st.current[s.joint] = s;
  };
  c.defaults[kOnTick] = [](Context& ctx, const Event&) {
    auto& st = ctx.local<JointManagerState>("joint_manager");
    std::vector<JointTarget> goals;
    for (const auto& [j, g] : st.goals) {
      if (!st.current.contains(j)) return;
      if (std::abs(st.current.at(j).position - g) > 1e-9) goals.push_back(JointTarget{j, g, {}, {}, ctx.now_ms()});
    }
    if (goals.empty()) return;
    for (auto& cmd : sync_targets(goals, st.current, ctx.params().value("max_step", 0.05))) {
      cmd.stamp_ms = ctx.now_ms();
      ctx.invoke("dispatch", cmd);
    }
  };
  c.defaults["dispatch"] = [](Context& ctx, const Event& ev) {
    const auto& cmd = std::any_cast<const JointTarget&>(ev.data);
    ctx.publish("command", encode(cmd), joint_key(cmd.joint, "command"));
  };
  c.defaults[kOnShutdown] = [](Context&, const Event&) {};
  return c;
}

/// Publishes the module tip pose computed from joint states.
inline CoreDef kinematics_manager() {
  CoreDef c{"kinematics_manager", {"state"}, {"pose"}, {}, ExecutorPolicy::periodic(100)};
  c.defaults[kOnInit] = [](Context& ctx, const Event&) {
    ctx.local<assembly::RobotDescription>("description") = assembly::description_from_json(ctx.params().at("description"));
  };
  c.defaults["state"] = [](Context& ctx, const Event& ev) {
    const auto s = decode_joint(ev.sample->payload);
    ctx.local<std::map<std::string, double>>("positions")[s.joint] = s.position;
  };
  c.defaults[kOnTick] = [](Context& ctx, const Event&) {
    const auto& d = ctx.local<assembly::RobotDescription>("description");
    const auto& positions = ctx.local<std::map<std::string, double>>("positions");
    Transform tf;
    try {
      tf = forward_kinematics(d, positions, ctx.params().at("tip").get<std::string>());
    } catch (const Error& e) {
      if (e.code() == Errc::MissingJointState) return;  // not every joint reported yet
      throw;
    }
    tf.frame = ctx.params().value("frame", tf.frame);
    tf.stamp_ms = ctx.now_ms();
    publish_transform(ctx, "pose", tf);
  };
  c.defaults[kOnShutdown] = [](Context&, const Event&) {};
  return c;
}

/// Periodic pose of one frame: a slow circle around `origin` when
/// `radius` is set, otherwise a fixed offset.
inline CoreDef location_publisher() {
  CoreDef c{"location_publisher", {}, {"tf"}, {}, ExecutorPolicy::periodic(200)};
  c.defaults[kOnInit] = [](Context&, const Event&) {};
  c.defaults[kOnTick] = [](Context& ctx, const Event&) {
    const auto& p = ctx.params();
    Transform tf;
    tf.parent = p.value("parent", "world");
    tf.frame = p.value("frame", ctx.name());
    const auto origin = p.value("origin", std::vector<double>{0, 0, 0});
    const double radius = p.value("radius", 0.0);
    const double w = p.value("angular_rate", 0.1) * ctx.now_ms() / 1000.0;
    tf.translation = Eigen::Vector3d(origin[0] + radius * std::cos(w), origin[1] + radius * std::sin(w), origin[2]);
    tf.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(radius > 0 ? w : 0.0, Eigen::Vector3d::UnitZ()));
    tf.stamp_ms = ctx.now_ms();
    publish_transform(ctx, "tf", tf);
  };
  c.defaults[kOnShutdown] = [](Context&, const Event&) {};
  return c;
}

struct Liveness {
  double last_seen = 0.0;
  bool quarantined = false;
  bool dead = false;
};

/// The component a `health/<component>/<what>` key refers to.
inline std::string component_of(const KeyExpr& key) { return joint_of(key); }

/// Declares a watched component dead once it has missed three expected
/// heartbeats (plus `grace_ms`), or at its next expected heartbeat after a
/// quarantine. Reports `dead <component> <ms>` / `alive <component> <ms>`.
inline CoreDef health_monitor() {
  CoreDef c{"health_monitor", {"alive"}, {"diagnostics"}, {}, ExecutorPolicy::periodic(100)};
  c.defaults[kOnInit] = [](Context&, const Event&) {};
  c.defaults["alive"] = [](Context& ctx, const Event& ev) {
    auto& seen = ctx.local<std::map<std::string, Liveness>>("liveness");
    const auto& chunks = ev.sample->key.chunks();
    auto& l = seen[component_of(ev.sample->key)];
    if (chunks.back() == "quarantined") {
      l.quarantined = true;
      return;
    }
    l.last_seen = ctx.now_ms();
    if (l.dead && !l.quarantined) {
      l.dead = false;
      ctx.publish("diagnostics", encode_text("alive " + component_of(ev.sample->key) + " " + std::to_string(ctx.now_ms())));
    }
  };
  c.defaults[kOnTick] = [](Context& ctx, const Event&) {
    const double period = ctx.params().value("heartbeat_ms", kHeartbeatPeriodMs);
    const double grace = ctx.params().value("grace_ms", 200.0);
    for (auto& [name, l] : ctx.local<std::map<std::string, Liveness>>("liveness")) {
      if (l.dead) continue;
      const double deadline = l.quarantined ? l.last_seen + period : l.last_seen + 3 * period + grace;
      if (ctx.now_ms() >= deadline) {
        l.dead = true;
        ctx.publish("diagnostics", encode_text("dead " + name + " " + std::to_string(ctx.now_ms())));
      }
    }
  };
  c.defaults[kOnShutdown] = [](Context&, const Event&) {};
  return c;
}

/// Scripted operator: sinusoidal targets for its joints.
inline CoreDef operator_core() {
  CoreDef c{"operator", {}, {"target"}, {}, ExecutorPolicy::periodic(500)};
  c.defaults[kOnInit] = [](Context&, const Event&) {};
  c.defaults[kOnTick] = [](Context& ctx, const Event&) {
    const auto& p = ctx.params();
    const double amplitude = p.value("amplitude", 0.3);
    const double phase = p.value("phase", 0.0);
    const double t = ctx.now_ms() / 1000.0;
    for (const auto& j : p.value("joints", std::vector<std::string>{})) {
      JointTarget target{j, amplitude * std::sin(0.5 * t + phase), {}, {}, ctx.now_ms()};
      ctx.publish("target", encode(target), joint_key(j, "target"));
    }
  };
  c.defaults[kOnShutdown] = [](Context&, const Event&) {};
  return c;
}

/// Counts samples and payload bytes on its input.
inline CoreDef sink(std::string name) {
  CoreDef c{std::move(name), {"input"}, {}, {}, ExecutorPolicy::event_driven()};
  c.defaults[kOnInit] = [](Context&, const Event&) {};
  c.defaults["input"] = [](Context& ctx, const Event& ev) {
    ctx.local<std::uint64_t>("samples") += 1;
    ctx.local<std::uint64_t>("bytes") += ev.sample->payload.size();
  };
  c.defaults[kOnShutdown] = [](Context&, const Event&) {};
  return c;
}

/// Appended to a dispatch point: republishes a running count every
/// `telemetry_every` dispatches on `telemetry/<component>`.
inline PatchDef telemetry() {
  return {"telemetry", "dispatch", [](Context& ctx, const Event&) {
            auto& n = ctx.local<std::uint64_t>("telemetry");
            ++n;
            if (ctx.bound("telemetry") && n % ctx.params().value("telemetry_every", 20u) == 0) {
              ctx.publish("telemetry", encode_text(std::to_string(n)));
            }
          }};
}

/// Replaces command dispatch: the joint named by `broken_joint` is held at
/// its last reported position, the others pass through.
inline PatchDef broken_joint() {
  return {"broken_joint", "dispatch", [](Context& ctx, const Event& ev) {
            auto cmd = std::any_cast<const JointTarget&>(ev.data);
            if (split_joint(cmd.joint).second == ctx.params().value("broken_joint", "")) {
              const auto& st = ctx.local<JointManagerState>("joint_manager");
              if (auto it = st.current.find(cmd.joint); it != st.current.end()) cmd.position = it->second.position;
            }
            ctx.publish("command", encode(cmd), joint_key(cmd.joint, "command"));
          }};
}

}  // namespace cores

inline ComponentRegistry standard_registry() {
  ComponentRegistry r;
  for (auto core : {cores::motor_interface(), cores::motor_interface_virtual(), cores::joint_manager(),
                    cores::kinematics_manager(), cores::location_publisher(), cores::health_monitor(),
                    cores::operator_core(), cores::sink("data_monitor"), cores::sink("archiver")}) {
    r.cores.emplace(core.name, core);
  }
  auto t = cores::telemetry();
  r.injections.emplace(t.name, t);
  auto b = cores::broken_joint();
  r.overrides.emplace(b.name, b);
  return r;
}

}  // namespace modstack::runtime
