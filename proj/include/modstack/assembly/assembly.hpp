#pragma once

// Module descriptors, assemblies, and the descriptions derived from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "modstack/error.hpp"

namespace modstack::assembly {

using json = nlohmann::json;
using Vec3 = std::array<double, 3>;

enum class ModuleKind { limb, wheel, gripper, base, other };

inline const char* to_string(ModuleKind k) {
  switch (k) {
    case ModuleKind::limb: return "limb";
    case ModuleKind::wheel: return "wheel";
    case ModuleKind::gripper: return "gripper";
    case ModuleKind::base: return "base";
    case ModuleKind::other: return "other";
  }
  return "other";
}

inline ModuleKind parse_kind(const std::string& s) {
  for (auto k : {ModuleKind::limb, ModuleKind::wheel, ModuleKind::gripper, ModuleKind::base, ModuleKind::other}) {
    if (s == to_string(k)) return k;
  }
  throw Error(Errc::InvalidDocument, "unknown module kind '" + s + "'");
}

struct JointDesc {
  std::string name;
  Vec3 axis{0, 0, 1};
  Vec3 offset{0, 0, 0};  // child link origin, expressed after the joint rotation
};

/// Attachment point. `link` names the joint whose child link carries the port;
/// empty means the module's root link.
struct Port {
  std::string name;
  std::string link;
  Vec3 offset{0, 0, 0};
};

struct ModuleDescriptor {
  std::string id;
  std::string family;
  std::string revision;
  ModuleKind kind = ModuleKind::other;
  int dof = 0;
  std::vector<JointDesc> joints;
  std::string host;  // empty for passive modules without a computer
  std::vector<Port> ports;
  std::map<std::string, json> calibration;
  std::vector<std::string> injections;
  std::vector<std::string> overrides;
};

struct Instance {
  std::string id;
  std::string module;
};

struct PortRef {
  std::string instance;
  std::string port;
};

struct Attachment {
  PortRef parent;
  PortRef child;
};

struct AssemblySpec {
  std::string name;
  std::vector<Instance> instances;
  std::vector<Attachment> attachments;
  std::string root;
};

using Registry = std::map<std::string, ModuleDescriptor>;

// ---- validation ---------------------------------------------------------------

struct Issue {
  std::string code;
  std::string detail;
  friend bool operator==(const Issue&, const Issue&) = default;
};

struct ValidationReport {
  std::vector<Issue> issues;
  bool ok() const { return issues.empty(); }
  bool has(std::string_view code) const {
    for (const auto& i : issues) {
      if (i.code == code) return true;
    }
    return false;
  }
  std::string summary() const {
    std::string out;
    for (const auto& i : issues) out += (out.empty() ? "" : "; ") + i.code + ": " + i.detail;
    return out;
  }
};

inline bool unit_axis(const Vec3& a) {
  return std::abs(std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]) - 1.0) < 1e-9;
}

inline ValidationReport validate_module(const ModuleDescriptor& m) {
  ValidationReport r;
  if (m.dof != static_cast<int>(m.joints.size())) {
    r.issues.push_back({"DofMismatch", m.id + ": dof " + std::to_string(m.dof) + " vs " +
                                           std::to_string(m.joints.size()) + " joints"});
  }
  std::set<std::string> joints, ports;
  for (const auto& j : m.joints) {
    if (j.name.empty() || j.name.find('/') != std::string::npos || j.name == "*" || j.name == "**") {
      r.issues.push_back({"InvalidJointName", m.id + ": '" + j.name + "'"});
    }
    if (!joints.insert(j.name).second) r.issues.push_back({"DuplicateJoint", m.id + "/" + j.name});
    if (!unit_axis(j.axis)) r.issues.push_back({"NonUnitAxis", m.id + "/" + j.name});
  }
  for (const auto& p : m.ports) {
    if (!ports.insert(p.name).second) r.issues.push_back({"DuplicatePort", m.id + "." + p.name});
    if (!p.link.empty() && !joints.contains(p.link)) r.issues.push_back({"UnknownPortLink", m.id + "." + p.name});
  }
  if (m.dof > 0 && m.host.empty()) r.issues.push_back({"MissingHost", m.id + " has joints but no computer"});
  return r;
}

inline const Port* find_port(const ModuleDescriptor& m, const std::string& name) {
  for (const auto& p : m.ports) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

inline ValidationReport validate_assembly(const AssemblySpec& spec, const Registry& registry) {
  ValidationReport r;
  std::map<std::string, const ModuleDescriptor*> inst;
  for (const auto& i : spec.instances) {
    if (i.id.empty() || i.id.find('/') != std::string::npos || i.id == "*" || i.id == "**") {
      r.issues.push_back({"InvalidInstanceId", "'" + i.id + "'"});
    }
    auto it = registry.find(i.module);
    if (it == registry.end()) {
      r.issues.push_back({"UnknownModule", i.id + " -> " + i.module});
    }
    if (inst.contains(i.id)) {
      r.issues.push_back({"DuplicateInstance", i.id});
      continue;
    }
    inst[i.id] = it == registry.end() ? nullptr : &it->second;
    if (it != registry.end()) {
      for (auto& issue : validate_module(it->second).issues) r.issues.push_back(std::move(issue));
    }
  }
  if (spec.instances.empty()) r.issues.push_back({"EmptyAssembly", spec.name});
  if (!inst.contains(spec.root)) r.issues.push_back({"UnknownRoot", "'" + spec.root + "'"});

  std::set<std::pair<std::string, std::string>> used_ports;
  std::map<std::string, std::vector<std::string>> adj;
  std::map<std::string, int> parents;
  bool structural = true;
  for (const auto& a : spec.attachments) {
    bool ok = true;
    for (const auto* ref : {&a.parent, &a.child}) {
      auto it = inst.find(ref->instance);
      if (it == inst.end()) {
        r.issues.push_back({"UnknownInstance", ref->instance});
        ok = false;
      } else if (it->second && !find_port(*it->second, ref->port)) {
        r.issues.push_back({"UnknownPort", ref->instance + "." + ref->port});
        ok = false;
      } else if (!used_ports.insert({ref->instance, ref->port}).second) {
        r.issues.push_back({"PortReused", ref->instance + "." + ref->port});
        ok = false;
      }
    }
    if (a.parent.instance == a.child.instance) {
      r.issues.push_back({"CycleDetected", a.parent.instance + " attached to itself"});
      ok = false;
    }
    if (!ok) {
      structural = false;
      continue;
    }
    adj[a.parent.instance].push_back(a.child.instance);
    adj[a.child.instance].push_back(a.parent.instance);
    if (++parents[a.child.instance] > 1) {
      r.issues.push_back({"MultipleParents", a.child.instance});
    }
    if (const auto* m = inst[a.child.instance]) {
      if (const auto* p = find_port(*m, a.child.port); p && !p->link.empty()) {
        r.issues.push_back({"ChildPortNotOnRoot", a.child.instance + "." + a.child.port});
      }
    }
  }
  if (structural && inst.contains(spec.root)) {
    // a connected graph with n-1 edges is a tree
    if (spec.attachments.size() >= spec.instances.size()) {
      r.issues.push_back({"CycleDetected", std::to_string(spec.attachments.size()) + " attachments for " +
                                               std::to_string(spec.instances.size()) + " instances"});
    }
    if (parents.contains(spec.root)) r.issues.push_back({"RootHasParent", spec.root});
    std::set<std::string> seen{spec.root};
    std::vector<std::string> stack{spec.root};
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (const auto& v : adj[u]) {
        if (seen.insert(v).second) stack.push_back(v);
      }
    }
    for (const auto& [id, _] : inst) {
      if (!seen.contains(id)) r.issues.push_back({"Disconnected", id});
    }
  }
  return r;
}

// ---- robot description ------------------------------------------------------------

/// One link of the kinematic tree. `joint` is the global name of the revolute
/// joint between `parent` and this link; empty for fixed mounts and the root.
struct LinkDesc {
  std::string name;
  std::string parent;
  std::string joint;
  Vec3 axis{0, 0, 1};
  Vec3 offset{0, 0, 0};
  friend bool operator==(const LinkDesc&, const LinkDesc&) = default;
};

struct RobotDescription {
  std::string name;
  std::string root;
  std::vector<LinkDesc> links;      // parents precede children
  std::vector<std::string> joints;  // `<instance>/<joint>` in depth-first order

  const LinkDesc* link(const std::string& n) const {
    for (const auto& l : links) {
      if (l.name == n) return &l;
    }
    return nullptr;
  }
  std::vector<std::string> children(const std::string& n) const {
    std::vector<std::string> out;
    for (const auto& l : links) {
      if (l.parent == n && !l.name.empty() && l.name != root) out.push_back(l.name);
    }
    return out;
  }
  friend bool operator==(const RobotDescription&, const RobotDescription&) = default;
};

inline std::string global_joint(const std::string& instance, const std::string& joint) { return instance + "/" + joint; }

inline void require_valid(const AssemblySpec& spec, const Registry& registry) {
  const auto report = validate_assembly(spec, registry);
  if (!report.ok()) throw Error(Errc::InvalidAssembly, spec.name + ": " + report.summary());
}

inline RobotDescription derive_kinematics(const AssemblySpec& spec, const Registry& registry) {
  require_valid(spec, registry);
  std::map<std::string, const ModuleDescriptor*> module_of;
  for (const auto& i : spec.instances) module_of[i.id] = &registry.at(i.module);
  // children per parent instance, ordered by parent port name for determinism
  std::map<std::string, std::vector<const Attachment*>> kids;
  for (const auto& a : spec.attachments) kids[a.parent.instance].push_back(&a);
  for (auto& [_, v] : kids) {
    std::sort(v.begin(), v.end(), [](const Attachment* x, const Attachment* y) {
      return std::tie(x->parent.port, x->child.instance) < std::tie(y->parent.port, y->child.instance);
    });
  }

  RobotDescription d;
  d.name = spec.name;
  d.root = spec.root;
  auto link_of = [](const std::string& instance, const std::string& joint) {
    return joint.empty() ? instance : global_joint(instance, joint);
  };
  std::function<void(const std::string&, const std::string&, const Vec3&)> visit =
      [&](const std::string& instance, const std::string& parent_link, const Vec3& mount) {
        const auto& m = *module_of.at(instance);
        d.links.push_back(LinkDesc{instance, parent_link, "", {0, 0, 1}, mount});
        std::string prev = instance;
        for (const auto& j : m.joints) {
          const auto name = global_joint(instance, j.name);
          d.links.push_back(LinkDesc{name, prev, name, j.axis, j.offset});
          d.joints.push_back(name);
          prev = name;
        }
        for (const auto* a : kids[instance]) {
          const auto& pp = *find_port(m, a->parent.port);
          const auto& cp = *find_port(*module_of.at(a->child.instance), a->child.port);
          const Vec3 t{pp.offset[0] - cp.offset[0], pp.offset[1] - cp.offset[1], pp.offset[2] - cp.offset[2]};
          visit(a->child.instance, link_of(instance, pp.link), t);
        }
      };
  visit(spec.root, "", {0, 0, 0});
  return d;
}

// ---- host configurations -----------------------------------------------------------

/// Component roles launched for each module kind, in launch order.
inline std::vector<std::string> module_roles(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::limb:
    case ModuleKind::gripper:
      return {"motor_interface", "joint_manager", "kinematics_manager", "health_monitor", "location_publisher_0",
              "location_publisher_1"};
    case ModuleKind::wheel:
      return {"motor_interface", "joint_manager", "health_monitor", "location_publisher_0", "location_publisher_1"};
    case ModuleKind::base:
    case ModuleKind::other:
      return {};
  }
  return {};
}

inline std::string component_name(const std::string& instance, const std::string& role) { return instance + "/" + role; }

struct HostConfig {
  std::string host;
  std::vector<std::string> instances;
  std::vector<std::string> components;
  std::vector<std::string> joints_under_control;
  std::map<std::string, json> parameters;
  friend bool operator==(const HostConfig&, const HostConfig&) = default;
};

inline std::vector<HostConfig> derive_host_configs(const AssemblySpec& spec, const Registry& registry) {
  const auto description = derive_kinematics(spec, registry);
  std::map<std::string, HostConfig> by_host;
  // walk instances in depth-first description order so joint lists follow the tree
  std::vector<std::string> order;
  for (const auto& l : description.links) {
    if (l.joint.empty() && l.name.find('/') == std::string::npos) order.push_back(l.name);
  }
  std::map<std::string, const ModuleDescriptor*> module_of;
  for (const auto& i : spec.instances) module_of[i.id] = &registry.at(i.module);
  for (const auto& id : order) {
    const auto& m = *module_of.at(id);
    if (m.host.empty()) continue;
    auto& cfg = by_host[m.host];
    cfg.host = m.host;
    cfg.instances.push_back(id);
    for (const auto& role : module_roles(m.kind)) cfg.components.push_back(component_name(id, role));
    for (const auto& j : m.joints) cfg.joints_under_control.push_back(global_joint(id, j.name));
    for (const auto& [k, v] : m.calibration) cfg.parameters[id + "/" + k] = v;
    cfg.parameters[id + "/module"] = m.id;
    cfg.parameters[id + "/family"] = m.family;
    cfg.parameters[id + "/revision"] = m.revision;
  }
  std::vector<HostConfig> out;
  for (auto& [_, c] : by_host) out.push_back(std::move(c));
  return out;
}

}  // namespace modstack::assembly
