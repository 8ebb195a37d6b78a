#pragma once

// JSON documents for modules, assemblies, and derived outputs.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "modstack/assembly/assembly.hpp"
#include "modstack/error.hpp"

namespace modstack::assembly {

namespace fs = std::filesystem;

inline json read_document(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::InvalidDocument, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, p.string() + ": " + e.what());
  }
}

/// Writes `j` with sorted keys and a trailing newline; returns the bytes written.
inline std::string write_document(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const auto text = j.dump(2) + "\n";
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::InvalidDocument, "cannot write " + p.string());
  out << text;
  return text;
}

inline Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::InvalidDocument, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline ModuleDescriptor module_from_json(const json& j) {
  try {
    ModuleDescriptor m;
    m.id = j.at("id").get<std::string>();
    m.family = j.value("family", "");
    m.revision = j.value("revision", "");
    m.kind = parse_kind(j.value("kind", "other"));
    m.host = j.value("host", "");
    for (const auto& jj : j.value("joints", json::array())) {
      m.joints.push_back(JointDesc{jj.at("name").get<std::string>(), vec3(jj.value("axis", json::array({0, 0, 1}))),
                                   vec3(jj.value("offset", json::array({0, 0, 0})))});
    }
    m.dof = j.value("dof", static_cast<int>(m.joints.size()));
    for (const auto& p : j.value("ports", json::array())) {
      m.ports.push_back(Port{p.at("name").get<std::string>(), p.value("link", ""), vec3(p.value("offset", json::array({0, 0, 0})))});
    }
    const auto calibration = j.value("calibration", json::object());
    for (const auto& [k, v] : calibration.items()) m.calibration[k] = v;
    m.injections = j.value("injections", std::vector<std::string>{});
    m.overrides = j.value("overrides", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("module: ") + e.what());
  }
}

inline json to_json(const ModuleDescriptor& m) {
  json joints = json::array(), ports = json::array();
  for (const auto& j : m.joints) joints.push_back({{"name", j.name}, {"axis", j.axis}, {"offset", j.offset}});
  for (const auto& p : m.ports) {
    json jp{{"name", p.name}, {"offset", p.offset}};
    if (!p.link.empty()) jp["link"] = p.link;
    ports.push_back(std::move(jp));
  }
  json cal = json::object();
  for (const auto& [k, v] : m.calibration) cal[k] = v;
  return json{{"id", m.id},         {"family", m.family},         {"revision", m.revision},
              {"kind", to_string(m.kind)}, {"dof", m.dof},        {"host", m.host},
              {"joints", joints},   {"ports", ports},             {"calibration", cal},
              {"injections", m.injections}, {"overrides", m.overrides}};
}

/// Loads every `*.json` module document in `dir`.
inline Registry load_registry(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(Errc::InvalidDocument, "module directory " + dir.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Registry reg;
  for (const auto& f : files) {
    auto m = module_from_json(read_document(f));
    if (reg.contains(m.id)) throw Error(Errc::InvalidDocument, "duplicate module id " + m.id);
    reg.emplace(m.id, std::move(m));
  }
  return reg;
}

inline PortRef parse_port_ref(const std::string& s) {
  const auto dot = s.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == s.size()) {
    throw Error(Errc::InvalidDocument, "port reference '" + s + "' is not instance.port");
  }
  return {s.substr(0, dot), s.substr(dot + 1)};
}

inline AssemblySpec assembly_from_json(const json& j) {
  try {
    AssemblySpec a;
    a.name = j.at("name").get<std::string>();
    a.root = j.at("root").get<std::string>();
    for (const auto& i : j.at("instances")) a.instances.push_back({i.at("id").get<std::string>(), i.at("module").get<std::string>()});
    for (const auto& e : j.value("attachments", json::array())) {
      a.attachments.push_back({parse_port_ref(e.at("parent").get<std::string>()), parse_port_ref(e.at("child").get<std::string>())});
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("assembly: ") + e.what());
  }
}

inline json to_json(const AssemblySpec& a) {
  json inst = json::array(), att = json::array();
  for (const auto& i : a.instances) inst.push_back({{"id", i.id}, {"module", i.module}});
  for (const auto& e : a.attachments) {
    att.push_back({{"parent", e.parent.instance + "." + e.parent.port}, {"child", e.child.instance + "." + e.child.port}});
  }
  return json{{"name", a.name}, {"root", a.root}, {"instances", inst}, {"attachments", att}};
}

inline AssemblySpec load_assembly(const fs::path& p) { return assembly_from_json(read_document(p)); }

inline json to_json(const RobotDescription& d) {
  json links = json::array();
  for (const auto& l : d.links) {
    json jl{{"name", l.name}, {"parent", l.parent}, {"offset", l.offset}};
    if (!l.joint.empty()) {
      jl["joint"] = l.joint;
      jl["axis"] = l.axis;
    }
    links.push_back(std::move(jl));
  }
  return json{{"name", d.name}, {"root", d.root}, {"links", links}, {"joints", d.joints}};
}

inline RobotDescription description_from_json(const json& j) {
  RobotDescription d;
  d.name = j.at("name").get<std::string>();
  d.root = j.at("root").get<std::string>();
  for (const auto& l : j.at("links")) {
    LinkDesc ld{l.at("name").get<std::string>(), l.at("parent").get<std::string>(), l.value("joint", ""),
                vec3(l.value("axis", json::array({0, 0, 1}))), vec3(l.at("offset"))};
    d.links.push_back(std::move(ld));
  }
  d.joints = j.at("joints").get<std::vector<std::string>>();
  return d;
}

inline json to_json(const HostConfig& h) {
  json params = json::object();
  for (const auto& [k, v] : h.parameters) params[k] = v;
  return json{{"host", h.host},
              {"instances", h.instances},
              {"components", h.components},
              {"joints_under_control", h.joints_under_control},
              {"parameters", params}};
}

/// Writes `<out>/<assembly>/robot_description.json` and one `hosts/<host>.json` per host.
inline std::vector<fs::path> write_generated(const fs::path& out, const AssemblySpec& spec, const Registry& registry) {
  const auto description = derive_kinematics(spec, registry);
  const auto hosts = derive_host_configs(spec, registry);
  const auto dir = out / spec.name;
  std::vector<fs::path> written{dir / "robot_description.json"};
  write_document(written.back(), to_json(description));
  for (const auto& h : hosts) {
    written.push_back(dir / "hosts" / (h.host + ".json"));
    write_document(written.back(), to_json(h));
  }
  return written;
}

}  // namespace modstack::assembly
