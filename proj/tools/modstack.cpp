// modstack: manifest check, incremental build, assembly generation, launch,
// simulation, and benchmark reports.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "modstack/assembly/io.hpp"
#include "modstack/bench.hpp"
#include "modstack/buildgraph.hpp"
#include "modstack/launcher.hpp"

namespace fs = std::filesystem;
using namespace modstack;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

bool is_validation(Errc c) {
  switch (c) {
    case Errc::InvalidDocument:
    case Errc::InvalidAssembly:
    case Errc::UnknownHost:
    case Errc::DuplicateTask:
    case Errc::UnreadableWorkspace:
      return true;
    default:
      return false;
  }
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

int cmd_update(const fs::path& manifest_path, bool pin) {
  const auto workspace = fs::absolute(manifest_path).parent_path();
  auto manifest = build::manifest_from_json(fabric::read_json_file(manifest_path));
  const auto report = build::verify_manifest(manifest, workspace);
  if (pin) {
    for (const auto& [name, hash] : report.actual) manifest.entries[name].hash = hash;
    write_text(manifest_path, build::to_json(manifest).dump(2) + "\n");
    std::cout << "pinned " << report.actual.size() << " entries\n";
    return report.actual.size() == manifest.entries.size() ? kOk : kInvalid;
  }
  for (const auto& [name, status] : report.entries) std::cout << name << " " << build::to_string(status) << "\n";
  return report.pass() ? kOk : kInvalid;
}

int cmd_build(const fs::path& tasks_path) {
  const auto workspace = fs::absolute(tasks_path).parent_path();
  const auto tasks = build::tasks_from_json(fabric::read_json_file(tasks_path));
  std::optional<build::BuildReport> prior;
  if (fs::exists(workspace / build::kReportPath)) {
    prior = build::report_from_json(fabric::read_json_file(workspace / build::kReportPath));
  }
  const auto report = build::execute(tasks, prior, workspace, launch::orchestrator_runner);
  write_text(workspace / build::kReportPath, build::to_json(report).dump(2) + "\n");
  for (const auto& id : report.executed) std::cout << "executed " << id << "\n";
  for (const auto& id : report.skipped) std::cout << "skipped " << id << "\n";
  if (report.failed) {
    std::cerr << "task " << report.failed->first << " failed: " << report.failed->second << "\n";
    return kRuntime;
  }
  return kOk;
}

fs::path default_modules(const fs::path& assembly_path) { return fs::absolute(assembly_path).parent_path().parent_path() / "modules"; }

int cmd_assemble(const fs::path& spec_path, const fs::path& out, std::optional<fs::path> modules) {
  const auto registry = assembly::load_registry(modules.value_or(default_modules(spec_path)));
  const auto spec = assembly::load_assembly(spec_path);
  const auto report = assembly::validate_assembly(spec, registry);
  if (!report.ok()) {
    for (const auto& i : report.issues) std::cerr << i.code << ": " << i.detail << "\n";
    return kInvalid;
  }
  for (const auto& p : assembly::write_generated(out, spec, registry)) std::cout << p.string() << "\n";
  return kOk;
}

/// Runs the host's plan in-process for `duration_ms` and checks that every
/// component is running with a fresh heartbeat and no monitor reported it dead.
int cmd_launch(const fs::path& assembly_path, const std::string& host, bool sim, std::optional<fs::path> modules,
               std::optional<fs::path> services_path, double duration_ms) {
  const auto registry = assembly::load_registry(modules.value_or(default_modules(assembly_path)));
  const auto spec = assembly::load_assembly(assembly_path);
  std::vector<launch::ServiceAssignment> services;
  if (services_path) services = launch::services_from_json(fabric::read_json_file(*services_path).at("services"));
  const auto plan = launch::plan_launch(spec, host, registry, services, {sim, false});

  fabric::TopologySpec topo;
  topo.nodes = {{host, fabric::Role::peer}};
  runtime::Network net(topo);
  const auto node = net.node(host);
  std::map<std::string, double> last_beat;
  std::vector<std::string> dead;
  net.declare_endpoint(node, fabric::EndpointKind::subscriber, KeyExpr::parse("health/**"), [&](const fabric::Sample& s) {
    if (s.key.chunks().back() == "alive") last_beat[runtime::cores::component_of(s.key)] = fabric::to_ms(s.timestamp);
  });
  net.declare_endpoint(node, fabric::EndpointKind::subscriber, KeyExpr::parse("diagnostics/**"), [&](const fabric::Sample& s) {
    const auto text = runtime::decode_text(s.payload);
    if (text.rfind("dead ", 0) == 0) dead.push_back(text);
  });
  auto running = launch::start(plan, net, node);
  net.run_until(fabric::from_ms(duration_ms));
  const auto status = running->status();

  bool healthy = dead.empty();
  for (const auto& e : status.entries) {
    const auto it = last_beat.find(e.component);
    const bool fresh = it != last_beat.end() && duration_ms - it->second <= runtime::kHeartbeatPeriodMs * 1.5;
    healthy = healthy && e.state == runtime::Status::running && fresh;
  }
  json out = launch::to_json(status);
  out["sim_ms"] = duration_ms;
  out["heartbeats_alive"] = healthy;
  out["dead_reports"] = dead;
  const auto stopped = running->stop();
  out["stopped"] = stopped.count(runtime::Status::stopped);
  std::cout << out.dump(2) << "\n";
  return healthy ? kOk : kRuntime;
}

int cmd_sim(const fs::path& topology, const fs::path& scenario_path, const std::string& mode, std::uint64_t seed,
            std::optional<fs::path> out) {
  auto s = bench::load_scenario(scenario_path);
  s.topology = fabric::load_topology(topology);
  const auto r = bench::run_scenario(s, fabric::parse_mode(mode), seed);
  const auto j = bench::to_json(r);
  if (out) {
    write_text(*out / "run.json", j.dump(2) + "\n");
    write_text(*out / "nodes.csv", fabric::node_metrics_csv(r.metrics));
    write_text(*out / "links.csv", fabric::link_metrics_csv(r.metrics));
  }
  std::cout << j.dump(2) << "\n";
  return kOk;
}

/// Comparison scenarios produce per-metric CSVs and summary.json; capacity
/// scenarios sweep the fleet size per cap; anything else is run once per mode.
int cmd_bench(const fs::path& scenario_path, const fs::path& out) {
  const auto s = bench::load_scenario(scenario_path);
  json summary{{"scenario", s.name}};
  bool pass = true;
  if (s.capacity) {
    const auto sweep = bench::capacity_sweep(s);
    std::string csv = "cap_kbps,mode,max_stable\n";
    for (const auto& r : sweep.results) {
      csv += fabric::detail::fixed(r.cap_kbps) + "," + fabric::to_string(r.mode) + "," + std::to_string(r.max_stable) + "\n";
    }
    write_text(out / "max_stable.csv", csv);
    summary = bench::to_json(sweep);
    pass = sweep.pass();
  } else if (!s.thresholds.empty() || !s.metrics.empty()) {
    const auto rep = bench::compare(s, s.seeds);
    for (const auto& [name, text] : bench::metric_csvs(rep)) write_text(out / name, text);
    summary = bench::to_json(rep);
    pass = rep.pass();
  } else {
    const auto seed = s.seeds.empty() ? 1 : s.seeds.front();
    json runs = json::array();
    for (const auto mode : {fabric::Mode::full_mesh, fabric::Mode::routed}) {
      const auto r = bench::run_scenario(s, mode, seed);
      runs.push_back(bench::to_json(r));
      write_text(out / (std::string(fabric::to_string(mode)) + "_nodes.csv"), fabric::node_metrics_csv(r.metrics));
      write_text(out / (std::string(fabric::to_string(mode)) + "_links.csv"), fabric::link_metrics_csv(r.metrics));
    }
    summary["runs"] = runs;
  }
  summary["scenario"] = s.name;
  summary["pass"] = pass;
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "scenario " << s.name << (pass ? " PASS" : " FAIL") << "\n";
  return pass ? kOk : kInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"modstack: modular robot software stack"};
  app.require_subcommand(1);

  std::string manifest = "manifest.json", tasks = "tasks.json";
  bool pin = false;
  auto* update = app.add_subcommand("update", "Verify the pinned manifest against the workspace");
  update->add_option("--manifest", manifest, "Manifest document; its directory is the workspace");
  update->add_flag("--pin", pin, "Rewrite the manifest with the hashes found in the workspace");

  auto* build_cmd = app.add_subcommand("build", "Run the task graph incrementally");
  build_cmd->add_option("--tasks", tasks, "Task document; its directory is the workspace");

  std::string spec_path, out_dir = "generated";
  std::optional<std::string> modules;
  auto* assemble = app.add_subcommand("assemble", "Derive a robot description and host configurations");
  assemble->add_option("--spec", spec_path, "Assembly document")->required();
  assemble->add_option("--out", out_dir, "Output directory");
  assemble->add_option("--modules", modules, "Module descriptor directory");

  std::string assembly_path;
  std::optional<std::string> host, services;
  bool sim = false;
  double duration_ms = 10'000.0;
  auto* launch_cmd = app.add_subcommand("launch", "Start the components of one host");
  launch_cmd->add_option("--assembly", assembly_path, "Assembly document")->required();
  launch_cmd->add_option("--host", host, std::string("Host identity (default: $") + launch::kHostEnv + ", then hostname)");
  launch_cmd->add_flag("--sim", sim, "Run every module on virtual hardware");
  launch_cmd->add_option("--modules", modules, "Module descriptor directory");
  launch_cmd->add_option("--services", services, "Document with a services section");
  launch_cmd->add_option("--duration-ms", duration_ms, "Simulated run time");

  std::string topology, scenario, mode = "routed", bench_out = "bench-out";
  std::uint64_t seed = 1;
  std::optional<std::string> sim_out;
  auto* sim_cmd = app.add_subcommand("sim", "Run one scenario once on a topology");
  sim_cmd->add_option("--topology", topology, "Topology document")->required();
  sim_cmd->add_option("--scenario", scenario, "Scenario document")->required();
  sim_cmd->add_option("--mode", mode, "full_mesh or routed");
  sim_cmd->add_option("--seed", seed, "Simulation seed");
  sim_cmd->add_option("--out", sim_out, "Directory for run.json and metric CSVs");

  auto* bench_cmd = app.add_subcommand("bench", "Compare fabric modes on a scenario and write reports");
  bench_cmd->add_option("--scenario", scenario, "Scenario document")->required();
  bench_cmd->add_option("--out", bench_out, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*update) return cmd_update(manifest, pin);
    if (*build_cmd) return cmd_build(tasks);
    if (*assemble) return cmd_assemble(spec_path, out_dir, modules ? std::optional<fs::path>(*modules) : std::nullopt);
    if (*launch_cmd) {
      return cmd_launch(assembly_path, launch::resolve_host(host), sim, modules ? std::optional<fs::path>(*modules) : std::nullopt,
                        services ? std::optional<fs::path>(*services) : std::nullopt, duration_ms);
    }
    if (*sim_cmd) return cmd_sim(topology, scenario, mode, seed, sim_out ? std::optional<fs::path>(*sim_out) : std::nullopt);
    if (*bench_cmd) return cmd_bench(scenario, bench_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation(e.code()) ? kInvalid : kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
