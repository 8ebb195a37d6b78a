#pragma once

// Manifest verification and an incremental, content-hashed task graph.

#include <openssl/evp.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "modstack/error.hpp"

namespace modstack::build {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- hashing -------------------------------------------------------------------

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) { EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr); }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view data) {
    EVP_DigestUpdate(ctx_, data.data(), data.size());
    return *this;
  }

  std::string hex() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, out, &len);
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (unsigned int i = 0; i < len; ++i) {
      s.push_back(digits[out[i] >> 4]);
      s.push_back(digits[out[i] & 0xf]);
    }
    return s;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline constexpr std::size_t kHashHexLength = 64;

inline std::string sha256_hex(std::string_view data) { return Sha256().update(data).hex(); }

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::UnreadableWorkspace, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Content hash of a file, or of a directory tree (relative paths + contents,
/// in sorted order). nullopt when the path does not exist.
inline std::optional<std::string> tree_hash(const fs::path& p) {
  std::error_code ec;
  if (fs::is_regular_file(p, ec)) return sha256_hex(read_file(p));
  if (!fs::is_directory(p, ec)) return std::nullopt;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), p));
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& rel : files) {
    const auto content = read_file(p / rel);
    h.update(rel.generic_string()).update(std::string(1, '\0'));
    h.update(std::to_string(content.size())).update(std::string(1, '\0'));
    h.update(content);
  }
  return h.hex();
}

// ---- manifest --------------------------------------------------------------------

struct ManifestEntry {
  std::string source;  // path relative to the workspace
  std::string hash;
};

struct Manifest {
  std::map<std::string, ManifestEntry> entries;
};

enum class EntryStatus { match, mismatch, missing };

inline const char* to_string(EntryStatus s) {
  switch (s) {
    case EntryStatus::match: return "match";
    case EntryStatus::mismatch: return "mismatch";
    case EntryStatus::missing: return "missing";
  }
  return "missing";
}

struct VerificationReport {
  std::map<std::string, EntryStatus> entries;
  std::map<std::string, std::string> actual;  // observed hashes of present entries
  bool pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.second == EntryStatus::match; });
  }
};

inline Manifest manifest_from_json(const json& j) {
  Manifest m;
  try {
    const auto entries = j.value("entries", json::object());
    for (const auto& [name, e] : entries.items()) {
      auto hash = e.at("hash").get<std::string>();
      if (hash.size() != kHashHexLength || hash.find_first_not_of("0123456789abcdef") != std::string::npos) {
        throw Error(Errc::InvalidDocument, "manifest hash for " + name + " is not a sha256 hex digest");
      }
      m.entries[name] = {e.value("source", name), std::move(hash)};
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("manifest: ") + e.what());
  }
  return m;
}

inline json to_json(const Manifest& m) {
  json entries = json::object();
  for (const auto& [name, e] : m.entries) entries[name] = {{"source", e.source}, {"hash", e.hash}};
  return json{{"entries", entries}};
}

inline VerificationReport verify_manifest(const Manifest& manifest, const fs::path& workspace) {
  std::error_code ec;
  if (!fs::is_directory(workspace, ec)) throw Error(Errc::UnreadableWorkspace, workspace.string());
  fs::directory_iterator probe(workspace, ec);
  if (ec) throw Error(Errc::UnreadableWorkspace, workspace.string() + ": " + ec.message());
  VerificationReport r;
  for (const auto& [name, e] : manifest.entries) {
    const auto h = tree_hash(workspace / e.source);
    if (!h) {
      r.entries[name] = EntryStatus::missing;
      continue;
    }
    r.actual[name] = *h;
    r.entries[name] = *h == e.hash ? EntryStatus::match : EntryStatus::mismatch;
  }
  return r;
}

// ---- tasks -------------------------------------------------------------------------

struct TaskSpec {
  std::string id;
  std::vector<std::string> deps;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json action = json::object();
};

inline std::vector<TaskSpec> tasks_from_json(const json& j) {
  std::vector<TaskSpec> out;
  try {
    for (const auto& t : j.at("tasks")) {
      out.push_back(TaskSpec{t.at("id").get<std::string>(), t.value("deps", std::vector<std::string>{}),
                             t.value("inputs", std::vector<std::string>{}), t.value("outputs", std::vector<std::string>{}),
                             t.value("action", json::object())});
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("tasks: ") + e.what());
  }
  return out;
}

inline json to_json(const std::vector<TaskSpec>& tasks) {
  json arr = json::array();
  for (const auto& t : tasks) {
    arr.push_back({{"id", t.id}, {"deps", t.deps}, {"inputs", t.inputs}, {"outputs", t.outputs}, {"action", t.action}});
  }
  return json{{"tasks", arr}};
}

/// Topological order, ties broken by smallest id first.
inline std::vector<std::string> resolve_order(const std::vector<TaskSpec>& tasks) {
  std::map<std::string, const TaskSpec*> by_id;
  for (const auto& t : tasks) {
    if (!by_id.emplace(t.id, &t).second) throw Error(Errc::DuplicateTask, t.id);
  }
  std::map<std::string, int> indegree;
  std::map<std::string, std::vector<std::string>> dependents;
  for (const auto& t : tasks) {
    indegree[t.id];
    for (const auto& d : t.deps) {
      if (!by_id.contains(d)) throw Error(Errc::UnknownDependency, t.id + " -> " + d);
      ++indegree[t.id];
      dependents[d].push_back(t.id);
    }
  }
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [id, n] : indegree) {
    if (n == 0) ready.push(id);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    auto id = ready.top();
    ready.pop();
    for (const auto& d : dependents[id]) {
      if (--indegree[d] == 0) ready.push(d);
    }
    order.push_back(std::move(id));
  }
  if (order.size() == tasks.size()) return order;

  // walk dependencies among the leftovers until a node repeats
  std::set<std::string> left;
  for (const auto& [id, n] : indegree) {
    if (n > 0) left.insert(id);
  }
  std::vector<std::string> walk{*left.begin()};
  std::map<std::string, std::size_t> pos{{walk.back(), 0}};
  while (true) {
    const auto* t = by_id.at(walk.back());
    const auto next = std::find_if(t->deps.begin(), t->deps.end(), [&](const std::string& d) { return left.contains(d); });
    if (pos.contains(*next)) {
      std::vector<std::string> cycle(walk.begin() + static_cast<std::ptrdiff_t>(pos.at(*next)), walk.end());
      std::sort(cycle.begin(), cycle.end());
      std::string msg;
      for (const auto& c : cycle) msg += (msg.empty() ? "" : ", ") + c;
      throw Error(Errc::CycleDetected, msg);
    }
    pos[*next] = walk.size();
    walk.push_back(*next);
  }
}

struct BuildReport {
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  std::optional<std::pair<std::string, std::string>> failed;
  std::map<std::string, std::string> fingerprints;
  friend bool operator==(const BuildReport&, const BuildReport&) = default;
};

inline json to_json(const BuildReport& r) {
  json j{{"executed", r.executed}, {"skipped", r.skipped}, {"fingerprints", r.fingerprints}};
  j["failed"] = r.failed ? json{{"task", r.failed->first}, {"reason", r.failed->second}} : json(nullptr);
  return j;
}

inline BuildReport report_from_json(const json& j) {
  BuildReport r;
  try {
    r.executed = j.at("executed").get<std::vector<std::string>>();
    r.skipped = j.at("skipped").get<std::vector<std::string>>();
    r.fingerprints = j.at("fingerprints").get<std::map<std::string, std::string>>();
    if (j.contains("failed") && !j.at("failed").is_null()) {
      r.failed = {j.at("failed").at("task").get<std::string>(), j.at("failed").at("reason").get<std::string>()};
    }
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidDocument, std::string("build report: ") + e.what());
  }
  return r;
}

/// Runs one task's action; returns a failure reason or nullopt on success.
using Runner = std::function<std::optional<std::string>(const TaskSpec&, const fs::path& workspace)>;

inline std::string fingerprint(const fs::path& workspace, const std::string& rel) {
  return tree_hash(workspace / rel).value_or("missing");
}

inline BuildReport execute(const std::vector<TaskSpec>& tasks, const std::optional<BuildReport>& prior,
                           const fs::path& workspace, const Runner& runner) {
  const auto order = resolve_order(tasks);
  std::map<std::string, const TaskSpec*> by_id;
  for (const auto& t : tasks) by_id[t.id] = &t;
  std::set<std::string> completed_before;
  if (prior) {
    completed_before.insert(prior->executed.begin(), prior->executed.end());
    completed_before.insert(prior->skipped.begin(), prior->skipped.end());
  }

  BuildReport r;
  std::set<std::string> ran;
  for (const auto& id : order) {
    const auto& t = *by_id.at(id);
    bool run = !prior || !completed_before.contains(id);
    run = run || std::any_of(t.deps.begin(), t.deps.end(), [&](const std::string& d) { return ran.contains(d); });
    for (const auto& in : t.inputs) {
      if (run) break;
      const auto it = prior->fingerprints.find(in);
      run = it == prior->fingerprints.end() || it->second != fingerprint(workspace, in);
    }
    for (const auto& out : t.outputs) {
      if (run) break;
      run = !fs::exists(workspace / out);
    }
    if (run) {
      if (auto err = runner(t, workspace)) {
        r.failed = {id, *err};
        break;
      }
      ran.insert(id);
      r.executed.push_back(id);
    } else {
      r.skipped.push_back(id);
    }
    for (const auto& p : t.inputs) r.fingerprints[p] = fingerprint(workspace, p);
    for (const auto& p : t.outputs) r.fingerprints[p] = fingerprint(workspace, p);
  }
  return r;
}

/// Declarative actions understood by the command-line tool:
///   {"kind": "write",  "content": "..."}   writes every output
///   {"kind": "concat"}                     concatenates inputs into each output
///   {"kind": "copy"}                       copies inputs[i] to outputs[i]
///   {"kind": "fail", "reason": "..."}      always fails
///   {"kind": "noop"}
inline std::optional<std::string> builtin_runner(const TaskSpec& t, const fs::path& workspace) {
  const auto kind = t.action.value("kind", "noop");
  auto write = [&](const std::string& rel, const std::string& text) {
    const auto p = workspace / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
  };
  try {
    if (kind == "noop") return std::nullopt;
    if (kind == "fail") return t.action.value("reason", "failed");
    if (kind == "write") {
      for (const auto& o : t.outputs) write(o, t.action.value("content", ""));
      return std::nullopt;
    }
    if (kind == "concat") {
      std::string text;
      for (const auto& i : t.inputs) text += read_file(workspace / i);
      for (const auto& o : t.outputs) write(o, text);
      return std::nullopt;
    }
    if (kind == "copy") {
      if (t.inputs.size() != t.outputs.size()) return "copy needs as many inputs as outputs";
      for (std::size_t i = 0; i < t.inputs.size(); ++i) write(t.outputs[i], read_file(workspace / t.inputs[i]));
      return std::nullopt;
    }
  } catch (const std::exception& e) {
    return std::string(e.what());
  }
  return "unknown action kind '" + kind + "'";
}

inline const fs::path kReportPath = fs::path("generated") / "build-report.json";

}  // namespace modstack::build
