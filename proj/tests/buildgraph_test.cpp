#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "modstack/buildgraph.hpp"
#include "support/dags.hpp"

using namespace modstack::build;
using modstack::Errc;
using modstack::Error;

namespace {

template <typename F>
std::pair<Errc, std::string> error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return {e.code(), e.what()};
  }
  ADD_FAILURE() << "expected an error";
  return {Errc::InvalidDocument, ""};
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("modstack_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct Recording {
  std::vector<std::string> calls;
  Runner runner() {
    return [this](const TaskSpec& t, const fs::path& ws) {
      calls.push_back(t.id);
      return builtin_runner(t, ws);
    };
  }
};

TaskSpec task(std::string id, std::vector<std::string> deps = {}) { return TaskSpec{std::move(id), std::move(deps), {}, {}, {}}; }

}  // namespace

TEST(Sha, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(sha256_hex("").size(), kHashHexLength);
}

TEST(Manifest, EmptyPasses) {
  TempDir ws("manifest_empty");
  EXPECT_TRUE(verify_manifest(Manifest{}, ws.path()).pass());
}

TEST(Manifest, MatchMismatchMissing) {
  TempDir ws("manifest_states");
  fs::create_directories(ws.path() / "pkg/a/sub");
  std::ofstream(ws.path() / "pkg/a/x.txt") << "x";
  std::ofstream(ws.path() / "pkg/a/sub/y.txt") << "y";
  const auto h = *tree_hash(ws.path() / "pkg/a");
  Manifest m;
  m.entries["a"] = {"pkg/a", h};
  m.entries["b"] = {"pkg/b", h};
  m.entries["c"] = {"pkg/a", sha256_hex("other")};
  const auto r = verify_manifest(m, ws.path());
  EXPECT_EQ(r.entries.at("a"), EntryStatus::match);
  EXPECT_EQ(r.entries.at("b"), EntryStatus::missing);
  EXPECT_EQ(r.entries.at("c"), EntryStatus::mismatch);
  EXPECT_FALSE(r.pass());

  // renaming a file inside the tree changes the hash
  fs::rename(ws.path() / "pkg/a/x.txt", ws.path() / "pkg/a/z.txt");
  EXPECT_NE(*tree_hash(ws.path() / "pkg/a"), h);
}

TEST(Manifest, UnreadableWorkspace) {
  EXPECT_EQ(error_of([] { verify_manifest(Manifest{}, "/nonexistent/modstack"); }).first, Errc::UnreadableWorkspace);
}

TEST(Manifest, RejectsMalformedHashes) {
  const json j{{"entries", {{"a", {{"source", "a"}, {"hash", "abc"}}}}}};
  EXPECT_EQ(error_of([&] { manifest_from_json(j); }).first, Errc::InvalidDocument);
}

TEST(ResolveOrder, Examples) {
  EXPECT_TRUE(resolve_order({}).empty());
  EXPECT_EQ(resolve_order({task("C", {"B"}), task("B", {"A"}), task("A")}), (std::vector<std::string>{"A", "B", "C"}));
  const std::vector<TaskSpec> diamond{task("D", {"B", "C"}), task("C", {"A"}), task("B", {"A"}), task("A")};
  const auto order = resolve_order(diamond);
  EXPECT_EQ(order, (std::vector<std::string>{"A", "B", "C", "D"}));

  // oracle: every permutation that respects the edges
  std::vector<std::string> perm{"A", "B", "C", "D"};
  std::vector<std::vector<std::string>> valid;
  do {
    if (testdag::respects_deps(diamond, perm)) valid.push_back(perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(valid.size(), 2u);
  EXPECT_NE(std::find(valid.begin(), valid.end(), order), valid.end());
  EXPECT_EQ(*std::min_element(valid.begin(), valid.end()), order);
}

TEST(ResolveOrder, Errors) {
  const auto [code, msg] = error_of([] { resolve_order({task("A", {"C"}), task("B", {"A"}), task("C", {"B"}), task("Z")}); });
  EXPECT_EQ(code, Errc::CycleDetected);
  EXPECT_NE(msg.find("A, B, C"), std::string::npos) << msg;
  EXPECT_EQ(error_of([] { resolve_order({task("A", {"A"})}); }).first, Errc::CycleDetected);
  EXPECT_EQ(error_of([] { resolve_order({task("A", {"nope"})}); }).first, Errc::UnknownDependency);
  EXPECT_EQ(error_of([] { resolve_order({task("A"), task("A")}); }).first, Errc::DuplicateTask);
}

TEST(ResolveOrder, RandomDagsAreTopological) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto tasks = testdag::random_dag(rng);
    const auto order = resolve_order(tasks);
    ASSERT_TRUE(testdag::respects_deps(tasks, order)) << "trial " << trial;
    auto shuffled = tasks;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(resolve_order(shuffled), order);
  }
}

TEST(Execute, FirstRunThenNothing) {
  TempDir ws("exec_basic");
  std::vector<TaskSpec> tasks{
      {"gen", {}, {}, {"gen/a.txt"}, {{"kind", "write"}, {"content", "hello"}}},
      {"cat", {"gen"}, {"gen/a.txt"}, {"out/b.txt"}, {{"kind", "concat"}}},
  };
  Recording rec;
  const auto first = execute(tasks, std::nullopt, ws.path(), rec.runner());
  EXPECT_EQ(first.executed, (std::vector<std::string>{"gen", "cat"}));
  EXPECT_TRUE(first.skipped.empty());
  const auto second = execute(tasks, first, ws.path(), rec.runner());
  EXPECT_TRUE(second.executed.empty());
  EXPECT_EQ(second.skipped.size(), 2u);
  EXPECT_EQ(rec.calls.size(), 2u);

  fs::remove(ws.path() / "out/b.txt");
  EXPECT_EQ(execute(tasks, second, ws.path(), rec.runner()).executed, (std::vector<std::string>{"cat"}));
}

TEST(Execute, StopsAtFirstFailure) {
  TempDir ws("exec_fail");
  std::vector<TaskSpec> tasks{
      {"a", {}, {}, {"a.txt"}, {{"kind", "write"}}},
      {"b", {"a"}, {}, {}, {{"kind", "fail"}, {"reason", "compiler exploded"}}},
      {"c", {"b"}, {}, {}, {{"kind", "noop"}}},
  };
  const auto r = execute(tasks, std::nullopt, ws.path(), builtin_runner);
  EXPECT_EQ(r.executed, (std::vector<std::string>{"a"}));
  ASSERT_TRUE(r.failed);
  EXPECT_EQ(r.failed->first, "b");
  EXPECT_EQ(r.failed->second, "compiler exploded");
  // a later run retries the failed task and everything after it
  tasks[1].action = {{"kind", "noop"}};
  const auto again = execute(tasks, r, ws.path(), builtin_runner);
  EXPECT_EQ(again.executed, (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(again.skipped, (std::vector<std::string>{"a"}));
}

TEST(Execute, RandomDagsIdempotentAndMinimal) {
  std::mt19937_64 rng(5);
  TempDir ws("exec_random");
  for (int trial = 0; trial < 1000; ++trial) {
    fs::remove_all(ws.path());
    fs::create_directories(ws.path());
    const auto tasks = testdag::random_dag(rng);
    testdag::write_sources(ws.path(), tasks);
    const auto first = execute(tasks, std::nullopt, ws.path(), builtin_runner);
    ASSERT_FALSE(first.failed);
    ASSERT_EQ(first.executed.size(), tasks.size());
    ASSERT_TRUE(testdag::respects_deps(tasks, first.executed));

    const auto second = execute(tasks, first, ws.path(), builtin_runner);
    EXPECT_TRUE(second.executed.empty()) << "trial " << trial;

    std::uniform_int_distribution<std::size_t> pick(0, tasks.size() - 1);
    const auto& touched = tasks[pick(rng)];
    std::ofstream(ws.path() / touched.inputs.front(), std::ios::app) << "edit\n";
    const auto third = execute(tasks, second, ws.path(), builtin_runner);
    const std::set<std::string> ran(third.executed.begin(), third.executed.end());
    EXPECT_EQ(ran, testdag::reverse_reachable(tasks, touched.id)) << "trial " << trial;
    std::vector<std::string> overlap;
    std::set_intersection(ran.begin(), ran.end(), third.skipped.begin(), third.skipped.end(), std::back_inserter(overlap));
    EXPECT_TRUE(overlap.empty());
  }
}

TEST(Execute, ReportRoundTrip) {
  BuildReport r{{"a", "b"}, {"c"}, std::make_pair(std::string("d"), std::string("boom")), {{"x", "y"}}};
  EXPECT_EQ(report_from_json(to_json(r)), r);
  r.failed.reset();
  EXPECT_EQ(report_from_json(to_json(r)), r);
}
