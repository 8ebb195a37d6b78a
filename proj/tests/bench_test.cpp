#include <gtest/gtest.h>

#include <filesystem>

#include "modstack/bench.hpp"

using namespace modstack;
using namespace modstack::bench;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = fs::path(MODSTACK_DATA_DIR) / "scenarios";

Errc error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::InvalidDocument;
}

ScenarioSpec small_fleet(int robots) {
  auto s = load_scenario(kScenarios / "storm7.json");
  auto f = *s.fleet;
  f.robots = robots;
  f.cap_kbps = 20'000;
  expand_fleet(s, f, assembly::load_registry(fs::path(MODSTACK_DATA_DIR) / "modules"));
  s.duration_ms = 4000;
  s.seeds = {1, 2};
  return s;
}

}  // namespace

TEST(RunScenario, DragonPairSpawnsTheFullRoster) {
  const auto s = load_scenario(kScenarios / "dragon2.json");
  const auto r = run_scenario(s, fabric::Mode::routed, 1);
  EXPECT_EQ(r.components, 60u);
  const std::map<std::string, std::size_t> expected{
      {"motor_interface", 8},  {"joint_manager", 8},       {"kinematics_manager", 4},
      {"health_monitor", 8},   {"location_publisher", 16}, {"human_operator", 3},
      {"autonomous_operator", 6}, {"data_monitor", 5},     {"archiver", 2}};
  EXPECT_EQ(r.roles, expected);
  for (const auto& [name, st] : r.statuses) EXPECT_EQ(st, runtime::Status::stopped) << name;
}

TEST(RunScenario, EmptyScenarioIsAllZero) {
  const auto s = load_scenario(kScenarios / "empty.json");
  const auto r = run_scenario(s, fabric::Mode::full_mesh, 1);
  EXPECT_EQ(r.components, 0u);
  EXPECT_TRUE(r.metrics.nodes.empty());
  EXPECT_EQ(r.metrics.published, 0u);
  EXPECT_EQ(r.metrics.total_link_bytes(), 0u);
}

TEST(RunScenario, ScopedTransformSubscriberGetsExactlyOnePublisher) {
  const auto s = load_scenario(kScenarios / "dragon2.json");
  for (const auto mode : {fabric::Mode::full_mesh, fabric::Mode::routed}) {
    const auto r = run_scenario(s, mode, 2);
    EXPECT_GT(r.publisher_bytes, 0u);
    EXPECT_EQ(r.observer_bytes, r.publisher_bytes);
  }
}

TEST(RunScenario, ResolutionFailuresComeFirst) {
  auto s = small_fleet(2);
  s.events.push_back(ScriptEvent{500, "link", "ap", "nowhere"});
  EXPECT_EQ(error_of([&] { run_scenario(s, fabric::Mode::routed, 1); }), Errc::InvalidDocument);
  s = small_fleet(2);
  s.events.push_back(ScriptEvent{s.duration_ms + 1, "stop", "", "", fabric::LinkState::up, "r0/joint_manager"});
  EXPECT_EQ(error_of([&] { run_scenario(s, fabric::Mode::routed, 1); }), Errc::InvalidDocument);
  s = small_fleet(2);
  s.services.push_back(s.services.front());
  EXPECT_EQ(error_of([&] { run_scenario(s, fabric::Mode::routed, 1); }), Errc::InvalidDocument);
  s = small_fleet(2);
  s.services.front().host = "mars";
  EXPECT_EQ(error_of([&] { run_scenario(s, fabric::Mode::routed, 1); }), Errc::InvalidDocument);
}

TEST(RunScenario, ScriptedStopEndsAComponentEarly) {
  auto s = small_fleet(2);
  s.events.push_back(ScriptEvent{2000, "stop", "", "", fabric::LinkState::up, "r1/joint_manager"});
  const auto r = run_scenario(s, fabric::Mode::routed, 1);
  const auto& trace = r.traces.at("r1/joint_manager");
  ASSERT_FALSE(trace.empty());
  EXPECT_EQ(trace.back().event, "on_shutdown");
  EXPECT_NEAR(trace.back().at_ms, 2000.0, 1e-9);
}

TEST(RunScenario, SameSeedSameRun) {
  const auto s = small_fleet(3);
  for (const auto mode : {fabric::Mode::full_mesh, fabric::Mode::routed}) {
    EXPECT_EQ(to_json(run_scenario(s, mode, 7)).dump(), to_json(run_scenario(s, mode, 7)).dump());
  }
  EXPECT_NE(run_scenario(s, fabric::Mode::routed, 7).digest, run_scenario(s, fabric::Mode::routed, 8).digest);
}

TEST(Compare, ModeAgainstItselfIsOne) {
  auto s = small_fleet(3);
  s.metrics = {"startup_bytes", "startup_time", "stutter", "received_kbps"};
  for (const auto mode : {fabric::Mode::full_mesh, fabric::Mode::routed}) {
    const auto rep = compare(s, s.seeds, mode, mode);
    for (const auto& [m, ratio] : rep.ratios) EXPECT_DOUBLE_EQ(ratio, 1.0) << m;
  }
}

TEST(Compare, ReportIsReproducible) {
  auto s = small_fleet(3);
  s.metrics = {"startup_bytes", "stutter"};
  s.thresholds = {{"startup_bytes", 1.0}};
  EXPECT_EQ(to_json(compare(s, s.seeds)).dump(), to_json(compare(s, s.seeds)).dump());
}

TEST(Compare, RatiosAreMediansOfPerSeedRatios) {
  auto s = small_fleet(3);
  s.metrics = {"startup_bytes"};
  s.seeds = {1, 2, 3};
  const auto rep = compare(s, s.seeds);
  auto per = rep.seed_ratios.at("startup_bytes");
  for (std::size_t i = 0; i < per.size(); ++i) {
    EXPECT_DOUBLE_EQ(per[i], std::max(rep.values_a.at("startup_bytes")[i], 1.0) /
                                 std::max(rep.values_b.at("startup_bytes")[i], 1.0));
  }
  std::sort(per.begin(), per.end());
  EXPECT_DOUBLE_EQ(rep.ratios.at("startup_bytes"), per[1]);
}

TEST(Capacity, CountNeverGrowsAsTheCapShrinks) {
  auto s = load_scenario(kScenarios / "capacity.json");
  s.capacity->max_robots = 6;
  s.capacity->caps_kbps = {500, 2000};
  s.duration_ms = 35'000;
  const auto sweep = capacity_sweep(s);
  EXPECT_TRUE(sweep.monotone);
  ASSERT_EQ(sweep.results.size(), 4u);
  for (const auto& r : sweep.results) {
    EXPECT_GE(r.max_stable, 1) << fabric::to_string(r.mode) << " " << r.cap_kbps;
    for (std::size_t i = 0; i + 1 < r.points.size(); ++i) EXPECT_TRUE(r.points[i].stable);
  }
}

TEST(Reports, MetricCsvHasOneRowPerModeAndSeed) {
  auto s = small_fleet(2);
  s.metrics = {"startup_time"};
  const auto csvs = metric_csvs(compare(s, s.seeds));
  ASSERT_EQ(csvs.size(), 1u);
  const auto& text = csvs.at("startup_time.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * static_cast<long>(s.seeds.size()));
  EXPECT_EQ(text.rfind("mode,seed,value\nfull_mesh,1,", 0), 0u);
}
