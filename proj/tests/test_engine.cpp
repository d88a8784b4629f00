#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dca/dca.hpp"
#include "test_util.hpp"

using namespace dca;
using namespace std::chrono_literals;

namespace {

DcaConfig fixture_config(const std::string& tag) {
  DcaConfig cfg;
  cfg.case_path = testutil::fixture_path("case" + tag + ".json");
  cfg.partition_path = testutil::fixture_path("partition" + tag + ".json");
  return cfg;
}

std::set<ViolationKey> cumulative_keys(const DcaReport& report) {
  std::set<ViolationKey> keys;
  for (const auto& v : report.body.at("cumulative_violations")) {
    int kind = v.at("kind").get<std::string>() == "BranchActiveFlow" ? 0
               : v.at("kind").get<std::string>() == "VoltageHigh"    ? 1
                                                                     : 2;
    keys.insert({kind, v.at("element").get<int>(), v.at("region").get<int>()});
  }
  return keys;
}

}  // namespace

TEST_CASE("scheduler: greedy list scheduling over two lanes") {
  // task durations 150,50,50,50,50 ms; greedy on 2 lanes finishes in ~200 ms
  std::vector<int> ms{150, 50, 50, 50, 50};
  TimingStats stats = schedule_contingencies(
      static_cast<int>(ms.size()), 2, [&](int task, int /*lane*/) {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms[static_cast<size_t>(task)]));
      });
  REQUIRE(stats.lane_seconds.size() == 2);
  REQUIRE(stats.makespan_seconds > 0.18);
  REQUIRE(stats.makespan_seconds < 0.27);
  // the makespan is the longest lane (within scheduling noise)
  REQUIRE(stats.makespan_seconds ==
          Catch::Approx(stats.longest_lane()).margin(0.02));
  double busy = 0.0;
  for (double v : stats.lane_seconds) busy += v;
  REQUIRE(busy == Catch::Approx(0.35).margin(0.05));
}

TEST_CASE("scheduler: one lane runs the queue strictly in order") {
  std::vector<int> order;
  schedule_contingencies(5, 1, [&](int task, int lane) {
    REQUIRE(lane == 0);
    order.push_back(task);
  });
  REQUIRE(order == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("scheduler: more lanes than tasks") {
  std::atomic<int> ran{0};
  TimingStats stats = schedule_contingencies(2, 8, [&](int, int) { ++ran; });
  REQUIRE(ran == 2);
  REQUIRE(stats.lane_seconds.size() == 8);
}

TEST_CASE("timing stats: longest lane picks the slowest worker") {
  TimingStats stats;
  stats.lane_seconds = {3.2, 5.1, 2.0};
  REQUIRE(stats.longest_lane() == 5.1);
}

TEST_CASE("full sweep: stopped sweep matches the frozen violation set") {
  DcaConfig cfg = fixture_config("14");
  DcaRunOutput out = run_dca(cfg);
  REQUIRE_FALSE(out.report.aborted);
  REQUIRE(out.report.body.at("base_case").at("converged").get<bool>());
  REQUIRE(out.report.has_violations);

  // frozen from the independent exhaustive N-1 oracle used to curate limits
  std::set<ViolationKey> expected{{0, 3, 1}, {0, 19, 2}};
  REQUIRE(cumulative_keys(out.report) == expected);

  // row pattern: violation first, then quiet groups until the stop marker
  struct Row {
    int region, anchor, fresh;
    bool stop;
  };
  std::vector<Row> expect_rows{{1, 4, 1, false}, {2, 6, 1, false}, {1, 5, 0, false},
                               {2, 7, 0, false}, {1, 2, 0, true},  {2, 9, 0, true}};
  REQUIRE(out.screening.size() == expect_rows.size() + 1);  // + link group
  for (size_t i = 0; i < expect_rows.size(); ++i) {
    INFO("row " << i);
    REQUIRE(out.screening[i].region == expect_rows[i].region);
    REQUIRE(out.screening[i].anchor == expect_rows[i].anchor);
    REQUIRE(out.screening[i].new_violations == expect_rows[i].fresh);
    REQUIRE(out.screening[i].stop_marker == expect_rows[i].stop);
  }
  const ScreeningRow& link_row = out.screening.back();
  REQUIRE(link_row.region == 0);
  REQUIRE(link_row.member_branch_ids == std::vector<int>{8, 9, 10});

  // group barrier: results appear group by group, in screening-row order
  size_t cursor = 0;
  for (const auto& row : out.screening) {
    for (int bid : row.member_branch_ids) {
      REQUIRE(cursor < out.results.size());
      REQUIRE(out.results[cursor].branch_id == bid);
      REQUIRE(out.results[cursor].group_region == row.region);
      ++cursor;
    }
  }
  REQUIRE(cursor == out.results.size());
}

TEST_CASE("full sweep: case30 row pattern, islanding, and violation set") {
  DcaConfig cfg = fixture_config("30");
  DcaRunOutput out = run_dca(cfg);
  REQUIRE_FALSE(out.report.aborted);
  std::set<ViolationKey> expected{{0, 19, 2}, {0, 23, 2}};
  REQUIRE(cumulative_keys(out.report) == expected);

  std::vector<std::tuple<int, int, int, bool>> expect_rows{
      {1, 4, 1, false}, {2, 9, 0, false},  {1, 6, 0, false}, {2, 10, 1, false},
      {1, 28, 0, true}, {2, 12, 0, false}, {2, 27, 0, true}};
  REQUIRE(out.screening.size() == expect_rows.size() + 1);
  for (size_t i = 0; i < expect_rows.size(); ++i) {
    INFO("row " << i);
    REQUIRE(out.screening[i].region == std::get<0>(expect_rows[i]));
    REQUIRE(out.screening[i].anchor == std::get<1>(expect_rows[i]));
    REQUIRE(out.screening[i].new_violations == std::get<2>(expect_rows[i]));
    REQUIRE(out.screening[i].stop_marker == std::get<3>(expect_rows[i]));
  }

  // branch 13 (9-11) cuts the generator at bus 11 off its region slack
  bool found_islanding = false;
  for (const auto& res : out.results) {
    if (res.branch_id == 13) {
      found_islanding = true;
      REQUIRE(res.status == ContingencyStatus::Islanding);
      REQUIRE(res.error.find("11") != std::string::npos);
    } else if (res.status != ContingencyStatus::Islanding) {
      REQUIRE(res.status == ContingencyStatus::Converged);
    }
  }
  REQUIRE(found_islanding);
}

TEST_CASE("determinism: lane count does not change the report body") {
  DcaConfig one = fixture_config("14");
  one.worker_count = 1;
  DcaConfig four = fixture_config("14");
  four.worker_count = 4;
  DcaRunOutput a = run_dca(one);
  DcaRunOutput b = run_dca(four);
  // worker_count feeds the config hash; compare everything else byte for byte
  json body_a = a.report.body;
  json body_b = b.report.body;
  body_a.erase("config_hash");
  body_b.erase("config_hash");
  REQUIRE(body_a.dump() == body_b.dump());
  REQUIRE(a.report.has_violations == b.report.has_violations);
}

TEST_CASE("base-only oracle run stays within the stitching tolerance") {
  DcaConfig cfg = fixture_config("14");
  cfg.mode = RunMode::BaseOnly;
  cfg.oracle_mode = true;
  DcaRunOutput out = run_dca(cfg);
  REQUIRE_FALSE(out.report.aborted);
  const json& base = out.report.body.at("base_case");
  REQUIRE(base.at("max_vmag_diff_vs_centralized").get<double>() < 4e-4);
  REQUIRE(base.at("max_vang_diff_vs_centralized").get<double>() < 4e-4);
  REQUIRE(out.results.empty());
  REQUIRE_FALSE(out.report.has_violations);
}

TEST_CASE("screen-only mode lists every group without solving contingencies") {
  DcaConfig cfg = fixture_config("14");
  cfg.mode = RunMode::ScreenOnly;
  DcaRunOutput out = run_dca(cfg);
  REQUIRE_FALSE(out.report.aborted);
  REQUIRE(out.results.empty());
  // all internal branches appear across the groups exactly once
  std::set<int> members;
  for (const auto& row : out.screening)
    for (int bid : row.member_branch_ids) REQUIRE(members.insert(bid).second);
  REQUIRE(members.size() == 17);  // 20 branches minus 3 links
}

TEST_CASE("frame capture: session traffic is recorded when requested") {
  DcaConfig cfg = fixture_config("14");
  cfg.mode = RunMode::BaseOnly;
  cfg.capture_frames = true;
  DcaRunOutput out = run_dca(cfg);
  REQUIRE_FALSE(out.captured_frames.empty());
  uint32_t session = out.captured_frames.front().session_id;
  bool saw_init = false, saw_boundary = false;
  for (const auto& f : out.captured_frames) {
    REQUIRE(f.session_id == session);
    if (f.msg_type == MessageType::Init) saw_init = true;
    if (f.msg_type == MessageType::BoundaryData) saw_boundary = true;
  }
  REQUIRE(saw_init);
  REQUIRE(saw_boundary);
}

TEST_CASE("unreachable computation server aborts the run with the region named") {
  DcaConfig cfg = fixture_config("14");
  cfg.transport = TransportKind::Tcp;  // roster left empty
  DcaRunOutput out = run_dca(cfg);
  REQUIRE(out.report.aborted);
  std::string reason = out.report.body.at("abort_reason").get<std::string>();
  REQUIRE(reason.find("region 1") != std::string::npos);
  REQUIRE_FALSE(out.report.has_violations);
}

TEST_CASE("report files: headers and row counts") {
  DcaConfig cfg = fixture_config("14");
  cfg.oracle_mode = true;
  DcaRunOutput out = run_dca(cfg);
  std::string dir = (std::filesystem::temp_directory_path() / "dca_report_test").string();
  std::filesystem::remove_all(dir);
  write_report(out.report, dir);

  auto first_line = [](const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    return line;
  };
  REQUIRE(first_line(dir + "/screening.csv") ==
          "from_node,region,distance,to_nodes,violations,stop");
  REQUIRE(first_line(dir + "/iterations.csv") ==
          "contingency,outer,inner,residual_evaluations,final_norm");
  REQUIRE(first_line(dir + "/residuals.csv") == "bus,vmag_diff,vang_diff");
  json report = json::parse(std::ifstream(dir + "/report.json"));
  REQUIRE(report.at("body").at("schema_version").get<int>() == 1);

  write_trace_csv(out.results, dir + "/trace.csv");
  REQUIRE(first_line(dir + "/trace.csv") == "contingency,outer,inner,norm_inf");
  std::filesystem::remove_all(dir);
}
