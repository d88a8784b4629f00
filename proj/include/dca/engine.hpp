#pragma once

// DCA orchestration: base-case distributed power flow, per-region screening,
// the group-by-group parallel N-1 sweep with warm starts and the stopping
// criterion, timing stats and report files.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dca/boundary.hpp"
#include "dca/grid.hpp"
#include "dca/jfng.hpp"
#include "dca/partition.hpp"
#include "dca/powerflow.hpp"
#include "dca/screening.hpp"
#include "dca/session.hpp"
#include "dca/transport.hpp"

namespace dca {

enum class WarmStartPolicy { PerGroup, PerLane, Off };
enum class TransportKind { InProcess, Tcp };
enum class RunMode { Full, BaseOnly, ScreenOnly };

struct DcaConfig {
  std::string case_path;
  std::string partition_path;
  JfngParams jfng;
  NewtonOptions newton;
  int worker_count = 1;  // D
  int k_stop = 2;
  WarmStartPolicy warm_start = WarmStartPolicy::PerGroup;
  TransportKind transport = TransportKind::InProcess;
  LatencyConfig latency;                    // in-process latency injection
  std::map<int, std::string> peer_roster;   // region -> host:port (tcp)
  std::string out_dir = "out";
  uint64_t seed = 0;
  DistanceFormula distance_formula = DistanceFormula::Thevenin;
  bool oracle_mode = false;   // compare against the centralized solver
  bool capture_frames = false;
  RunMode mode = RunMode::Full;

  json to_json() const {
    json j;
    j["case_path"] = case_path;
    j["partition_path"] = partition_path;
    j["jfng"] = {{"m", jfng.m},
                 {"tol_boundary", jfng.tol_boundary},
                 {"max_outer", jfng.max_outer},
                 {"max_inner", jfng.max_inner},
                 {"fd_epsilon", jfng.fd_epsilon},
                 {"forcing", jfng.forcing}};
    j["newton"] = {{"tol", newton.tol}, {"max_iter", newton.max_iter}};
    j["worker_count"] = worker_count;
    j["k_stop"] = k_stop;
    j["warm_start"] = warm_start == WarmStartPolicy::PerGroup  ? "per-group"
                      : warm_start == WarmStartPolicy::PerLane ? "per-lane"
                                                               : "off";
    j["transport"] = transport == TransportKind::InProcess ? "in-process" : "tcp";
    j["latency_mean_ms"] = latency.mean_ms;
    j["seed"] = seed;
    j["distance_formula"] =
        distance_formula == DistanceFormula::Thevenin ? "thevenin" : "transfer";
    j["oracle_mode"] = oracle_mode;
    return j;
  }
};

enum class ContingencyStatus { Converged, NonConverged, Islanding, Errored, Requeued };

inline std::string to_string(ContingencyStatus s) {
  switch (s) {
    case ContingencyStatus::Converged: return "Converged";
    case ContingencyStatus::NonConverged: return "NonConverged";
    case ContingencyStatus::Islanding: return "Islanding";
    case ContingencyStatus::Errored: return "Errored";
    case ContingencyStatus::Requeued: return "Requeued";
  }
  return "?";
}

struct ContingencyResult {
  int branch_id = 0;
  int circuit = 1;
  int group_anchor = 0;
  int group_region = 0;
  ContingencyStatus status = ContingencyStatus::Errored;
  std::vector<Violation> violations;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int residual_evaluations = 0;
  double final_norm = 0.0;
  std::vector<JfngTraceRow> trace;
  std::string error;
  double wall_ms = 0.0;
  int lane = -1;
  std::shared_ptr<JfngResult> jfng;  // kept only while warm chains may need it
};

struct TimingStats {
  std::vector<double> lane_seconds;  // t_d1..t_dD
  double makespan_seconds = 0.0;     // measured wall clock of the sweep

  double longest_lane() const {
    double t = 0.0;
    for (double v : lane_seconds) t = std::max(t, v);
    return t;
  }
};

// Greedy list scheduling: D lanes pull the next task from a serialized queue
// as soon as the previous one finishes. run(task_index, lane) must be safe to
// call concurrently for distinct tasks.
inline TimingStats schedule_contingencies(int task_count, int lanes,
                                          const std::function<void(int, int)>& run) {
  TimingStats stats;
  stats.lane_seconds.assign(static_cast<size_t>(lanes), 0.0);
  std::mutex queue_mu;  // the queue read is serial
  int next = 0;
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(lanes));
  for (int lane = 0; lane < lanes; ++lane) {
    threads.emplace_back([&, lane] {
      for (;;) {
        int task;
        {
          std::lock_guard lock(queue_mu);
          if (next >= task_count) return;
          task = next++;
        }
        auto s = std::chrono::steady_clock::now();
        run(task, lane);
        stats.lane_seconds[static_cast<size_t>(lane)] +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - s).count();
      }
    });
  }
  for (auto& t : threads) t.join();
  stats.makespan_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

struct ScreeningRow {
  int region = 0;
  int anchor = 0;
  double distance = 0.0;
  std::vector<int> member_branch_ids;
  std::vector<int> to_nodes;
  int new_violations = 0;
  bool evaluated = false;
  bool stop_marker = false;
};

struct DcaReport {
  json body;    // deterministic given config + fixtures
  json timing;  // wall clock, lane assignment; excluded from determinism
  bool aborted = false;
  bool has_violations = false;

  json full() const {
    json j;
    j["body"] = body;
    j["timing"] = timing;
    return j;
  }
};

struct DcaRunOutput {
  DcaReport report;
  std::vector<ContingencyResult> results;
  std::vector<ScreeningRow> screening;
  std::vector<Frame> captured_frames;  // when capture_frames is set
  Vector base_solution;
  BoundaryLayout layout;
};

namespace detail {

struct CapturedFrames {
  std::mutex mu;
  std::vector<Frame> frames;

  FrameObserver observer() {
    return [this](const Frame& f, bool) {
      std::lock_guard lock(mu);
      frames.push_back(f);
    };
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline uint64_t limits_hash(const GridCase& gc) {
  std::ostringstream os;
  for (const auto& br : gc.branches)
    os << br.id << ":" << (br.p_max ? std::to_string(*br.p_max) : "-") << ";";
  for (const auto& b : gc.buses) os << b.id << ":" << b.v_min << "," << b.v_max << ";";
  return fnv1a(os.str());
}

}  // namespace detail

// The full Fig.-1 style run. Owns the coordinator; spawns in-process servers
// or connects to remote ones.
class DcaRunner {
 public:
  explicit DcaRunner(DcaConfig config) : config_(std::move(config)) {}

  DcaRunOutput run() {
    auto wall0 = std::chrono::steady_clock::now();
    load();
    DcaRunOutput out;
    out.layout = layout_;
    try {
      connect();
      session_->handshake(config_.to_json()["jfng"]);
      solve_base_case();
      out.base_solution = base_result_.solution;
      if (config_.mode != RunMode::BaseOnly) screen();
      if (config_.mode == RunMode::Full) {
        sweep();
      } else if (config_.mode == RunMode::ScreenOnly) {
        for (auto& [region, groups] : groups_by_region_)
          for (const auto& group : groups) {
            ScreeningRow row;
            row.region = region;
            row.anchor = group.anchor_node;
            row.distance = group.distance;
            row.member_branch_ids = group.member_branch_ids;
            for (int bid : group.member_branch_ids) {
              const Branch& br = case_.branch(bid);
              row.to_nodes.push_back(br.from_bus == group.anchor_node ? br.to_bus
                                                                      : br.from_bus);
            }
            screening_rows_.push_back(std::move(row));
          }
      }
      session_->finish();
    } catch (const std::exception& e) {
      aborted_ = true;
      abort_reason_ = e.what();
      if (session_) session_->abort_session(e.what());
    }
    join_servers();
    out.report = build_report(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count());
    out.results = results_;
    out.screening = screening_rows_;
    if (capture_) {
      std::lock_guard lock(capture_->mu);
      out.captured_frames = capture_->frames;
    }
    return out;
  }

  const GridCase& grid_case() const { return case_; }
  const PartitionedSystem& system() const { return sys_; }

 private:
  void load() {
    case_ = parse_case(detail::read_file(config_.case_path));
    spec_ = parse_partition(detail::read_file(config_.partition_path));
    sys_ = partition_system(case_, spec_);
    layout_ = BoundaryLayout::from_system(sys_);
    case_fingerprint_ = fnv1a(serialize_case(case_).dump());
    if (config_.capture_frames) capture_ = std::make_unique<detail::CapturedFrames>();
  }

  void connect() {
    session_ = std::make_unique<CoordinatorSession>(
        1 + static_cast<uint32_t>(config_.seed & 0x7fffffff), layout_,
        case_fingerprint_, detail::limits_hash(case_));
    if (config_.transport == TransportKind::InProcess) {
      for (const auto& rg : sys_.regions) {
        auto [a, b] = make_in_process_pair(config_.latency);
        if (capture_) a->set_observer(capture_->observer());
        session_->add_peer(rg.region_index, std::move(a));
        int region = rg.region_index;
        auto server_transport = std::shared_ptr<Transport>(std::move(b));
        server_threads_.emplace_back([this, region, server_transport] {
          ComputationServer server(sys_, region, case_fingerprint_, config_.newton);
          server.run(*server_transport);
        });
      }
    } else {
      for (const auto& rg : sys_.regions) {
        auto it = config_.peer_roster.find(rg.region_index);
        if (it == config_.peer_roster.end())
          throw ConnectionLost("no endpoint for region " +
                               std::to_string(rg.region_index));
        auto colon = it->second.rfind(':');
        if (colon == std::string::npos)
          throw ConnectionLost("bad endpoint " + it->second);
        std::string host = it->second.substr(0, colon);
        uint16_t port = static_cast<uint16_t>(std::stoi(it->second.substr(colon + 1)));
        auto t = tcp_connect(host, port, std::chrono::milliseconds(5000));
        if (capture_) t->set_observer(capture_->observer());
        session_->add_peer(rg.region_index, std::move(t));
      }
    }
  }

  void join_servers() {
    if (session_) session_->finish();
    for (auto& t : server_threads_)
      if (t.joinable()) t.join();
    server_threads_.clear();
  }

  uint32_t allocate_slot() { return next_slot_++; }

  struct SolveOutcome {
    JfngResult jfng;
    std::vector<Violation> violations;
  };

  // One distributed JFNG solve on `system` over a fresh slot; when converged,
  // a final exchange triggers server-side violation checks.
  SolveOutcome solve_distributed(const PartitionedSystem& system, int contingency,
                                 const Vector& x0, const Preconditioner& m0,
                                 bool collect_violations) {
    uint32_t slot = allocate_slot();
    session_->start_round(slot, contingency);
    RemoteRegionBackend backend(*session_, slot);
    ResidualFn residual = [&](const Vector& x) {
      return evaluate_boundary_residual(x, layout_, system, backend);
    };
    SolveOutcome outcome;
    outcome.jfng = jfng_solve(residual, x0, m0, config_.jfng);
    if (outcome.jfng.converged && collect_violations) {
      auto requests = boundary_requests(outcome.jfng.solution, layout_, system);
      auto replies = backend.solve_all(requests, true);
      outcome.violations = session_->collect_violations(slot, contingency);
      // link-branch flow checks live with the coordinator
      std::map<int, std::map<int, Complex>> voltages;
      for (const auto& rg : system.regions) {
        const auto& slice = layout_.slice(rg.region_index);
        auto& vmap = voltages[rg.region_index];
        const auto& reply = replies.at(rg.region_index);
        for (size_t k = 0; k < slice.boundary_bus_ids.size(); ++k)
          vmap[slice.boundary_bus_ids[k]] = reply.boundary_voltages[k];
      }
      auto link_violations =
          check_link_violations(system.link_partition, voltages, contingency);
      outcome.violations.insert(outcome.violations.end(), link_violations.begin(),
                                link_violations.end());
      std::sort(outcome.violations.begin(), outcome.violations.end(),
                [](const Violation& a, const Violation& b) { return a.key() < b.key(); });
    }
    return outcome;
  }

  void solve_base_case() {
    Vector x0 = Vector::Zero(layout_.dim);
    auto outcome = solve_distributed(sys_, -1, x0, Preconditioner::identity(layout_.dim),
                                     true);
    if (!outcome.jfng.converged)
      throw NonConvergence("base-case distributed power flow did not converge");
    base_result_ = outcome.jfng;
    base_violations_ = outcome.violations;
  }

  void screen() {
    for (const auto& rg : sys_.regions) {
      auto zm = build_impedance_matrix(rg);
      auto rag = rank_and_group(rg, zm, rg.boundary_bus_ids, config_.distance_formula);
      groups_by_region_[rg.region_index] = rag.groups;
    }
  }

  ContingencyResult solve_contingency(const ContingencyGroup& group, int branch_id,
                                      const std::optional<WarmStartState>& warm) {
    ContingencyResult res;
    res.branch_id = branch_id;
    res.circuit = case_.branch(branch_id).circuit_id;
    res.group_anchor = group.anchor_node;
    res.group_region = group.region;

    auto outage = apply_outage(sys_, branch_id);
    if (outage.status == OutageStatus::Islanding) {
      res.status = ContingencyStatus::Islanding;
      std::ostringstream os;
      os << "islands bus";
      for (int b : outage.isolated_buses) os << " " << b;
      res.error = os.str();
      return res;
    }

    Vector x0 = Vector::Zero(layout_.dim);
    Preconditioner m0 = Preconditioner::identity(layout_.dim);
    if (warm) {
      x0 = warm->last_solution;
      m0 = warm->preconditioner;
    }

    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        auto outcome = solve_distributed(outage.system, branch_id, x0, m0, true);
        res.status = outcome.jfng.converged ? ContingencyStatus::Converged
                                            : ContingencyStatus::NonConverged;
        res.violations = outcome.violations;
        res.outer_iterations = outcome.jfng.outer_iterations;
        res.inner_iterations = outcome.jfng.inner_iterations;
        res.residual_evaluations = outcome.jfng.residual_evaluations;
        res.final_norm = outcome.jfng.final_norm;
        res.trace = outcome.jfng.trace;
        res.jfng = std::make_shared<JfngResult>(std::move(outcome.jfng));
        return res;
      } catch (const StagnationError& e) {
        res.status = ContingencyStatus::NonConverged;
        res.error = e.what();
        return res;
      } catch (const RegionSolveError& e) {
        res.status = ContingencyStatus::Errored;
        res.error = e.what();
        return res;
      } catch (const std::exception& e) {
        // lane failure (timeout, lost connection): re-queue once
        res.error = e.what();
        if (attempt == 1) res.status = ContingencyStatus::Requeued;
      }
    }
    return res;
  }

  void sweep() {
    // round-robin across regions, one group at a time, link branches last
    std::vector<ContingencyGroup> order;
    size_t max_groups = 0;
    for (auto& [region, groups] : groups_by_region_)
      max_groups = std::max(max_groups, groups.size());
    std::vector<std::pair<int, size_t>> group_refs;
    for (size_t k = 0; k < max_groups; ++k)
      for (auto& [region, groups] : groups_by_region_)
        if (k < groups.size()) group_refs.emplace_back(region, k);

    ccs_.k_stop = config_.k_stop;
    std::optional<WarmStartState> base_warm;
    if (config_.warm_start != WarmStartPolicy::Off)
      base_warm = make_warm_start(base_result_, -1);

    for (auto& [region, gi] : group_refs) {
      if (ccs_.region_stopped(region)) continue;
      const ContingencyGroup& group = groups_by_region_[region][gi];
      run_group(group, base_warm, true);
    }
    // link-line contingencies: mandatory final group, evaluated unconditionally
    if (!sys_.link_partition.branches.empty()) {
      ContingencyGroup link_group;
      link_group.anchor_node = 0;
      link_group.region = 0;
      link_group.distance = 0.0;
      for (const auto& br : sys_.link_partition.branches)
        link_group.member_branch_ids.push_back(br.id);
      std::sort(link_group.member_branch_ids.begin(), link_group.member_branch_ids.end());
      run_group(link_group, base_warm, false);
    }
  }

  void run_group(const ContingencyGroup& group,
                 const std::optional<WarmStartState>& base_warm, bool consult_stop) {
    const auto& members = group.member_branch_ids;
    std::vector<ContingencyResult> group_results(members.size());
    size_t first = 0;

    if (config_.warm_start == WarmStartPolicy::PerGroup && members.size() > 1) {
      // group leader solved up front; the rest reuse its solution and
      // preconditioner, so iteration counts do not depend on lane timing
      auto s = std::chrono::steady_clock::now();
      group_results[0] = solve_contingency(group, members[0], base_warm);
      group_results[0].wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - s)
              .count();
      group_results[0].lane = 0;
      first = 1;
      std::optional<WarmStartState> leader_warm = base_warm;
      if (group_results[0].status == ContingencyStatus::Converged &&
          group_results[0].jfng)
        leader_warm = make_warm_start(*group_results[0].jfng, members[0]);
      auto stats = schedule_contingencies(
          static_cast<int>(members.size() - 1), config_.worker_count,
          [&](int task, int lane) {
            size_t idx = static_cast<size_t>(task) + 1;
            auto ts = std::chrono::steady_clock::now();
            group_results[idx] = solve_contingency(group, members[idx], leader_warm);
            group_results[idx].wall_ms = std::chrono::duration<double, std::milli>(
                                             std::chrono::steady_clock::now() - ts)
                                             .count();
            group_results[idx].lane = lane;
          });
      accumulate_timing(stats, group_results[0].wall_ms / 1000.0);
    } else if (config_.warm_start == WarmStartPolicy::PerLane) {
      std::vector<std::optional<WarmStartState>> lane_warm(
          static_cast<size_t>(config_.worker_count), base_warm);
      auto stats = schedule_contingencies(
          static_cast<int>(members.size()), config_.worker_count,
          [&](int task, int lane) {
            size_t idx = static_cast<size_t>(task);
            auto ts = std::chrono::steady_clock::now();
            group_results[idx] =
                solve_contingency(group, members[idx], lane_warm[lane]);
            group_results[idx].wall_ms = std::chrono::duration<double, std::milli>(
                                             std::chrono::steady_clock::now() - ts)
                                             .count();
            group_results[idx].lane = lane;
            // a failed solve never poisons the chain
            if (group_results[idx].status == ContingencyStatus::Converged &&
                group_results[idx].jfng)
              lane_warm[lane] = make_warm_start(*group_results[idx].jfng, members[idx]);
          });
      accumulate_timing(stats, 0.0);
    } else {
      std::optional<WarmStartState> start =
          config_.warm_start == WarmStartPolicy::Off ? std::nullopt : base_warm;
      auto stats = schedule_contingencies(
          static_cast<int>(members.size()), config_.worker_count,
          [&](int task, int lane) {
            size_t idx = static_cast<size_t>(task);
            auto ts = std::chrono::steady_clock::now();
            group_results[idx] = solve_contingency(group, members[idx], start);
            group_results[idx].wall_ms = std::chrono::duration<double, std::milli>(
                                             std::chrono::steady_clock::now() - ts)
                                             .count();
            group_results[idx].lane = lane;
          });
      accumulate_timing(stats, 0.0);
    }

    // group barrier: merge violations serially, then consult the criterion
    std::vector<Violation> group_violations;
    for (auto& res : group_results) {
      group_violations.insert(group_violations.end(), res.violations.begin(),
                              res.violations.end());
      res.jfng.reset();
      results_.push_back(res);
    }
    ScreeningRow row;
    row.region = group.region;
    row.anchor = group.anchor_node;
    row.distance = group.distance;
    row.member_branch_ids = members;
    for (int bid : members) {
      const Branch& br = case_.branch(bid);
      row.to_nodes.push_back(br.from_bus == group.anchor_node ? br.to_bus : br.from_bus);
    }
    row.evaluated = true;
    if (consult_stop) {
      auto decision = should_stop(ccs_, group.region, group_violations);
      row.new_violations = decision.new_violations;
      row.stop_marker = decision.stop;
    } else {
      for (const auto& v : group_violations) ccs_.cumulative.insert(v.key());
    }
    screening_rows_.push_back(std::move(row));
    event_log_.push_back("group_done region=" + std::to_string(group.region) +
                         " anchor=" + std::to_string(group.anchor_node));
  }

  void accumulate_timing(const TimingStats& stats, double leader_seconds) {
    if (timing_.lane_seconds.size() < stats.lane_seconds.size())
      timing_.lane_seconds.resize(stats.lane_seconds.size(), 0.0);
    for (size_t i = 0; i < stats.lane_seconds.size(); ++i)
      timing_.lane_seconds[i] += stats.lane_seconds[i];
    if (!timing_.lane_seconds.empty()) timing_.lane_seconds[0] += leader_seconds;
    timing_.makespan_seconds += stats.makespan_seconds + leader_seconds;
  }

  DcaReport build_report(double total_seconds) {
    DcaReport report;
    json& body = report.body;
    body["schema_version"] = 1;
    body["case"] = case_.name;
    body["case_fingerprint"] = hash_hex(case_fingerprint_);
    body["config_hash"] = hash_hex(fnv1a(config_.to_json().dump()));
    body["aborted"] = aborted_;
    if (aborted_) body["abort_reason"] = abort_reason_;

    json base;
    base["converged"] = base_result_.converged;
    base["outer_iterations"] = base_result_.outer_iterations;
    base["inner_iterations"] = base_result_.inner_iterations;
    base["final_norm"] = base_result_.final_norm;
    json bviol = json::array();
    for (const auto& v : base_violations_) bviol.push_back(violation_to_json(v));
    base["violations"] = bviol;
    if (config_.oracle_mode && base_result_.converged) {
      json rows = json::array();
      auto diff = compare_with_centralized(&rows);
      base["max_vmag_diff_vs_centralized"] = diff.first;
      base["max_vang_diff_vs_centralized"] = diff.second;
      body["oracle_comparison"] = rows;
    }
    body["base_case"] = base;

    json screening = json::array();
    for (const auto& row : screening_rows_) {
      json r;
      r["region"] = row.region;
      r["anchor"] = row.anchor;
      r["distance"] = row.distance;
      r["members"] = row.member_branch_ids;
      r["to_nodes"] = row.to_nodes;
      r["new_violations"] = row.new_violations;
      r["stop"] = row.stop_marker;
      screening.push_back(r);
    }
    body["screening"] = screening;

    json contingencies = json::array();
    for (const auto& res : results_) {
      json r;
      r["branch"] = res.branch_id;
      r["circuit"] = res.circuit;
      r["anchor"] = res.group_anchor;
      r["region"] = res.group_region;
      r["status"] = to_string(res.status);
      r["outer_iterations"] = res.outer_iterations;
      r["inner_iterations"] = res.inner_iterations;
      r["residual_evaluations"] = res.residual_evaluations;
      r["final_norm"] = res.final_norm;
      json viol = json::array();
      for (const auto& v : res.violations) viol.push_back(violation_to_json(v));
      r["violations"] = viol;
      if (!res.error.empty()) r["error"] = res.error;
      contingencies.push_back(r);
    }
    body["contingencies"] = contingencies;

    json cumulative = json::array();
    for (const auto& [kind, element, region] : ccs_.cumulative)
      cumulative.push_back(json{{"kind", to_string(static_cast<ViolationKind>(kind))},
                                {"element", element},
                                {"region", region}});
    body["cumulative_violations"] = cumulative;
    report.has_violations = !ccs_.cumulative.empty();

    json timing;
    timing["lane_seconds"] = timing_.lane_seconds;
    timing["longest_lane_seconds"] = timing_.longest_lane();
    timing["sweep_makespan_seconds"] = timing_.makespan_seconds;
    timing["total_seconds"] = total_seconds;
    json per_contingency = json::array();
    for (const auto& res : results_)
      per_contingency.push_back(
          json{{"branch", res.branch_id}, {"lane", res.lane}, {"wall_ms", res.wall_ms}});
    timing["contingencies"] = per_contingency;
    report.timing = timing;
    report.aborted = aborted_;
    return report;
  }

  // max per-bus |V| and |theta| differences of the stitched distributed base
  // solution against the centralized oracle
  std::pair<double, double> compare_with_centralized(json* rows = nullptr) {
    auto central = solve_centralized_power_flow(case_, config_.newton);
    auto dist = solve_all_regions(base_result_.solution, layout_, sys_, config_.newton);
    double dv = 0.0, da = 0.0;
    for (const auto& rg : sys_.regions) {
      const auto& sol = dist.regions.at(rg.region_index);
      for (size_t i = 0; i < rg.buses.size(); ++i) {
        int gi = central.index.at(rg.buses[i].id);
        double ddv = std::abs(sol.v_mag[i] - central.state.v_mag[gi]);
        double dda = std::abs(sol.v_ang[i] - central.state.v_ang[gi]);
        if (rows)
          rows->push_back(json{{"bus", rg.buses[i].id},
                               {"vmag_diff", ddv},
                               {"vang_diff", dda}});
        dv = std::max(dv, ddv);
        da = std::max(da, dda);
      }
    }
    return {dv, da};
  }

  DcaConfig config_;
  GridCase case_;
  PartitionSpec spec_;
  PartitionedSystem sys_;
  BoundaryLayout layout_;
  uint64_t case_fingerprint_ = 0;
  std::unique_ptr<CoordinatorSession> session_;
  std::vector<std::thread> server_threads_;
  std::unique_ptr<detail::CapturedFrames> capture_;
  std::atomic<uint32_t> next_slot_{1};
  JfngResult base_result_;
  std::vector<Violation> base_violations_;
  std::map<int, std::vector<ContingencyGroup>> groups_by_region_;
  CcsState ccs_;
  std::vector<ContingencyResult> results_;
  std::vector<ScreeningRow> screening_rows_;
  std::vector<std::string> event_log_;
  TimingStats timing_;
  bool aborted_ = false;
  std::string abort_reason_;
};

inline DcaRunOutput run_dca(const DcaConfig& config) {
  DcaRunner runner(config);
  return runner.run();
}

// ---- report files ----

inline void write_report(const DcaReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  {
    std::ofstream out(out_dir + "/report.json");
    if (!out) throw IoError("cannot write " + out_dir + "/report.json");
    out << report.full().dump(2) << "\n";
  }
  {
    std::ofstream out(out_dir + "/screening.csv");
    out << "from_node,region,distance,to_nodes,violations,stop\n";
    for (const auto& row : report.body["screening"]) {
      out << row["anchor"].get<int>() << "," << row["region"].get<int>() << ","
          << row["distance"].get<double>() << ",";
      std::string sep;
      for (const auto& n : row["to_nodes"]) {
        out << sep << n.get<int>();
        sep = ";";
      }
      out << "," << row["new_violations"].get<int>() << ","
          << (row["stop"].get<bool>() ? "stop" : "") << "\n";
    }
  }
  if (report.body.contains("oracle_comparison")) {
    std::ofstream out(out_dir + "/residuals.csv");
    out << "bus,vmag_diff,vang_diff\n";
    for (const auto& r : report.body["oracle_comparison"])
      out << r["bus"].get<int>() << "," << r["vmag_diff"].get<double>() << ","
          << r["vang_diff"].get<double>() << "\n";
  }
  {
    std::ofstream out(out_dir + "/iterations.csv");
    out << "contingency,outer,inner,residual_evaluations,final_norm\n";
    for (const auto& r : report.body["contingencies"])
      out << r["branch"].get<int>() << "," << r["outer_iterations"].get<int>() << ","
          << r["inner_iterations"].get<int>() << ","
          << r["residual_evaluations"].get<int>() << "," << r["final_norm"].get<double>()
          << "\n";
  }
}

inline void write_trace_csv(const std::vector<ContingencyResult>& results,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "contingency,outer,inner,norm_inf\n";
  for (const auto& res : results)
    for (const auto& row : res.trace)
      out << res.branch_id << "," << row.outer << "," << row.inner_total << ","
          << row.norm_inf << "\n";
}

}  // namespace dca
