// Command-line front end: base-case solve, screening tables, the full DCA
// run, centralized-oracle comparison, T-vs-D benchmark and the TCP region
// server.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "dca/dca.hpp"

namespace {

struct CommonArgs {
  std::string case_path;
  std::string partition_path;
  std::string out_dir = "out";
  int workers = 1;
  int k_stop = 2;
  std::string warm = "per-group";
  std::string transport = "in-process";
  std::vector<std::string> peers;  // region=host:port
  double latency_mean_ms = 0.0;
  uint64_t seed = 0;
  double tol_boundary = 1e-6;
  int gmres_m = 20;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_case = true) {
  cmd->add_option("--case", args.case_path, "grid case file (case-json)")
      ->required(needs_case);
  cmd->add_option("--partition", args.partition_path, "partition file")
      ->required(needs_case);
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("-D,--workers", args.workers, "number of worker lanes");
  cmd->add_option("--k-stop", args.k_stop, "consecutive no-new-violation groups before stop");
  cmd->add_option("--warm-start", args.warm, "per-group | per-lane | off");
  cmd->add_option("--transport", args.transport, "in-process | tcp");
  cmd->add_option("--peer", args.peers, "region=host:port (tcp transport)");
  cmd->add_option("--latency-mean-ms", args.latency_mean_ms,
                  "injected mean latency, in-process transport");
  cmd->add_option("--seed", args.seed, "latency-injection seed");
  cmd->add_option("--tol-boundary", args.tol_boundary, "boundary residual tolerance");
  cmd->add_option("--gmres-m", args.gmres_m, "GMRES restart dimension");
}

dca::DcaConfig to_config(const CommonArgs& args) {
  dca::DcaConfig cfg;
  cfg.case_path = args.case_path;
  cfg.partition_path = args.partition_path;
  cfg.out_dir = args.out_dir;
  cfg.worker_count = args.workers;
  cfg.k_stop = args.k_stop;
  cfg.jfng.tol_boundary = args.tol_boundary;
  cfg.jfng.m = args.gmres_m;
  cfg.latency.mean_ms = args.latency_mean_ms;
  cfg.latency.seed = args.seed;
  cfg.seed = args.seed;
  if (args.warm == "per-group") cfg.warm_start = dca::WarmStartPolicy::PerGroup;
  else if (args.warm == "per-lane") cfg.warm_start = dca::WarmStartPolicy::PerLane;
  else if (args.warm == "off") cfg.warm_start = dca::WarmStartPolicy::Off;
  else throw CLI::ValidationError("--warm-start", "unknown policy " + args.warm);
  if (args.transport == "in-process") cfg.transport = dca::TransportKind::InProcess;
  else if (args.transport == "tcp") cfg.transport = dca::TransportKind::Tcp;
  else throw CLI::ValidationError("--transport", "unknown transport " + args.transport);
  for (const auto& peer : args.peers) {
    auto eq = peer.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--peer", "expected region=host:port");
    cfg.peer_roster[std::stoi(peer.substr(0, eq))] = peer.substr(eq + 1);
  }
  return cfg;
}

int finish_run(const dca::DcaRunOutput& out, const std::string& out_dir) {
  dca::write_report(out.report, out_dir);
  dca::write_trace_csv(out.results, out_dir + "/trace.csv");
  if (out.report.aborted) {
    std::cerr << "aborted: " << out.report.body.value("abort_reason", "") << "\n";
    return 2;
  }
  std::cout << "report written to " << out_dir << "\n";
  return out.report.has_violations ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed N-1 contingency analysis"};
  app.require_subcommand(1);

  CommonArgs solve_args, screen_args, run_args, oracle_args, bench_args;
  auto* solve_cmd = app.add_subcommand("solve", "base-case distributed power flow only");
  add_common(solve_cmd, solve_args);
  auto* screen_cmd = app.add_subcommand("screen", "screening tables only");
  add_common(screen_cmd, screen_args);
  auto* run_cmd = app.add_subcommand("run", "full distributed contingency analysis");
  add_common(run_cmd, run_args);
  auto* oracle_cmd = app.add_subcommand("oracle", "centralized solve and comparison");
  add_common(oracle_cmd, oracle_args);
  auto* bench_cmd = app.add_subcommand("bench", "makespan vs worker-count sweep");
  add_common(bench_cmd, bench_args);
  std::vector<int> bench_workers{1, 2, 4, 8};
  int bench_reps = 3;
  bench_cmd->add_option("--sweep", bench_workers, "worker counts to sweep");
  bench_cmd->add_option("--reps", bench_reps, "replications per worker count");

  // region computation server
  std::string serve_case, serve_partition, serve_listen = "127.0.0.1:7001";
  int serve_region = 0;
  auto* serve_cmd = app.add_subcommand("serve", "run a computation server for a region");
  serve_cmd->add_option("--case", serve_case)->required();
  serve_cmd->add_option("--partition", serve_partition)->required();
  serve_cmd->add_option("--region", serve_region)->required();
  serve_cmd->add_option("--listen", serve_listen, "host:port to listen on");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) {
      auto cfg = to_config(solve_args);
      cfg.mode = dca::RunMode::BaseOnly;
      auto out = dca::run_dca(cfg);
      if (out.report.aborted) {
        std::cerr << "aborted: " << out.report.body.value("abort_reason", "") << "\n";
        return 2;
      }
      std::cout << "base case converged, |F|_inf = "
                << out.report.body["base_case"]["final_norm"].get<double>() << "\n";
      return 0;
    }
    if (screen_cmd->parsed()) {
      auto cfg = to_config(screen_args);
      cfg.mode = dca::RunMode::ScreenOnly;
      auto out = dca::run_dca(cfg);
      return finish_run(out, cfg.out_dir);
    }
    if (run_cmd->parsed()) {
      auto cfg = to_config(run_args);
      auto out = dca::run_dca(cfg);
      return finish_run(out, cfg.out_dir);
    }
    if (oracle_cmd->parsed()) {
      auto cfg = to_config(oracle_args);
      cfg.mode = dca::RunMode::BaseOnly;
      cfg.oracle_mode = true;
      auto out = dca::run_dca(cfg);
      if (out.report.aborted) {
        std::cerr << "aborted: " << out.report.body.value("abort_reason", "") << "\n";
        return 2;
      }
      dca::write_report(out.report, cfg.out_dir);
      std::cout << "max |distributed - centralized|:\n"
                << "  v_mag " << out.report.body["base_case"]["max_vmag_diff_vs_centralized"]
                << " p.u.\n  v_ang "
                << out.report.body["base_case"]["max_vang_diff_vs_centralized"]
                << " rad\n";
      return 0;
    }
    if (bench_cmd->parsed()) {
      auto cfg = to_config(bench_args);
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream csv(cfg.out_dir + "/bench.csv");
      csv << "workers,T_seconds\n";
      for (int d : bench_workers) {
        double t_max = 0.0;
        for (int rep = 0; rep < bench_reps; ++rep) {
          auto run_cfg = cfg;
          run_cfg.worker_count = d;
          auto out = dca::run_dca(run_cfg);
          if (out.report.aborted) return 2;
          t_max = std::max(t_max,
                           out.report.timing["longest_lane_seconds"].get<double>());
        }
        csv << d << "," << t_max << "\n";
        std::cout << "D=" << d << "  T=" << t_max << " s\n";
      }
      return 0;
    }
    if (serve_cmd->parsed()) {
      auto text = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        if (!in) throw dca::IoError("cannot open " + p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
      };
      auto gc = dca::parse_case(text(serve_case));
      auto spec = dca::parse_partition(text(serve_partition));
      auto sys = dca::partition_system(gc, spec);
      uint64_t fingerprint = dca::fnv1a(dca::serialize_case(gc).dump());
      auto colon = serve_listen.rfind(':');
      std::string host = serve_listen.substr(0, colon);
      auto port = static_cast<uint16_t>(std::stoi(serve_listen.substr(colon + 1)));
      dca::TcpListener listener(host == "0.0.0.0" ? "0.0.0.0" : host, port);
      std::cout << "region " << serve_region << " listening on " << serve_listen << "\n";
      auto transport = listener.accept(std::chrono::milliseconds(600000));
      if (!transport) {
        std::cerr << "no coordinator connected\n";
        return 2;
      }
      dca::ComputationServer server(sys, serve_region, fingerprint);
      server.run(*transport);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
