// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// hybridmesh CLI.
//
//   hybridmesh run --scenario s.toml [--seed N] [--mode M] [--out-dir D]
//   hybridmesh replay-verify <events.ndjson>
//   hybridmesh explain --scenario s.toml [--seed N] [--mode M]
//   hybridmesh serve --component repo|node|gateway [...]
//
// Exit codes: 0 success, 2 run failed, 3 configuration error, 4 replay
// violation. HYBRIDMESH_OUT_DIR, when set, overrides --out-dir.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "hybridmesh/replay.hpp"
#include "hybridmesh/runner.hpp"
#include "hybridmesh/serve.hpp"
#include "hybridmesh/version.hpp"

namespace {

using namespace hybridmesh;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

struct RunArgs {
  std::string scenario;
  std::string out_dir = "out";
  std::int64_t seed = -1;
  bool seed_set = false;
  std::string mode;
};

ScenarioConfig load_with_overrides(const RunArgs& args) {
  ScenarioConfig config = load_scenario(args.scenario);
  if (args.seed_set) config.seed = args.seed;
  if (!args.mode.empty()) config.mode = run_mode_from_string(args.mode);
  return config;
}

int cmd_run(const RunArgs& args) {
  std::string out_dir = args.out_dir;
  if (const char* env = std::getenv("HYBRIDMESH_OUT_DIR")) {
    if (env[0] != '\0') out_dir = env;
  }
  Runner runner(load_with_overrides(args));
  RunReport report = runner.execute();
  runner.write_outputs(out_dir);
  std::printf("mode=%s seed=%lld makespan_s=%.6f bytes=%lld success=%s\n",
              to_string(runner.config().mode),
              static_cast<long long>(runner.config().seed), report.makespan_s,
              static_cast<long long>(report.bytes_transferred_total),
              report.success ? "true" : "false");
  std::printf("artifacts: %s\n", out_dir.c_str());
  return report.success ? 0 : 2;
}

int cmd_replay_verify(const std::string& path) {
  try {
    ReplayVerdict v = replay_verify_file(path);
    if (v.ok) {
      std::printf("ok: %lld records, %lld tasks, %lld batches\n",
                  static_cast<long long>(v.records),
                  static_cast<long long>(v.tasks),
                  static_cast<long long>(v.batches));
      return 0;
    }
    for (const std::string& violation : v.violations) {
      std::printf("violation: %s\n", violation.c_str());
    }
    std::printf("%zu violation(s) in %lld records\n", v.violations.size(),
                static_cast<long long>(v.records));
    return 4;
  } catch (const CorruptLog& e) {
    std::fprintf(stderr, "corrupt log: %s\n", e.what());
    return 4;
  }
}

int cmd_explain(const RunArgs& args) {
  Runner runner(load_with_overrides(args));
  RunReport report = runner.execute();

  bool any_routes = false;
  for (const Json& rec : runner.engine().log().records()) {
    if (rec.value("kind", "") != "route_decision") continue;
    if (!any_routes) {
      std::printf("%-14s %-12s %-12s %12s %6s %10s\n", "task", "node", "site",
                  "cost", "alts", "failovers");
      any_routes = true;
    }
    std::printf("%-14s %-12s %-12s %12.3f %6zu %10lld\n",
                rec.value("task_id", "").c_str(),
                rec.value("node", "").c_str(), rec.value("site", "").c_str(),
                rec.value("cost", 0.0),
                rec.contains("alternatives") ? rec["alternatives"].size() : 0,
                static_cast<long long>(rec.value("failovers", 0)));
  }
  bool any_placements = false;
  for (const Json& rec : runner.engine().log().records()) {
    if (rec.value("kind", "") != "placement") continue;
    if (!any_placements) {
      if (any_routes) std::printf("\n");
      std::printf("%-14s %-16s %s\n", "task", "backend", "placement");
      any_placements = true;
    }
    std::printf("%-14s %-16s %s\n", rec.value("task_id", "").c_str(),
                rec.value("backend", "").c_str(),
                rec.value("placement", "").c_str());
  }
  if (!any_routes && !any_placements) {
    std::printf("no routing decisions recorded\n");
  }
  return report.success ? 0 : 2;
}

struct ServeArgs {
  std::string component;
  std::string host = "127.0.0.1";
  int port = 0;
  // repo
  std::int64_t max_retries = 3;
  // node
  std::string node_id = "node";
  std::string site = "site";
  std::int64_t slots = 1;
  double time_scale = 0.001;
  // gateway
  std::string name = "gateway";
  std::vector<std::string> nodes;  // node_id,site,url
  double heartbeat_interval_s = 1.0;
  double heartbeat_timeout_s = 3.0;
  std::string cost_model = "bytes";
};

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (g_stop == 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

int cmd_serve(const ServeArgs& args) {
  if (args.component == "repo") {
    RepoServer server(args.max_retries);
    int port = server.start(args.host, args.port);
    std::printf("repo listening on http://%s:%d\n", args.host.c_str(), port);
    std::fflush(stdout);
    wait_for_signal();
    server.stop();
    return 0;
  }
  if (args.component == "node") {
    NodeServer server(args.node_id, args.site, args.slots, args.time_scale);
    int port = server.start(args.host, args.port);
    std::printf("node '%s' (site %s) listening on http://%s:%d\n",
                args.node_id.c_str(), args.site.c_str(), args.host.c_str(),
                port);
    std::fflush(stdout);
    wait_for_signal();
    server.stop();
    return 0;
  }
  if (args.component == "gateway") {
    RouteCostModel model = RouteCostModel::bytes;
    if (args.cost_model == "time") {
      throw ConfigError("cost model 'time' needs a site registry; "
                        "serve supports 'bytes' only");
    }
    if (args.cost_model != "bytes") {
      throw ConfigError("unknown cost model '" + args.cost_model + "'");
    }
    GatewayServer server(args.name, args.heartbeat_interval_s,
                         args.heartbeat_timeout_s, model);
    for (const std::string& entry : args.nodes) {
      auto first = entry.find(',');
      auto second = entry.find(',', first == std::string::npos ? first
                                                               : first + 1);
      if (first == std::string::npos || second == std::string::npos) {
        throw ConfigError("--node expects node_id,site,url (got '" + entry +
                          "')");
      }
      server.add_node(entry.substr(0, first),
                      entry.substr(first + 1, second - first - 1),
                      entry.substr(second + 1));
    }
    int port = server.start(args.host, args.port);
    std::printf("gateway '%s' listening on http://%s:%d\n", args.name.c_str(),
                args.host.c_str(), port);
    std::fflush(stdout);
    wait_for_signal();
    server.stop();
    return 0;
  }
  throw ConfigError("unknown component '" + args.component + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid multi-cloud workflow simulator"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "run a scenario and write artifacts");
  run->add_option("--scenario", run_args.scenario, "scenario file (.toml or .json)")
      ->required();
  run->add_option("--seed", run_args.seed, "override the scenario seed");
  run->add_option("--mode", run_args.mode,
                  "override the execution mode (manual, federated, "
                  "federated-controller, overlay, overflow, gateway)");
  run->add_option("--out-dir", run_args.out_dir, "artifact directory");

  std::string replay_path;
  CLI::App* replay =
      app.add_subcommand("replay-verify", "check an event log against the protocol rules");
  replay->add_option("log", replay_path, "events.ndjson path")->required();

  RunArgs explain_args;
  CLI::App* explain =
      app.add_subcommand("explain", "run a scenario and print its routing decisions");
  explain->add_option("--scenario", explain_args.scenario, "scenario file")
      ->required();
  explain->add_option("--seed", explain_args.seed, "override the scenario seed");
  explain->add_option("--mode", explain_args.mode, "override the execution mode");

  ServeArgs serve_args;
  CLI::App* serve = app.add_subcommand("serve", "serve a live component over HTTP");
  serve->add_option("--component", serve_args.component, "repo, node, or gateway")
      ->required();
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--port", serve_args.port, "port (0 picks a free one)");
  serve->add_option("--max-retries", serve_args.max_retries, "repo retry budget");
  serve->add_option("--node-id", serve_args.node_id, "node name");
  serve->add_option("--site", serve_args.site, "node site label");
  serve->add_option("--slots", serve_args.slots, "node worker slots");
  serve->add_option("--time-scale", serve_args.time_scale,
                    "wall seconds per simulated second");
  serve->add_option("--name", serve_args.name, "gateway name");
  serve->add_option("--node", serve_args.nodes,
                    "gateway upstream as node_id,site,url (repeatable)");
  serve->add_option("--heartbeat-interval", serve_args.heartbeat_interval_s,
                    "seconds between upstream probes");
  serve->add_option("--heartbeat-timeout", serve_args.heartbeat_timeout_s,
                    "seconds before an unprobed node counts as down");
  serve->add_option("--cost-model", serve_args.cost_model, "bytes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 3;
  }

  try {
    run_args.seed_set = run->count("--seed") > 0;
    explain_args.seed_set = explain->count("--seed") > 0;
    if (*run) return cmd_run(run_args);
    if (*replay) return cmd_replay_verify(replay_path);
    if (*explain) return cmd_explain(explain_args);
    if (*serve) return cmd_serve(serve_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const MalformedSpec& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const BindError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 3;
}
