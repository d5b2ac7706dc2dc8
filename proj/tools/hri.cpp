#include <CLI11.hpp>

#include <csignal>
#include <iostream>

#include "hri/error.hpp"
#include "hri/io.hpp"
#include "hri/net.hpp"
#include "hri/suites.hpp"
#include "hri/testkit.hpp"

namespace {

hri::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int run_serve(const std::string& config_path, const std::string& world_path,
              const std::string& scenario_dir, const std::string& host, int port) {
  hri::ServiceOptions options;
  if (!config_path.empty()) options.config = hri::config_from_json(hri::read_json_file(config_path));
  if (!world_path.empty()) options.default_world = hri::world_from_json(hri::read_json_file(world_path));
  options.scenario_dir = scenario_dir;
  options.transport = hri::make_http_chat_transport;

  hri::HttpServer server(std::move(options));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << host << ":" << port << "\n";
  const bool ok = server.run(host, port);
  g_server = nullptr;
  return ok ? 0 : 1;
}

int run_replay(const std::string& path, bool full, const std::string& persist,
               const std::string& planner) {
  hri::Scenario scenario = hri::load_scenario(path);
  if (!planner.empty()) scenario.planner = planner;
  std::optional<std::filesystem::path> dir;
  if (!persist.empty()) dir = persist;
  const hri::ReplayReport report = hri::replay(scenario, hri::make_http_chat_transport, dir);
  std::cout << (full ? report.full() : report.canonical).dump(2) << "\n";
  return report.passed ? 0 : 1;
}

int run_bench(std::uint64_t seed, double scale) {
  namespace s = hri::suites;
  auto n = [scale](int v) { return std::max(1, static_cast<int>(v * scale)); };
  s::DistanceLimits dl;
  dl.cases = n(dl.cases);
  s::SelectionLimits sl;
  sl.scenes = n(sl.scenes);
  s::SweptLimits wl;
  wl.cases = n(wl.cases);
  s::PlannerLimits pl;
  pl.scenes = n(pl.scenes);
  const std::vector<s::SuiteResult> results = {
      s::distance_kernel(dl, seed), s::target_selection(sl, seed), s::swept_checker(wl, seed),
      s::deterministic_planner(pl, seed)};
  bool ok = true;
  for (const auto& r : results) {
    std::cout << s::format(r) << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intent fusion and safety-checked planning for desk-scale manipulation"};
  app.require_subcommand(1);

  std::string config_path, world_path, scenario_dir = "data/scenarios", host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the HTTP session service");
  serve->add_option("--config", config_path, "Orchestrator config JSON")->check(CLI::ExistingFile);
  serve->add_option("--world", world_path, "Default world for new sessions")->check(CLI::ExistingFile);
  serve->add_option("--scenarios", scenario_dir, "Directory of scenario files");
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  std::string scenario_path, persist, planner;
  bool full = false;
  auto* replay = app.add_subcommand("replay", "Run a scenario headless and print its report");
  replay->add_option("scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  replay->add_flag("--timings", full, "Include per-stage timings");
  replay->add_option("--persist", persist, "Write the session log and snapshots here");
  replay->add_option("--planner", planner, "Override the planner backend")
      ->check(CLI::IsMember({"deterministic", "canned", "llm"}));

  std::uint64_t seed = 1;
  double scale = 1.0;
  auto* bench = app.add_subcommand("bench-oracle", "Compare kernels against the sampling oracles");
  bench->add_option("--seed", seed);
  bench->add_option("--scale", scale, "Multiply case counts")->check(CLI::PositiveNumber);

  std::uint64_t world_seed = 1;
  auto* gen = app.add_subcommand("gen-world", "Print a random box world");
  gen->add_option("--seed", world_seed)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*serve) return run_serve(config_path, world_path, scenario_dir, host, port);
    if (*replay) return run_replay(scenario_path, full, persist, planner);
    if (*bench) return run_bench(seed, scale);
    if (*gen) {
      hri::testkit::Rng rng(world_seed);
      std::cout << hri::to_json(hri::testkit::random_world(rng)).dump(2) << "\n";
      return 0;
    }
  } catch (const hri::Error& e) {
    std::cerr << "error: " << hri::to_string(e.kind()) << ": " << e.what() << "\n";
    return 2;
  }
  return 0;
}
