// balayage: batch runner for scenario configs and the acceptance battery.
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "balayage/acceptance.hpp"
#include "balayage/runner.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("balayage");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("BALAYAGE_LOG");
  const std::string level = env ? env : "error";
  if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else spdlog::set_level(spdlog::level::err);
}

int run_config(const std::string& path, const std::filesystem::path& out, std::uint64_t seed, bool seed_given,
               unsigned threads) {
  balayage::Config cfg;
  try {
    cfg = balayage::load_config(path, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (seed_given) cfg.seed = seed;
  spdlog::info("{}: {} scenario(s), seed {}", path, cfg.scenarios.size(), cfg.seed);
  if (cfg.scenarios.empty()) return 0;

  std::vector<balayage::ScenarioOutcome> outcomes(cfg.scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < cfg.scenarios.size();) {
      spdlog::debug("start {}", cfg.scenarios[k].name);
      outcomes[k] = balayage::run_scenario(cfg.scenarios[k], cfg.seed, out);
      spdlog::debug("done {}", cfg.scenarios[k].name);
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfg.scenarios.size())));
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  balayage::write_run_summary(out, cfg.seed, outcomes);
  for (const auto& o : outcomes) {
    std::cout << balayage::to_string(o.status) << "  " << o.name << " [" << o.task << "]";
    if (!o.message.empty()) std::cout << ": " << o.message;
    std::cout << "\n";
    if (o.status == balayage::Status::Error) spdlog::error("{}: {}", o.name, o.message);
  }
  return balayage::exit_code(outcomes);
}

int verify(const std::string& filter, std::uint64_t seed, bool inject) {
  balayage::acceptance::Options opt;
  opt.filter = filter;
  opt.seed = seed;
  opt.inject_stiffness_sign_error = inject;
  const auto outcomes = balayage::acceptance::run(opt, &std::cout);
  std::size_t passed = 0;
  for (const auto& o : outcomes) passed += o.pass;
  std::cout << passed << "/" << outcomes.size() << " criteria pass\n";
  return passed == outcomes.size() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Partial balayage on discrete manifolds"};
  app.set_version_flag("--version", balayage::kVersion);
  std::string out = "out";
  std::uint64_t seed = 42;
  unsigned threads = 1;
  app.add_option("--out", out, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Seed for random charges and property trials")->capture_default_str();
  app.add_option("--threads", threads, "Scenarios run in parallel")->check(CLI::PositiveNumber)->capture_default_str();
  app.require_subcommand(1);
  app.fallthrough();

  std::string config;
  auto* run = app.add_subcommand("run", "Run every scenario in a config");
  run->add_option("config", config, "Scenario config (JSON)")->required();

  std::string filter;
  bool inject = false;
  auto* ver = app.add_subcommand("verify", "Run the acceptance criteria");
  ver->add_option("--filter", filter, "Module name or criterion number");
  ver->add_flag("--inject-stiffness-sign-error", inject)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return run_config(config, out, seed, seed_opt->count() > 0, threads);
    return verify(filter, seed, inject);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
