#include <iostream>

#include <CLI11.hpp>

#include "app.hpp"

int main(int argc, char** argv) {
  using namespace mlkrim::cli;
  CLI::App app{"mlkrim: multi-linear kernel regression reconstruction of dynamic MRI"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string out_dir;
  std::size_t workers = 0;
  bool workers_set = false;
  std::vector<std::string> emit;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seeds, "solver seed (repeatable)")->take_all();
  app.add_option("--out", out_dir, "output directory");
  app.add_option_function<std::size_t>(
      "--workers", [&](std::size_t w) { workers = w, workers_set = true; }, "worker threads (0 = all cores)");
  app.add_option("--emit", emit, "artifacts: png,csv,trace,timing")->delimiter(',');

  for (const char* name : {"generate", "mask", "reconstruct", "evaluate", "report"}) {
    app.add_subcommand(name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    if (!seeds.empty()) cfg.seeds = seeds;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (workers_set) cfg.workers = workers;
    if (!emit.empty()) {
      std::string joined;
      for (const auto& e : emit) joined += (joined.empty() ? "" : ",") + e;
      std::istringstream line("emit = " + joined);
      const RunConfig parsed = RunConfig::parse(line);
      cfg.emit = parsed.emit;
    }
  } catch (const mlkrim::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const mlkrim::Error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  }
  return run_command(app.get_subcommands().front()->get_name(), cfg, std::cout, std::cerr);
}
