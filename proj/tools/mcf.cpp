#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcf/cli_ops.hpp"
#include "mcf/errors.hpp"
#include "mcf/io.hpp"

namespace {

// --set key=value pairs layered over an optional --config file.
mcf::io::KeyValueFile gather_config(const std::string& config_path,
                                    const std::vector<std::string>& overrides) {
  mcf::io::KeyValueFile kv;
  if (!config_path.empty()) kv = mcf::io::read_key_values(config_path);
  for (const std::string& kvpair : overrides) {
    const size_t eq = kvpair.find('=');
    if (eq == std::string::npos || eq == 0)
      throw mcf::InvalidInput("--set expects key=value, got \"" + kvpair + '"');
    kv.set(kvpair.substr(0, eq), kvpair.substr(eq + 1));
  }
  if (const char* env = std::getenv("MCF_SEED"); env && *env) kv.set("seed", env);
  return kv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metasurface convolution frontend: design, optimize, simulate, train"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", run_dir, phase_path, out_csv;
  std::vector<std::string> overrides;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", overrides, "override or add a config key (key=value)")
        ->take_all();
  };

  CLI::App* design = app.add_subcommand("design", "build a target intensity pattern");
  add_config_opts(design);
  design->add_option("--out", out_dir, "output directory");

  CLI::App* optimize = app.add_subcommand("optimize-phase", "fit a phase profile to a target");
  add_config_opts(optimize);
  optimize->add_option("--out", out_dir, "output directory");

  CLI::App* simulate = app.add_subcommand("simulate", "push a scene through the optical model");
  add_config_opts(simulate);
  simulate->add_option("--out", out_dir, "output directory");

  CLI::App* train = app.add_subcommand("train", "run the three-step training protocol");
  add_config_opts(train);
  train->add_option("--out", out_dir, "root for run directories");

  CLI::App* evaluate = app.add_subcommand("evaluate", "recompute accuracies for a finished run");
  evaluate->add_option("--run", run_dir, "run directory")->required();

  CLI::App* orient = app.add_subcommand("export-orientations",
                                        "dump per-element orientation angles as CSV");
  orient->add_option("--phase", phase_path, "phase profile (.mcf)")->required();
  orient->add_option("--out", out_csv, "output CSV path")->required();

  CLI::App* report = app.add_subcommand("report", "render summary and images for a run");
  report->add_option("--run", run_dir, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    std::string text;
    if (design->parsed()) {
      text = mcf::cli::run_design(gather_config(config_path, overrides), out_dir);
    } else if (optimize->parsed()) {
      text = mcf::cli::run_optimize(gather_config(config_path, overrides), out_dir);
    } else if (simulate->parsed()) {
      text = mcf::cli::run_simulate(gather_config(config_path, overrides), out_dir);
    } else if (train->parsed()) {
      text = mcf::cli::run_train(gather_config(config_path, overrides), out_dir);
    } else if (evaluate->parsed()) {
      text = mcf::cli::run_evaluate(run_dir);
    } else if (orient->parsed()) {
      text = mcf::cli::run_export_orientations(phase_path, out_csv);
    } else if (report->parsed()) {
      text = mcf::cli::run_report(run_dir);
    }
    std::fputs(text.c_str(), stdout);
    return 0;
  } catch (const mcf::InvalidInput& e) {
    std::fprintf(stderr, "mcf: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mcf: %s\n", e.what());
    return 1;
  }
}
