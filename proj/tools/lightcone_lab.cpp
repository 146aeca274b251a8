#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "lightcone/harness.hpp"

int main(int argc, char** argv) {
  using namespace lightcone;
  std::string experiments;
  for (const auto& n : experiment_names()) experiments += (experiments.empty() ? "" : ", ") + n;

  CLI::App app{"lightcone-lab: light-cone experiments for smeared continuum fermions.\n"
               "Units: hbar = mass = 1; T = kappa |p|^2 + V with kappa from [model] (default 1/2).\n"
               "Experiments: " + experiments};
  LabRun run;
  app.add_option("experiment", run.experiment, "experiment to run")->required();
  app.add_option("--config", run.config_path, "INI configuration file")->required();
  app.add_option("--jobs", run.options.jobs, "worker threads (LIGHTCONE_LAB_THREADS overrides)")->default_val(1);
  app.add_option("--out", run.out_dir, "output directory")->default_val(".");
  app.add_option("--max-points", run.options.max_points, "refuse sweeps with more points than this")
      ->default_val(10000);
  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return run_lab(run, std::cerr);
}
