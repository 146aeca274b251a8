#pragma once

// Orchestration for lightcone-lab: validate, run, write CSVs and the run
// manifest, and map every failure onto an exit status.
//
//   0  success
//   1  configuration, parameter, shape, resolution or model errors; unknown experiment
//   2  hypothesis, capacity, truncation, plan or divergence errors
//   3  numerical tolerance failures and anything unexpected

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include "lightcone/config.hpp"
#include "lightcone/experiments.hpp"

namespace lightcone {

inline int exit_code(errc code) {
  switch (code) {
    case errc::parameter:
    case errc::resolution:
    case errc::shape:
    case errc::config:
    case errc::model:
      return 1;
    case errc::capacity:
    case errc::hypothesis:
    case errc::divergence:
    case errc::truncation:
    case errc::plan:
      return 2;
    case errc::numerical:
      return 3;
  }
  return 3;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json config_echo(const Config& c) {
  json out = json::object();
  for (const auto& [section, keys] : c.tree()) {
    json s = json::object();
    for (const auto& [key, value] : keys) s[key] = value.data();
    out[section] = s;
  }
  return out;
}

struct LabRun {
  std::string experiment;
  std::string config_path;
  std::string out_dir = ".";
  RunOptions options;
};

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  require(bool(os), errc::config, "cannot write '" + path.string() + "'");
  os << body;
}

/// Runs one experiment end to end; returns the process exit status.
inline int run_lab(const LabRun& run, std::ostream& log) {
  try {
    require(is_experiment(run.experiment), errc::config, "unknown experiment '" + run.experiment + "'");
    const Config config = Config::load(run.config_path);
    const auto violations = validate(config, run.experiment);
    if (!violations.empty()) {
      for (const auto& v : violations) log << "invalid config: " << v.message << '\n';
      return exit_code(violations.front().code);
    }
    RunOptions opt = run.options;
    opt.jobs = resolve_jobs(opt.jobs);

    const auto start = std::chrono::steady_clock::now();
    ExperimentResult r = run_experiment(run.experiment, config, opt);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    namespace fs = std::filesystem;
    fs::create_directories(run.out_dir);
    const std::string stamp = utc_timestamp();
    const fs::path dir(run.out_dir);
    json outputs = json::array();
    auto emit = [&](const std::string& name, const Table& t) {
      std::ostringstream os;
      write_table(os, t, run.experiment, stamp);
      write_file(dir / name, os.str());
      outputs.push_back(name);
    };
    emit(run.experiment + ".csv", r.table);
    for (const auto& [suffix, t] : r.extra) emit(run.experiment + "-" + suffix + ".csv", t);

    json fits = json::array();
    for (const auto& f : r.fits) fits.push_back(to_json(f));
    if (run.experiment == "constants-report") {
      write_file(dir / "constants-report.json", fits.dump(2) + "\n");
      outputs.push_back("constants-report.json");
    }
    json manifest{{"experiment", run.experiment},
                  {"timestamp", stamp},
                  {"config_file", run.config_path},
                  {"config", config_echo(config)},
                  {"jobs", opt.jobs},
                  {"max_points", opt.max_points},
                  {"wall_time_s", wall},
                  {"fitted_constants", fits},
                  {"warnings", r.warnings},
                  {"outputs", outputs}};
    for (const auto& [k, v] : r.manifest.items()) manifest[k] = v;
    write_file(dir / (run.experiment + ".manifest.json"), manifest.dump(2) + "\n");
    for (const auto& w : r.warnings) log << "warning: " << w << '\n';
    return 0;
  } catch (const error& e) {
    log << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    log << "unexpected failure: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace lightcone
