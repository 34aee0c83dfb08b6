#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "dalio/evaluation.hpp"
#include "dalio/io.hpp"
#include "dalio/pipeline.hpp"
#include "dalio/simulator.hpp"

namespace fs = std::filesystem;
using namespace dalio;

namespace {

int cmd_simulate(const std::string& scenario_name, std::uint64_t seed, const std::string& out,
                 double duration, int rays, bool zero_noise) {
  Scenario scenario = Scenario::preset(scenario_name, seed);
  scenario.duration = duration;
  scenario.rays_per_scan = rays;
  if (zero_noise) {
    scenario.disable_noise();
  }
  const ScenarioDataset dataset = generate(scenario);
  write_dataset(dataset, out);
  std::cout << "wrote " << dataset.scans.size() << " scans, " << dataset.imu.size()
            << " imu samples to " << out << "\n";
  return 0;
}

int cmd_run(const std::string& data_dir, const std::string& config_path,
            const std::vector<std::string>& overrides, const std::string& gt_path,
            const std::string& out_dir) {
  RunConfig config;
  if (!config_path.empty()) {
    config.apply_all(read_config_file(config_path));
  }
  std::string errors;
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      errors += (errors.empty() ? "" : "; ") + ("--set expects key=value, got `" + kv + "`");
      continue;
    }
    try {
      config.apply(kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const std::exception& e) {
      errors += (errors.empty() ? "" : "; ") + std::string(e.what());
    }
  }
  if (!errors.empty()) {
    std::cerr << "error: " << errors << "\n";
    return 1;
  }

  const RunInput input = load_run_input(data_dir);
  Trajectory gt;
  const Trajectory* gt_ptr = nullptr;
  if (!gt_path.empty()) {
    gt = read_tum(gt_path);
    gt_ptr = &gt;
  }

  const RunResult result = run_odometry(input, config, gt_ptr);
  fs::create_directories(out_dir);
  write_tum((fs::path(out_dir) / "est.tum").string(), result.estimate);
  write_report_json(result.report, (fs::path(out_dir) / "report.json").string());

  std::cout << "processed " << result.report.scans.size() << " scans, "
            << result.report.aborted_scans << " aborted, mean "
            << result.report.mean_wall_ms << " ms/scan\n";
  if (result.report.ape.has_value()) {
    std::printf("ape_rmse %.4f m\n", *result.report.ape);
  }
  return result.exit_code;
}

int cmd_ape(const std::string& gt_path, const std::string& est_path, double max_dt) {
  const Trajectory gt = read_tum(gt_path);
  const Trajectory est = read_tum(est_path);
  const auto pairs = associate(gt, est, max_dt);
  const ApeResult result = ape_rmse(pairs);
  std::printf("%.4f\n", result.rmse);
  if (result.translation_only) {
    std::fprintf(stderr, "warning: collinear trajectory, translation-only alignment\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"degeneracy-aware LiDAR-inertial odometry toolkit"};
  app.require_subcommand(1);

  std::string scenario = "room";
  std::uint64_t seed = 0;
  std::string out_dir;
  double duration = 60.0;
  int rays = 2048;
  bool zero_noise = false;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  sim->add_option("--scenario", scenario, "corridor|open_plane|room|cavern")->required();
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out_dir, "output directory")->required();
  sim->add_option("--duration", duration, "seconds");
  sim->add_option("--rays", rays, "rays per scan");
  sim->add_flag("--zero-noise", zero_noise, "disable all sensor noise and biases");

  std::string data_dir;
  std::string config_path;
  std::string gt_path;
  std::string run_out;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "run the odometry pipeline on a dataset");
  run->add_option("--data", data_dir, "dataset directory")->required();
  run->add_option("--config", config_path, "config file (key = value lines)");
  run->add_option("--set", overrides, "override a config key (key=value, repeatable)");
  run->add_option("--gt", gt_path, "ground-truth TUM file for the report APE");
  run->add_option("--out", run_out, "output directory")->required();

  std::string ape_gt;
  std::string ape_est;
  double max_dt = 0.02;
  auto* ape = app.add_subcommand("ape", "absolute pose error between two TUM files");
  ape->add_option("gt", ape_gt, "ground-truth TUM file")->required();
  ape->add_option("est", ape_est, "estimated TUM file")->required();
  ape->add_option("--max-dt", max_dt, "association window, seconds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(scenario, seed, out_dir, duration, rays, zero_noise);
    }
    if (run->parsed()) {
      return cmd_run(data_dir, config_path, overrides, gt_path, run_out);
    }
    if (ape->parsed()) {
      return cmd_ape(ape_gt, ape_est, max_dt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
