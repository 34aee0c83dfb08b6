#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dalio/evaluation.hpp"
#include "dalio/filter.hpp"
#include "dalio/plane_map.hpp"
#include "dalio/simulator.hpp"
#include "dalio/state.hpp"

// Odometry pipeline: propagate with IMU, select measurements (prune +
// compensate), run the iterated Schmidt update, slide the window, map the
// scan. One record per processed scan feeds the run report.

namespace dalio {

struct RunConfig {
  WindowConfig window;
  UpdateConfig update;
  NoiseParams noise;
  Extrinsics extrinsics;
  MapBackend backend = MapBackend::Analytic;
  double voxel_size = 0.3;       // map voxel (points backend)
  double scan_voxel = 0.3;       // input scan downsampling voxel; 0 disables
  double point_variance = 0.0025;  // c_j = (0.05 m)^2
  double init_time = 1.0;          // s of IMU used for static initialization
  bool window_enabled = true;
  bool schmidt_enabled = true;
  bool prune_enabled = true;
  bool compensate_enabled = true;

  /// Sets one `key = value` entry; throws std::runtime_error naming the key
  /// on unknown keys or unparseable values.
  void apply(const std::string& key, const std::string& value);
  /// Applies a whole entry map, collecting every bad key into one error.
  void apply_all(const std::map<std::string, std::string>& entries);
};

struct ScanRecord {
  long index = 0;
  double t = 0.0;
  double chi_pre = 1.0;
  double chi_post_prune = 1.0;
  double chi_post_compensate = 1.0;
  int rows_total = 0;
  int rows_pruned = 0;       // removed by pruning
  int rows_compensated = 0;  // added from fixed states
  int iterations = 0;
  bool aborted = false;
  SlideDecision slide = SlideDecision::None;
  double wall_ms = 0.0;
  double propagate_ms = 0.0;
  double select_ms = 0.0;
  double update_ms = 0.0;
  double map_ms = 0.0;
};

struct RunReport {
  std::vector<ScanRecord> scans;
  int aborted_scans = 0;
  int thread_count = 1;
  std::optional<double> ape;  // set when ground truth was supplied
  bool ape_translation_only = false;
  double mean_wall_ms = 0.0;
  double mean_propagate_ms = 0.0;
  double mean_select_ms = 0.0;
  double mean_update_ms = 0.0;
  double mean_map_ms = 0.0;
};

struct RunInput {
  std::vector<Patch> world;  // analytic backend world
  std::vector<ImuSample> imu;
  std::vector<SimScan> scans;
};

struct RunResult {
  Trajectory estimate;
  RunReport report;
  int exit_code = 0;  // 0 ok, 2 when any scan aborted on a singular system
};

RunInput load_run_input(const std::string& data_dir);
RunInput to_run_input(const ScenarioDataset& dataset);

RunResult run_odometry(const RunInput& input, const RunConfig& config,
                       const Trajectory* ground_truth = nullptr);

/// report.json; infinite condition numbers are written as 1e18.
void write_report_json(const RunReport& report, const std::string& path);

}  // namespace dalio
