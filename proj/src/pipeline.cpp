#include "dalio/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "dalio/degeneracy.hpp"
#include "dalio/io.hpp"

namespace dalio {

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "on" || value == "true" || value == "1") {
    return true;
  }
  if (value == "off" || value == "false" || value == "0") {
    return false;
  }
  throw std::runtime_error(key + ": expected on/off, got `" + value + "`");
}

double parse_double(const std::string& value, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) {
      throw std::invalid_argument(value);
    }
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(key + ": expected a number, got `" + value + "`");
  }
}

int parse_int(const std::string& value, const std::string& key) {
  const double v = parse_double(value, key);
  if (v != std::floor(v)) {
    throw std::runtime_error(key + ": expected an integer, got `" + value + "`");
  }
  return static_cast<int>(v);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "window.active") {
    window.s_a = parse_int(value, key);
  } else if (key == "window.fixed") {
    window.s_f = parse_int(value, key);
  } else if (key == "window.chi_threshold") {
    window.chi_threshold = parse_double(value, key);
  } else if (key == "window.loc_threshold") {
    window.loc_threshold = parse_double(value, key);
  } else if (key == "filter.max_iterations") {
    update.max_iterations = parse_int(value, key);
    window.max_iterations = update.max_iterations;
  } else if (key == "filter.convergence_eps") {
    update.convergence_eps = parse_double(value, key);
    window.convergence_eps = update.convergence_eps;
  } else if (key == "noise.gyro") {
    noise.gyro = parse_double(value, key);
  } else if (key == "noise.accel") {
    noise.accel = parse_double(value, key);
  } else if (key == "noise.gyro_bias") {
    noise.gyro_bias = parse_double(value, key);
  } else if (key == "noise.accel_bias") {
    noise.accel_bias = parse_double(value, key);
  } else if (key == "measurement.variance") {
    point_variance = parse_double(value, key);
  } else if (key == "map.backend") {
    if (value == "analytic") {
      backend = MapBackend::Analytic;
    } else if (value == "points") {
      backend = MapBackend::Points;
    } else {
      throw std::runtime_error(key + ": expected analytic|points, got `" + value + "`");
    }
  } else if (key == "map.voxel") {
    voxel_size = parse_double(value, key);
  } else if (key == "scan.voxel") {
    scan_voxel = parse_double(value, key);
  } else if (key == "extrinsics.tx") {
    extrinsics.pos.x() = parse_double(value, key);
  } else if (key == "extrinsics.ty") {
    extrinsics.pos.y() = parse_double(value, key);
  } else if (key == "extrinsics.tz") {
    extrinsics.pos.z() = parse_double(value, key);
  } else if (key == "extrinsics.rx" || key == "extrinsics.ry" || key == "extrinsics.rz") {
    Vec3 rotvec = so3_log(extrinsics.rot);
    const int axis = key.back() - 'x';
    rotvec(axis) = parse_double(value, key);
    extrinsics.rot = so3_exp(rotvec);
  } else if (key == "init.time") {
    init_time = parse_double(value, key);
  } else if (key == "window") {
    window_enabled = parse_bool(value, key);
  } else if (key == "schmidt") {
    schmidt_enabled = parse_bool(value, key);
  } else if (key == "dade_prune") {
    prune_enabled = parse_bool(value, key);
  } else if (key == "dade_compensate") {
    compensate_enabled = parse_bool(value, key);
  } else if (key == "dade") {
    const bool on = parse_bool(value, key);
    prune_enabled = on;
    compensate_enabled = on;
  } else {
    throw std::runtime_error("unknown config key: " + key);
  }
}

void RunConfig::apply_all(const std::map<std::string, std::string>& entries) {
  std::string errors;
  for (const auto& [key, value] : entries) {
    try {
      apply(key, value);
    } catch (const std::exception& e) {
      if (!errors.empty()) {
        errors += "; ";
      }
      errors += e.what();
    }
  }
  if (!errors.empty()) {
    throw std::runtime_error("bad config entries: " + errors);
  }
}

RunInput load_run_input(const std::string& data_dir) {
  namespace fs = std::filesystem;
  RunInput input;
  input.world = read_world_file((fs::path(data_dir) / "world.txt").string());
  input.imu = read_imu_csv((fs::path(data_dir) / "imu.csv").string());
  const auto index = read_scan_index((fs::path(data_dir) / "scans.csv").string());
  input.scans.reserve(index.size());
  char name[64];
  for (const auto& [idx, t] : index) {
    std::snprintf(name, sizeof(name), "%06ld.csv", idx);
    SimScan scan;
    scan.index = idx;
    scan.t = t;
    scan.points = read_scan_csv((fs::path(data_dir) / "scans" / name).string());
    input.scans.push_back(std::move(scan));
  }
  return input;
}

RunInput to_run_input(const ScenarioDataset& dataset) {
  RunInput input;
  input.world = dataset.world;
  input.imu = dataset.imu;
  input.scans = dataset.scans;
  return input;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(const Clock::time_point& start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Deterministic voxel downsampling of a raw scan (first point per voxel).
std::vector<Vec3> downsample_scan(const std::vector<Vec3>& points, double voxel) {
  if (voxel <= 0.0) {
    return points;
  }
  std::vector<Vec3> kept;
  kept.reserve(points.size());
  std::unordered_map<std::uint64_t, bool> seen;
  for (const Vec3& p : points) {
    const auto ix = static_cast<std::int64_t>(std::floor(p.x() / voxel));
    const auto iy = static_cast<std::int64_t>(std::floor(p.y() / voxel));
    const auto iz = static_cast<std::int64_t>(std::floor(p.z() / voxel));
    const std::uint64_t key = ((static_cast<std::uint64_t>(ix + (1 << 20)) & 0x1FFFFF) << 42) |
                              ((static_cast<std::uint64_t>(iy + (1 << 20)) & 0x1FFFFF) << 21) |
                              (static_cast<std::uint64_t>(iz + (1 << 20)) & 0x1FFFFF);
    if (seen.emplace(key, true).second) {
      kept.push_back(p);
    }
  }
  return kept;
}

// Current-pose columns of the split Jacobian assembled straight from the
// measurements (identical to split_jacobian over a stacked system; checked
// by unit test).
SplitJacobian split_from_measurements(const std::vector<Measurement>& measurements,
                                      const FullState& state, const Extrinsics& ext) {
  const PoseChain chain = PoseChain::of(state);
  SplitJacobian split;
  split.rot.resize(measurements.size(), 3);
  split.pos.resize(measurements.size(), 3);
  for (std::size_t j = 0; j < measurements.size(); ++j) {
    const Measurement& m = measurements[j];
    const Vec3 owner_point = chain.rot[m.owner_offset] * imu_frame_point(m, ext);
    split.rot.row(j) =
        -m.normal.transpose() * chain.rot[0] * skew(chain.rot[0].transpose() * owner_point);
    split.pos.row(j) = m.normal.transpose();
  }
  return split;
}

}  // namespace

RunResult run_odometry(const RunInput& input, const RunConfig& config,
                       const Trajectory* ground_truth) {
  if (input.imu.empty() || input.scans.empty()) {
    throw std::runtime_error("run_odometry: empty dataset");
  }

  PlaneMap map = config.backend == MapBackend::Analytic
                     ? PlaneMap::analytic(input.world)
                     : PlaneMap::points(config.voxel_size);

  // Static initialization over the leading stationary stretch.
  std::vector<ImuSample> init_window;
  for (const ImuSample& s : input.imu) {
    if (s.t > config.init_time) {
      break;
    }
    init_window.push_back(s);
  }
  const StaticInitResult init = static_initialize(init_window);

  FullState state;
  state.imu.grav = init.gravity;
  state.imu.bg = init.gyro_bias;
  MatX cov = MatX::Zero(18, 18);
  cov.diagonal().segment<3>(BlockLayout::theta).setConstant(1e-6);
  cov.diagonal().segment<3>(BlockLayout::pos).setConstant(1e-8);
  cov.diagonal().segment<3>(BlockLayout::vel).setConstant(1e-4);
  cov.diagonal().segment<3>(BlockLayout::bg).setConstant(1e-5);
  cov.diagonal().segment<3>(BlockLayout::ba).setConstant(2.5e-3);
  cov.diagonal().segment<3>(BlockLayout::grav).setConstant(1e-4);

  // Sliding semantics per toggles: with Schmidt off the window is a plain
  // FIFO of active poses (nothing is ever fixed).
  WindowConfig slide_config = config.window;
  if (!config.schmidt_enabled) {
    slide_config.s_a = config.window.s_a + config.window.s_f;
    slide_config.s_f = 0;
  }

  // Stored per-scan measurement sets (pruned current-scan portions), keyed
  // by scan index and re-owned by window offset at use.
  std::unordered_map<long, std::vector<Measurement>> stored;
  std::unordered_map<long, double> scan_time;
  std::map<long, TimedPose> final_poses;

  RunResult result;
  RunReport& report = result.report;

  std::size_t imu_pos = 0;
  while (imu_pos < input.imu.size() && input.imu[imu_pos].t <= config.init_time) {
    ++imu_pos;
  }
  double t_prev = config.init_time;

  for (const SimScan& scan : input.scans) {
    if (scan.t <= config.init_time) {
      continue;
    }
    const auto scan_start = Clock::now();
    ScanRecord record;
    record.index = scan.index;
    record.t = scan.t;
    scan_time[scan.index] = scan.t;

    // --- IMU propagation up to the scan timestamp.
    const auto prop_start = Clock::now();
    while (imu_pos < input.imu.size() && input.imu[imu_pos].t <= scan.t + 1e-9) {
      const double dt = input.imu[imu_pos].t - t_prev;
      if (dt > 0.0) {
        propagate(state, cov, input.imu[imu_pos], dt, config.noise);
      }
      t_prev = input.imu[imu_pos].t;
      ++imu_pos;
    }
    record.propagate_ms = ms_since(prop_start);

    // --- Candidate measurements: current scan associated at the propagated
    // pose, active sets re-used with frozen planes.
    const auto select_start = Clock::now();
    const std::vector<Vec3> scan_points = downsample_scan(scan.points, config.scan_voxel);
    const Vec3 lidar_origin = state.imu.pos + state.imu.rot * config.extrinsics.pos;
    std::vector<Measurement> candidates;
    candidates.reserve(scan_points.size());
    for (const Vec3& p : scan_points) {
      Measurement m;
      m.point_lidar = p;
      m.owner_offset = 0;
      m.variance = config.point_variance;
      const Vec3 global = state.imu.rot * imu_frame_point(m, config.extrinsics) + state.imu.pos;
      const auto plane = map.nearest_plane(global, lidar_origin);
      if (!plane) {
        continue;
      }
      m.normal = plane->normal;
      m.anchor = plane->point;
      candidates.push_back(m);
    }

    const int n_active = static_cast<int>(state.active.size());
    for (int widx = 0; widx < n_active; ++widx) {
      const auto it = stored.find(state.active[widx].scan_index);
      if (it == stored.end()) {
        continue;
      }
      for (Measurement m : it->second) {
        m.owner_offset = widx + 1;
        candidates.push_back(m);
      }
    }

    record.rows_total = static_cast<int>(candidates.size());

    std::vector<Measurement> selected;
    DegeneracyReport deg_report;
    if (!candidates.empty()) {
      const SplitJacobian split = split_from_measurements(candidates, state, config.extrinsics);
      const DegeneracyReport pre = analyze_split(split);
      record.chi_pre = pre.chi;

      std::vector<Measurement> psi_u;
      if (config.prune_enabled) {
        std::vector<LocalizabilityScores> scores(candidates.size());
        for (std::size_t j = 0; j < candidates.size(); ++j) {
          scores[j] = localizability(candidates[j], state.imu.rot, config.extrinsics, pre.v_p,
                                     pre.v_r);
        }
        const std::vector<int> kept =
            prune(candidates, scores, config.window.loc_threshold);
        psi_u.reserve(kept.size());
        for (int idx : kept) {
          psi_u.push_back(candidates[idx]);
        }
      } else {
        psi_u = candidates;
      }
      record.rows_pruned = record.rows_total - static_cast<int>(psi_u.size());

      deg_report = analyze_split(split_from_measurements(psi_u, state, config.extrinsics));
      record.chi_post_prune = psi_u.empty() ? pre.chi : deg_report.chi;

      if (config.compensate_enabled && !state.fixed.empty() && !psi_u.empty()) {
        std::vector<Measurement> fixed_candidates;
        for (int fidx = 0; fidx < static_cast<int>(state.fixed.size()); ++fidx) {
          const auto it = stored.find(state.fixed[fidx].scan_index);
          if (it == stored.end()) {
            continue;
          }
          for (Measurement m : it->second) {
            m.owner_offset = n_active + 1 + fidx;
            fixed_candidates.push_back(m);
          }
        }
        const CompensationResult comp = compensate(
            psi_u, fixed_candidates, deg_report, state.imu.rot, config.extrinsics,
            config.window.chi_threshold, config.window.loc_threshold);
        selected = comp.selected;
        record.rows_compensated = comp.added;
        record.chi_post_compensate = comp.chi_final;
      } else {
        selected = psi_u;
        record.chi_post_compensate = record.chi_post_prune;
      }
    } else {
      record.chi_pre = std::numeric_limits<double>::infinity();
      record.chi_post_prune = record.chi_pre;
      record.chi_post_compensate = record.chi_pre;
    }
    record.select_ms = ms_since(select_start);

    // --- Iterated Schmidt update. Current-scan points are re-associated at
    // each iterate; membership of the selected set stays fixed.
    const auto update_start = Clock::now();
    if (!selected.empty()) {
      const BlockLayout layout = BlockLayout::of(state);
      SystemBuilder builder = [&](const FullState& x) {
        std::vector<Measurement> rows = selected;
        const Vec3 origin = x.imu.pos + x.imu.rot * config.extrinsics.pos;
        for (Measurement& m : rows) {
          if (m.owner_offset != 0) {
            continue;
          }
          const Vec3 global =
              x.imu.rot * imu_frame_point(m, config.extrinsics) + x.imu.pos;
          if (const auto plane = map.nearest_plane(global, origin)) {
            m.normal = plane->normal;
            m.anchor = plane->point;
          }
        }
        return stack_system(rows, x, config.extrinsics, layout);
      };
      UpdateReport ur;
      const UpdateStatus status = iterated_update(state, cov, builder, config.update, &ur);
      record.iterations = ur.iterations;
      record.aborted = status != UpdateStatus::Ok;
      if (record.aborted) {
        ++report.aborted_scans;
      }
    }
    record.update_ms = ms_since(update_start);

    // --- Store this scan's pruned current-scan set, re-associated at the
    // updated pose; these rows are frozen from now on.
    {
      std::vector<Measurement> own;
      const Vec3 origin = state.imu.pos + state.imu.rot * config.extrinsics.pos;
      for (const Measurement& sel : selected) {
        if (sel.owner_offset != 0) {
          continue;
        }
        Measurement m = sel;
        const Vec3 global =
            state.imu.rot * imu_frame_point(m, config.extrinsics) + state.imu.pos;
        if (const auto plane = map.nearest_plane(global, origin)) {
          m.normal = plane->normal;
          m.anchor = plane->point;
        }
        own.push_back(m);
      }
      stored[scan.index] = std::move(own);
    }

    // --- Sliding.
    if (config.window_enabled && slide_config.s_a > 0) {
      double chi_slide = std::numeric_limits<double>::infinity();
      if (static_cast<int>(state.active.size()) == slide_config.s_a &&
          slide_config.s_f > 0) {
        const auto it = stored.find(state.active.back().scan_index);
        if (it != stored.end()) {
          chi_slide = position_condition_number(it->second);
        }
      }
      record.slide = slide(state, cov, chi_slide, slide_config, scan.index);
    }

    // --- Map growth (point backend only).
    const auto map_start = Clock::now();
    if (config.backend == MapBackend::Points) {
      std::vector<Vec3> global_points;
      global_points.reserve(scan_points.size());
      for (const Vec3& p : scan_points) {
        global_points.push_back(state.imu.rot * (config.extrinsics.rot * p +
                                                 config.extrinsics.pos) +
                                state.imu.pos);
      }
      map.insert_scan(global_points);
    }
    record.map_ms = ms_since(map_start);

    // --- Trajectory bookkeeping: refresh every in-window pose so each one
    // keeps its final refined value once it leaves the window.
    final_poses[scan.index] = {scan.t, state.imu.rot, state.imu.pos};
    for (int i = 0; i < state.window_size(); ++i) {
      const WindowPose& pose = state.window_pose(i);
      const auto ts = scan_time.find(pose.scan_index);
      if (ts != scan_time.end()) {
        final_poses[pose.scan_index] = {ts->second, pose.rot, pose.pos};
      }
    }

    // Stored sets for poses that left the window are dead weight.
    if (config.window_enabled) {
      std::vector<long> alive;
      alive.push_back(scan.index);
      for (int i = 0; i < state.window_size(); ++i) {
        alive.push_back(state.window_pose(i).scan_index);
      }
      for (auto it = stored.begin(); it != stored.end();) {
        it = std::find(alive.begin(), alive.end(), it->first) == alive.end()
                 ? stored.erase(it)
                 : std::next(it);
      }
    } else {
      stored.clear();
    }

    record.wall_ms = ms_since(scan_start);
    report.scans.push_back(record);
  }

  result.estimate.reserve(final_poses.size());
  for (const auto& [idx, pose] : final_poses) {
    result.estimate.push_back(pose);
  }

  if (!report.scans.empty()) {
    for (const ScanRecord& r : report.scans) {
      report.mean_wall_ms += r.wall_ms;
      report.mean_propagate_ms += r.propagate_ms;
      report.mean_select_ms += r.select_ms;
      report.mean_update_ms += r.update_ms;
      report.mean_map_ms += r.map_ms;
    }
    const double n = static_cast<double>(report.scans.size());
    report.mean_wall_ms /= n;
    report.mean_propagate_ms /= n;
    report.mean_select_ms /= n;
    report.mean_update_ms /= n;
    report.mean_map_ms /= n;
  }

  if (ground_truth != nullptr && !result.estimate.empty()) {
    const auto pairs = associate(*ground_truth, result.estimate);
    const ApeResult ape = ape_rmse(pairs);
    report.ape = ape.rmse;
    report.ape_translation_only = ape.translation_only;
  }

  result.exit_code = report.aborted_scans > 0 ? 2 : 0;
  return result;
}

void write_report_json(const RunReport& report, const std::string& path) {
  auto finite_chi = [](double chi) { return std::isfinite(chi) ? chi : 1e18; };
  nlohmann::json j;
  j["thread_count"] = report.thread_count;
  j["aborted_scans"] = report.aborted_scans;
  j["summary"] = {
      {"mean_wall_ms", report.mean_wall_ms},
      {"mean_propagate_ms", report.mean_propagate_ms},
      {"mean_select_ms", report.mean_select_ms},
      {"mean_update_ms", report.mean_update_ms},
      {"mean_map_ms", report.mean_map_ms},
  };
  if (report.ape.has_value()) {
    j["summary"]["ape_rmse"] = *report.ape;
    j["summary"]["ape_translation_only"] = report.ape_translation_only;
  }
  j["scans"] = nlohmann::json::array();
  for (const ScanRecord& r : report.scans) {
    const char* slide_name =
        r.slide == SlideDecision::Full ? "full"
                                       : (r.slide == SlideDecision::Partial ? "partial" : "none");
    j["scans"].push_back({
        {"index", r.index},
        {"t", r.t},
        {"chi_pre", finite_chi(r.chi_pre)},
        {"chi_post_prune", finite_chi(r.chi_post_prune)},
        {"chi_post_compensate", finite_chi(r.chi_post_compensate)},
        {"rows_total", r.rows_total},
        {"rows_pruned", r.rows_pruned},
        {"rows_compensated", r.rows_compensated},
        {"iterations", r.iterations},
        {"aborted", r.aborted},
        {"sliding", slide_name},
        {"wall_ms", r.wall_ms},
        {"propagate_ms", r.propagate_ms},
        {"select_ms", r.select_ms},
        {"update_ms", r.update_ms},
        {"map_ms", r.map_ms},
    });
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write report: " + path);
  }
  out << j.dump(2) << "\n";
}

}  // namespace dalio
