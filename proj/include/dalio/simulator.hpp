#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dalio/plane_map.hpp"
#include "dalio/propagation.hpp"
#include "dalio/types.hpp"

// Deterministic synthetic scenarios: closed-form smooth trajectories with
// analytically consistent IMU signals, raycast scans against a finite-patch
// world, and ground truth. Each named scenario isolates one degeneracy mode.

namespace dalio {

struct Scenario {
  std::string name = "room";  // corridor | open_plane | room | cavern
  double duration = 60.0;      // s
  double imu_rate = 200.0;     // Hz
  double scan_rate = 10.0;     // Hz
  int rays_per_scan = 2048;
  int elevation_lines = 16;
  double elevation_span_deg = 50.0;  // rays span +- this elevation
  double min_range = 0.3;            // m
  double max_range = 45.0;           // m
  double range_sigma = 0.03;         // m
  NoiseParams imu_noise;             // variance rates for the emitted stream
  Vec3 gyro_bias = Vec3::Zero();     // constant biases baked into the stream
  Vec3 accel_bias = Vec3::Zero();
  std::uint64_t seed = 0;

  /// Scenario with per-name geometry, trajectory, and default noise levels.
  static Scenario preset(const std::string& name, std::uint64_t seed);
  /// Sets all sensor noise and biases to zero.
  void disable_noise();
};

struct TrajectorySample {
  Mat3 rot;        // global <- body
  Vec3 pos;        // m
  Vec3 vel;        // world, m/s
  Vec3 gyro;       // body rate, rad/s, noise-free
  Vec3 accel;      // body specific force, m/s^2, noise-free
};

/// Closed-form trajectory state at time t in [0, duration]; pose and IMU
/// quantities come from the same analytic expressions. Throws on t outside
/// the scenario duration.
TrajectorySample sample_trajectory(const Scenario& scenario, double t);

/// World geometry of the scenario (cavern layout depends on the seed).
std::vector<Patch> build_world(const Scenario& scenario);

struct RayPattern {
  std::vector<double> azimuths;    // rad
  std::vector<double> elevations;  // rad

  /// Azimuth ring x elevation lines; ray count = lines * (rays / lines).
  static RayPattern grid(int rays, int elevation_lines, double span_deg);
};

/// Sensor-frame hit points: first patch intersection per ray within range
/// limits, Gaussian range noise, misses dropped. Deterministic in the seed.
std::vector<Vec3> raycast_scan(std::span<const Patch> world, const Mat3& rot, const Vec3& pos,
                               const RayPattern& pattern, double range_sigma, double min_range,
                               double max_range, std::uint64_t seed);

struct SimScan {
  long index = 0;
  double t = 0.0;
  std::vector<Vec3> points;  // LiDAR frame (identity extrinsics in datasets)
};

struct ScenarioDataset {
  Scenario scenario;
  std::vector<Patch> world;
  std::vector<ImuSample> imu;
  std::vector<SimScan> scans;
  std::vector<TimedPose> ground_truth;  // 100 Hz
};

/// Full dataset, bit-reproducible for a fixed seed.
ScenarioDataset generate(const Scenario& scenario);

/// Writes world.txt, imu.csv, scans.csv, scans/NNNNNN.csv and gt.tum.
void write_dataset(const ScenarioDataset& dataset, const std::string& dir);

}  // namespace dalio
