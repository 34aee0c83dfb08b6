#include "dalio/simulator.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "dalio/io.hpp"
#include "dalio/manifold.hpp"

namespace dalio {

namespace {

// Value with first and second time derivatives; products and sums carry the
// derivatives through, which keeps IMU outputs exactly consistent with the
// pose trajectory.
struct D2 {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

D2 operator+(const D2& a, const D2& b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
D2 operator*(double s, const D2& a) { return {s * a.v, s * a.d1, s * a.d2}; }
D2 operator*(const D2& a, const D2& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
D2 constant(double c) { return {c, 0.0, 0.0}; }

D2 sine(double amp, double omega, double phase, double t) {
  const double arg = omega * t + phase;
  return {amp * std::sin(arg), amp * omega * std::cos(arg),
          -amp * omega * omega * std::sin(arg)};
}

// Quintic smoothstep from 0 at t0 to 1 at t1 (C^2 at both ends).
D2 envelope(double t, double t0, double t1) {
  if (t <= t0) {
    return {0.0, 0.0, 0.0};
  }
  if (t >= t1) {
    return {1.0, 0.0, 0.0};
  }
  const double w = t1 - t0;
  const double u = (t - t0) / w;
  const double v = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
  const double d1 = 30.0 * u * u * (1.0 - u) * (1.0 - u) / w;
  const double d2 = 60.0 * u * (1.0 - 3.0 * u + 2.0 * u * u) / (w * w);
  return {v, d1, d2};
}

// Running integral of the envelope: arc length of a unit-speed ramp.
D2 envelope_integral(double t, double t0, double t1) {
  if (t <= t0) {
    return {0.0, 0.0, 0.0};
  }
  const double w = t1 - t0;
  if (t >= t1) {
    return {0.5 * w + (t - t1), 1.0, 0.0};
  }
  const double u = (t - t0) / w;
  const double u4 = u * u * u * u;
  const double integral = w * u4 * (2.5 - 3.0 * u + u * u);
  const D2 e = envelope(t, t0, t1);
  return {integral, e.v, e.d1};
}

struct TrajectorySpec {
  Vec3 start = Vec3::Zero();
  Vec3 forward = Vec3::UnitX();   // horizontal unit vector
  double cruise_speed = 0.8;      // m/s
  double t_still = 1.5;           // s fully stationary (static init window)
  double t_ramp = 2.0;            // s to reach cruise speed
  double amp_lat = 0.0, om_lat = 0.0;
  double amp_vert = 0.0, om_vert = 0.0;
  double amp_yaw = 0.0, om_yaw = 0.0;
  double amp_pitch = 0.0, om_pitch = 0.0;
};

TrajectorySpec trajectory_spec(const Scenario& sc) {
  TrajectorySpec spec;
  if (sc.name == "corridor") {
    spec.start = Vec3(-2.0, 0.0, 1.5);
    spec.cruise_speed = 0.8;
    spec.amp_lat = 0.25; spec.om_lat = 0.40;
    spec.amp_vert = 0.10; spec.om_vert = 0.31;
    spec.amp_yaw = 0.15; spec.om_yaw = 0.50;
    spec.amp_pitch = 0.05; spec.om_pitch = 0.43;
  } else if (sc.name == "room") {
    spec.start = Vec3(-1.2, 0.0, 1.8);
    spec.cruise_speed = 0.35;
    spec.amp_lat = 0.8; spec.om_lat = 0.30;
    spec.amp_vert = 0.15; spec.om_vert = 0.27;
    spec.amp_yaw = 0.35; spec.om_yaw = 0.33;
    spec.amp_pitch = 0.08; spec.om_pitch = 0.29;
  } else if (sc.name == "open_plane") {
    spec.start = Vec3(0.0, 0.0, 15.0);
    spec.cruise_speed = 2.0;
    spec.amp_lat = 1.5; spec.om_lat = 0.25;
    spec.amp_vert = 0.5; spec.om_vert = 0.21;
    spec.amp_yaw = 0.2; spec.om_yaw = 0.30;
    spec.amp_pitch = 0.05; spec.om_pitch = 0.26;
  } else if (sc.name == "cavern") {
    spec.start = Vec3(0.0, 0.0, 1.5);
    spec.cruise_speed = 0.5;
    spec.amp_lat = 1.0; spec.om_lat = 0.22;
    spec.amp_vert = 0.3; spec.om_vert = 0.19;
    spec.amp_yaw = 0.4; spec.om_yaw = 0.28;
    spec.amp_pitch = 0.10; spec.om_pitch = 0.24;
  } else {
    throw std::invalid_argument("unknown scenario: " + sc.name);
  }
  return spec;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  x ^= x >> 30; x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27; x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

}  // namespace

Scenario Scenario::preset(const std::string& name, std::uint64_t seed) {
  Scenario sc;
  sc.name = name;
  sc.seed = seed;
  sc.gyro_bias = Vec3(0.002, -0.0015, 0.001);
  sc.accel_bias = Vec3(0.02, -0.015, 0.01);
  if (name == "corridor") {
    sc.elevation_span_deg = 55.0;
  } else if (name == "room") {
    sc.elevation_span_deg = 45.0;
    sc.max_range = 30.0;
  } else if (name == "open_plane") {
    sc.elevation_span_deg = 50.0;
    sc.max_range = 60.0;
  } else if (name == "cavern") {
    sc.elevation_span_deg = 50.0;
    sc.max_range = 40.0;
  } else {
    throw std::invalid_argument("unknown scenario: " + name);
  }
  trajectory_spec(sc);  // validates the name
  return sc;
}

void Scenario::disable_noise() {
  range_sigma = 0.0;
  imu_noise = NoiseParams{0.0, 0.0, 0.0, 0.0};
  gyro_bias.setZero();
  accel_bias.setZero();
}

TrajectorySample sample_trajectory(const Scenario& scenario, double t) {
  if (t < 0.0 || t > scenario.duration) {
    throw std::out_of_range("sample_trajectory: t outside scenario duration");
  }
  const TrajectorySpec spec = trajectory_spec(scenario);
  const double t0 = spec.t_still;
  const double t1 = spec.t_still + spec.t_ramp;
  const D2 env = envelope(t, t0, t1);
  const D2 arc = spec.cruise_speed * envelope_integral(t, t0, t1);
  const D2 lat = env * sine(spec.amp_lat, spec.om_lat, 0.3, t);
  const D2 vert = env * sine(spec.amp_vert, spec.om_vert, 1.1, t);
  const D2 yaw = env * sine(spec.amp_yaw, spec.om_yaw, 0.7, t);
  const D2 pitch = env * sine(spec.amp_pitch, spec.om_pitch, 1.9, t);

  const Vec3 lateral = Vec3::UnitZ().cross(spec.forward).normalized();
  const double yaw0 = std::atan2(spec.forward.y(), spec.forward.x());

  TrajectorySample out;
  out.pos = spec.start + arc.v * spec.forward + lat.v * lateral + Vec3(0, 0, vert.v);
  out.vel = arc.d1 * spec.forward + lat.d1 * lateral + Vec3(0, 0, vert.d1);
  const Vec3 acc_world = arc.d2 * spec.forward + lat.d2 * lateral + Vec3(0, 0, vert.d2);

  const double psi = yaw0 + yaw.v;
  const Mat3 rz = Eigen::AngleAxisd(psi, Vec3::UnitZ()).toRotationMatrix();
  const Mat3 ry = Eigen::AngleAxisd(pitch.v, Vec3::UnitY()).toRotationMatrix();
  out.rot = rz * ry;

  // R = Rz(psi) Ry(theta): omega_world = psi' z + theta' Rz y
  const Vec3 omega_world = yaw.d1 * Vec3::UnitZ() + pitch.d1 * (rz * Vec3::UnitY());
  out.gyro = out.rot.transpose() * omega_world;

  const Vec3 gravity(0.0, 0.0, -9.81);
  out.accel = out.rot.transpose() * (acc_world - gravity);
  return out;
}

std::vector<Patch> build_world(const Scenario& sc) {
  std::vector<Patch> world;
  if (sc.name == "corridor") {
    // Entrance chamber x in [-4,0], corridor x in [0,62]; travel along +x.
    // Chamber back wall: the receding source of along-axis constraints.
    world.push_back(Patch::make({-4.0, 0.0, 1.5}, {1, 0, 0}, 3.0, 1.5));
    world.push_back(Patch::make({-2.0, -3.0, 1.5}, {0, 1, 0}, 2.0, 1.5));
    world.push_back(Patch::make({-2.0, 3.0, 1.5}, {0, -1, 0}, 2.0, 1.5));
    world.push_back(Patch::make({-2.0, 0.0, 0.0}, {0, 0, 1}, 2.0, 3.0));
    world.push_back(Patch::make({-2.0, 0.0, 3.0}, {0, 0, -1}, 2.0, 3.0));
    // Front wall panels beside the corridor opening.
    world.push_back(Patch::make({0.0, -2.25, 1.5}, {-1, 0, 0}, 0.75, 1.5));
    world.push_back(Patch::make({0.0, 2.25, 1.5}, {-1, 0, 0}, 0.75, 1.5));
    // Corridor proper: side walls, floor, ceiling; far end open.
    world.push_back(Patch::make({31.0, -1.5, 1.5}, {0, 1, 0}, 31.0, 1.5));
    world.push_back(Patch::make({31.0, 1.5, 1.5}, {0, -1, 0}, 31.0, 1.5));
    world.push_back(Patch::make({31.0, 0.0, 0.0}, {0, 0, 1}, 31.0, 1.5));
    world.push_back(Patch::make({31.0, 0.0, 3.0}, {0, 0, -1}, 31.0, 1.5));
  } else if (sc.name == "room") {
    // 9 x 7 x 4 box around the origin.
    world.push_back(Patch::make({-4.5, 0.0, 2.0}, {1, 0, 0}, 3.5, 2.0));
    world.push_back(Patch::make({4.5, 0.0, 2.0}, {-1, 0, 0}, 3.5, 2.0));
    world.push_back(Patch::make({0.0, -3.5, 2.0}, {0, 1, 0}, 4.5, 2.0));
    world.push_back(Patch::make({0.0, 3.5, 2.0}, {0, -1, 0}, 4.5, 2.0));
    world.push_back(Patch::make({0.0, 0.0, 0.0}, {0, 0, 1}, 4.5, 3.5));
    world.push_back(Patch::make({0.0, 0.0, 4.0}, {0, 0, -1}, 4.5, 3.5));
  } else if (sc.name == "open_plane") {
    world.push_back(Patch::make({60.0, 0.0, 0.0}, {0, 0, 1}, 150.0, 150.0));
  } else if (sc.name == "cavern") {
    // Sparse random patches in a shell around the wander region.
    std::mt19937_64 rng(mix_seed(sc.seed, 17));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> radius(8.0, 22.0);
    std::uniform_real_distribution<double> extent(0.8, 2.0);
    for (int i = 0; i < 40; ++i) {
      Vec3 dir(unit(rng), unit(rng), 0.35 * unit(rng));
      if (dir.norm() < 1e-3) {
        dir = Vec3::UnitX();
      }
      dir.normalize();
      const Vec3 center = radius(rng) * dir + Vec3(0, 0, 1.5);
      Vec3 normal(unit(rng), unit(rng), unit(rng));
      if (normal.norm() < 1e-3) {
        normal = Vec3::UnitZ();
      }
      // Tilt patches loosely toward the origin so some rays hit face-on.
      normal = (0.6 * (-dir) + 0.4 * normal.normalized()).normalized();
      world.push_back(Patch::make(center, normal, extent(rng), extent(rng)));
    }
  } else {
    throw std::invalid_argument("unknown scenario: " + sc.name);
  }
  return world;
}

RayPattern RayPattern::grid(int rays, int elevation_lines, double span_deg) {
  RayPattern pattern;
  if (rays <= 0 || elevation_lines <= 0) {
    return pattern;
  }
  const int n_az = std::max(1, rays / elevation_lines);
  const double span = span_deg * M_PI / 180.0;
  pattern.elevations.resize(elevation_lines);
  for (int i = 0; i < elevation_lines; ++i) {
    // Centered rows, no ray exactly on the horizon or the poles.
    pattern.elevations[i] =
        -span + (2.0 * span) * (static_cast<double>(i) + 0.5) / elevation_lines;
  }
  pattern.azimuths.resize(n_az);
  for (int i = 0; i < n_az; ++i) {
    pattern.azimuths[i] = 2.0 * M_PI * static_cast<double>(i) / n_az;
  }
  return pattern;
}

std::vector<Vec3> raycast_scan(std::span<const Patch> world, const Mat3& rot, const Vec3& pos,
                               const RayPattern& pattern, double range_sigma, double min_range,
                               double max_range, std::uint64_t seed) {
  std::vector<Vec3> points;
  points.reserve(pattern.azimuths.size() * pattern.elevations.size());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (double el : pattern.elevations) {
    const double ce = std::cos(el);
    const double se = std::sin(el);
    for (double az : pattern.azimuths) {
      const Vec3 dir_body(ce * std::cos(az), ce * std::sin(az), se);
      const Vec3 dir = rot * dir_body;
      double best = std::numeric_limits<double>::infinity();
      for (const Patch& patch : world) {
        const double denom = dir.dot(patch.normal);
        if (std::abs(denom) < 1e-12) {
          continue;
        }
        const double range = (patch.anchor - pos).dot(patch.normal) / denom;
        if (range < min_range || range > max_range || range >= best) {
          continue;
        }
        const Vec3 hit = pos + range * dir;
        const Vec3 d = hit - patch.anchor;
        if (std::abs(d.dot(patch.axis_u)) <= patch.extent_u &&
            std::abs(d.dot(patch.axis_v)) <= patch.extent_v) {
          best = range;
        }
      }
      if (!std::isfinite(best)) {
        continue;
      }
      const double noisy = best + (range_sigma > 0.0 ? range_sigma * gauss(rng) : 0.0);
      points.push_back(noisy * dir_body);
    }
  }
  return points;
}

ScenarioDataset generate(const Scenario& scenario) {
  ScenarioDataset dataset;
  dataset.scenario = scenario;
  dataset.world = build_world(scenario);

  // The estimator's global frame is the first IMU frame, so the emitted
  // world and ground truth are expressed there as well.
  const TrajectorySample start = sample_trajectory(scenario, 0.0);
  const Mat3 r0t = start.rot.transpose();
  for (Patch& patch : dataset.world) {
    patch = Patch::make(r0t * (patch.anchor - start.pos), r0t * patch.normal, patch.extent_u,
                        patch.extent_v);
  }

  // IMU stream with constant biases and sampled white noise. Discrete
  // sampling of a density q at rate f has per-sample variance q * f.
  const double dt = 1.0 / scenario.imu_rate;
  const double sg = std::sqrt(scenario.imu_noise.gyro * scenario.imu_rate);
  const double sa = std::sqrt(scenario.imu_noise.accel * scenario.imu_rate);
  std::mt19937_64 imu_rng(mix_seed(scenario.seed, 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const long n_imu = static_cast<long>(std::floor(scenario.duration / dt)) + 1;
  dataset.imu.reserve(n_imu);
  for (long i = 0; i < n_imu; ++i) {
    const double t = static_cast<double>(i) * dt;
    const TrajectorySample s = sample_trajectory(scenario, t);
    ImuSample sample;
    sample.t = t;
    sample.gyro = s.gyro + scenario.gyro_bias;
    sample.accel = s.accel + scenario.accel_bias;
    if (sg > 0.0) {
      sample.gyro += sg * Vec3(gauss(imu_rng), gauss(imu_rng), gauss(imu_rng));
    }
    if (sa > 0.0) {
      sample.accel += sa * Vec3(gauss(imu_rng), gauss(imu_rng), gauss(imu_rng));
    }
    dataset.imu.push_back(sample);
  }

  const RayPattern pattern =
      RayPattern::grid(scenario.rays_per_scan, scenario.elevation_lines,
                       scenario.elevation_span_deg);
  const double scan_dt = 1.0 / scenario.scan_rate;
  const long n_scans = static_cast<long>(std::floor(scenario.duration / scan_dt)) + 1;
  dataset.scans.reserve(n_scans);
  for (long k = 0; k < n_scans; ++k) {
    const double t = static_cast<double>(k) * scan_dt;
    const TrajectorySample s = sample_trajectory(scenario, t);
    SimScan scan;
    scan.index = k;
    scan.t = t;
    scan.points = raycast_scan(dataset.world, r0t * s.rot, r0t * (s.pos - start.pos), pattern,
                               scenario.range_sigma, scenario.min_range, scenario.max_range,
                               mix_seed(scenario.seed, 1000 + k));
    dataset.scans.push_back(std::move(scan));
  }

  const long n_gt = static_cast<long>(std::floor(scenario.duration * 100.0)) + 1;
  dataset.ground_truth.reserve(n_gt);
  for (long i = 0; i < n_gt; ++i) {
    const double t = static_cast<double>(i) / 100.0;
    const TrajectorySample s = sample_trajectory(scenario, t);
    dataset.ground_truth.push_back({t, r0t * s.rot, r0t * (s.pos - start.pos)});
  }
  return dataset;
}

void write_dataset(const ScenarioDataset& dataset, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "scans");
  write_world_file((fs::path(dir) / "world.txt").string(), dataset.world);
  write_imu_csv((fs::path(dir) / "imu.csv").string(), dataset.imu);

  std::ofstream index_out(fs::path(dir) / "scans.csv");
  if (!index_out) {
    throw std::runtime_error("cannot write scans.csv in " + dir);
  }
  index_out << "# index,t\n";
  char buf[128];
  for (const SimScan& scan : dataset.scans) {
    std::snprintf(buf, sizeof(buf), "%ld,%.9f\n", scan.index, scan.t);
    index_out << buf;
    std::snprintf(buf, sizeof(buf), "%06ld.csv", scan.index);
    write_scan_csv((fs::path(dir) / "scans" / buf).string(), scan.points);
  }
  write_tum((fs::path(dir) / "gt.tum").string(), dataset.ground_truth);
}

}  // namespace dalio
