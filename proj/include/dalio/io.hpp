#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dalio/propagation.hpp"
#include "dalio/types.hpp"

// Plain-text dataset and configuration formats. Everything is line-oriented
// with `#` comments, chosen for diff-ability at desk scale.

namespace dalio {

/// TUM trajectory format: `timestamp tx ty tz qx qy qz qw` per line.
std::vector<TimedPose> read_tum(const std::string& path);
void write_tum(const std::string& path, std::span<const TimedPose> poses);

/// IMU stream: `t,wx,wy,wz,ax,ay,az` per line.
std::vector<ImuSample> read_imu_csv(const std::string& path);
void write_imu_csv(const std::string& path, std::span<const ImuSample> samples);

/// Scan points: `x,y,z` per line, LiDAR frame.
std::vector<Vec3> read_scan_csv(const std::string& path);
void write_scan_csv(const std::string& path, std::span<const Vec3> points);

/// Scan index: `index,t` per line.
std::vector<std::pair<long, double>> read_scan_index(const std::string& path);

/// `key = value` configuration lines. Parse errors and unknown keys are
/// reported by name.
std::map<std::string, std::string> read_config_file(const std::string& path);

}  // namespace dalio
