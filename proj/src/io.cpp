#include "dalio/io.hpp"

#include <Eigen/Geometry>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dalio {

namespace {

std::string strip(const std::string& line) {
  std::string s = line;
  const auto hash = s.find('#');
  if (hash != std::string::npos) {
    s.resize(hash);
  }
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path);
  }
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write file: " + path);
  }
  return out;
}

std::vector<double> parse_csv_line(const std::string& line) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    values.push_back(std::stod(field));
  }
  return values;
}

}  // namespace

std::vector<TimedPose> read_tum(const std::string& path) {
  auto in = open_in(path);
  std::vector<TimedPose> poses;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = strip(line);
    if (s.empty()) {
      continue;
    }
    std::istringstream ss(s);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw std::runtime_error("malformed TUM line in " + path + ": " + s);
    }
    TimedPose pose;
    pose.t = t;
    pose.pos = Vec3(tx, ty, tz);
    pose.rot = Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
    poses.push_back(pose);
  }
  return poses;
}

void write_tum(const std::string& path, std::span<const TimedPose> poses) {
  auto out = open_out(path);
  out << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[256];
  for (const TimedPose& pose : poses) {
    const Eigen::Quaterniond q(pose.rot);
    std::snprintf(buf, sizeof(buf), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", pose.t,
                  pose.pos.x(), pose.pos.y(), pose.pos.z(), q.x(), q.y(), q.z(), q.w());
    out << buf;
  }
}

std::vector<ImuSample> read_imu_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<ImuSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = strip(line);
    if (s.empty()) {
      continue;
    }
    const auto v = parse_csv_line(s);
    if (v.size() != 7) {
      throw std::runtime_error("malformed imu.csv line in " + path + ": " + s);
    }
    samples.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
  }
  return samples;
}

void write_imu_csv(const std::string& path, std::span<const ImuSample> samples) {
  auto out = open_out(path);
  out << "# t,wx,wy,wz,ax,ay,az\n";
  char buf[256];
  for (const ImuSample& s : samples) {
    std::snprintf(buf, sizeof(buf), "%.9f,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n", s.t, s.gyro.x(),
                  s.gyro.y(), s.gyro.z(), s.accel.x(), s.accel.y(), s.accel.z());
    out << buf;
  }
}

std::vector<Vec3> read_scan_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<Vec3> points;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = strip(line);
    if (s.empty()) {
      continue;
    }
    const auto v = parse_csv_line(s);
    if (v.size() != 3) {
      throw std::runtime_error("malformed scan line in " + path + ": " + s);
    }
    points.emplace_back(v[0], v[1], v[2]);
  }
  return points;
}

void write_scan_csv(const std::string& path, std::span<const Vec3> points) {
  auto out = open_out(path);
  out << "# x,y,z\n";
  char buf[128];
  for (const Vec3& p : points) {
    std::snprintf(buf, sizeof(buf), "%.9e,%.9e,%.9e\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

std::vector<std::pair<long, double>> read_scan_index(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::pair<long, double>> index;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = strip(line);
    if (s.empty()) {
      continue;
    }
    const auto v = parse_csv_line(s);
    if (v.size() != 2) {
      throw std::runtime_error("malformed scans.csv line in " + path + ": " + s);
    }
    index.emplace_back(static_cast<long>(v[0]), v[1]);
  }
  return index;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  auto in = open_in(path);
  std::map<std::string, std::string> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = strip(line);
    if (s.empty()) {
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected `key = value`, got: " + s);
    }
    const std::string key = strip(s.substr(0, eq));
    const std::string value = strip(s.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
    }
    entries[key] = value;
  }
  return entries;
}

}  // namespace dalio
