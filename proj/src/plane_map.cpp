#include "dalio/plane_map.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dalio {

Patch Patch::make(const Vec3& anchor, const Vec3& normal, double eu, double ev) {
  if (eu <= 0.0 || ev <= 0.0) {
    throw std::invalid_argument("Patch::make: extents must be positive");
  }
  Patch patch;
  patch.anchor = anchor;
  patch.normal = normal.normalized();
  patch.extent_u = eu;
  patch.extent_v = ev;
  // Deterministic tangent frame: cross against the axis least aligned with n.
  const Vec3 ref =
      std::abs(patch.normal.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  patch.axis_u = ref.cross(patch.normal).normalized();
  patch.axis_v = patch.normal.cross(patch.axis_u);
  return patch;
}

Vec3 Patch::closest(const Vec3& p) const {
  const Vec3 d = p - anchor;
  const double a = std::clamp(d.dot(axis_u), -extent_u, extent_u);
  const double b = std::clamp(d.dot(axis_v), -extent_v, extent_v);
  return anchor + a * axis_u + b * axis_v;
}

std::optional<Plane> AnalyticMap::nearest_plane(const Vec3& p, const Vec3& origin,
                                                double reject_radius) const {
  if (patches_.empty()) {
    return std::nullopt;
  }
  double best_dist = std::numeric_limits<double>::infinity();
  Vec3 best_point = Vec3::Zero();
  const Patch* best = nullptr;
  for (const Patch& patch : patches_) {
    const Vec3 q = patch.closest(p);
    const double dist = (p - q).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best_point = q;
      best = &patch;
    }
  }
  if (best == nullptr || best_dist > reject_radius) {
    return std::nullopt;
  }
  Plane plane;
  plane.point = best_point;
  plane.normal = best->normal;
  if (plane.normal.dot(origin - plane.point) < 0.0) {
    plane.normal = -plane.normal;
  }
  return plane;
}

VoxelPointMap::VoxelPointMap(double voxel_size) : voxel_(voxel_size) {
  if (voxel_size <= 0.0) {
    throw std::invalid_argument("VoxelPointMap: voxel size must be positive");
  }
}

std::uint64_t VoxelPointMap::key_of(const Vec3& p) const {
  const auto ix = static_cast<std::int64_t>(std::floor(p.x() / voxel_));
  const auto iy = static_cast<std::int64_t>(std::floor(p.y() / voxel_));
  const auto iz = static_cast<std::int64_t>(std::floor(p.z() / voxel_));
  // 21 bits per axis, offset to keep negative indices distinct.
  const std::uint64_t ux = static_cast<std::uint64_t>(ix + (1 << 20)) & 0x1FFFFF;
  const std::uint64_t uy = static_cast<std::uint64_t>(iy + (1 << 20)) & 0x1FFFFF;
  const std::uint64_t uz = static_cast<std::uint64_t>(iz + (1 << 20)) & 0x1FFFFF;
  return (ux << 42) | (uy << 21) | uz;
}

void VoxelPointMap::insert_scan(std::span<const Vec3> points_global) {
  for (const Vec3& p : points_global) {
    const std::uint64_t key = key_of(p);
    auto it = grid_.find(key);
    if (it != grid_.end()) {
      continue;  // first point per voxel wins
    }
    const int idx = static_cast<int>(points_.size());
    points_.push_back(p);
    grid_[key].push_back(idx);
  }
}

std::optional<Plane> VoxelPointMap::nearest_plane(const Vec3& p, const Vec3& origin,
                                                  double planarity_gate) const {
  // Gather candidates from the 3x3x3 voxel neighborhood.
  std::vector<std::pair<double, int>> candidates;
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dz = -1; dz <= 1; ++dz) {
        const Vec3 q = p + voxel_ * Vec3(dx, dy, dz);
        auto it = grid_.find(key_of(q));
        if (it == grid_.end()) {
          continue;
        }
        for (int idx : it->second) {
          candidates.emplace_back((points_[idx] - p).squaredNorm(), idx);
        }
      }
    }
  }
  if (candidates.size() < 5) {
    return std::nullopt;
  }
  std::partial_sort(candidates.begin(), candidates.begin() + 5, candidates.end());

  Vec3 centroid = Vec3::Zero();
  for (int i = 0; i < 5; ++i) {
    centroid += points_[candidates[i].second];
  }
  centroid /= 5.0;
  Mat3 scatter = Mat3::Zero();
  for (int i = 0; i < 5; ++i) {
    const Vec3 d = points_[candidates[i].second] - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  Vec3 normal = eig.eigenvectors().col(0);  // smallest eigenvalue

  for (int i = 0; i < 5; ++i) {
    const double dist = std::abs(normal.dot(points_[candidates[i].second] - centroid));
    if (dist > planarity_gate) {
      return std::nullopt;
    }
  }

  Plane plane;
  plane.point = centroid;
  plane.normal = normal.normalized();
  if (plane.normal.dot(origin - plane.point) < 0.0) {
    plane.normal = -plane.normal;
  }
  return plane;
}

PlaneMap PlaneMap::analytic(std::vector<Patch> patches) {
  PlaneMap map;
  map.backend_ = MapBackend::Analytic;
  map.analytic_ = AnalyticMap(std::move(patches));
  return map;
}

PlaneMap PlaneMap::points(double voxel_size) {
  PlaneMap map;
  map.backend_ = MapBackend::Points;
  map.points_ = VoxelPointMap(voxel_size);
  return map;
}

std::optional<Plane> PlaneMap::nearest_plane(const Vec3& p, const Vec3& origin) const {
  if (backend_ == MapBackend::Analytic) {
    return analytic_.nearest_plane(p, origin);
  }
  return points_.nearest_plane(p, origin);
}

void PlaneMap::insert_scan(std::span<const Vec3> points_global) {
  if (backend_ == MapBackend::Points) {
    points_.insert_scan(points_global);
  }
}

std::vector<Patch> read_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open world file: " + path);
  }
  std::vector<Patch> patches;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.resize(hash);
    }
    std::istringstream ss(line);
    double qx, qy, qz, nx, ny, nz, eu, ev;
    if (ss >> qx >> qy >> qz >> nx >> ny >> nz >> eu >> ev) {
      patches.push_back(Patch::make(Vec3(qx, qy, qz), Vec3(nx, ny, nz), eu, ev));
    }
  }
  return patches;
}

void write_world_file(const std::string& path, std::span<const Patch> patches) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write world file: " + path);
  }
  out << "# qx qy qz nx ny nz extent_u extent_v (half-extents, meters)\n";
  char buf[256];
  for (const Patch& p : patches) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n",
                  p.anchor.x(), p.anchor.y(), p.anchor.z(), p.normal.x(), p.normal.y(),
                  p.normal.z(), p.extent_u, p.extent_v);
    out << buf;
  }
}

}  // namespace dalio
