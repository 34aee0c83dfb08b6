#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dalio/types.hpp"

// World model providing nearest-plane correspondences. Two backends: analytic
// finite patches (exact, used by the simulator and the acceptance runs) and a
// voxel-downsampled point map with local plane fits.

namespace dalio {

struct Plane {
  Vec3 point = Vec3::Zero();   // anchor on the plane, m
  Vec3 normal = Vec3::UnitZ(); // unit
};

/// Finite rectangular patch. extent_u/extent_v are half-extents along the
/// two tangent axes, which are derived deterministically from the normal.
struct Patch {
  Vec3 anchor = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double extent_u = 1.0;
  double extent_v = 1.0;
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();

  static Patch make(const Vec3& anchor, const Vec3& normal, double eu, double ev);
  /// Closest point on the patch to p.
  Vec3 closest(const Vec3& p) const;
};

class AnalyticMap {
 public:
  AnalyticMap() = default;
  explicit AnalyticMap(std::vector<Patch> patches) : patches_(std::move(patches)) {}

  const std::vector<Patch>& patches() const { return patches_; }
  bool empty() const { return patches_.empty(); }

  /// Nearest patch by point-to-patch distance; absent beyond reject_radius.
  /// The normal is oriented toward `origin` (the querying sensor).
  std::optional<Plane> nearest_plane(const Vec3& p, const Vec3& origin,
                                     double reject_radius = 1.0) const;

 private:
  std::vector<Patch> patches_;
};

/// Accumulated global points, voxel-downsampled keeping the first point per
/// voxel. Queries fit a plane to the 5 nearest neighbors from the 3x3x3
/// voxel neighborhood.
class VoxelPointMap {
 public:
  explicit VoxelPointMap(double voxel_size = 0.3);

  void insert_scan(std::span<const Vec3> points_global);
  std::size_t size() const { return points_.size(); }

  std::optional<Plane> nearest_plane(const Vec3& p, const Vec3& origin,
                                     double planarity_gate = 0.1) const;

 private:
  double voxel_;
  std::vector<Vec3> points_;
  std::unordered_map<std::uint64_t, std::vector<int>> grid_;

  std::uint64_t key_of(const Vec3& p) const;
};

enum class MapBackend { Analytic, Points };

/// Dispatching wrapper so the pipeline holds one map handle.
class PlaneMap {
 public:
  static PlaneMap analytic(std::vector<Patch> patches);
  static PlaneMap points(double voxel_size);

  MapBackend backend() const { return backend_; }
  std::optional<Plane> nearest_plane(const Vec3& p, const Vec3& origin) const;
  void insert_scan(std::span<const Vec3> points_global);
  const AnalyticMap& analytic_map() const { return analytic_; }
  VoxelPointMap& point_map() { return points_; }

 private:
  MapBackend backend_ = MapBackend::Analytic;
  AnalyticMap analytic_;
  VoxelPointMap points_{0.3};
};

/// Plain-text patch list: `qx qy qz nx ny nz extent_u extent_v` per line,
/// `#` comments. Extents are half-extents in meters.
std::vector<Patch> read_world_file(const std::string& path);
void write_world_file(const std::string& path, std::span<const Patch> patches);

}  // namespace dalio
