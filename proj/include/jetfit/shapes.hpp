#pragma once

#include <string>

#include "jetfit/pointcloud.hpp"

namespace jetfit {

enum class ShapeKind { kPlane, kSphere, kCylinder, kParaboloid, kSaddle, kTorus };

ShapeKind parse_shape_kind(const std::string& name);
std::string to_string(ShapeKind kind);

/// Analytic sampler specification. Ground-truth curvature signs follow the
/// shape operator of the height function in a frame whose +z axis is the
/// ground-truth normal (outward for closed shapes, upward for graphs).
struct ShapeSpec {
  ShapeKind kind = ShapeKind::kPlane;
  double radius = 1.0;         // sphere / cylinder / torus ring radius
  double minor_radius = 0.25;  // torus tube radius
  double coeff = 1.0;          // paraboloid / saddle quadratic coefficient
  double extent = 2.0;         // plane side, cylinder height, graph domain size
  int sample_count = 10000;
  uint64_t seed = 0;
};

/// Samples the surface with exact normals and principal curvatures.
PointCloud generate_shape(const ShapeSpec& spec);

/// Concatenates clouds (positions and any ground truth present in all parts).
PointCloud merge_clouds(const std::vector<PointCloud>& parts);

/// Applies a rigid motion to positions and normals (curvatures are invariant).
PointCloud transform_cloud(const PointCloud& cloud, const Eigen::Matrix3d& rotation,
                           const Eigen::Vector3d& translation);

}  // namespace jetfit
