#include "jetfit/shapes.hpp"

#include <cmath>
#include <random>

#include "jetfit/jet.hpp"

namespace jetfit {

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "plane") return ShapeKind::kPlane;
  if (name == "sphere") return ShapeKind::kSphere;
  if (name == "cylinder") return ShapeKind::kCylinder;
  if (name == "paraboloid") return ShapeKind::kParaboloid;
  if (name == "saddle") return ShapeKind::kSaddle;
  if (name == "torus") return ShapeKind::kTorus;
  throw InvalidInput("unknown shape kind: " + name);
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kPlane: return "plane";
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kCylinder: return "cylinder";
    case ShapeKind::kParaboloid: return "paraboloid";
    case ShapeKind::kSaddle: return "saddle";
    case ShapeKind::kTorus: return "torus";
  }
  throw InvalidInput("unknown shape kind");
}

namespace {

// Principal curvatures of a height-function point with gradient (fx, fy) and
// Hessian [[fxx, fxy], [fxy, fyy]]. Stored files use the dataset convention:
// first the maximum curvature by value, then the minimum.
std::pair<double, double> graph_curvatures(double fx, double fy, double fxx, double fxy,
                                           double fyy) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(6);
  beta[1] = fx;
  beta[2] = fy;
  beta[3] = 0.5 * fxx;
  beta[4] = fxy;
  beta[5] = 0.5 * fyy;
  const auto curv = principal_curvatures(JetCoefficients{beta, JetOrder(2)});
  return {std::max(curv.k1, curv.k2), std::min(curv.k1, curv.k2)};
}

}  // namespace

PointCloud generate_shape(const ShapeSpec& spec) {
  if (spec.sample_count < 1) throw InvalidInput("generate_shape: sample_count must be positive");
  if (spec.radius <= 0.0 || spec.minor_radius <= 0.0 || spec.extent <= 0.0)
    throw InvalidInput("generate_shape: radii and extent must be positive");
  if (spec.kind == ShapeKind::kTorus && spec.minor_radius >= spec.radius)
    throw InvalidInput("generate_shape: torus tube radius must be below the ring radius");

  std::mt19937_64 gen(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = spec.sample_count;

  PointCloud cloud;
  cloud.positions.resize(n, 3);
  cloud.gt_normals.emplace(n, 3);
  cloud.gt_curvatures.emplace(n, 2);

  auto set_row = [&cloud](int i, const Eigen::Vector3d& p, const Eigen::Vector3d& normal,
                          double k1, double k2) {
    cloud.positions.row(i) = p.transpose();
    cloud.gt_normals->row(i) = normal.transpose();
    (*cloud.gt_curvatures)(i, 0) = k1;
    (*cloud.gt_curvatures)(i, 1) = k2;
  };

  switch (spec.kind) {
    case ShapeKind::kPlane: {
      const double half = 0.5 * spec.extent;
      for (int i = 0; i < n; ++i) {
        const double x = (2.0 * unit(gen) - 1.0) * half;
        const double y = (2.0 * unit(gen) - 1.0) * half;
        set_row(i, {x, y, 0.0}, {0.0, 0.0, 1.0}, 0.0, 0.0);
      }
      break;
    }
    case ShapeKind::kSphere: {
      const double r = spec.radius;
      for (int i = 0; i < n; ++i) {
        Eigen::Vector3d dir(gauss(gen), gauss(gen), gauss(gen));
        while (dir.norm() < 1e-9) dir = {gauss(gen), gauss(gen), gauss(gen)};
        dir.normalize();
        set_row(i, r * dir, dir, 1.0 / r, 1.0 / r);
      }
      break;
    }
    case ShapeKind::kCylinder: {
      const double r = spec.radius;
      const double half = 0.5 * spec.extent;
      for (int i = 0; i < n; ++i) {
        const double theta = 2.0 * M_PI * unit(gen);
        const double z = (2.0 * unit(gen) - 1.0) * half;
        const Eigen::Vector3d radial(std::cos(theta), std::sin(theta), 0.0);
        set_row(i, {r * radial[0], r * radial[1], z}, radial, 1.0 / r, 0.0);
      }
      break;
    }
    case ShapeKind::kParaboloid: {
      const double c = spec.coeff;
      const double rmax = 0.5 * spec.extent;
      for (int i = 0; i < n; ++i) {
        const double rho = rmax * std::sqrt(unit(gen));
        const double theta = 2.0 * M_PI * unit(gen);
        const double x = rho * std::cos(theta), y = rho * std::sin(theta);
        const Eigen::Vector3d normal =
            Eigen::Vector3d(-c * x, -c * y, 1.0).normalized();
        const auto [k1, k2] = graph_curvatures(c * x, c * y, c, 0.0, c);
        set_row(i, {x, y, 0.5 * c * (x * x + y * y)}, normal, k1, k2);
      }
      break;
    }
    case ShapeKind::kSaddle: {
      const double c = spec.coeff;
      const double half = 0.5 * spec.extent;
      for (int i = 0; i < n; ++i) {
        const double x = (2.0 * unit(gen) - 1.0) * half;
        const double y = (2.0 * unit(gen) - 1.0) * half;
        const Eigen::Vector3d normal =
            Eigen::Vector3d(-c * x, c * y, 1.0).normalized();
        const auto [k1, k2] = graph_curvatures(c * x, -c * y, c, 0.0, -c);
        set_row(i, {x, y, 0.5 * c * (x * x - y * y)}, normal, k1, k2);
      }
      break;
    }
    case ShapeKind::kTorus: {
      const double ring = spec.radius, tube = spec.minor_radius;
      std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
      for (int i = 0; i < n; ++i) {
        // Rejection sampling keeps the surface density uniform in area.
        double v = angle(gen);
        while (unit(gen) > (ring + tube * std::cos(v)) / (ring + tube)) v = angle(gen);
        const double u = angle(gen);
        const double cu = std::cos(u), su = std::sin(u);
        const double cv = std::cos(v), sv = std::sin(v);
        const Eigen::Vector3d p((ring + tube * cv) * cu, (ring + tube * cv) * su,
                                tube * sv);
        const Eigen::Vector3d normal(cv * cu, cv * su, sv);
        const double k_tube = 1.0 / tube;
        const double k_ring = cv / (ring + tube * cv);
        set_row(i, p, normal, std::max(k_tube, k_ring), std::min(k_tube, k_ring));
      }
      break;
    }
  }
  return cloud;
}

PointCloud merge_clouds(const std::vector<PointCloud>& parts) {
  if (parts.empty()) throw InvalidInput("merge_clouds: no parts");
  int total = 0;
  bool normals = true, curvatures = true;
  for (const auto& part : parts) {
    total += part.size();
    normals = normals && part.gt_normals.has_value();
    curvatures = curvatures && part.gt_curvatures.has_value();
  }
  PointCloud merged;
  merged.positions.resize(total, 3);
  if (normals) merged.gt_normals.emplace(total, 3);
  if (curvatures) merged.gt_curvatures.emplace(total, 2);
  int row = 0;
  for (const auto& part : parts) {
    merged.positions.middleRows(row, part.size()) = part.positions;
    if (normals) merged.gt_normals->middleRows(row, part.size()) = *part.gt_normals;
    if (curvatures)
      merged.gt_curvatures->middleRows(row, part.size()) = *part.gt_curvatures;
    row += part.size();
  }
  return merged;
}

PointCloud transform_cloud(const PointCloud& cloud, const Eigen::Matrix3d& rotation,
                           const Eigen::Vector3d& translation) {
  PointCloud out = cloud;
  out.positions =
      (cloud.positions * rotation.transpose()).rowwise() + translation.transpose();
  if (cloud.gt_normals) *out.gt_normals = *cloud.gt_normals * rotation.transpose();
  return out;
}

}  // namespace jetfit
