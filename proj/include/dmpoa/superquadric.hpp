#pragma once

#include <string>
#include <vector>

#include "dmpoa/common.hpp"

namespace dmpoa {

struct PointCloud {
  std::vector<Vec3> points;
};

PointCloud load_cloud_xyz(const std::string& path);
// ASCII PLY subset: vertex element with x,y,z float properties.
PointCloud load_cloud_ply(const std::string& path);
// Dispatches on extension (.ply vs anything else -> xyz table).
PointCloud load_cloud(const std::string& path);

// Implicit surface F(p) = 1 with semi-axes lambda1..3 and shape exponents
// lambda4 (z) and lambda5 (xy). lambda4 = lambda5 = 1 is an ellipsoid.
struct Superquadric {
  Vec3 semi_axes = Vec3::Ones();
  double e_z = 1.0;   // lambda4
  double e_xy = 1.0;  // lambda5
  Vec3 center = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();

  double residual = 0.0;    // fitting residual of the returned parameters
  bool converged = true;    // false when the optimiser hit max iterations
  bool is_ellipsoid() const { return e_z == 1.0 && e_xy == 1.0; }
};

// F < 1 inside, > 1 outside, = 1 on the surface; p in world coordinates.
double eval_F(const Superquadric& sq, const Vec3& p);

struct FitOptions {
  bool fix_ellipsoid = false;
  int max_iterations = 200;
  double axis_floor = 1e-3;
  double exponent_min = 0.1;
  double exponent_max = 2.0;
};

// Damped least squares on sum_i (sqrt(l1 l2 l3) (F_i - 1))^2 with
// centroid/PCA initialisation.
Superquadric fit_superquadric(const PointCloud& cloud, const FitOptions& opt = {});

// Minkowski-style dilation: every point replicated at the 8 signed corners and
// 6 face centers of the system's bounding box; the input points are kept.
PointCloud dilate_cloud(const PointCloud& cloud, const Vec3& half_extents);

}  // namespace dmpoa
