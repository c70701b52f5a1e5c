#pragma once

#include <vector>

#include "dmpoa/common.hpp"
#include "dmpoa/superquadric.hpp"

namespace dmpoa {

// Ellipse cut by a plane through an ellipsoid. axes columns are the in-plane
// principal directions of the section, semi(0) >= semi(1).
struct EllipseSection {
  Vec2 semi = Vec2::Ones();
  Vec3 center = Vec3::Zero();
  Vec3 axis1 = Vec3::UnitX();
  Vec3 axis2 = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();
  bool fallback = false;  // plane missed the body; section through the center used

  // Support radius of the section along an in-plane unit direction.
  double support(const Vec3& u) const;
  // Boundary point extremal along an in-plane unit direction.
  Vec3 support_point(const Vec3& u) const;
};

// Exact conic section of an ellipsoid (e_z = e_xy = 1) by the plane
// (origin, normal). A non-intersecting plane falls back to the parallel
// plane through the ellipsoid center, with the fallback flag set.
EllipseSection section_pplane(const Superquadric& ell, const Vec3& plane_origin,
                              const Vec3& plane_normal);

// Euclidean distance from p to the ellipsoid surface, clamped at 0 inside.
double ellipsoid_surface_distance(const Superquadric& ell, const Vec3& p);

// Signed variant: negative penetration depth when p is inside.
double ellipsoid_signed_distance(const Superquadric& ell, const Vec3& p);

// 2D helper shared by the in-plane dataset rollouts: distance from (px, py)
// to the axis-aligned ellipse with semi-axes (a, b), 0 inside.
double ellipse_surface_distance(double a, double b, double px, double py);

// Polyline length start -> extreme points -> goal, extreme points ordered by
// their projection on the start->goal axis. side_hints, when given, supply
// the avoidance side per section; otherwise the side opposite the section
// center relative to the chord is used (world up when the center lies on it).
double estimate_path_length(const Vec3& start, const Vec3& goal,
                            const std::vector<EllipseSection>& sections,
                            const std::vector<Vec3>* side_hints = nullptr);

}  // namespace dmpoa
