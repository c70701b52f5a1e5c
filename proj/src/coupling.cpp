#include "dmpoa/coupling.hpp"

#include <cmath>

namespace dmpoa {

namespace {

constexpr double kEps = 1e-9;

Mat3 axis_angle(const Vec3& axis_unit, double angle) {
  return Eigen::AngleAxisd(angle, axis_unit).toRotationMatrix();
}

// pi/2 rotation about axis, with the documented deterministic fallback when
// |axis| vanishes.
Mat3 quarter_turn(const Vec3& axis, const Vec3& xdot, bool* fallback) {
  if (fallback) *fallback = false;
  if (axis.norm() > kEps) return axis_angle(axis.normalized(), kPi / 2.0);
  if (fallback) *fallback = true;
  Vec3 alt = xdot.cross(Vec3(0, 0, 1));
  if (alt.norm() < kEps) alt = xdot.cross(Vec3(0, 1, 0));
  return axis_angle(alt.normalized(), kPi / 2.0);
}

}  // namespace

double heading_angle(const SystemKinematics& sys, const Vec3& obstacle_point) {
  const Vec3 rel = obstacle_point - sys.x;
  if (sys.xdot.norm() < kEps || rel.norm() < kEps)
    throw std::invalid_argument("heading_angle: degenerate geometry");
  double c = sys.xdot.normalized().dot(rel.normalized());
  c = std::clamp(c, -1.0, 1.0);
  return std::acos(c);
}

Mat3 steering_rotation(const SystemKinematics& sys, const Vec3& obstacle_point,
                       bool* fallback) {
  const Vec3 rel = obstacle_point - sys.x;
  if (sys.xdot.norm() < kEps || rel.norm() < kEps)
    throw std::invalid_argument("steering_rotation: degenerate geometry");
  return quarter_turn(rel.cross(sys.xdot), sys.xdot, fallback);
}

Vec3 coupling_original(const SystemKinematics& sys, const Vec3& obstacle_point,
                       double gamma, double beta, bool* degenerate) {
  if (degenerate) *degenerate = false;
  const Vec3 rel = obstacle_point - sys.x;
  if (sys.xdot.norm() < kEps || rel.norm() < kEps) {
    if (degenerate) *degenerate = true;
    return Vec3::Zero();
  }
  const double theta = heading_angle(sys, obstacle_point);
  const double theta_dot = gamma * theta * std::exp(-beta * std::fabs(theta));
  return steering_rotation(sys, obstacle_point) * sys.xdot * theta_dot;
}

Vec3 coupling_oa(const SystemKinematics& sys, const Vec3& obstacle_point, double d,
                 const AvoidanceParams& p, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (d < 0.0) throw std::invalid_argument("coupling_oa: d must be >= 0");
  const Vec3 rel = obstacle_point - sys.x;
  if (sys.xdot.norm() < kEps || rel.norm() < kEps) {
    if (degenerate) *degenerate = true;
    return Vec3::Zero();
  }
  const double theta = heading_angle(sys, obstacle_point);
  // theta >= 0 by construction; sign(0) := +1.
  const double expo = -theta * theta / (p.psi * p.psi) - p.kappa * d * d;
  if (expo < -120.0) return Vec3::Zero();
  const double mag = p.alpha * std::exp(expo);
  return steering_rotation(sys, obstacle_point) * sys.xdot * mag;
}

Vec3 coupling_hg(const SystemKinematics& sys, const GuidanceTarget& target,
                 double d, const AvoidanceParams& p) {
  if (!target.active) return Vec3::Zero();
  if (sys.xdot.norm() < kEps)
    throw std::invalid_argument("coupling_hg: zero velocity");
  double c = std::clamp(sys.xdot.normalized().dot(target.xdot_d.normalized()), -1.0, 1.0);
  const double theta_hat = std::acos(c);
  bool fb = false;
  const Mat3 rot = quarter_turn(sys.xdot.cross(target.xdot_d), sys.xdot, &fb);
  return rot * sys.xdot * (p.alpha * theta_hat * std::exp(1.0 + p.kappa * d * d));
}

Vec3 compose(const SystemKinematics& sys,
             const std::vector<ObstacleInfluence>& obstacles,
             const std::optional<GuidanceTarget>& guidance) {
  Vec3 total = Vec3::Zero();
  for (const auto& ob : obstacles) {
    total += coupling_oa(sys, ob.point, ob.d, ob.params);
    if (guidance && guidance->active)
      total += coupling_hg(sys, *guidance, ob.d, ob.params);
  }
  return total;
}

}  // namespace dmpoa
