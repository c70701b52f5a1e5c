#pragma once

#include <optional>
#include <vector>

#include "dmpoa/common.hpp"

namespace dmpoa {

// Gains of the avoidance coupling terms. alpha scales the reaction strength,
// psi is the heading-bell width, kappa the distance decay. gamma/beta belong
// to the analytic baseline term.
struct AvoidanceParams {
  double alpha = 100.0;
  double psi = 0.5;
  double kappa = 10.0;
  double gamma = 1000.0;
  double beta = 20.0 / kPi;
};

struct SystemKinematics {
  Vec3 x = Vec3::Zero();
  Vec3 xdot = Vec3::Zero();
};

struct GuidanceTarget {
  Vec3 xdot_d = Vec3::UnitX();  // unit desired heading
  bool active = false;
};

// Angle in [0, pi] between the velocity and the system->obstacle direction.
double heading_angle(const SystemKinematics& sys, const Vec3& obstacle_point);

// pi/2 rotation about r = (x_obstacle - x) x xdot. When r degenerates
// (velocity parallel to the obstacle direction) the axis falls back to
// xdot x z_local, then xdot x y_local. fallback is set when the fallback
// axis was used.
Mat3 steering_rotation(const SystemKinematics& sys, const Vec3& obstacle_point,
                       bool* fallback = nullptr);

// Analytic baseline: C = R xdot thetadot, thetadot = gamma theta exp(-beta|theta|).
Vec3 coupling_original(const SystemKinematics& sys, const Vec3& obstacle_point,
                       double gamma, double beta, bool* degenerate = nullptr);

// Dead-zone free term: C = R xdot alpha sign(theta) exp(-theta^2/psi^2) exp(-kappa d^2).
Vec3 coupling_oa(const SystemKinematics& sys, const Vec3& obstacle_point, double d,
                 const AvoidanceParams& p, bool* degenerate = nullptr);

// Heading guidance: C = R' xdot alpha theta_hat exp(1 + kappa d^2), with R' a
// pi/2 rotation about xdot x xdot_d, so the rotation sense reduces theta_hat.
Vec3 coupling_hg(const SystemKinematics& sys, const GuidanceTarget& target,
                 double d, const AvoidanceParams& p);

struct ObstacleInfluence {
  Vec3 point = Vec3::Zero();  // reference point (section center or obstacle center)
  double d = 0.0;             // distance to the obstacle surface, >= 0
  AvoidanceParams params;
};

// C = sum_i C_OA^i + C_HG^i; the guidance term is evaluated once per obstacle
// with that obstacle's distance and gains.
Vec3 compose(const SystemKinematics& sys,
             const std::vector<ObstacleInfluence>& obstacles,
             const std::optional<GuidanceTarget>& guidance = std::nullopt);

}  // namespace dmpoa
