#pragma once

#include <vector>

#include "dmpoa/coupling.hpp"
#include "dmpoa/dmp.hpp"
#include "dmpoa/superquadric.hpp"

namespace dmpoa {

struct WorkspaceModel {
  double table_z = -std::numeric_limits<double>::infinity();  // world z of the table plane
  Vec3 ws_center = Vec3::Zero();
  double ws_radius = std::numeric_limits<double>::infinity();
};

// Per-direction cost table over the local YZ-plane. omega is measured from
// the local +y axis towards +z, so omega = pi/2 is "up".
struct CostRing {
  std::vector<double> omega;
  std::vector<double> table_cost;   // 0/1
  std::vector<double> length_cost;  // min-max normalised over the ring
  std::vector<double> limits_cost;  // 0/1
  std::vector<double> total;
};

// Evaluates candidate avoidance extreme points around the obstacle's
// orthographic YZ projection. Obstacles must be ellipsoids; the margin is
// added on top of the obstacle support radius when displacing the candidate.
CostRing build_cost_ring(const Vec3& start, const Vec3& goal,
                         const std::vector<Superquadric>& obstacles,
                         const WorkspaceModel& ws, int n_dirs = 72,
                         double margin = 0.0);

// Argmin of the total cost among directions with table = limits = 0;
// smallest angle wins ties. Throws when no direction is feasible.
double select_direction(const CostRing& ring);

// Desired heading blending forward progress with the lateral ring direction.
GuidanceTarget direction_to_guidance(double omega_d, const LocalFrame& frame,
                                     const SystemKinematics& sys,
                                     double blend = 0.5);

}  // namespace dmpoa
