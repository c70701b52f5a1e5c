#include "dmpoa/route.hpp"

#include <algorithm>
#include <cmath>

namespace dmpoa {

CostRing build_cost_ring(const Vec3& start, const Vec3& goal,
                         const std::vector<Superquadric>& obstacles,
                         const WorkspaceModel& ws, int n_dirs, double margin) {
  if (obstacles.empty())
    throw std::invalid_argument("build_cost_ring: at least one obstacle required");
  if (n_dirs < 8) throw std::invalid_argument("build_cost_ring: n_dirs >= 8");

  const LocalFrame frame = LocalFrame::from_start_goal(start, goal);
  const Vec3 dir = frame.rotation.col(0);

  CostRing ring;
  ring.omega.resize(n_dirs);
  ring.table_cost.assign(n_dirs, 0.0);
  ring.length_cost.assign(n_dirs, 0.0);
  ring.limits_cost.assign(n_dirs, 0.0);
  ring.total.assign(n_dirs, 0.0);

  std::vector<double> raw_length(n_dirs);
  for (int i = 0; i < n_dirs; ++i) {
    const double omega = 2.0 * kPi * i / n_dirs;
    ring.omega[i] = omega;
    const Vec3 u = frame.rotation.col(1) * std::cos(omega) +
                   frame.rotation.col(2) * std::sin(omega);

    // Candidate extreme point per obstacle: center displaced by the obstacle
    // support radius along u (orthographic YZ projection of the body).
    std::vector<std::pair<double, Vec3>> waypoints;
    waypoints.reserve(obstacles.size());
    for (const auto& ob : obstacles) {
      const Vec3 scaled = ob.semi_axes.cwiseProduct(ob.orientation.transpose() * u);
      const double rho = scaled.norm() + margin;
      const Vec3 cand = ob.center + rho * u;
      waypoints.emplace_back((cand - start).dot(dir), cand);
      if (cand.z() < ws.table_z) ring.table_cost[i] = 1.0;
      if ((cand - ws.ws_center).norm() > ws.ws_radius) ring.limits_cost[i] = 1.0;
    }
    std::sort(waypoints.begin(), waypoints.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double len = 0.0;
    Vec3 prev = start;
    for (const auto& [proj, p] : waypoints) {
      len += (p - prev).norm();
      prev = p;
    }
    len += (goal - prev).norm();
    raw_length[i] = len;
  }

  const double lo = *std::min_element(raw_length.begin(), raw_length.end());
  const double hi = *std::max_element(raw_length.begin(), raw_length.end());
  for (int i = 0; i < n_dirs; ++i) {
    ring.length_cost[i] = hi - lo > 1e-15 ? (raw_length[i] - lo) / (hi - lo) : 0.0;
    ring.total[i] = ring.table_cost[i] + ring.length_cost[i] + ring.limits_cost[i];
  }
  return ring;
}

double select_direction(const CostRing& ring) {
  int best = -1;
  for (std::size_t i = 0; i < ring.omega.size(); ++i) {
    if (ring.table_cost[i] != 0.0 || ring.limits_cost[i] != 0.0) continue;
    if (best < 0 || ring.total[i] < ring.total[best]) best = int(i);
  }
  if (best < 0)
    throw std::runtime_error("select_direction: no feasible avoidance direction");
  return ring.omega[best];
}

GuidanceTarget direction_to_guidance(double omega_d, const LocalFrame& frame,
                                     const SystemKinematics& /*sys*/, double blend) {
  const Vec3 u = frame.rotation.col(1) * std::cos(omega_d) +
                 frame.rotation.col(2) * std::sin(omega_d);
  Vec3 d = (1.0 - blend) * frame.rotation.col(0) + blend * u;
  GuidanceTarget target;
  target.xdot_d = d.normalized();
  target.active = true;
  return target;
}

}  // namespace dmpoa
