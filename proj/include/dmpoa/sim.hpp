#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmpoa/chain.hpp"
#include "dmpoa/route.hpp"
#include "dmpoa/section.hpp"

namespace dmpoa {

// Obstacles are already-dilated ellipsoids; the system is treated as a point.
struct Scenario {
  int id = 0;
  Vec3 start = Vec3::Zero();
  Vec3 goal = Vec3::UnitX();
  std::vector<Superquadric> obstacles;
  double clearance = 0.15;  // requested clearance, input to RC(lambda', delta)
  std::optional<WorkspaceModel> workspace;
  std::uint64_t seed = 0;
};

struct TrajPoint {
  double t = 0.0;
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

struct Trajectory {
  std::vector<TrajPoint> points;
  double tau = 1.0;
  bool guidance_used = false;
};

// No-obstacle episodes report this clearance sentinel.
inline constexpr double kClearanceInf = 1e9;

struct Metrics {
  bool collided = false;
  double clearance = kClearanceInf;  // signed: negative = max penetration depth
  double convergence = 0.0;
  double tau = 1.0;
};

struct EpisodeOptions {
  bool scale_tau = true;
  bool guided = false;
  double dt = 1e-3;
  double tau_per_metre = 1.0;       // nominal tau in seconds per metre of baseline
  double settle_fraction = 0.5;     // extra run time after the phase ends
  double section_cache_deg = 0.5;   // re-section when the P-plane normal turns more
  // Guidance is parameterised manually (the decision layer sets it); the
  // envelope is capped to keep the explicit integration well conditioned.
  double guidance_alpha = 20.0;
  double guidance_kappa = 1.0;
  double guidance_blend = 0.6;
  double guidance_accel_cap = 80.0;  // m/s^2
  int ring_dirs = 72;
  bool record_trajectory = true;
};

std::pair<Trajectory, Metrics> run_episode(const Scenario& sc,
                                           const RegressorChain* rc,
                                           const EpisodeOptions& opt = {});

// n P-plane ellipse geometries on a 1 m baseline; the eval driver crosses
// them with the model settings.
std::vector<Scenario> gen_familiar_suite(int n, std::uint64_t seed,
                                         double semi_lo = 0.025,
                                         double semi_hi = 0.25);

// n 3D scenarios per baseline in {0.5, 1.0, 1.5, 2.0} m; obstacle fits inside
// the +-0.4 m YZ box and keeps a 5 cm margin to start and goal along x.
std::vector<Scenario> gen_novel_suite(int n_per_baseline, std::uint64_t seed);

struct EpisodeRow {
  int scenario_id = 0;
  std::string setting;
  bool collided = false;
  double clearance = 0.0;
  double convergence = 0.0;
  double tau = 0.0;
};

struct SuiteAggregate {
  std::string setting;
  int episodes = 0;
  int collisions = 0;
  double mean_clearance = 0.0;
  double min_clearance = 0.0;
  double mean_convergence = 0.0;
  double max_convergence = 0.0;
};

std::vector<EpisodeRow> evaluate_suite(const std::vector<Scenario>& scenarios,
                                       const RegressorChain& rc,
                                       const EpisodeOptions& opt,
                                       const std::string& setting, int jobs = 1);

std::vector<SuiteAggregate> aggregate_rows(const std::vector<EpisodeRow>& rows);

void save_rows_csv(const std::string& path, const std::vector<EpisodeRow>& rows);
void save_aggregates_json(const std::string& path,
                          const std::vector<SuiteAggregate>& aggs);
void save_trajectory(const std::string& path, const Trajectory& traj);

Scenario load_scenario_json(const std::string& path);
void save_scenario_json(const std::string& path, const Scenario& sc);

struct DeadZoneComparison {
  Trajectory original, proposed;
  double original_min_distance = 0.0;
  double proposed_min_distance = 0.0;
};

// Paired rollouts against a point obstacle with matched gain scales
// (alpha = gamma / (beta e), the peak steering rate of the baseline term).
DeadZoneComparison compare_dead_zone(const Vec3& start, const Vec3& goal,
                                     const Vec3& obstacle_point,
                                     double gamma = 1000.0,
                                     double beta = 20.0 / kPi, double psi = 0.3,
                                     double kappa = 12.0, double dt = 1e-3);

}  // namespace dmpoa
