#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dmpoa/coupling.hpp"
#include "dmpoa/mlp.hpp"

namespace dmpoa {

// One retained exploration rollout: P-plane section semi-axes, the measured
// clearance, and the coupling parameters that produced it.
struct Sample {
  double lp1 = 0.0;  // section extent along the start->goal chord
  double lp2 = 0.0;  // section extent across the chord
  double clearance = 0.0;
  double alpha = 0.0;
  double psi = 0.0;
  double kappa = 0.0;
};

struct ParamGrid {
  std::vector<double> alpha;  // log-spaced
  std::vector<double> psi;    // linear
  std::vector<double> kappa;  // log-spaced

  static ParamGrid make(int n_alpha, int n_psi, int n_kappa,
                        double alpha_lo = 1.0, double alpha_hi = 1000.0,
                        double psi_lo = 0.05, double psi_hi = kPi / 2.0,
                        double kappa_lo = 1.0, double kappa_hi = 500.0);
};

struct RolloutResult {
  bool collided = false;
  bool diverged = false;
  double clearance = 0.0;
  double convergence = 0.0;  // distance to goal at rollout end
};

// Straight-line DMP from (0,0) to (baseline,0) in the P-plane with an ellipse
// (a along the chord, c across it) centered on the chord at center_frac of the
// baseline (midpoint by default), modulated by the avoidance term. The plane
// is embedded as the local xz-plane.
RolloutResult rollout_pplane(double a_along, double c_across, double baseline,
                             const AvoidanceParams& p, double dt = 1e-3,
                             double center_frac = 0.5);

struct DatasetOptions {
  double baseline = 1.0;
  double semi_lo = 0.025;
  double semi_hi = 0.25;
  double dt = 1e-3;
  int jobs = 1;
};

std::vector<Sample> gen_dataset(int n_scenarios, const ParamGrid& grid,
                                std::uint64_t seed,
                                const DatasetOptions& opt = {});

void save_dataset_csv(const std::string& path, const std::vector<Sample>& data);
std::vector<Sample> load_dataset_csv(const std::string& path);

std::pair<std::vector<Sample>, std::vector<Sample>>
split_dataset(const std::vector<Sample>& data, double fraction, std::uint64_t seed);

// Ordered chain Y1: h -> kappa, Y2: (h, kappa) -> psi, Y3: (h, kappa, psi) -> alpha,
// with h = (lp1, lp2) or (lp1, lp2, clearance).
struct RegressorChain {
  MLPRegressor y1, y2, y3;
  bool with_clearance = true;
  Eigen::VectorXd hull_min, hull_max;

  // Returns (kappa, psi, alpha); outside_hull reports inputs beyond the
  // training range (prediction still returned).
  Vec3 predict(double lp1, double lp2, double clearance,
               bool* outside_hull = nullptr) const;
};

struct ChainReport {
  // Indices 0..2 are Y1..Y3; NMSE on raw (denormalised) targets, each model
  // evaluated with true upstream targets as inputs.
  double train_nmse[3] = {0, 0, 0};
  double test_nmse[3] = {0, 0, 0};
};

RegressorChain train_chain(const std::vector<Sample>& train_set,
                           const std::vector<Sample>& test_set,
                           bool with_clearance, std::uint64_t seed,
                           ChainReport* report = nullptr,
                           const TrainOptions& opt = {});

inline constexpr int kChainFormatVersion = 1;
void save_chain_json(const std::string& path, const RegressorChain& rc);
RegressorChain load_chain_json(const std::string& path);

}  // namespace dmpoa
