#pragma once

#include <cstdint>
#include <vector>

#include "dmpoa/common.hpp"

namespace dmpoa {

// Four-layer single-output perceptron: tanh hidden units, logistic output.
// Inputs are standardised, targets min-max mapped to (0.05, 0.95); both sets
// of constants are computed on the training split and stored with the model.
// log_target applies a log transform before the min-max mapping, for targets
// explored on log-spaced grids.
struct MLPRegressor {
  std::vector<Eigen::MatrixXd> W;  // [h1 x in], [h2 x h1], [1 x h2]
  std::vector<Eigen::VectorXd> b;

  Eigen::VectorXd in_mean, in_std;
  double t_min = 0.0, t_max = 1.0;
  bool log_target = false;

  int n_inputs() const { return W.empty() ? 0 : int(W.front().cols()); }

  // Normalised-space output in (0,1).
  double forward(const Eigen::VectorXd& xn) const;
  // Denormalised prediction from raw inputs; always > 0 for log targets and
  // floored at a small positive value otherwise.
  double predict(const Eigen::VectorXd& x_raw) const;

  Eigen::VectorXd normalize_in(const Eigen::VectorXd& x_raw) const;
  double normalize_target(double t_raw) const;
  double denormalize_target(double yn) const;
};

struct TrainOptions {
  std::vector<int> hidden = {10, 10};
  int max_epochs = 500;
  double mu0 = 1e-3;
  double mu_ceiling = 1e12;
  int max_rows = 12000;  // LM Jacobian row cap; rows subsampled with the seed
};

struct TrainReport {
  double train_mse_norm = 0.0;
  int epochs = 0;
  bool hit_mu_ceiling = false;
};

// Full-batch Levenberg-Marquardt on the normalised squared error.
MLPRegressor train_mlp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::uint64_t seed, bool log_target = false,
                       const TrainOptions& opt = {}, TrainReport* report = nullptr);

// Mean squared error over the truth variance; throws on zero variance.
double nmse(const std::vector<double>& pred, const std::vector<double>& truth);

}  // namespace dmpoa
