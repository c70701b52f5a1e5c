#include "dmpoa/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dmpoa {

namespace {

inline double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

int param_count(const MLPRegressor& m) {
  int n = 0;
  for (std::size_t l = 0; l < m.W.size(); ++l)
    n += int(m.W[l].size()) + int(m.b[l].size());
  return n;
}

// Forward pass keeping activations, then the gradient of the scalar output
// w.r.t. every weight and bias via reverse accumulation.
double forward_grad(const MLPRegressor& m, const Eigen::VectorXd& xn,
                    Eigen::VectorXd* grad) {
  const int L = int(m.W.size());
  std::vector<Eigen::VectorXd> act(L + 1);
  act[0] = xn;
  for (int l = 0; l < L; ++l) {
    Eigen::VectorXd a = m.W[l] * act[l] + m.b[l];
    if (l + 1 < L)
      act[l + 1] = a.array().tanh();
    else
      act[l + 1] = a.unaryExpr([](double v) { return logistic(v); });
  }
  const double y = act[L][0];
  if (!grad) return y;

  grad->resize(param_count(m));
  // delta on the pre-activation of the output.
  Eigen::VectorXd delta = Eigen::VectorXd::Constant(1, y * (1.0 - y));
  int offset = int(grad->size());
  for (int l = L - 1; l >= 0; --l) {
    const int nw = int(m.W[l].size()), nb = int(m.b[l].size());
    offset -= nw + nb;
    Eigen::Map<Eigen::MatrixXd> gw(grad->data() + offset, m.W[l].rows(), m.W[l].cols());
    gw = delta * act[l].transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad->data() + offset + nw, nb);
    gb = delta;
    if (l > 0) {
      Eigen::VectorXd up = m.W[l].transpose() * delta;
      delta = up.cwiseProduct(
          (1.0 - act[l].array().square()).matrix());
    }
  }
  return y;
}

void apply_step(MLPRegressor& m, const Eigen::VectorXd& step) {
  int offset = 0;
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    const int nw = int(m.W[l].size()), nb = int(m.b[l].size());
    m.W[l] += Eigen::Map<const Eigen::MatrixXd>(step.data() + offset, m.W[l].rows(),
                                                m.W[l].cols());
    m.b[l] += Eigen::Map<const Eigen::VectorXd>(step.data() + offset + nw, nb);
    offset += nw + nb;
  }
}

}  // namespace

Eigen::VectorXd MLPRegressor::normalize_in(const Eigen::VectorXd& x_raw) const {
  return (x_raw - in_mean).cwiseQuotient(in_std);
}

double MLPRegressor::normalize_target(double t_raw) const {
  const double t = log_target ? std::log(t_raw) : t_raw;
  return 0.05 + 0.9 * (t - t_min) / (t_max - t_min);
}

double MLPRegressor::denormalize_target(double yn) const {
  const double t = t_min + (yn - 0.05) / 0.9 * (t_max - t_min);
  if (log_target) return std::exp(t);
  return std::max(t, 1e-12);  // the logistic bound keeps predictions positive
}

double MLPRegressor::forward(const Eigen::VectorXd& xn) const {
  return forward_grad(*this, xn, nullptr);
}

double MLPRegressor::predict(const Eigen::VectorXd& x_raw) const {
  // Clamping to the normalization band keeps denormalized predictions inside
  // the target range seen in training; the logistic tail would otherwise
  // extrapolate past the explored grid bounds.
  const double yn = std::clamp(forward(normalize_in(x_raw)), 0.05, 0.95);
  return denormalize_target(yn);
}

MLPRegressor train_mlp(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::uint64_t seed, bool log_target, const TrainOptions& opt,
                       TrainReport* report) {
  const int n_all = int(X.rows());
  const int n_in = int(X.cols());
  if (n_all < 50) throw std::invalid_argument("train_mlp: need >= 50 samples");
  if (y.size() != n_all) throw std::invalid_argument("train_mlp: size mismatch");

  std::mt19937_64 rng(seed);

  MLPRegressor m;
  m.log_target = log_target;
  m.in_mean = X.colwise().mean();
  m.in_std.resize(n_in);
  for (int j = 0; j < n_in; ++j) {
    const double var = (X.col(j).array() - m.in_mean[j]).square().mean();
    m.in_std[j] = std::max(std::sqrt(var), 1e-12);
  }
  Eigen::VectorXd t = y;
  if (log_target) t = t.array().log();
  m.t_min = t.minCoeff();
  m.t_max = t.maxCoeff();
  if (m.t_max - m.t_min < 1e-12) m.t_max = m.t_min + 1e-12;

  std::vector<int> sizes = {n_in};
  for (int h : opt.hidden) sizes.push_back(h);
  sizes.push_back(1);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double scale = 1.0 / std::sqrt(double(sizes[l]));
    Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
    for (int i = 0; i < w.size(); ++i) w.data()[i] = scale * uni(rng);
    m.W.push_back(w);
    m.b.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
  }

  // Subsample rows past the cap so the Jacobian stays tractable.
  std::vector<int> rows(n_all);
  std::iota(rows.begin(), rows.end(), 0);
  if (n_all > opt.max_rows) {
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(opt.max_rows);
  }
  const int n = int(rows.size());

  Eigen::MatrixXd Xn(n, n_in);
  Eigen::VectorXd tn(n);
  for (int i = 0; i < n; ++i) {
    Xn.row(i) = m.normalize_in(X.row(rows[i]).transpose()).transpose();
    tn[i] = m.normalize_target(y[rows[i]]);
  }

  const int np = param_count(m);
  Eigen::MatrixXd J(n, np);
  Eigen::VectorXd err(n), gsample(np);

  auto compute_cost = [&](const MLPRegressor& model) {
    double c = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = model.forward(Xn.row(i).transpose()) - tn[i];
      c += d * d;
    }
    return c;
  };

  double mu = opt.mu0;
  double cost = compute_cost(m);
  int epochs = 0;
  bool hit_ceiling = false;
  int stagnant = 0;
  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    epochs = epoch + 1;
    for (int i = 0; i < n; ++i) {
      err[i] = forward_grad(m, Xn.row(i).transpose(), &gsample) - tn[i];
      J.row(i) = gsample.transpose();
    }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * err;
    if (g.lpNorm<Eigen::Infinity>() < 1e-10) break;

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal().array() += mu;
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      MLPRegressor cand = m;
      apply_step(cand, step);
      const double cc = compute_cost(cand);
      if (cc < cost) {
        const double rel = (cost - cc) / std::max(cost, 1e-300);
        m = std::move(cand);
        cost = cc;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        stagnant = rel < 1e-9 ? stagnant + 1 : 0;
      } else {
        mu *= 2.5;
        if (mu > opt.mu_ceiling) {
          hit_ceiling = true;
          break;
        }
      }
    }
    if (hit_ceiling || stagnant >= 8) break;
  }

  if (report) {
    report->train_mse_norm = cost / n;
    report->epochs = epochs;
    report->hit_mu_ceiling = hit_ceiling;
  }
  return m;
}

double nmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || truth.size() < 2)
    throw std::invalid_argument("nmse: need equal lengths >= 2");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / truth.size();
  double var = 0.0, mse = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    var += (truth[i] - mean) * (truth[i] - mean);
    mse += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  }
  if (var <= 0.0) throw std::invalid_argument("nmse: zero truth variance");
  return mse / var;
}

}  // namespace dmpoa
