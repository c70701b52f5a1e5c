#include "dmpoa/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dmpoa/dmp.hpp"
#include "dmpoa/section.hpp"

namespace dmpoa {

namespace {

std::vector<double> spaced(double lo, double hi, int n, bool log_space) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = log_space ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    return v;
  }
  for (int i = 0; i < n; ++i) {
    const double t = double(i) / (n - 1);
    v[i] = log_space ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo);
  }
  return v;
}

}  // namespace

ParamGrid ParamGrid::make(int n_alpha, int n_psi, int n_kappa, double alpha_lo,
                          double alpha_hi, double psi_lo, double psi_hi,
                          double kappa_lo, double kappa_hi) {
  if (n_alpha < 1 || n_psi < 1 || n_kappa < 1)
    throw std::invalid_argument("ParamGrid: axes must be non-empty");
  ParamGrid g;
  g.alpha = spaced(alpha_lo, alpha_hi, n_alpha, true);
  g.psi = spaced(psi_lo, psi_hi, n_psi, false);
  g.kappa = spaced(kappa_lo, kappa_hi, n_kappa, true);
  return g;
}

RolloutResult rollout_pplane(double a_along, double c_across, double baseline,
                             const AvoidanceParams& p, double dt,
                             double center_frac) {
  if (a_along <= 0.0 || c_across <= 0.0 || baseline <= 0.0 || dt <= 0.0 ||
      center_frac <= 0.0 || center_frac >= 1.0)
    throw std::invalid_argument("rollout_pplane: invalid geometry");
  const Vec3 start(0, 0, 0), goal(baseline, 0, 0);
  const Vec3 obstacle_center(center_frac * baseline, 0, 0);
  Dmp3 dmp = Dmp3::straight_line(start, goal, 1.0);
  const double t_end = 1.5 * dmp.phase.tau;

  RolloutResult res;
  res.clearance = std::numeric_limits<double>::infinity();
  while (dmp.t < t_end) {
    const Vec3 x = dmp.position();
    const Vec3 v = dmp.velocity();

    const double ux = x.x() - obstacle_center.x();
    const double uz = x.z();
    const double d = ellipse_surface_distance(a_along, c_across, ux, uz);
    if (d <= 0.0) {
      res.collided = true;
      return res;
    }
    res.clearance = std::min(res.clearance, d);

    Vec3 c = Vec3::Zero();
    if (v.squaredNorm() > 1e-18)
      c = coupling_oa({x, v}, obstacle_center, d, p);
    dmp.step(dt, c);
    if (!dmp.position().allFinite() || dmp.position().norm() > 50.0 * baseline) {
      res.diverged = true;
      return res;
    }
  }
  res.convergence = (dmp.position() - goal).norm();
  return res;
}

std::vector<Sample> gen_dataset(int n_scenarios, const ParamGrid& grid,
                                std::uint64_t seed, const DatasetOptions& opt) {
  if (n_scenarios < 1) throw std::invalid_argument("gen_dataset: n_scenarios >= 1");
  // Scenario geometries drawn up front so worker scheduling cannot affect them.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> semi(opt.semi_lo, opt.semi_hi);
  std::vector<std::pair<double, double>> geoms(n_scenarios);
  for (auto& g : geoms) {
    g.first = semi(rng);
    g.second = semi(rng);
  }

  std::vector<std::vector<Sample>> per_scenario(n_scenarios);
  parallel_for(
      n_scenarios,
      [&](std::size_t s) {
        const auto [a, c] = geoms[s];
        auto& out = per_scenario[s];
        for (double kappa : grid.kappa)
          for (double psi : grid.psi)
            for (double alpha : grid.alpha) {
              AvoidanceParams p;
              p.alpha = alpha;
              p.psi = psi;
              p.kappa = kappa;
              const RolloutResult r =
                  rollout_pplane(a, c, opt.baseline, p, opt.dt);
              // A rollout only counts as successful when it reaches the goal:
              // wide-halo parameter combos (tiny kappa, huge alpha) miss the
              // obstacle but keep deflecting near the goal and never settle.
              if (!r.collided && !r.diverged && std::isfinite(r.clearance) &&
                  r.clearance > 0.0 && r.convergence <= 0.03 * opt.baseline)
                out.push_back({a, c, r.clearance, alpha, psi, kappa});
            }
      },
      opt.jobs);

  std::vector<Sample> all;
  for (auto& v : per_scenario) {
    all.insert(all.end(), v.begin(), v.end());
  }
  return all;
}

void save_dataset_csv(const std::string& path, const std::vector<Sample>& data) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("save_dataset_csv: cannot open " + path);
  std::fprintf(f, "lp1,lp2,clearance,alpha,psi,kappa\n");
  for (const Sample& s : data)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.lp1, s.lp2,
                 s.clearance, s.alpha, s.psi, s.kappa);
  std::fclose(f);
}

std::vector<Sample> load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("lp1,lp2,clearance", 0) != 0)
    throw std::runtime_error("load_dataset_csv: bad header in " + path);
  std::vector<Sample> data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Sample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &s.lp1, &s.lp2,
                    &s.clearance, &s.alpha, &s.psi, &s.kappa) != 6)
      throw std::runtime_error("load_dataset_csv: malformed row in " + path);
    data.push_back(s);
  }
  return data;
}

std::pair<std::vector<Sample>, std::vector<Sample>>
split_dataset(const std::vector<Sample>& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || !(fraction < 1.0))
    throw std::invalid_argument("split_dataset: fraction must be in (0,1)");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_train = std::size_t(std::llround(fraction * data.size()));
  std::vector<Sample> train, test;
  train.reserve(n_train);
  test.reserve(data.size() - n_train);
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? train : test).push_back(data[idx[i]]);
  return {std::move(train), std::move(test)};
}

namespace {

Eigen::MatrixXd build_inputs(const std::vector<Sample>& data, bool with_clearance,
                             int stage) {
  const int base = with_clearance ? 3 : 2;
  Eigen::MatrixXd X(data.size(), base + stage);
  for (std::size_t i = 0; i < data.size(); ++i) {
    int j = 0;
    X(i, j++) = data[i].lp1;
    X(i, j++) = data[i].lp2;
    if (with_clearance) X(i, j++) = data[i].clearance;
    if (stage >= 1) X(i, j++) = data[i].kappa;
    if (stage >= 2) X(i, j++) = data[i].psi;
  }
  return X;
}

Eigen::VectorXd build_target(const std::vector<Sample>& data, int stage) {
  Eigen::VectorXd y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    y[i] = stage == 0 ? data[i].kappa : stage == 1 ? data[i].psi : data[i].alpha;
  return y;
}

double eval_nmse(const MLPRegressor& m, const Eigen::MatrixXd& X,
                 const Eigen::VectorXd& y) {
  std::vector<double> pred(X.rows()), truth(X.rows());
  for (int i = 0; i < X.rows(); ++i) {
    pred[i] = m.predict(X.row(i).transpose());
    truth[i] = y[i];
  }
  return nmse(pred, truth);
}

}  // namespace

RegressorChain train_chain(const std::vector<Sample>& train_set,
                           const std::vector<Sample>& test_set,
                           bool with_clearance, std::uint64_t seed,
                           ChainReport* report, const TrainOptions& opt) {
  RegressorChain rc;
  rc.with_clearance = with_clearance;

  MLPRegressor* models[3] = {&rc.y1, &rc.y2, &rc.y3};
  const bool log_target[3] = {true, false, true};  // kappa, psi, alpha
  for (int stage = 0; stage < 3; ++stage) {
    const Eigen::MatrixXd Xtr = build_inputs(train_set, with_clearance, stage);
    const Eigen::VectorXd ytr = build_target(train_set, stage);
    *models[stage] =
        train_mlp(Xtr, ytr, seed + 1000 * (stage + 1), log_target[stage], opt);
    if (report) {
      report->train_nmse[stage] = eval_nmse(*models[stage], Xtr, ytr);
      const Eigen::MatrixXd Xte = build_inputs(test_set, with_clearance, stage);
      report->test_nmse[stage] = eval_nmse(*models[stage], Xte, build_target(test_set, stage));
    }
    if (stage == 0) {
      const int base = with_clearance ? 3 : 2;
      rc.hull_min = Xtr.colwise().minCoeff().head(base);
      rc.hull_max = Xtr.colwise().maxCoeff().head(base);
    }
  }
  return rc;
}

Vec3 RegressorChain::predict(double lp1, double lp2, double clearance,
                             bool* outside_hull) const {
  const int base = with_clearance ? 3 : 2;
  Eigen::VectorXd h(base);
  h[0] = lp1;
  h[1] = lp2;
  if (with_clearance) h[2] = clearance;
  if (outside_hull) {
    *outside_hull = false;
    for (int i = 0; i < base; ++i)
      if (h[i] < hull_min[i] || h[i] > hull_max[i]) *outside_hull = true;
  }
  const double kappa = y1.predict(h);
  Eigen::VectorXd h2(base + 1);
  h2.head(base) = h;
  h2[base] = kappa;
  const double psi = y2.predict(h2);
  Eigen::VectorXd h3(base + 2);
  h3.head(base + 1) = h2;
  h3[base + 1] = psi;
  const double alpha = y3.predict(h3);
  return {kappa, psi, alpha};
}

namespace {

nlohmann::json mlp_to_json(const MLPRegressor& m) {
  nlohmann::json j;
  j["log_target"] = m.log_target;
  j["t_min"] = m.t_min;
  j["t_max"] = m.t_max;
  j["in_mean"] = std::vector<double>(m.in_mean.data(), m.in_mean.data() + m.in_mean.size());
  j["in_std"] = std::vector<double>(m.in_std.data(), m.in_std.data() + m.in_std.size());
  j["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < m.W.size(); ++l) {
    nlohmann::json layer;
    layer["rows"] = m.W[l].rows();
    layer["cols"] = m.W[l].cols();
    layer["w"] = std::vector<double>(m.W[l].data(), m.W[l].data() + m.W[l].size());
    layer["b"] = std::vector<double>(m.b[l].data(), m.b[l].data() + m.b[l].size());
    j["layers"].push_back(layer);
  }
  return j;
}

MLPRegressor mlp_from_json(const nlohmann::json& j) {
  MLPRegressor m;
  m.log_target = j.at("log_target").get<bool>();
  m.t_min = j.at("t_min").get<double>();
  m.t_max = j.at("t_max").get<double>();
  const auto mean = j.at("in_mean").get<std::vector<double>>();
  const auto stdv = j.at("in_std").get<std::vector<double>>();
  m.in_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  m.in_std = Eigen::Map<const Eigen::VectorXd>(stdv.data(), stdv.size());
  for (const auto& layer : j.at("layers")) {
    const int rows = layer.at("rows").get<int>();
    const int cols = layer.at("cols").get<int>();
    const auto w = layer.at("w").get<std::vector<double>>();
    const auto b = layer.at("b").get<std::vector<double>>();
    if ((int)w.size() != rows * cols || (int)b.size() != rows)
      throw std::runtime_error("chain json: layer size mismatch");
    m.W.push_back(Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols));
    m.b.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
  }
  return m;
}

}  // namespace

void save_chain_json(const std::string& path, const RegressorChain& rc) {
  nlohmann::json j;
  j["format_version"] = kChainFormatVersion;
  j["variant"] = rc.with_clearance ? "rc_delta" : "rc";
  j["hull_min"] = std::vector<double>(rc.hull_min.data(), rc.hull_min.data() + rc.hull_min.size());
  j["hull_max"] = std::vector<double>(rc.hull_max.data(), rc.hull_max.data() + rc.hull_max.size());
  j["y1"] = mlp_to_json(rc.y1);
  j["y2"] = mlp_to_json(rc.y2);
  j["y3"] = mlp_to_json(rc.y3);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_chain_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

RegressorChain load_chain_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_chain_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format_version").get<int>() != kChainFormatVersion)
    throw std::runtime_error("load_chain_json: unsupported format_version in " + path);
  RegressorChain rc;
  rc.with_clearance = j.at("variant").get<std::string>() == "rc_delta";
  const auto hmin = j.at("hull_min").get<std::vector<double>>();
  const auto hmax = j.at("hull_max").get<std::vector<double>>();
  rc.hull_min = Eigen::Map<const Eigen::VectorXd>(hmin.data(), hmin.size());
  rc.hull_max = Eigen::Map<const Eigen::VectorXd>(hmax.data(), hmax.size());
  rc.y1 = mlp_from_json(j.at("y1"));
  rc.y2 = mlp_from_json(j.at("y2"));
  rc.y3 = mlp_from_json(j.at("y3"));
  return rc;
}

}  // namespace dmpoa
