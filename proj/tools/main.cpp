#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmpoa/chain.hpp"
#include "dmpoa/config.hpp"
#include "dmpoa/sim.hpp"
#include "dmpoa/superquadric.hpp"

namespace {

constexpr const char* kVersion = "dmpoa 1.0.0 (chain format 1, aggregates format 1)";

// Exit codes: 0 success, 1 usage/config, 2 I/O, 3 assertion (collision /
// infeasible route).
enum ExitCode { kOk = 0, kUsage = 1, kIo = 2, kAssertion = 3 };

// Named sub-streams off the root seed so commands never share RNG state.
std::uint64_t substream(std::uint64_t root, std::uint64_t tag) {
  std::uint64_t z = root + tag * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int cmd_gen_dataset(const std::string& out, int scenarios, int grid,
                    double baseline, std::uint64_t seed, int jobs) {
  const dmpoa::ParamGrid pg = dmpoa::ParamGrid::make(grid, grid, grid);
  dmpoa::DatasetOptions opt;
  opt.baseline = baseline;
  opt.jobs = jobs;
  const auto data = dmpoa::gen_dataset(scenarios, pg, substream(seed, 1), opt);
  dmpoa::save_dataset_csv(out, data);
  std::printf("wrote %zu samples to %s\n", data.size(), out.c_str());
  return kOk;
}

int cmd_train(const std::string& dataset, const std::string& out,
              const std::string& variant, double test_fraction,
              std::uint64_t seed) {
  const auto data = dmpoa::load_dataset_csv(dataset);
  const auto [train_set, test_set] =
      dmpoa::split_dataset(data, 1.0 - test_fraction, substream(seed, 2));
  dmpoa::ChainReport report;
  const bool with_clearance = variant == "rc-delta";
  const auto rc = dmpoa::train_chain(train_set, test_set, with_clearance,
                                     substream(seed, 3), &report);
  dmpoa::save_chain_json(out, rc);
  std::printf("variant %s (%zu train / %zu test rows)\n", variant.c_str(),
              train_set.size(), test_set.size());
  std::printf("%-8s %12s %12s\n", "model", "train NMSE", "test NMSE");
  const char* names[3] = {"Y1", "Y2", "Y3"};
  for (int i = 0; i < 3; ++i)
    std::printf("%-8s %12.6g %12.6g\n", names[i], report.train_nmse[i],
                report.test_nmse[i]);
  std::printf("wrote %s\n", out.c_str());
  return kOk;
}

int cmd_eval(const std::string& model, const std::string& model_rc,
             const std::string& suite, int n, const std::string& out_csv,
             const std::string& out_json, std::uint64_t seed, int jobs,
             bool assert_safe) {
  const dmpoa::RegressorChain rc = dmpoa::load_chain_json(model);
  std::vector<dmpoa::EpisodeRow> rows;

  if (suite == "familiar") {
    auto scenarios = dmpoa::gen_familiar_suite(n, substream(seed, 4));
    const double clearances[5] = {0.05, 0.10, 0.15, 0.20, 0.25};
    for (bool scaled : {true, false}) {
      dmpoa::EpisodeOptions opt;
      opt.scale_tau = scaled;
      if (rc.with_clearance) {
        for (double delta : clearances) {
          for (auto& sc : scenarios) sc.clearance = delta;
          char tag[64];
          std::snprintf(tag, sizeof tag, "rc_delta_%.2f_%s", delta,
                        scaled ? "scaled" : "unscaled");
          const auto r = dmpoa::evaluate_suite(scenarios, rc, opt, tag, jobs);
          rows.insert(rows.end(), r.begin(), r.end());
        }
      } else {
        const auto r = dmpoa::evaluate_suite(
            scenarios, rc, opt, scaled ? "rc_scaled" : "rc_unscaled", jobs);
        rows.insert(rows.end(), r.begin(), r.end());
      }
      if (!model_rc.empty()) {
        const dmpoa::RegressorChain rc0 = dmpoa::load_chain_json(model_rc);
        const auto r = dmpoa::evaluate_suite(
            scenarios, rc0, opt, scaled ? "rc_scaled" : "rc_unscaled", jobs);
        rows.insert(rows.end(), r.begin(), r.end());
      }
    }
  } else if (suite == "novel") {
    const auto scenarios = dmpoa::gen_novel_suite(n, substream(seed, 5));
    const double baselines[4] = {0.5, 1.0, 1.5, 2.0};
    dmpoa::EpisodeOptions opt;
    int offset = 0;
    for (double L : baselines) {
      std::vector<dmpoa::Scenario> slice(scenarios.begin() + offset,
                                         scenarios.begin() + offset + n);
      offset += n;
      char tag[64];
      std::snprintf(tag, sizeof tag, "goal_at_%.1fm", L);
      const auto r = dmpoa::evaluate_suite(slice, rc, opt, tag, jobs);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  } else {
    std::fprintf(stderr, "unknown suite '%s' (familiar|novel)\n", suite.c_str());
    return kUsage;
  }

  if (!out_csv.empty()) dmpoa::save_rows_csv(out_csv, rows);
  const auto aggs = dmpoa::aggregate_rows(rows);
  if (!out_json.empty()) dmpoa::save_aggregates_json(out_json, aggs);
  std::printf("%-24s %9s %10s %14s %14s %14s\n", "setting", "episodes",
              "collisions", "mean_clear", "mean_conv", "max_conv");
  int collisions = 0;
  for (const auto& a : aggs) {
    collisions += a.collisions;
    std::printf("%-24s %9d %10d %14.4f %14.5f %14.5f\n", a.setting.c_str(),
                a.episodes, a.collisions, a.mean_clearance, a.mean_convergence,
                a.max_convergence);
  }
  if (assert_safe && collisions > 0) {
    std::fprintf(stderr, "assertion failed: %d collisions\n", collisions);
    return kAssertion;
  }
  return kOk;
}

int cmd_fit(const std::string& cloud_path, const std::string& out,
            const std::string& dilate, bool ellipsoid) {
  dmpoa::PointCloud cloud = dmpoa::load_cloud(cloud_path);
  bool dilated = false;
  if (!dilate.empty()) {
    dmpoa::Vec3 h;
    if (std::sscanf(dilate.c_str(), "%lf,%lf,%lf", &h.x(), &h.y(), &h.z()) != 3) {
      std::fprintf(stderr, "--dilate expects hx,hy,hz\n");
      return kUsage;
    }
    if (h.norm() > 0.0) {
      cloud = dmpoa::dilate_cloud(cloud, h);
      dilated = true;
    }
  }
  dmpoa::FitOptions opt;
  opt.fix_ellipsoid = ellipsoid;
  const dmpoa::Superquadric sq = dmpoa::fit_superquadric(cloud, opt);
  nlohmann::json j;
  j["center"] = {sq.center.x(), sq.center.y(), sq.center.z()};
  j["semi_axes"] = {sq.semi_axes.x(), sq.semi_axes.y(), sq.semi_axes.z()};
  j["exponents"] = {sq.e_z, sq.e_xy};
  j["orientation"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r)
    j["orientation"].push_back(
        {sq.orientation(r, 0), sq.orientation(r, 1), sq.orientation(r, 2)});
  j["residual"] = sq.residual;
  j["converged"] = sq.converged;
  j["dilated"] = dilated;
  const std::string text = j.dump(2);
  if (out.empty()) {
    std::printf("%s\n", text.c_str());
  } else {
    std::FILE* f = std::fopen(out.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open " + out);
    std::fprintf(f, "%s\n", text.c_str());
    std::fclose(f);
  }
  return kOk;
}

int cmd_simulate(const std::string& scenario_path, const std::string& model,
                 bool guided, bool scale_tau, const std::string& dump_traj) {
  const dmpoa::Scenario sc = dmpoa::load_scenario_json(scenario_path);
  dmpoa::RegressorChain rc;
  if (!sc.obstacles.empty()) rc = dmpoa::load_chain_json(model);
  dmpoa::EpisodeOptions opt;
  opt.guided = guided;
  opt.scale_tau = scale_tau;
  opt.record_trajectory = !dump_traj.empty();
  std::pair<dmpoa::Trajectory, dmpoa::Metrics> result;
  try {
    result = dmpoa::run_episode(sc, sc.obstacles.empty() ? nullptr : &rc, opt);
  } catch (const std::runtime_error& e) {
    // Infeasible route selection or a diverged episode.
    std::fprintf(stderr, "episode failed: %s\n", e.what());
    return kAssertion;
  }
  const auto& [traj, m] = result;
  if (!dump_traj.empty()) dmpoa::save_trajectory(dump_traj, traj);
  std::printf("collided    %s\n", m.collided ? "yes" : "no");
  std::printf("clearance   %.6f\n", m.clearance);
  std::printf("convergence %.6f\n", m.convergence);
  std::printf("tau         %.6f\n", m.tau);
  return m.collided ? kAssertion : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical DMP obstacle avoidance: dataset generation, "
               "regressor-chain training, suite evaluation, superquadric "
               "fitting, and episode simulation"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config")->configurable(false);
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int jobs = 1;
  app.add_option("--seed", seed, "root RNG seed")->capture_default_str();
  app.add_option("--jobs", jobs, "worker cap")->check(CLI::PositiveNumber)
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen-dataset", "generate the exploration dataset");
  std::string gen_out = "dataset.csv";
  int gen_scenarios = 100, gen_grid = 20;
  double gen_baseline = 1.0;
  gen->add_option("--out", gen_out, "output CSV")->capture_default_str();
  gen->add_option("--scenarios", gen_scenarios, "obstacle geometries")
      ->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--grid", gen_grid, "points per parameter axis")
      ->check(CLI::Range(2, 1000))->capture_default_str();
  gen->add_option("--baseline", gen_baseline, "baseline length [m]")
      ->check(CLI::PositiveNumber)->capture_default_str();

  auto* train = app.add_subcommand("train", "train a regressor chain");
  std::string train_dataset, train_out = "chain.json", train_variant = "rc-delta";
  double train_test_fraction = 0.25;
  train->add_option("--dataset", train_dataset, "dataset CSV")->required();
  train->add_option("--out", train_out, "model JSON")->capture_default_str();
  train->add_option("--variant", train_variant, "rc | rc-delta")
      ->check(CLI::IsMember({"rc", "rc-delta"}))->capture_default_str();
  train->add_option("--test-fraction", train_test_fraction, "held-out fraction")
      ->check(CLI::Range(0.05, 0.9))->capture_default_str();

  auto* eval = app.add_subcommand("eval", "run an evaluation suite");
  std::string eval_model, eval_model_rc, eval_suite = "novel";
  std::string eval_csv = "episodes.csv", eval_json = "aggregates.json";
  int eval_n = 50;
  bool eval_assert_safe = false;
  eval->add_option("--model", eval_model, "chain JSON")->required();
  eval->add_option("--model-rc", eval_model_rc,
                   "unconstrained chain for the familiar-suite settings");
  eval->add_option("--suite", eval_suite, "familiar | novel")
      ->check(CLI::IsMember({"familiar", "novel"}))->capture_default_str();
  eval->add_option("--n", eval_n, "scenarios (per baseline for novel)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--out-csv", eval_csv, "per-episode CSV")->capture_default_str();
  eval->add_option("--out-json", eval_json, "aggregate JSON")->capture_default_str();
  eval->add_flag("--assert-safe", eval_assert_safe, "exit 3 on any collision");

  auto* fit = app.add_subcommand("fit", "fit a superquadric to a point cloud");
  std::string fit_cloud, fit_out, fit_dilate;
  bool fit_ellipsoid = false;
  fit->add_option("--cloud", fit_cloud, "XYZ table or ASCII PLY")->required();
  fit->add_option("--out", fit_out, "output JSON (default stdout)");
  fit->add_option("--dilate", fit_dilate, "half extents hx,hy,hz");
  fit->add_flag("--ellipsoid", fit_ellipsoid, "fix both exponents to 1");

  auto* sim = app.add_subcommand("simulate", "run one scenario");
  std::string sim_scenario, sim_model, sim_dump;
  bool sim_guided = false, sim_no_scale = false;
  sim->add_option("--scenario", sim_scenario, "scenario JSON")->required();
  sim->add_option("--model", sim_model, "chain JSON");
  sim->add_flag("--guided", sim_guided, "enable route selection + guidance");
  sim->add_flag("--no-scale-tau", sim_no_scale, "disable duration scaling");
  sim->add_option("--dump-traj", sim_dump, "trajectory text output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed())
      return cmd_gen_dataset(gen_out, gen_scenarios, gen_grid, gen_baseline,
                             seed, jobs);
    if (train->parsed())
      return cmd_train(train_dataset, train_out, train_variant,
                       train_test_fraction, seed);
    if (eval->parsed())
      return cmd_eval(eval_model, eval_model_rc, eval_suite, eval_n, eval_csv,
                      eval_json, seed, jobs, eval_assert_safe);
    if (fit->parsed()) return cmd_fit(fit_cloud, fit_out, fit_dilate, fit_ellipsoid);
    if (sim->parsed())
      return cmd_simulate(sim_scenario, sim_model, sim_guided, !sim_no_scale,
                          sim_dump);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  }
  return kUsage;
}
