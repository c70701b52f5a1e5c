// End-to-end acceptance run: prints one PASS/FAIL line per criterion and
// exits non-zero when any of them fails. Heavy artifacts (dataset, trained
// chains, evaluation suites) are built once and shared; progress goes to
// stderr so stdout stays one line per criterion.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "dmpoa/chain.hpp"
#include "dmpoa/route.hpp"
#include "dmpoa/section.hpp"
#include "dmpoa/sim.hpp"

using namespace dmpoa;

namespace {

// Pinned seeds, matching the CLI's sub-stream scheme.
constexpr std::uint64_t kModelSeed = 7;
constexpr std::uint64_t kFamiliarSeed = 11;
constexpr std::uint64_t kNovelSeed = 13;

std::uint64_t substream(std::uint64_t root, std::uint64_t tag) {
  std::uint64_t z = root + tag * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

int g_failures = 0;

void report(int idx, const char* name, bool ok) {
  std::printf("criterion %2d [%s] %s\n", idx, ok ? "PASS" : "FAIL", name);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void progress(const char* msg) {
  std::fprintf(stderr, "... %s\n", msg);
  std::fflush(stderr);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// --- criterion 1: the proposed term has no dead zone ------------------------

bool dead_zone_shape() {
  const double d = 0.1;
  AvoidanceParams p;  // defaults: alpha 100, psi 0.5, kappa 10
  auto oa_mag = [&](double theta) {
    const SystemKinematics s{Vec3::Zero(), Vec3(1, 0, 0)};
    const Vec3 obs(std::cos(theta), std::sin(theta), 0);
    return coupling_oa(s, obs, d, p).norm();
  };
  auto orig_mag = [&](double theta) {
    const SystemKinematics s{Vec3::Zero(), Vec3(1, 0, 0)};
    const Vec3 obs(std::cos(theta), std::sin(theta), 0);
    return coupling_original(s, obs, p.gamma, p.beta).norm();
  };
  const double at_zero = oa_mag(1e-6);
  double orig_max = 0.0;
  bool ok = true;
  for (int i = 0; i <= 2000; ++i) {
    const double theta = 1e-6 + (kPi - 1e-6) * i / 2000.0;
    ok = ok && oa_mag(theta) <= at_zero + 1e-12;
    orig_max = std::max(orig_max, orig_mag(theta));
  }
  ok = ok && orig_mag(1e-6) < 0.01 * orig_max;
  return ok;
}

// --- criterion 2: head-on rescue with matched gain scales --------------------

bool head_on_rescue() {
  const auto cmp = compare_dead_zone(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, 0, 0));
  // The baseline term never reacts on the axis and passes through the point;
  // 5 mm against a point obstacle counts as a collision, 2 cm as avoidance.
  return cmp.original_min_distance < 5e-3 && cmp.proposed_min_distance > 2e-2;
}

// --- criterion 3: coupling terms orthogonal to the velocity ------------------

bool orthogonality() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AvoidanceParams p;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 x(u(rng), u(rng), u(rng));
    Vec3 v(u(rng), u(rng), u(rng));
    if (v.norm() < 0.1) v = Vec3(1, 0, 0);
    Vec3 obs(u(rng), u(rng), u(rng));
    if ((obs - x).norm() < 0.1) obs = x + Vec3(0.4, 0.3, 0.2);
    const SystemKinematics s{x, v};
    const double d = 0.05 + 0.3 * std::fabs(u(rng));
    GuidanceTarget g;
    g.xdot_d = (obs - x).normalized();
    g.active = true;
    const Vec3 c_oa = coupling_oa(s, obs, d, p);
    const Vec3 c_hg = coupling_hg(s, g, d, p);
    const Vec3 c_sum = compose(s, {{obs, d, p}}, g);
    for (const Vec3& c : {c_oa, c_hg, c_sum}) {
      if (c.norm() < 1e-15) continue;
      if (std::fabs(c.dot(v)) / (c.norm() * v.norm()) >= 1e-9) return false;
    }
  }
  return true;
}

// --- criterion 4: superquadric recovery ---------------------------------------

bool superquadric_recovery() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Superquadric truth;
    truth.semi_axes =
        Vec3(0.1 + 0.4 * std::fabs(u(rng)), 0.1 + 0.4 * std::fabs(u(rng)),
             0.1 + 0.4 * std::fabs(u(rng)));
    truth.center = Vec3(u(rng), u(rng), u(rng));
    truth.orientation = (Eigen::AngleAxisd(u(rng) * kPi, Vec3::UnitZ()) *
                         Eigen::AngleAxisd(u(rng) * kPi / 2, Vec3::UnitY()) *
                         Eigen::AngleAxisd(u(rng) * kPi, Vec3::UnitX()))
                            .toRotationMatrix();
    PointCloud cloud;
    // ~500 surface points on a spherical grid mapped onto the ellipsoid.
    for (int i = 1; i < 20; ++i) {
      const double th = kPi * i / 20;
      for (int j = 0; j < 26; ++j) {
        const double ph = 2 * kPi * j / 26;
        const Vec3 dir(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph),
                       std::cos(th));
        cloud.points.push_back(truth.center + truth.orientation *
                                                  dir.cwiseProduct(truth.semi_axes));
      }
    }
    FitOptions opt;
    opt.fix_ellipsoid = true;
    const Superquadric fit = fit_superquadric(cloud, opt);
    Vec3 got = fit.semi_axes, want = truth.semi_axes;
    std::sort(got.data(), got.data() + 3);
    std::sort(want.data(), want.data() + 3);
    for (int i = 0; i < 3; ++i)
      if (std::fabs(got[i] - want[i]) / want[i] >= 0.02) return false;
    if ((fit.center - truth.center).norm() >= 1e-2) return false;
  }
  return true;
}

// --- criterion 5: plane section against a dense numerical oracle -------------

void fit_conic(const std::vector<Vec2>& pts, Vec2* semi_sorted, Vec2* center) {
  Eigen::MatrixXd A(pts.size(), 6);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i].x(), y = pts[i].y();
    A.row(i) << x * x, x * y, y * y, x, y, 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinV);
  const Eigen::VectorXd c = svd.matrixV().col(5);
  Eigen::Matrix2d M;
  M << c[0], c[1] / 2, c[1] / 2, c[2];
  const Vec2 ctr = M.ldlt().solve(Vec2(-c[3] / 2, -c[4] / 2));
  const double val = c[0] * ctr.x() * ctr.x() + c[1] * ctr.x() * ctr.y() +
                     c[2] * ctr.y() * ctr.y() + c[3] * ctr.x() + c[4] * ctr.y() + c[5];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(M);
  const double s0 = std::sqrt(-val / eig.eigenvalues()[0]);
  const double s1 = std::sqrt(-val / eig.eigenvalues()[1]);
  *semi_sorted = Vec2(std::max(s0, s1), std::min(s0, s1));
  *center = ctr;
}

bool section_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Superquadric ell;
    ell.semi_axes =
        Vec3(0.3 + 0.5 * std::fabs(u(rng)), 0.3 + 0.5 * std::fabs(u(rng)),
             0.3 + 0.5 * std::fabs(u(rng)));
    ell.center = Vec3(u(rng), u(rng), u(rng));
    ell.orientation = (Eigen::AngleAxisd(u(rng) * kPi, Vec3::UnitZ()) *
                       Eigen::AngleAxisd(u(rng) * kPi / 2, Vec3::UnitY()))
                          .toRotationMatrix();
    Vec3 n(u(rng), u(rng), u(rng));
    if (n.norm() < 0.2) n = Vec3(0, 0, 1);
    n.normalize();
    const Vec3 origin = ell.center + 0.4 * ell.semi_axes.minCoeff() * u(rng) * n;
    const EllipseSection sec = section_pplane(ell, origin, n);
    if (sec.fallback) return false;

    Vec3 up = n.cross(std::fabs(n.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(1, 0, 0));
    up.normalize();
    const Vec3 vp = n.cross(up);
    std::vector<Vec2> pts2;
    for (int i = 0; i < 180; ++i) {
      const double a = 2 * kPi * i / 180;
      const Vec3 d = std::cos(a) * up + std::sin(a) * vp;
      double lo = 0.0, hi = 1e-3;
      while (eval_F(ell, sec.center + hi * d) < 1.0) hi *= 2.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (eval_F(ell, sec.center + mid * d) < 1.0 ? lo : hi) = mid;
      }
      const Vec3 b = sec.center + 0.5 * (lo + hi) * d;
      pts2.emplace_back(up.dot(b - origin), vp.dot(b - origin));
    }
    Vec2 semi, ctr2;
    fit_conic(pts2, &semi, &ctr2);
    if (std::fabs(semi[0] - sec.semi[0]) >= 1e-6) return false;
    if (std::fabs(semi[1] - sec.semi[1]) >= 1e-6) return false;
    const Vec3 ctr3 = origin + ctr2.x() * up + ctr2.y() * vp;
    if ((ctr3 - sec.center).norm() >= 1e-6) return false;
  }
  return true;
}

}  // namespace

int main() {
  namespace fs = std::filesystem;
  const fs::path work = fs::temp_directory_path() / "dmpoa_acceptance";
  fs::create_directories(work);

  report(1, "proposed term peaks at zero heading; baseline term has a dead zone",
         dead_zone_shape());
  report(2, "head-on rescue with matched gain scales", head_on_rescue());
  report(3, "coupling terms orthogonal to the velocity (1000 random configs)",
         orthogonality());
  report(4, "ellipsoid fit recovery across 50 random bodies", superquadric_recovery());
  report(5, "plane section matches the conic oracle on 50 random pairs",
         section_oracle());

  // Shared heavy artifacts: exploration dataset + the two chain variants.
  progress("generating exploration dataset (100 scenarios x 20^3 grid)");
  const ParamGrid grid = ParamGrid::make(20, 20, 20);
  const auto data = gen_dataset(100, grid, substream(kModelSeed, 1));
  progress(("dataset rows: " + std::to_string(data.size())).c_str());
  const auto [train_set, test_set] =
      split_dataset(data, 0.8, substream(kModelSeed, 2));

  progress("training clearance-conditioned chain");
  ChainReport rep_rcd, rep_rc;
  const RegressorChain rcd =
      train_chain(train_set, test_set, true, substream(kModelSeed, 3), &rep_rcd);
  progress("training plain chain");
  const RegressorChain rc =
      train_chain(train_set, test_set, false, substream(kModelSeed, 3), &rep_rc);

  {
    bool ok = true;
    for (int i = 0; i < 3; ++i) {
      ok = ok && rep_rcd.test_nmse[i] < rep_rc.test_nmse[i];
      ok = ok && std::fabs(rep_rcd.train_nmse[i] - rep_rcd.test_nmse[i]) < 0.05;
      ok = ok && std::fabs(rep_rc.train_nmse[i] - rep_rc.test_nmse[i]) < 0.05;
      std::fprintf(stderr, "    Y%d test NMSE  with clearance %.4g  without %.4g\n",
                   i + 1, rep_rcd.test_nmse[i], rep_rc.test_nmse[i]);
    }
    report(6, "clearance input lowers every test NMSE; train/test gaps < 0.05", ok);
  }

  // Familiar suite: 30 ellipses x (5 clearance levels x scaled/unscaled with
  // the conditioned chain + scaled/unscaled with the plain chain).
  progress("running familiar suite (360 episodes)");
  auto familiar = gen_familiar_suite(30, substream(kFamiliarSeed, 4));
  const double kDeltas[5] = {0.05, 0.10, 0.15, 0.20, 0.25};
  std::vector<EpisodeRow> fam_rows;
  std::vector<EpisodeRow> fam_rerun_rows;  // criterion 10, delta 0.25 scaled
  for (bool scaled : {true, false}) {
    EpisodeOptions opt;
    opt.scale_tau = scaled;
    for (double delta : kDeltas) {
      for (auto& sc : familiar) sc.clearance = delta;
      char tag[64];
      std::snprintf(tag, sizeof tag, "rc_delta_%.2f_%s", delta,
                    scaled ? "scaled" : "unscaled");
      const auto r = evaluate_suite(familiar, rcd, opt, tag);
      fam_rows.insert(fam_rows.end(), r.begin(), r.end());
      if (scaled && delta == 0.25)
        fam_rerun_rows = evaluate_suite(familiar, rcd, opt, tag);
    }
    const auto r =
        evaluate_suite(familiar, rc, opt, scaled ? "rc_scaled" : "rc_unscaled");
    fam_rows.insert(fam_rows.end(), r.begin(), r.end());
  }
  const auto fam_aggs = aggregate_rows(fam_rows);
  {
    bool ok = fam_aggs.size() == 12;
    int collisions = 0;
    double conv_scaled[5] = {}, conv_unscaled[5] = {}, max_conv_025 = -1.0;
    for (const auto& a : fam_aggs) {
      collisions += a.collisions;
      std::fprintf(stderr, "    %-24s collisions %d  mean conv %.4f  max conv %.4f\n",
                   a.setting.c_str(), a.collisions, a.mean_convergence,
                   a.max_convergence);
      for (int i = 0; i < 5; ++i) {
        char tag[64];
        std::snprintf(tag, sizeof tag, "rc_delta_%.2f_scaled", kDeltas[i]);
        if (a.setting == tag) conv_scaled[i] = a.mean_convergence;
        std::snprintf(tag, sizeof tag, "rc_delta_%.2f_unscaled", kDeltas[i]);
        if (a.setting == tag) conv_unscaled[i] = a.mean_convergence;
      }
      if (a.setting == "rc_delta_0.25_scaled") max_conv_025 = a.max_convergence;
    }
    ok = ok && collisions == 0;
    ok = ok && max_conv_025 >= 0.0 && max_conv_025 <= 0.03;
    for (int i = 2; i < 5; ++i)  // deltas 0.15, 0.20, 0.25
      ok = ok && conv_unscaled[i] > conv_scaled[i];
    report(7, "familiar suite: no collisions, scaled convergence within 3 cm", ok);
  }

  // Novel suite: 100 scenarios per baseline in {0.5, 1.0, 1.5, 2.0} m.
  progress("running novel suite (400 episodes)");
  const auto novel = gen_novel_suite(100, substream(kNovelSeed, 5));
  const double kBaselines[4] = {0.5, 1.0, 1.5, 2.0};
  std::vector<EpisodeRow> nov_rows;
  std::vector<EpisodeRow> nov_rerun_rows;  // criterion 10, 1.0 m slice
  for (int b = 0; b < 4; ++b) {
    const std::vector<Scenario> slice(novel.begin() + 100 * b,
                                      novel.begin() + 100 * (b + 1));
    char tag[64];
    std::snprintf(tag, sizeof tag, "goal_at_%.1fm", kBaselines[b]);
    const auto r = evaluate_suite(slice, rcd, EpisodeOptions{}, tag);
    nov_rows.insert(nov_rows.end(), r.begin(), r.end());
    if (b == 1) nov_rerun_rows = evaluate_suite(slice, rcd, EpisodeOptions{}, tag);
  }
  const auto nov_aggs = aggregate_rows(nov_rows);
  {
    int collisions = 0;
    bool ok = true;
    for (const auto& a : nov_aggs) {
      collisions += a.collisions;
      std::fprintf(stderr,
                   "    %-14s collisions %d  mean clear %.4f  max conv %.4f\n",
                   a.setting.c_str(), a.collisions, a.mean_clearance,
                   a.max_convergence);
      if (a.setting == "goal_at_1.0m") {
        ok = ok && a.collisions == 0;
        ok = ok && a.mean_clearance >= 0.13 && a.mean_clearance <= 0.23;
        ok = ok && a.max_convergence <= 0.03;
      }
    }
    ok = ok && collisions <= 4;  // success rate >= 99% of 400
    report(8, "novel suite: >= 99% success; 1.0 m slice collision-free", ok);
  }

  // Route selection: a table below the chord plus a tight workspace sphere
  // leave only the upper escape; only the guided episode respects it.
  {
    Scenario sc;
    sc.start = Vec3(0, 0, 0);
    sc.goal = Vec3(1, 0, 0);
    Superquadric ob;
    ob.semi_axes = Vec3(0.12, 0.12, 0.12);
    ob.center = Vec3(0.5, 0, 0.03);
    sc.obstacles.push_back(ob);
    sc.clearance = 0.15;
    WorkspaceModel ws;
    ws.table_z = -0.02;
    ws.ws_center = Vec3(0.5, 0, 0.1);
    ws.ws_radius = 0.25;
    sc.workspace = ws;

    auto min_z = [](const Trajectory& t) {
      double m = 1e30;
      for (const auto& p : t.points) m = std::min(m, p.x.z());
      return m;
    };
    EpisodeOptions unguided, guided;
    guided.guided = true;
    const auto [traj_u, m_u] = run_episode(sc, &rcd, unguided);
    const auto [traj_g, m_g] = run_episode(sc, &rcd, guided);

    const CostRing ring = build_cost_ring(sc.start, sc.goal, sc.obstacles, ws,
                                          guided.ring_dirs, sc.clearance);
    const double omega_d = select_direction(ring);
    double feasible_min = 1e30;
    double chosen_total = 1e30;
    for (std::size_t i = 0; i < ring.omega.size(); ++i) {
      if (ring.table_cost[i] != 0.0 || ring.limits_cost[i] != 0.0) continue;
      feasible_min = std::min(feasible_min, ring.total[i]);
      if (ring.omega[i] == omega_d) chosen_total = ring.total[i];
    }
    bool ok = min_z(traj_u) < ws.table_z;        // reactive route dives below
    ok = ok && min_z(traj_g) >= ws.table_z;      // guided route stays legal
    ok = ok && !m_u.collided && !m_g.collided;
    ok = ok && traj_g.guidance_used && !traj_u.guidance_used;
    ok = ok && chosen_total == feasible_min;
    report(9, "table scene: guided episode holds the half-space at minimum cost", ok);
  }

  // Determinism: per-episode CSV bytes identical across reruns.
  {
    std::vector<EpisodeRow> fam_025;
    for (const auto& r : fam_rows)
      if (r.setting == "rc_delta_0.25_scaled") fam_025.push_back(r);
    std::vector<EpisodeRow> nov_10;
    for (const auto& r : nov_rows)
      if (r.setting == "goal_at_1.0m") nov_10.push_back(r);

    const std::string a1 = (work / "fam_a.csv").string();
    const std::string a2 = (work / "fam_b.csv").string();
    const std::string b1 = (work / "nov_a.csv").string();
    const std::string b2 = (work / "nov_b.csv").string();
    save_rows_csv(a1, fam_025);
    save_rows_csv(a2, fam_rerun_rows);
    save_rows_csv(b1, nov_10);
    save_rows_csv(b2, nov_rerun_rows);
    const bool ok = !slurp(a1).empty() && slurp(a1) == slurp(a2) &&
                    !slurp(b1).empty() && slurp(b1) == slurp(b2);
    report(10, "suite reruns produce byte-identical per-episode csv", ok);
  }

  if (g_failures) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
