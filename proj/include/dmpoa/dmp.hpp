#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "dmpoa/common.hpp"

namespace dmpoa {

// Canonical system state, tau*kdot = -alpha_k*k. alpha_k defaults to ln(100)
// so the phase reaches 0.01 at t = tau.
struct PhaseState {
  double k = 1.0;
  double alpha_k = std::log(100.0);
  double tau = 1.0;
};

PhaseState step_canonical(const PhaseState& s, double dt);

// One transformation-system DoF: tau*zdot = alpha_x(beta_x(g - x) - z) + f + C,
// tau*xdot = z. Defaults are the critically damped pair.
struct TransformState {
  double x = 0.0;
  double z = 0.0;
  double g = 0.0;
  double alpha_x = 25.0;
  double beta_x = 6.25;
};

TransformState step_transform(const TransformState& t, double k, double f_val,
                              double c_val, double dt, double tau);

// RBF forcing term, f(k) = (sum w_i psi_i / sum psi_i) * k.
struct ForcingTerm {
  std::vector<double> w;
  std::vector<double> c;
  std::vector<double> h;
};

// Centers exponentially spaced in phase (uniform in time), h_i = 1/(c_{i+1}-c_i)^2.
ForcingTerm make_forcing_basis(int n_basis, double alpha_k = std::log(100.0));

double eval_forcing(const ForcingTerm& f, double k, bool* degenerate = nullptr);

// Fits weights so a rollout from the demo start reproduces the demo.
// times must be strictly increasing, values one sample per time.
ForcingTerm fit_forcing(const std::vector<double>& times,
                        const std::vector<double>& values, int n_basis,
                        double goal, double alpha_x = 25.0, double beta_x = 6.25);

// Start-goal referenced frame: local x points start->goal, local z is the
// orthogonalised world-up, y completes the right-handed triad.
struct LocalFrame {
  Vec3 origin = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();  // columns are the local axes in world coords

  static LocalFrame from_start_goal(const Vec3& start, const Vec3& goal,
                                    const Vec3& world_up = Vec3(0, 0, 1));
  Vec3 to_local(const Vec3& p_world) const { return rotation.transpose() * (p_world - origin); }
  Vec3 from_local(const Vec3& p_local) const { return origin + rotation * p_local; }
};

double scale_duration(double tau_nominal, double nominal_len, double estimated_len);

// Three transformation systems sharing one canonical system.
struct Dmp3 {
  PhaseState phase;
  std::array<TransformState, 3> dof;
  std::array<ForcingTerm, 3> forcing;  // empty weight vectors mean unforced
  double t = 0.0;

  static Dmp3 straight_line(const Vec3& start, const Vec3& goal, double tau);

  Vec3 position() const { return {dof[0].x, dof[1].x, dof[2].x}; }
  Vec3 velocity() const { return Vec3(dof[0].z, dof[1].z, dof[2].z) / phase.tau; }
  void step(double dt, const Vec3& coupling = Vec3::Zero());
};

struct Demo {
  std::vector<double> t;
  std::vector<Vec3> p;
};

// Plain-text table, one "time x y z" row per line.
Demo load_demo(const std::string& path);

}  // namespace dmpoa
