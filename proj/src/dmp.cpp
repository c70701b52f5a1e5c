#include "dmpoa/dmp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dmpoa {

PhaseState step_canonical(const PhaseState& s, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_canonical: dt must be > 0");
  if (!(s.k > 0.0) || s.k > 1.0)
    throw std::invalid_argument("step_canonical: k must be in (0,1]");
  PhaseState out = s;
  out.k = s.k - dt * s.alpha_k * s.k / s.tau;
  if (out.k <= 0.0) out.k = std::nextafter(0.0, 1.0);
  return out;
}

TransformState step_transform(const TransformState& t, double /*k*/, double f_val,
                              double c_val, double dt, double tau) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_transform: dt must be > 0");
  if (!std::isfinite(t.x) || !std::isfinite(t.z) || !std::isfinite(f_val) ||
      !std::isfinite(c_val) || !std::isfinite(tau))
    throw std::invalid_argument("step_transform: non-finite input");
  TransformState out = t;
  const double zdot = (t.alpha_x * (t.beta_x * (t.g - t.x) - t.z) + f_val + c_val) / tau;
  out.z = t.z + dt * zdot;
  out.x = t.x + dt * t.z / tau;
  return out;
}

ForcingTerm make_forcing_basis(int n_basis, double alpha_k) {
  if (n_basis < 1) throw std::invalid_argument("make_forcing_basis: n_basis >= 1");
  ForcingTerm f;
  f.c.resize(n_basis);
  f.h.resize(n_basis);
  f.w.assign(n_basis, 0.0);
  // Exponential spacing in phase corresponds to uniform spacing in time.
  for (int i = 0; i < n_basis; ++i) {
    double ti = n_basis == 1 ? 0.5 : double(i) / (n_basis - 1);
    f.c[i] = std::exp(-alpha_k * ti);
  }
  for (int i = 0; i < n_basis; ++i) {
    const double gap = n_basis == 1 ? 0.5
                       : (i + 1 < n_basis ? std::fabs(f.c[i + 1] - f.c[i])
                                          : std::fabs(f.c[i] - f.c[i - 1]));
    f.h[i] = 1.0 / (gap * gap);
  }
  return f;
}

double eval_forcing(const ForcingTerm& f, double k, bool* degenerate) {
  if (!(k > 0.0) || k > 1.0)
    throw std::invalid_argument("eval_forcing: k must be in (0,1]");
  if (f.w.empty()) return 0.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < f.w.size(); ++i) {
    const double dk = k - f.c[i];
    const double psi = std::exp(-f.h[i] * dk * dk);
    num += f.w[i] * psi;
    den += psi;
  }
  if (den < 1e-300) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  return num / den * k;
}

ForcingTerm fit_forcing(const std::vector<double>& times,
                        const std::vector<double>& values, int n_basis,
                        double goal, double alpha_x, double beta_x) {
  const std::size_t n = times.size();
  if (n < 3 || values.size() != n)
    throw std::invalid_argument("fit_forcing: need >= 3 samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("fit_forcing: times must be strictly increasing");

  const double tau = times.back() - times.front();
  const double alpha_k = std::log(100.0);
  ForcingTerm f = make_forcing_basis(n_basis, alpha_k);

  // Pointwise forcing target from finite differences:
  // f_t = tau^2*xdd - alpha_x*(beta_x*(g - x) - tau*xd).
  std::vector<double> ks(n), ft(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = times[i] - times.front();
    ks[i] = std::exp(-alpha_k * t / tau);
    double xd, xdd;
    if (i == 0) {
      xd = (values[1] - values[0]) / (times[1] - times[0]);
      xdd = (values[2] - 2 * values[1] + values[0]) /
            ((times[2] - times[1]) * (times[1] - times[0]));
    } else if (i + 1 == n) {
      xd = (values[n - 1] - values[n - 2]) / (times[n - 1] - times[n - 2]);
      xdd = (values[n - 1] - 2 * values[n - 2] + values[n - 3]) /
            ((times[n - 1] - times[n - 2]) * (times[n - 2] - times[n - 3]));
    } else {
      xd = (values[i + 1] - values[i - 1]) / (times[i + 1] - times[i - 1]);
      xdd = (values[i + 1] - 2 * values[i] + values[i - 1]) /
            (0.25 * (times[i + 1] - times[i - 1]) * (times[i + 1] - times[i - 1]));
    }
    ft[i] = tau * tau * xdd - alpha_x * (beta_x * (goal - values[i]) - tau * xd);
  }

  // Per-basis weighted least squares against f(k) = w_i * k locally.
  for (int b = 0; b < n_basis; ++b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dk = ks[i] - f.c[b];
      const double psi = std::exp(-f.h[b] * dk * dk);
      num += psi * ks[i] * ft[i];
      den += psi * ks[i] * ks[i];
    }
    f.w[b] = den > 1e-12 ? num / den : 0.0;
  }
  return f;
}

LocalFrame LocalFrame::from_start_goal(const Vec3& start, const Vec3& goal,
                                       const Vec3& world_up) {
  const Vec3 d = goal - start;
  if (d.norm() < 1e-12)
    throw std::invalid_argument("LocalFrame: start and goal coincide");
  LocalFrame fr;
  fr.origin = start;
  const Vec3 ex = d.normalized();
  Vec3 ez = world_up - world_up.dot(ex) * ex;
  if (ez.norm() < 1e-9) {
    // Start->goal is vertical; any horizontal axis works, pick world x.
    ez = Vec3(1, 0, 0) - Vec3(1, 0, 0).dot(ex) * ex;
  }
  ez.normalize();
  const Vec3 ey = ez.cross(ex);
  fr.rotation.col(0) = ex;
  fr.rotation.col(1) = ey;
  fr.rotation.col(2) = ez;
  return fr;
}

double scale_duration(double tau_nominal, double nominal_len, double estimated_len) {
  if (!(nominal_len > 0.0) || !(estimated_len > 0.0))
    throw std::invalid_argument("scale_duration: lengths must be > 0");
  return tau_nominal * estimated_len / nominal_len;
}

Dmp3 Dmp3::straight_line(const Vec3& start, const Vec3& goal, double tau) {
  Dmp3 d;
  d.phase = PhaseState{1.0, std::log(100.0), tau};
  for (int i = 0; i < 3; ++i) {
    d.dof[i].x = start[i];
    d.dof[i].z = 0.0;
    d.dof[i].g = goal[i];
  }
  return d;
}

void Dmp3::step(double dt, const Vec3& coupling) {
  const double k = phase.k;
  for (int i = 0; i < 3; ++i) {
    const double fv = eval_forcing(forcing[i], k);
    dof[i] = step_transform(dof[i], k, fv, coupling[i], dt, phase.tau);
  }
  phase = step_canonical(phase, dt);
  t += dt;
}

Demo load_demo(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_demo: cannot open " + path);
  Demo d;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, x, y, z;
    if (ss >> t >> x >> y >> z) {
      d.t.push_back(t);
      d.p.emplace_back(x, y, z);
    }
  }
  if (d.t.size() < 3) throw std::runtime_error("load_demo: need >= 3 rows in " + path);
  return d;
}

}  // namespace dmpoa
