#include "dmpoa/section.hpp"

#include <algorithm>
#include <cmath>

namespace dmpoa {

namespace {

// Largest root of g(t) = sum_i (a_i p_i / (a_i^2 + t))^2 = 1; the nearest
// surface point is y_i = a_i^2 p_i / (a_i^2 + t). Safeguarded Newton on a
// monotone bracket.
template <int N>
double nearest_point_parameter(const double* a, const double* p) {
  double pole = 0.0;  // -min a_i^2 over components with |p_i| > 0
  bool any = false;
  for (int i = 0; i < N; ++i) {
    if (std::fabs(p[i]) > 1e-14) {
      const double a2 = a[i] * a[i];
      pole = any ? std::min(pole, a2) : a2;
      any = true;
    }
  }
  if (!any) return std::numeric_limits<double>::quiet_NaN();  // caller handles center

  auto g = [&](double t, double* dg = nullptr) {
    double s = 0.0, d = 0.0;
    for (int i = 0; i < N; ++i) {
      const double denom = a[i] * a[i] + t;
      const double term = a[i] * p[i] / denom;
      s += term * term;
      d += -2.0 * term * term / denom;
    }
    if (dg) *dg = d;
    return s;
  };

  double lo, hi;
  if (g(0.0) >= 1.0) {  // on or outside: root at t >= 0
    lo = 0.0;
    hi = 1.0;
    while (g(hi) > 1.0) hi *= 4.0;
  } else {  // inside: root in (-pole, 0)
    hi = 0.0;
    lo = -pole;
    double shift = pole * 0.5;
    for (int guard = 0; guard < 200 && g(lo + shift) < 1.0; ++guard) shift *= 0.5;
    lo += shift;
    if (g(lo) < 1.0) {  // bracket search bottomed out at the pole
      return lo;
    }
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    double dg;
    const double gt = g(t, &dg) - 1.0;
    if (std::fabs(gt) < 1e-14) break;
    if (gt > 0.0) lo = t; else hi = t;
    double tn = t - gt / dg;
    if (!(tn > lo) || !(tn < hi)) tn = 0.5 * (lo + hi);
    if (std::fabs(tn - t) < 1e-15 * (1.0 + std::fabs(t))) { t = tn; break; }
    t = tn;
  }
  return t;
}

template <int N>
double surface_distance_local(const double* a, const double* p) {
  double norm2 = 0.0;
  for (int i = 0; i < N; ++i) norm2 += p[i] * p[i];
  if (norm2 < 1e-28) {  // center: nearest surface at the smallest semi-axis
    double amin = a[0];
    for (int i = 1; i < N; ++i) amin = std::min(amin, a[i]);
    return amin;
  }
  const double t = nearest_point_parameter<N>(a, p);
  double d2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double yi = a[i] * a[i] * p[i] / (a[i] * a[i] + t);
    d2 += (yi - p[i]) * (yi - p[i]);
  }
  return std::sqrt(d2);
}

}  // namespace

double ellipse_surface_distance(double a, double b, double px, double py) {
  const double axes[2] = {a, b};
  const double p[2] = {px, py};
  const double f = (px / a) * (px / a) + (py / b) * (py / b);
  if (f <= 1.0) return 0.0;
  return surface_distance_local<2>(axes, p);
}

double ellipsoid_signed_distance(const Superquadric& ell, const Vec3& p) {
  const Vec3 q = ell.orientation.transpose() * (p - ell.center);
  const double axes[3] = {ell.semi_axes.x(), ell.semi_axes.y(), ell.semi_axes.z()};
  const double qq[3] = {q.x(), q.y(), q.z()};
  const double dist = surface_distance_local<3>(axes, qq);
  const double f = (q.x() / axes[0]) * (q.x() / axes[0]) +
                   (q.y() / axes[1]) * (q.y() / axes[1]) +
                   (q.z() / axes[2]) * (q.z() / axes[2]);
  return f < 1.0 ? -dist : dist;
}

double ellipsoid_surface_distance(const Superquadric& ell, const Vec3& p) {
  return std::max(0.0, ellipsoid_signed_distance(ell, p));
}

double EllipseSection::support(const Vec3& u) const {
  const double c1 = semi[0] * axis1.dot(u);
  const double c2 = semi[1] * axis2.dot(u);
  return std::sqrt(c1 * c1 + c2 * c2);
}

Vec3 EllipseSection::support_point(const Vec3& u) const {
  const double r = support(u);
  if (r < 1e-15) return center;
  const Vec3 grad = semi[0] * semi[0] * axis1.dot(u) * axis1 +
                    semi[1] * semi[1] * axis2.dot(u) * axis2;
  return center + grad / r;
}

EllipseSection section_pplane(const Superquadric& ell, const Vec3& plane_origin,
                              const Vec3& plane_normal) {
  if (!ell.is_ellipsoid())
    throw std::invalid_argument("section_pplane: e_z = e_xy = 1 required");
  const Vec3 n = plane_normal.normalized();
  // A maps the unit sphere onto the ellipsoid.
  const Mat3 A = ell.orientation * ell.semi_axes.asDiagonal();

  // Plane in sphere coordinates: m^T y = delta.
  const Vec3 m = A.transpose() * n;
  const double mn = m.norm();
  const Vec3 mh = m / mn;
  double delta = n.dot(plane_origin - ell.center) / mn;

  EllipseSection sec;
  if (std::fabs(delta) >= 1.0) {
    sec.fallback = true;
    delta = 0.0;
  }
  const double rho = std::sqrt(std::max(0.0, 1.0 - delta * delta));

  // Orthonormal in-plane basis around mh.
  Vec3 u = mh.cross(std::fabs(mh.z()) < 0.9 ? Vec3(0, 0, 1) : Vec3(0, 1, 0));
  u.normalize();
  const Vec3 v = mh.cross(u);

  // The circle q + rho (u cos, v sin) maps to an ellipse; its semi-axes are
  // the singular values of rho * A [u v].
  Eigen::Matrix<double, 3, 2> M;
  M.col(0) = rho * (A * u);
  M.col(1) = rho * (A * v);
  Eigen::JacobiSVD<Eigen::Matrix<double, 3, 2>> svd(
      M, Eigen::ComputeFullU | Eigen::ComputeFullV);

  sec.center = ell.center + A * (delta * mh);
  sec.semi = svd.singularValues();
  sec.axis1 = svd.matrixU().col(0);
  sec.axis2 = svd.matrixU().col(1);
  sec.normal = n;
  // Keep a right-handed, plane-consistent basis.
  if (sec.axis1.cross(sec.axis2).dot(n) < 0.0) sec.axis2 *= -1.0;
  return sec;
}

double estimate_path_length(const Vec3& start, const Vec3& goal,
                            const std::vector<EllipseSection>& sections,
                            const std::vector<Vec3>* side_hints) {
  const Vec3 chord = goal - start;
  const double L = chord.norm();
  if (L < 1e-12)
    throw std::invalid_argument("estimate_path_length: start equals goal");
  const Vec3 dir = chord / L;

  std::vector<std::pair<double, Vec3>> waypoints;
  waypoints.reserve(sections.size());
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& sec = sections[i];
    Vec3 side;
    if (side_hints && i < side_hints->size()) {
      side = (*side_hints)[i];
    } else {
      const Vec3 off = sec.center - start;
      side = -(off - off.dot(dir) * dir);
      if (side.norm() < 1e-9) side = Vec3(0, 0, 1) - dir.z() * dir;
    }
    side -= side.dot(dir) * dir;  // lateral component only
    if (side.norm() < 1e-12) side = Vec3(0, 0, 1) - dir.z() * dir;
    side.normalize();
    const Vec3 xp = sec.support_point(side);
    waypoints.emplace_back((xp - start).dot(dir), xp);
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
  return len;
}

}  // namespace dmpoa
