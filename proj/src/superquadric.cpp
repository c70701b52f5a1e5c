#include "dmpoa/superquadric.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace dmpoa {

namespace {

PointCloud parse_xyz_stream(std::istream& in, const std::string& what) {
  PointCloud cloud;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double x, y, z;
    if (ss >> x >> y >> z) cloud.points.emplace_back(x, y, z);
  }
  if (cloud.points.empty()) throw std::runtime_error(what + ": no points parsed");
  return cloud;
}

}  // namespace

PointCloud load_cloud_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_cloud_xyz: cannot open " + path);
  return parse_xyz_stream(in, "load_cloud_xyz(" + path + ")");
}

PointCloud load_cloud_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_cloud_ply: cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0)
    throw std::runtime_error("load_cloud_ply: missing ply magic in " + path);
  long vertex_count = -1;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii")
        throw std::runtime_error("load_cloud_ply: only ascii format supported");
    } else if (tok == "element") {
      std::string name;
      ss >> name >> vertex_count;
      if (name != "vertex")
        throw std::runtime_error("load_cloud_ply: only vertex elements supported");
    } else if (tok == "end_header") {
      break;
    }
  }
  if (vertex_count < 0) throw std::runtime_error("load_cloud_ply: bad header in " + path);
  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  for (long i = 0; i < vertex_count && std::getline(in, line); ++i) {
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z))
      throw std::runtime_error("load_cloud_ply: malformed vertex row in " + path);
    cloud.points.emplace_back(x, y, z);
  }
  if ((long)cloud.points.size() != vertex_count)
    throw std::runtime_error("load_cloud_ply: truncated vertex list in " + path);
  return cloud;
}

PointCloud load_cloud(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".ply") return load_cloud_ply(path);
  return load_cloud_xyz(path);
}

double eval_F(const Superquadric& sq, const Vec3& p) {
  const Vec3 q = sq.orientation.transpose() * (p - sq.center);
  const double ax = std::fabs(q.x() / sq.semi_axes.x());
  const double ay = std::fabs(q.y() / sq.semi_axes.y());
  const double az = std::fabs(q.z() / sq.semi_axes.z());
  const double exy = 2.0 / sq.e_xy;
  const double inner = std::pow(ax, exy) + std::pow(ay, exy);
  return std::pow(inner, sq.e_xy / sq.e_z) + std::pow(az, 2.0 / sq.e_z);
}

namespace {

// Parameter packing for the fit: [l1 l2 l3 (e_z e_xy) cx cy cz rx ry rz],
// rotation expressed as a rotation vector applied on top of the PCA basis.
struct FitParams {
  Vec3 axes;
  double e_z, e_xy;
  Vec3 center;
  Vec3 rotvec;
  Mat3 base_rot;
  bool fix_ellipsoid;

  int size() const { return fix_ellipsoid ? 9 : 11; }

  Eigen::VectorXd pack() const {
    Eigen::VectorXd v(size());
    int i = 0;
    v[i++] = axes.x(); v[i++] = axes.y(); v[i++] = axes.z();
    if (!fix_ellipsoid) { v[i++] = e_z; v[i++] = e_xy; }
    v[i++] = center.x(); v[i++] = center.y(); v[i++] = center.z();
    v[i++] = rotvec.x(); v[i++] = rotvec.y(); v[i++] = rotvec.z();
    return v;
  }

  void unpack(const Eigen::VectorXd& v, const FitOptions& opt) {
    int i = 0;
    for (int a = 0; a < 3; ++a) axes[a] = std::max(v[i++], opt.axis_floor);
    if (!fix_ellipsoid) {
      e_z = std::clamp(v[i++], opt.exponent_min, opt.exponent_max);
      e_xy = std::clamp(v[i++], opt.exponent_min, opt.exponent_max);
    }
    for (int a = 0; a < 3; ++a) center[a] = v[i++];
    for (int a = 0; a < 3; ++a) rotvec[a] = v[i++];
  }

  Superquadric to_sq() const {
    Superquadric sq;
    sq.semi_axes = axes;
    sq.e_z = e_z;
    sq.e_xy = e_xy;
    sq.center = center;
    double ang = rotvec.norm();
    Mat3 delta = ang < 1e-15 ? Mat3::Identity()
                             : Eigen::AngleAxisd(ang, rotvec / ang).toRotationMatrix();
    sq.orientation = base_rot * delta;
    return sq;
  }
};

Eigen::VectorXd residuals(const FitParams& fp, const std::vector<Vec3>& pts) {
  const Superquadric sq = fp.to_sq();
  const double vol = std::sqrt(sq.semi_axes.prod());
  Eigen::VectorXd r(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    r[i] = vol * (eval_F(sq, pts[i]) - 1.0);
  return r;
}

}  // namespace

PointCloud dilate_cloud(const PointCloud& cloud, const Vec3& h) {
  if (h.minCoeff() < 0.0)
    throw std::invalid_argument("dilate_cloud: extents must be >= 0");
  if (h.norm() == 0.0) return cloud;
  static const double sgn[2] = {-1.0, 1.0};
  PointCloud out;
  out.points.reserve(cloud.points.size() * 15);
  for (const Vec3& p : cloud.points) {
    out.points.push_back(p);
    for (double sx : sgn)
      for (double sy : sgn)
        for (double sz : sgn)
          out.points.emplace_back(p.x() + sx * h.x(), p.y() + sy * h.y(),
                                  p.z() + sz * h.z());
    out.points.emplace_back(p + Vec3(h.x(), 0, 0));
    out.points.emplace_back(p - Vec3(h.x(), 0, 0));
    out.points.emplace_back(p + Vec3(0, h.y(), 0));
    out.points.emplace_back(p - Vec3(0, h.y(), 0));
    out.points.emplace_back(p + Vec3(0, 0, h.z()));
    out.points.emplace_back(p - Vec3(0, 0, h.z()));
  }
  return out;
}

Superquadric fit_superquadric(const PointCloud& cloud, const FitOptions& opt) {
  const auto& pts = cloud.points;
  if (pts.size() < 4)
    throw std::invalid_argument("fit_superquadric: need >= 4 points");

  // Centroid + PCA initialisation, 1.5 std-dev per principal axis.
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : pts) centroid += p;
  centroid /= double(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) {
    const Vec3 d = p - centroid;
    cov += d * d.transpose();
  }
  cov /= double(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  if (eig.eigenvalues().minCoeff() < 1e-14)
    throw std::invalid_argument("fit_superquadric: degenerate (coplanar) cloud");
  Mat3 basis = eig.eigenvectors();
  if (basis.determinant() < 0.0) basis.col(0) *= -1.0;

  FitParams fp;
  fp.base_rot = basis;
  fp.rotvec = Vec3::Zero();
  fp.center = centroid;
  for (int a = 0; a < 3; ++a)
    fp.axes[a] = std::max(1.5 * std::sqrt(eig.eigenvalues()[a]), opt.axis_floor);
  fp.e_z = fp.e_xy = 1.0;
  fp.fix_ellipsoid = opt.fix_ellipsoid;

  Eigen::VectorXd params = fp.pack();
  Eigen::VectorXd r = residuals(fp, pts);
  double cost = r.squaredNorm();

  const int np = fp.size();
  double mu = 1e-3;
  bool converged = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    // Forward-difference Jacobian.
    Eigen::MatrixXd J(pts.size(), np);
    for (int j = 0; j < np; ++j) {
      const double step = std::max(1e-7, 1e-6 * std::fabs(params[j]));
      Eigen::VectorXd pj = params;
      pj[j] += step;
      FitParams fpj = fp;
      fpj.unpack(pj, opt);
      J.col(j) = (residuals(fpj, pts) - r) / step;
    }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-12) {
      converged = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd delta = A.ldlt().solve(-g);
      Eigen::VectorXd cand = params + delta;
      FitParams fpc = fp;
      fpc.unpack(cand, opt);
      const Eigen::VectorXd rc = residuals(fpc, pts);
      const double cc = rc.squaredNorm();
      if (cc < cost) {
        // Re-pack so clamped values become the new linearisation point.
        fp = fpc;
        params = fp.pack();
        r = rc;
        const double improvement = (cost - cc) / std::max(cost, 1e-300);
        cost = cc;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (improvement < 1e-12) converged = true;
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted || converged) {
      converged = true;
      break;
    }
  }

  Superquadric out = fp.to_sq();
  out.residual = cost;
  out.converged = converged;
  return out;
}

}  // namespace dmpoa
