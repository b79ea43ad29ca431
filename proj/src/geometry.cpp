#include "emg/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

#include "emg/errors.hpp"

namespace emg {

namespace {

Eigen::Vector3d to_eigen(const Point3& p) { return {p.x, p.y, p.z}; }

// Match points by label; throws when a label is missing on either side.
std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> correspondences(
    const std::vector<LabeledPoint>& src, const std::vector<LabeledPoint>& dst) {
  std::map<std::string, Point3> dst_by_label;
  for (const auto& d : dst) {
    if (!dst_by_label.emplace(d.label, d.p).second)
      throw InputError("duplicate fiducial label: " + d.label);
  }
  Eigen::Matrix3Xd a(3, src.size()), b(3, src.size());
  Eigen::Index k = 0;
  for (const auto& s : src) {
    auto it = dst_by_label.find(s.label);
    if (it == dst_by_label.end())
      throw InputError("fiducial label missing in destination scan: " + s.label);
    a.col(k) = to_eigen(s.p);
    b.col(k) = to_eigen(it->second);
    ++k;
  }
  return {a, b};
}

}  // namespace

RigidTransform rigid_register(const std::vector<LabeledPoint>& src,
                              const std::vector<LabeledPoint>& dst) {
  if (src.size() < 3 || dst.size() < src.size())
    throw DegenerateRegistrationError("need at least 3 labeled correspondences");

  auto [a, b] = correspondences(src, dst);
  const Eigen::Vector3d ca = a.rowwise().mean();
  const Eigen::Vector3d cb = b.rowwise().mean();
  const Eigen::Matrix3Xd ac = a.colwise() - ca;
  const Eigen::Matrix3Xd bc = b.colwise() - cb;

  // Collinear sources leave the rotation about their axis unconstrained.
  Eigen::JacobiSVD<Eigen::Matrix3Xd> shape_svd(ac);
  const auto sv = shape_svd.singularValues();
  if (sv.size() < 2 || sv(1) < 1e-9 * std::max(1.0, sv(0)))
    throw DegenerateRegistrationError("fiducials are collinear");

  const Eigen::Matrix3d h = bc * ac.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  const Eigen::Matrix3d r = svd.matrixU() * d * svd.matrixV().transpose();
  const Eigen::Vector3d t = cb - r * ca;

  RigidTransform out;
  Eigen::Map<Eigen::Matrix<double, 3, 3, Eigen::RowMajor>>(out.rotation.data()) = r;
  for (int i = 0; i < 3; ++i) out.translation[i] = t(i);

  const Eigen::Matrix3Xd resid = (r * a).colwise() + t - b;
  out.residual_rms_cm = std::sqrt(resid.squaredNorm() / static_cast<double>(a.cols()));
  return out;
}

std::vector<Point2> electrode_positions(const GridLayout& layout, const ShiftTransform& shift) {
  if (!layout.valid()) throw InputError("invalid grid layout");
  const double cx = 0.5 * (layout.cols - 1) * layout.pitch_cm;
  const double cy = 0.5 * (layout.rows - 1) * layout.pitch_cm;
  const double th = shift.theta_deg * M_PI / 180.0;
  const double c = std::cos(th), s = std::sin(th);

  std::vector<Point2> pos(layout.n_channels());
  for (int r = 0; r < layout.rows; ++r) {
    for (int col = 0; col < layout.cols; ++col) {
      const double u = col * layout.pitch_cm - cx;
      const double v = r * layout.pitch_cm - cy;
      pos[r * layout.cols + col] = {cx + c * u - s * v + shift.x_cm,
                                    cy + s * u + c * v + shift.y_cm};
    }
  }
  return pos;
}

ChannelMap closest_channel_map(const std::vector<Point2>& pre_pos,
                               const std::vector<Point2>& post_pos) {
  if (pre_pos.size() != post_pos.size()) throw InputError("position sets differ in size");
  ChannelMap map;
  map.nearest.resize(pre_pos.size());
  map.separation_cm.resize(pre_pos.size());
  for (size_t i = 0; i < pre_pos.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (size_t j = 0; j < post_pos.size(); ++j) {
      const double d = distance(pre_pos[i], post_pos[j]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    map.nearest[i] = arg;
    map.separation_cm[i] = best;
  }
  return map;
}

double intra_grid_distance(const GridLayout& layout, int ch_a, int ch_b) {
  if (ch_a < 0 || ch_a >= layout.n_channels() || ch_b < 0 || ch_b >= layout.n_channels())
    throw InputError("channel index outside grid");
  const double dr = static_cast<double>(ch_a / layout.cols - ch_b / layout.cols);
  const double dc = static_cast<double>(ch_a % layout.cols - ch_b % layout.cols);
  return layout.pitch_cm * std::sqrt(dr * dr + dc * dc);
}

namespace {

struct PlaneBasis {
  Eigen::Vector3d origin;
  Eigen::Vector3d ex, ey;  // in-plane, orthonormal; ex x ey points to +z side
};

// Least-squares plane through the point cloud; normal oriented toward the +z
// half-space of the reference frame (the scanner side of the no-array scan).
PlaneBasis fit_plane(const std::vector<Eigen::Vector3d>& pts) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d d = p - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  Eigen::Vector3d normal = eig.eigenvectors().col(0);  // smallest eigenvalue
  if (normal.z() < 0.0 || (normal.z() == 0.0 && normal.x() < 0.0)) normal = -normal;

  PlaneBasis basis;
  basis.origin = centroid;
  // Deterministic in-plane axes: project the reference-frame x axis, fall
  // back to y when the normal is parallel to x.
  Eigen::Vector3d seed = Eigen::Vector3d::UnitX();
  if (std::abs(normal.dot(seed)) > 0.9) seed = Eigen::Vector3d::UnitY();
  basis.ex = (seed - normal * normal.dot(seed)).normalized();
  basis.ey = normal.cross(basis.ex);
  return basis;
}

Eigen::Vector2d project(const PlaneBasis& basis, const Eigen::Vector3d& p) {
  const Eigen::Vector3d d = p - basis.origin;
  return {basis.ex.dot(d), basis.ey.dot(d)};
}

void check_corner_shape(const std::array<Eigen::Vector2d, 4>& q, const GridLayout& layout,
                        double tol) {
  const double w = (layout.cols - 1) * layout.pitch_cm;
  const double h = (layout.rows - 1) * layout.pitch_cm;
  const double diag = std::hypot(w, h);
  // TL, TR, BR, BL
  const double sides[4] = {(q[1] - q[0]).norm(), (q[2] - q[1]).norm(),
                           (q[3] - q[2]).norm(), (q[0] - q[3]).norm()};
  const double nominal[4] = {w, h, w, h};
  for (int i = 0; i < 4; ++i) {
    if (std::abs(sides[i] - nominal[i]) > tol * nominal[i])
      throw CornerLabelingError("corner quadrilateral deviates from the nominal array rectangle");
  }
  for (double d : {(q[2] - q[0]).norm(), (q[3] - q[1]).norm()}) {
    if (std::abs(d - diag) > tol * diag)
      throw CornerLabelingError("corner diagonals deviate from the nominal array rectangle");
  }
}

}  // namespace

ShiftTransform extract_shift(const ScanData& pre, const ScanData& post, const ScanData& bare,
                             const GridLayout& layout, const RegisterOptions& opts,
                             ShiftDiagnostics* diag) {
  if (pre.corners.size() != 4 || post.corners.size() != 4)
    throw InputError("pre and post scans must carry exactly 4 corners");
  if (bare.kind != ScanKind::no_array)
    throw InputError("third scan must be the no-array scan");

  const RigidTransform pre_to_bare = rigid_register(pre.fiducials, bare.fiducials);
  const RigidTransform post_to_bare = rigid_register(post.fiducials, bare.fiducials);
  if (diag) {
    diag->pre_residual_rms_cm = pre_to_bare.residual_rms_cm;
    diag->post_residual_rms_cm = post_to_bare.residual_rms_cm;
  }
  if (pre_to_bare.residual_rms_cm > opts.max_rms_cm ||
      post_to_bare.residual_rms_cm > opts.max_rms_cm)
    throw UnreliableScanError("fiducial registration residual above tolerance");

  // Everything below happens in the no-array scan's frame. The analysis plane
  // comes from the corner points alone: on curved limbs distant fiducials
  // would tilt it away from the array patch.
  std::vector<Eigen::Vector3d> cloud;
  std::array<Eigen::Vector3d, 4> pre3, post3;
  for (int i = 0; i < 4; ++i) {
    pre3[i] = to_eigen(pre_to_bare.apply(pre.corners[i].p));
    post3[i] = to_eigen(post_to_bare.apply(post.corners[i].p));
    cloud.push_back(pre3[i]);
    cloud.push_back(post3[i]);
  }
  const PlaneBasis plane = fit_plane(cloud);

  std::array<Eigen::Vector2d, 4> pre2, post2;
  for (int i = 0; i < 4; ++i) {
    pre2[i] = project(plane, pre3[i]);
    post2[i] = project(plane, post3[i]);
  }
  check_corner_shape(pre2, layout, opts.corner_shape_tol);
  check_corner_shape(post2, layout, opts.corner_shape_tol);

  const Eigen::Vector2d pre_center = 0.25 * (pre2[0] + pre2[1] + pre2[2] + pre2[3]);
  const Eigen::Vector2d post_center = 0.25 * (post2[0] + post2[1] + post2[2] + post2[3]);

  // Pre-array frame: x along the top/bottom edges (TL->TR and BL->BR),
  // y along the vertical edges pointing bottom -> top.
  Eigen::Vector2d ax = ((pre2[1] - pre2[0]) + (pre2[2] - pre2[3])).normalized();
  Eigen::Vector2d ay_raw = (pre2[0] - pre2[3]) + (pre2[1] - pre2[2]);
  Eigen::Vector2d ay = (ay_raw - ax * ax.dot(ay_raw)).normalized();

  const Eigen::Vector2d delta = post_center - pre_center;

  // Residual in-plane rotation after the translation: 2-D Procrustes over the
  // centered corners.
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector2d a = pre2[i] - pre_center;
    const Eigen::Vector2d b = post2[i] - post_center;
    num += a.x() * b.y() - a.y() * b.x();
    den += a.dot(b);
  }

  ShiftTransform shift;
  shift.x_cm = delta.dot(ax);
  shift.y_cm = delta.dot(ay);
  shift.theta_deg = std::atan2(num, den) * 180.0 / M_PI;
  if (shift.theta_deg >= 180.0) shift.theta_deg -= 360.0;
  return shift;
}

}  // namespace emg
