#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace emg {

// 8x8 grid, 1 cm pitch by default. Channel index is row-major:
// channel = row * cols + col, and its planar position is
// (col * pitch, row * pitch) in cm.
struct GridLayout {
  int rows = 8;
  int cols = 8;
  double pitch_cm = 1.0;

  int n_channels() const { return rows * cols; }
  bool valid() const { return rows >= 1 && cols >= 1 && pitch_cm > 0.0; }
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct LabeledPoint {
  std::string label;
  Point3 p;
};

enum class ScanKind { pre, post, no_array };

// One 3-D scan: >= 3 labeled fiducials, plus the four array corners unless
// this is the no-array scan. Corner order is fixed: top-left, top-right,
// bottom-right, bottom-left in the array's own frame.
struct ScanData {
  ScanKind kind = ScanKind::no_array;
  std::vector<LabeledPoint> fiducials;
  std::vector<LabeledPoint> corners;  // empty iff kind == no_array
};

// Rigid map q = R p + t. rotation is row-major 3x3, orthonormal, det +1.
struct RigidTransform {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};
  double residual_rms_cm = 0.0;

  Point3 apply(const Point3& p) const {
    const auto& r = rotation;
    return {r[0] * p.x + r[1] * p.y + r[2] * p.z + translation[0],
            r[3] * p.x + r[4] * p.y + r[5] * p.z + translation[1],
            r[6] * p.x + r[7] * p.y + r[8] * p.z + translation[2]};
  }
};

// Ground-truth array displacement between sessions.
//
// Conventions (these are reported with every result): x is the in-surface
// distance along the starting array's top/bottom edge direction (top-left
// toward top-right), y along its vertical edge direction (bottom-left toward
// top-left), theta is counterclockwise about the surface normal oriented
// toward the +z half-space of the no-array scan's frame (the scanner side).
struct ShiftTransform {
  double x_cm = 0.0;
  double y_cm = 0.0;
  double theta_deg = 0.0;  // in [-180, 180)
};

// Nearest post-shift channel for each pre-shift channel.
struct ChannelMap {
  std::vector<int> nearest;             // size = n_channels
  std::vector<double> separation_cm;    // size = n_channels
};

struct RegisterOptions {
  double max_rms_cm = 0.3;        // fiducial registration tolerance
  double corner_shape_tol = 0.15; // relative deviation from the nominal rectangle
};

// Closed-form least-squares rigid alignment of labeled point sets (points are
// matched by label; order in the vectors does not matter).
RigidTransform rigid_register(const std::vector<LabeledPoint>& src,
                              const std::vector<LabeledPoint>& dst);

struct ShiftDiagnostics {
  double pre_residual_rms_cm = 0.0;
  double post_residual_rms_cm = 0.0;
};

// Recover (x, y, theta) from the three scans of one shift: register pre and
// post to the no-array scan via fiducials, fit the analysis plane to both
// corner sets, project, and decompose the corner motion in the pre-array
// frame. Theta comes from a 2-D Procrustes over the four corners.
ShiftTransform extract_shift(const ScanData& pre, const ScanData& post, const ScanData& bare,
                             const GridLayout& layout = {},
                             const RegisterOptions& opts = {},
                             ShiftDiagnostics* diag = nullptr);

// Nominal lattice positions under a planar shift: rotate by theta about the
// array center, then translate by (x, y).
std::vector<Point2> electrode_positions(const GridLayout& layout, const ShiftTransform& shift);

ChannelMap closest_channel_map(const std::vector<Point2>& pre_pos,
                               const std::vector<Point2>& post_pos);

// Euclidean lattice distance between two channels, cm.
double intra_grid_distance(const GridLayout& layout, int ch_a, int ch_b);

inline double distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace emg
