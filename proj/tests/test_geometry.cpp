#include <doctest.h>

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "emg/errors.hpp"
#include "emg/geometry.hpp"
#include "emg/rng.hpp"
#include "emg/synthetic.hpp"

using namespace emg;

namespace {

// Rodrigues rotation, row-major, for building ground-truth poses.
std::array<double, 9> axis_angle(double ax, double ay, double az, double ang) {
  const double norm = std::sqrt(ax * ax + ay * ay + az * az);
  ax /= norm;
  ay /= norm;
  az /= norm;
  const double c = std::cos(ang), s = std::sin(ang), v = 1.0 - c;
  return {c + ax * ax * v,      ax * ay * v - az * s, ax * az * v + ay * s,
          ay * ax * v + az * s, c + ay * ay * v,      ay * az * v - ax * s,
          az * ax * v - ay * s, az * ay * v + ax * s, c + az * az * v};
}

Point3 mat_apply(const std::array<double, 9>& r, const std::array<double, 3>& t, const Point3& p) {
  return {r[0] * p.x + r[1] * p.y + r[2] * p.z + t[0],
          r[3] * p.x + r[4] * p.y + r[5] * p.z + t[1],
          r[6] * p.x + r[7] * p.y + r[8] * p.z + t[2]};
}

void check_orthonormal(const std::array<double, 9>& r) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r[3 * k + i] * r[3 * k + j];
      CHECK(std::abs((dot) - (i == j ? 1.0 : 0.0)) <= 1e-9);
    }
  }
  const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                     r[2] * (r[3] * r[7] - r[4] * r[6]);
  CHECK(std::abs((det) - (1.0)) <= 1e-9);
}

}  // namespace

TEST_CASE("rigid_register identity and pure translation") {
  std::vector<LabeledPoint> src = {
      {"A", {0, 0, 0}}, {"B", {10, 0, 0}}, {"C", {10, 10, 0}}, {"D", {0, 10, 0}}};

  auto id = rigid_register(src, src);
  CHECK(std::abs((id.residual_rms_cm) - (0.0)) <= 1e-12);
  check_orthonormal(id.rotation);
  for (int i = 0; i < 9; ++i)
    CHECK(std::abs((id.rotation[i]) - (i % 4 == 0 ? 1.0 : 0.0)) <= 1e-12);
  for (double t : id.translation) CHECK(std::abs((t) - (0.0)) <= 1e-12);

  std::vector<LabeledPoint> dst = src;
  for (auto& d : dst) {
    d.p.x += 1.0;
    d.p.y += 2.0;
    d.p.z += 3.0;
  }
  auto tr = rigid_register(src, dst);
  CHECK(std::abs((tr.translation[0]) - (1.0)) <= 1e-12);
  CHECK(std::abs((tr.translation[1]) - (2.0)) <= 1e-12);
  CHECK(std::abs((tr.translation[2]) - (3.0)) <= 1e-12);
  CHECK(std::abs((tr.residual_rms_cm) - (0.0)) <= 1e-12);
  CHECK(std::abs((tr.rotation[0]) - (1.0)) <= 1e-12);
}

TEST_CASE("rigid_register recovers shuffled rigid motions exactly") {
  Rng rng(0x67656f31ULL);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<LabeledPoint> src;
    for (int i = 0; i < 6; ++i)
      src.push_back({"P" + std::to_string(i),
                     {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)}});
    const auto rot = axis_angle(rng.gaussian(), rng.gaussian(), rng.gaussian(),
                                rng.uniform(-M_PI, M_PI));
    const std::array<double, 3> t = {rng.uniform(-10, 10), rng.uniform(-10, 10),
                                     rng.uniform(-10, 10)};

    // Destination order is scrambled; only labels line the points up.
    std::vector<LabeledPoint> dst;
    for (int i = 5; i >= 0; --i) dst.push_back({src[i].label, mat_apply(rot, t, src[i].p)});

    auto out = rigid_register(src, dst);
    check_orthonormal(out.rotation);
    CHECK(std::abs((out.residual_rms_cm) - (0.0)) <= 1e-9);
    for (int i = 0; i < 9; ++i)
      CHECK(std::abs((out.rotation[i]) - (rot[i])) <= 1e-9);
    for (const auto& s : src) {
      const Point3 want = mat_apply(rot, t, s.p);
      const Point3 got = out.apply(s.p);
      CHECK(std::abs((got.x) - (want.x)) <= 1e-9);
      CHECK(std::abs((got.y) - (want.y)) <= 1e-9);
      CHECK(std::abs((got.z) - (want.z)) <= 1e-9);
    }
  }
}

TEST_CASE("rigid_register angle recovery under point noise") {
  // 10 cm square, 30 degree in-plane rotation, sigma 0.05 cm on the target.
  std::vector<LabeledPoint> src = {
      {"A", {0, 0, 0}}, {"B", {10, 0, 0}}, {"C", {10, 10, 0}}, {"D", {0, 10, 0}}};
  const auto rot = axis_angle(0, 0, 1, 30.0 * M_PI / 180.0);
  Rng rng(0x67656f32ULL);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LabeledPoint> dst;
    for (const auto& s : src) {
      Point3 q = mat_apply(rot, {0, 0, 0}, s.p);
      q.x += 0.05 * rng.gaussian();
      q.y += 0.05 * rng.gaussian();
      q.z += 0.05 * rng.gaussian();
      dst.push_back({s.label, q});
    }
    auto out = rigid_register(src, dst);
    const double ang = std::atan2(out.rotation[3], out.rotation[0]) * 180.0 / M_PI;
    CHECK(std::abs(ang - 30.0) < 1.0);
    CHECK(out.residual_rms_cm < 0.3);
  }
}

TEST_CASE("rigid_register residual reflects unexplained noise") {
  Rng rng(0x67656f33ULL);
  std::vector<LabeledPoint> src, dst;
  for (int i = 0; i < 20; ++i) {
    const Point3 p{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    src.push_back({"P" + std::to_string(i), p});
    dst.push_back({src.back().label,
                   {p.x + 0.1 * rng.gaussian(), p.y + 0.1 * rng.gaussian(),
                    p.z + 0.1 * rng.gaussian()}});
  }
  auto out = rigid_register(src, dst);
  CHECK(out.residual_rms_cm > 0.03);
  CHECK(out.residual_rms_cm < 0.25);
}

TEST_CASE("rigid_register degenerate and mismatched inputs") {
  std::vector<LabeledPoint> two = {{"A", {0, 0, 0}}, {"B", {1, 0, 0}}};
  CHECK_THROWS_AS(rigid_register(two, two), DegenerateRegistrationError);

  std::vector<LabeledPoint> line = {
      {"A", {0, 0, 0}}, {"B", {1, 0, 0}}, {"C", {2, 0, 0}}, {"D", {3, 0, 0}}};
  CHECK_THROWS_AS(rigid_register(line, line), DegenerateRegistrationError);

  std::vector<LabeledPoint> tri = {{"A", {0, 0, 0}}, {"B", {1, 0, 0}}, {"C", {0, 1, 0}}};
  std::vector<LabeledPoint> dup = {{"A", {0, 0, 0}}, {"A", {1, 0, 0}}, {"C", {0, 1, 0}}};
  CHECK_THROWS_AS(rigid_register(tri, dup), InputError);

  std::vector<LabeledPoint> missing = {{"A", {0, 0, 0}}, {"B", {1, 0, 0}}, {"X", {0, 1, 0}}};
  CHECK_THROWS_AS(rigid_register(tri, missing), InputError);

  // dst smaller than src cannot cover every label.
  CHECK_THROWS_AS(rigid_register(tri, two), DegenerateRegistrationError);

  // Extra unmatched dst labels are ignored.
  std::vector<LabeledPoint> extra = tri;
  extra.push_back({"Z", {9, 9, 9}});
  auto out = rigid_register(tri, extra);
  CHECK(std::abs((out.residual_rms_cm) - (0.0)) <= 1e-12);
}

TEST_CASE("electrode_positions lattice and planar shift") {
  GridLayout layout;

  auto base = electrode_positions(layout, {});
  REQUIRE(base.size() == 64);
  CHECK(base[0].x == doctest::Approx(0.0));
  CHECK(base[0].y == doctest::Approx(0.0));
  CHECK(base[63].x == doctest::Approx(7.0));
  CHECK(base[63].y == doctest::Approx(7.0));
  // Row-major: channel 10 is row 1, col 2.
  CHECK(base[10].x == doctest::Approx(2.0));
  CHECK(base[10].y == doctest::Approx(1.0));

  auto moved = electrode_positions(layout, {1.0, 0.0, 0.0});
  for (size_t i = 0; i < moved.size(); ++i) {
    CHECK(moved[i].x == doctest::Approx(base[i].x + 1.0));
    CHECK(moved[i].y == doctest::Approx(base[i].y));
  }

  // 90 degree turn about the grid center (3.5, 3.5), counterclockwise.
  auto turned = electrode_positions(layout, {0.0, 0.0, 90.0});
  CHECK(turned[0].x == doctest::Approx(7.0));
  CHECK(turned[0].y == doctest::Approx(0.0));
  CHECK(turned[7].x == doctest::Approx(7.0));
  CHECK(turned[7].y == doctest::Approx(7.0));
  CHECK(turned[63].x == doctest::Approx(0.0));
  CHECK(turned[63].y == doctest::Approx(7.0));

  CHECK_THROWS_AS(electrode_positions({0, 8, 1.0}, {}), InputError);
  CHECK_THROWS_AS(electrode_positions({8, 8, 0.0}, {}), InputError);
}

TEST_CASE("closest_channel_map identity, sub-pitch and full-pitch shifts") {
  GridLayout layout;
  const auto pre = electrode_positions(layout, {});

  auto same = closest_channel_map(pre, pre);
  for (int i = 0; i < 64; ++i) {
    CHECK(same.nearest[i] == i);
    CHECK(same.separation_cm[i] == doctest::Approx(0.0));
  }

  // Under half a pitch: every channel keeps its own index.
  auto small = closest_channel_map(pre, electrode_positions(layout, {0.4, 0.0, 0.0}));
  for (int i = 0; i < 64; ++i) {
    CHECK(small.nearest[i] == i);
    CHECK(small.separation_cm[i] == doctest::Approx(0.4));
  }

  // Exactly one pitch in +x: the left neighbour lands on each channel; the
  // first column has no left neighbour and sits 1 cm from its own shifted twin.
  auto full = closest_channel_map(pre, electrode_positions(layout, {1.0, 0.0, 0.0}));
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const int i = r * 8 + c;
      if (c == 0) {
        CHECK(full.nearest[i] == i);
        CHECK(full.separation_cm[i] == doctest::Approx(1.0));
      } else {
        CHECK(full.nearest[i] == i - 1);
        CHECK(std::abs((full.separation_cm[i]) - (0.0)) <= 1e-12);
      }
    }
  }

  // Ties go to the lowest post index.
  std::vector<Point2> a = {{0.0, 0.0}, {5.0, 5.0}};
  std::vector<Point2> b = {{1.0, 0.0}, {-1.0, 0.0}};
  auto tie = closest_channel_map(a, b);
  CHECK(tie.nearest[0] == 0);
  CHECK(tie.separation_cm[0] == doctest::Approx(1.0));

  std::vector<Point2> short_set = {{0.0, 0.0}};
  CHECK_THROWS_AS(closest_channel_map(pre, short_set), InputError);
}

TEST_CASE("intra_grid_distance examples and metric axioms") {
  GridLayout layout;
  CHECK(intra_grid_distance(layout, 17, 17) == doctest::Approx(0.0));
  CHECK(intra_grid_distance(layout, 0, 1) == doctest::Approx(1.0));
  CHECK(intra_grid_distance(layout, 0, 8) == doctest::Approx(1.0));
  CHECK(intra_grid_distance(layout, 0, 9) == doctest::Approx(std::sqrt(2.0)));
  // (row 0, col 0) to (row 3, col 4): a 3-4-5 triangle.
  CHECK(intra_grid_distance(layout, 0, 28) == doctest::Approx(5.0));
  CHECK(intra_grid_distance(layout, 0, 63) == doctest::Approx(std::sqrt(98.0)));

  GridLayout wide{4, 16, 0.5};
  CHECK(intra_grid_distance(wide, 0, 16) == doctest::Approx(0.5));
  CHECK(intra_grid_distance(wide, 0, 1) == doctest::Approx(0.5));

  CHECK_THROWS_AS(intra_grid_distance(layout, -1, 0), InputError);
  CHECK_THROWS_AS(intra_grid_distance(layout, 0, 64), InputError);

  // Metric axioms by full enumeration.
  std::vector<std::vector<double>> d(64, std::vector<double>(64));
  for (int a2 = 0; a2 < 64; ++a2)
    for (int b2 = 0; b2 < 64; ++b2) d[a2][b2] = intra_grid_distance(layout, a2, b2);
  bool symmetric = true, identity = true, triangle = true;
  for (int a2 = 0; a2 < 64; ++a2) {
    if (d[a2][a2] != 0.0) identity = false;
    for (int b2 = 0; b2 < 64; ++b2) {
      if (d[a2][b2] != d[b2][a2]) symmetric = false;
      if (a2 != b2 && d[a2][b2] <= 0.0) identity = false;
      for (int c2 = 0; c2 < 64; ++c2)
        if (d[a2][c2] > d[a2][b2] + d[b2][c2] + 1e-12) triangle = false;
    }
  }
  CHECK(symmetric);
  CHECK(identity);
  CHECK(triangle);
}

TEST_CASE("extract_shift planar noiseless round trips") {
  GridLayout layout;
  const ShiftTransform cases[] = {
      {0.0, 0.0, 0.0}, {2.0, 0.0, 0.0},  {0.0, 0.0, 30.0},
      {2.0, -1.0, 15.0}, {-4.0, 4.0, -30.0}, {0.3, -0.2, 0.5}};
  std::uint64_t seed = 0x73686631ULL;
  for (const auto& truth : cases) {
    for (int rep = 0; rep < 3; ++rep) {
      auto [pre, post, bare] =
          synth_scan_triple(layout, truth, SurfaceSpec::plane(), 0.0, seed++);
      ShiftDiagnostics diag;
      auto got = extract_shift(pre, post, bare, layout, {}, &diag);
      CHECK(std::abs((got.x_cm) - (truth.x_cm)) <= 1e-6);
      CHECK(std::abs((got.y_cm) - (truth.y_cm)) <= 1e-6);
      CHECK(std::abs((got.theta_deg) - (truth.theta_deg)) <= 1e-6);
      CHECK(diag.pre_residual_rms_cm < 1e-9);
      CHECK(diag.post_residual_rms_cm < 1e-9);
    }
  }
}

TEST_CASE("extract_shift planar noiseless random shifts") {
  GridLayout layout;
  Rng rng(0x73686632ULL);
  for (int trial = 0; trial < 100; ++trial) {
    const ShiftTransform truth{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-30, 30)};
    auto [pre, post, bare] =
        synth_scan_triple(layout, truth, SurfaceSpec::plane(), 0.0, rng.next_u64());
    auto got = extract_shift(pre, post, bare, layout);
    CHECK(std::abs((got.x_cm) - (truth.x_cm)) <= 1e-6);
    CHECK(std::abs((got.y_cm) - (truth.y_cm)) <= 1e-6);
    CHECK(std::abs((got.theta_deg) - (truth.theta_deg)) <= 1e-6);
  }
}

TEST_CASE("extract_shift tolerates scanner noise") {
  GridLayout layout;
  Rng rng(0x73686633ULL);
  int ok = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const ShiftTransform truth{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-30, 30)};
    auto [pre, post, bare] =
        synth_scan_triple(layout, truth, SurfaceSpec::plane(), 0.05, rng.next_u64());
    ShiftDiagnostics diag;
    auto got = extract_shift(pre, post, bare, layout, {}, &diag);
    CHECK(diag.pre_residual_rms_cm > 0.0);
    CHECK(diag.pre_residual_rms_cm < 0.3);
    if (std::abs(got.x_cm - truth.x_cm) < 0.1 && std::abs(got.y_cm - truth.y_cm) < 0.1 &&
        std::abs(got.theta_deg - truth.theta_deg) < 1.0)
      ++ok;
  }
  // sigma 0.05 cm should nearly always land inside 0.1 cm / 1 degree.
  CHECK(ok >= 18);
}

TEST_CASE("extract_shift theta wraps into [-180, 180)") {
  GridLayout layout;
  auto [pre, post, bare] =
      synth_scan_triple(layout, {0.5, 0.5, 180.0}, SurfaceSpec::plane(), 0.0, 0x73686634ULL);
  auto got = extract_shift(pre, post, bare, layout);
  CHECK(got.theta_deg >= -180.0);
  CHECK(got.theta_deg < 180.0);
  CHECK(std::abs((std::cos(got.theta_deg * M_PI / 180.0)) - (-1.0)) <= 1e-9);
  CHECK(std::abs((got.x_cm) - (0.5)) <= 1e-6);
  CHECK(std::abs((got.y_cm) - (0.5)) <= 1e-6);
}

TEST_CASE("extract_shift on a cylindrical patch") {
  GridLayout layout;

  // Mild curvature: thigh-scale radius. Planar analysis of the curved patch
  // stays well inside the scanner-noise error budget.
  {
    auto [pre, post, bare] = synth_scan_triple(layout, {2.0, 1.0, 10.0},
                                               SurfaceSpec::cylinder(20.0), 0.0, 0x73686635ULL);
    auto got = extract_shift(pre, post, bare, layout);
    CHECK(std::abs(got.x_cm - 2.0) < 0.05);
    CHECK(std::abs(got.y_cm - 1.0) < 0.05);
    CHECK(std::abs(got.theta_deg - 10.0) < 0.5);
  }

  // Severe curvature: radius 5 cm, arc shift 2 cm. The documented bound for
  // the planar approximation at this curvature is 0.5 cm / 2 degrees.
  {
    auto [pre, post, bare] = synth_scan_triple(layout, {2.0, 0.0, 0.0},
                                               SurfaceSpec::cylinder(5.0), 0.0, 0x73686636ULL);
    auto got = extract_shift(pre, post, bare, layout);
    CHECK(std::abs(got.x_cm - 2.0) < 0.5);
    CHECK(std::abs(got.y_cm) < 0.5);
    CHECK(std::abs(got.theta_deg) < 2.0);
  }

  CHECK_THROWS_AS(synth_scan_triple(layout, {}, SurfaceSpec::cylinder(3.0), 0.0, 1),
                  ConfigError);
}

TEST_CASE("extract_shift rejects unreliable and mislabeled scans") {
  GridLayout layout;
  auto [pre, post, bare] =
      synth_scan_triple(layout, {1.0, 0.0, 5.0}, SurfaceSpec::plane(), 0.0, 0x73686637ULL);

  SUBCASE("perturbed fiducial breaks the registration tolerance") {
    auto bad = pre;
    bad.fiducials[0].p.x += 2.0;
    CHECK_THROWS_AS(extract_shift(bad, post, bare, layout), UnreliableScanError);
  }

  SUBCASE("swapped corners fail the rectangle check") {
    auto bad = post;
    std::swap(bad.corners[0].p, bad.corners[1].p);
    CHECK_THROWS_AS(extract_shift(pre, bad, bare, layout), CornerLabelingError);
  }

  SUBCASE("displaced corner fails the rectangle check") {
    auto bad = pre;
    bad.corners[2].p.x += 3.0;
    bad.corners[2].p.y += 3.0;
    CHECK_THROWS_AS(extract_shift(bad, post, bare, layout), CornerLabelingError);
  }

  SUBCASE("missing corners are rejected") {
    auto bad = pre;
    bad.corners.pop_back();
    CHECK_THROWS_AS(extract_shift(bad, post, bare, layout), InputError);
  }

  SUBCASE("third scan must be the no-array scan") {
    CHECK_THROWS_AS(extract_shift(pre, post, pre, layout), InputError);
  }

  SUBCASE("too few fiducials in the bare scan") {
    auto bad = bare;
    bad.fiducials.resize(2);
    CHECK_THROWS_AS(extract_shift(pre, post, bad, layout), DegenerateRegistrationError);
  }
}
