#include "emg/synthetic.hpp"

#include <cmath>
#include <cstdlib>

#include "emg/errors.hpp"
#include "emg/kernels.hpp"
#include "emg/rng.hpp"

namespace emg {

namespace {

constexpr std::uint64_t kSaltUnit = 0x756e6974;
constexpr std::uint64_t kSaltNoise = 0x6e6f6973;
constexpr std::uint64_t kSaltGain = 0x6761696e;
constexpr std::uint64_t kSaltPowerline = 0x706c696e;
constexpr std::uint64_t kSaltPrePose = 0x70726573;
constexpr std::uint64_t kSaltPostPose = 0x706f7374;
constexpr std::uint64_t kSaltScanNoise = 0x7363616e;

// Unit-peak first derivative of a Gaussian, sampled at integer offsets and
// truncated at 5 sigma.
std::vector<double> biphasic_wave(double duration_ms, double fs, int* half_out) {
  const double sigma = 0.25 * duration_ms * 1e-3 * fs;
  if (sigma < 0.5) throw ConfigError("waveform too short for the sample rate");
  const int half = static_cast<int>(std::ceil(5.0 * sigma));
  std::vector<double> w(2 * half + 1);
  for (int k = -half; k <= half; ++k) {
    const double u = static_cast<double>(k) / sigma;
    w[k + half] = -u * std::exp(0.5 - 0.5 * u * u);
  }
  *half_out = half;
  return w;
}

bool is_active(const std::vector<std::pair<double, double>>& windows, double t) {
  if (windows.empty()) return true;
  for (const auto& [a, b] : windows)
    if (t >= a && t < b) return true;
  return false;
}

}  // namespace

RawRecording simulate_recording(const ScenarioConfig& cfg, const GridLayout& layout) {
  if (!layout.valid()) throw ConfigError("invalid grid layout");
  if (cfg.sample_rate <= 0.0 || cfg.duration_s <= 0.0)
    throw ConfigError("duration and sample rate must be positive");
  for (const auto& u : cfg.units) {
    if (u.firing_rate_hz <= 0.0 || u.amplitude_v <= 0.0 || u.decay_length_cm <= 0.0 ||
        u.duration_ms <= 0.0)
      throw ConfigError("motor unit parameters must be positive");
  }
  for (const auto& [a, b] : cfg.activity)
    if (!(a < b)) throw ConfigError("activity window must have start < end");

  const auto n = static_cast<size_t>(std::llround(cfg.duration_s * cfg.sample_rate));
  if (n == 0) throw ConfigError("empty recording");
  const std::uint64_t src_seed = cfg.source_seed ? cfg.source_seed : cfg.seed;
  const auto& ops = kernels::active();

  RawRecording rec(cfg.sample_rate, layout, n);
  rec.meta = cfg.meta;
  const auto pos = electrode_positions(layout, cfg.shift);

  std::vector<double> base(n);
  for (size_t u = 0; u < cfg.units.size(); ++u) {
    const auto& unit = cfg.units[u];
    int half = 0;
    const auto wave = biphasic_wave(unit.duration_ms, cfg.sample_rate, &half);

    std::fill(base.begin(), base.end(), 0.0);
    Rng rng(mix_seed(src_seed, {kSaltUnit, u}));
    double t = rng.exponential() / unit.firing_rate_hz;
    while (t < cfg.duration_s) {
      if (is_active(cfg.activity, t)) {
        const auto center = static_cast<long long>(std::llround(t * cfg.sample_rate));
        for (int k = -half; k <= half; ++k) {
          const long long idx = center + k;
          if (idx >= 0 && idx < static_cast<long long>(n)) base[idx] += wave[k + half];
        }
      }
      t += rng.exponential() / unit.firing_rate_hz;
    }

    for (int c = 0; c < layout.n_channels(); ++c) {
      const double r = distance(unit.position_cm, pos[c]);
      const double coef = unit.amplitude_v * std::exp(-r / unit.decay_length_cm);
      ops.axpy(coef, base.data(), rec.channel(c).data(), n);
    }
  }

  if (cfg.powerline_amp_v > 0.0) {
    Rng rng(mix_seed(cfg.seed, {kSaltPowerline}));
    const double phase = rng.uniform() * 2.0 * M_PI;
    const double w = 2.0 * M_PI * 60.0 / cfg.sample_rate;
    std::vector<double> pl(n);
    for (size_t i = 0; i < n; ++i)
      pl[i] = std::sin(w * static_cast<double>(i) + phase);
    for (int c = 0; c < layout.n_channels(); ++c)
      ops.axpy(cfg.powerline_amp_v, pl.data(), rec.channel(c).data(), n);
  }

  for (int c = 0; c < layout.n_channels(); ++c) {
    double* x = rec.channel(c).data();
    if (cfg.noise_sigma_v > 0.0) {
      Rng rng(mix_seed(cfg.seed, {kSaltNoise, static_cast<std::uint64_t>(c)}));
      for (size_t i = 0; i < n; ++i) x[i] += cfg.noise_sigma_v * rng.gaussian();
    }
    if (cfg.reapplication.kind == ReapplicationLaw::Kind::uniform) {
      Rng rng(mix_seed(cfg.seed, {kSaltGain, static_cast<std::uint64_t>(c)}));
      const double g = cfg.reapplication.lo +
                       (cfg.reapplication.hi - cfg.reapplication.lo) * rng.uniform();
      for (size_t i = 0; i < n; ++i) x[i] *= g;
    }
  }
  return rec;
}

namespace {

Point3 embed(const SurfaceSpec& surface, double x, double y) {
  if (surface.kind == SurfaceSpec::Kind::plane) return {x, y, 0.0};
  const double r = surface.radius_cm;
  return {r * std::sin(x / r), y, r * (std::cos(x / r) - 1.0)};
}

struct Pose {
  double rot[3][3];
  double t[3];
};

Pose random_pose(Rng& rng) {
  // Axis from normalized Gaussians, angle within the protocol's +-30 degrees.
  double ax = rng.gaussian(), ay = rng.gaussian(), az = rng.gaussian();
  const double norm = std::sqrt(ax * ax + ay * ay + az * az);
  if (norm < 1e-12) {
    ax = 1.0;
    ay = az = 0.0;
  } else {
    ax /= norm;
    ay /= norm;
    az /= norm;
  }
  const double ang = rng.uniform(-M_PI / 6.0, M_PI / 6.0);
  const double c = std::cos(ang), s = std::sin(ang), v = 1.0 - c;
  Pose p;
  p.rot[0][0] = c + ax * ax * v;
  p.rot[0][1] = ax * ay * v - az * s;
  p.rot[0][2] = ax * az * v + ay * s;
  p.rot[1][0] = ay * ax * v + az * s;
  p.rot[1][1] = c + ay * ay * v;
  p.rot[1][2] = ay * az * v - ax * s;
  p.rot[2][0] = az * ax * v - ay * s;
  p.rot[2][1] = az * ay * v + ax * s;
  p.rot[2][2] = c + az * az * v;
  for (int i = 0; i < 3; ++i) p.t[i] = rng.uniform(-5.0, 5.0);
  return p;
}

Point3 apply_pose(const Pose& p, const Point3& q) {
  return {p.rot[0][0] * q.x + p.rot[0][1] * q.y + p.rot[0][2] * q.z + p.t[0],
          p.rot[1][0] * q.x + p.rot[1][1] * q.y + p.rot[1][2] * q.z + p.t[1],
          p.rot[2][0] * q.x + p.rot[2][1] * q.y + p.rot[2][2] * q.z + p.t[2]};
}

// sigma is the RMS of the 3D perturbation, the way tracker accuracy is
// specified; per-axis scale is sigma / sqrt(3).
void add_scan_noise(ScanData& scan, double sigma, Rng& rng) {
  const double axis = sigma / std::sqrt(3.0);
  auto jitter = [&](Point3& p) {
    p.x += axis * rng.gaussian();
    p.y += axis * rng.gaussian();
    p.z += axis * rng.gaussian();
  };
  for (auto& f : scan.fiducials) jitter(f.p);
  for (auto& c : scan.corners) jitter(c.p);
}

}  // namespace

std::tuple<ScanData, ScanData, ScanData> synth_scan_triple(const GridLayout& layout,
                                                           const ShiftTransform& shift,
                                                           const SurfaceSpec& surface,
                                                           double noise_sigma_cm,
                                                           std::uint64_t seed) {
  if (!layout.valid()) throw ConfigError("invalid grid layout");
  const double w = (layout.cols - 1) * layout.pitch_cm;
  const double h = (layout.rows - 1) * layout.pitch_cm;
  if (surface.kind == SurfaceSpec::Kind::cylinder) {
    const double diag = std::hypot(w, h);
    if (!(surface.radius_cm > diag / M_PI))
      throw ConfigError("cylinder radius too small for the array");
  }

  // Fiducials ring the array footprint; y-up frame with the top row at y = h.
  const Point2 fid2[6] = {{-4.0, -4.0},   {w + 4.0, -4.0},   {w + 4.0, h + 4.0},
                          {-4.0, h + 4.0}, {0.5 * w, -4.0},  {0.5 * w, h + 4.0}};
  const Point2 corner2[4] = {{0.0, h}, {w, h}, {w, 0.0}, {0.0, 0.0}};  // TL TR BR BL
  static const char* kCornerNames[4] = {"TL", "TR", "BR", "BL"};

  const double cx = 0.5 * w, cy = 0.5 * h;
  const double th = shift.theta_deg * M_PI / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  auto shifted = [&](const Point2& p) -> Point2 {
    const double u = p.x - cx, v = p.y - cy;
    return {cx + c * u - s * v + shift.x_cm, cy + s * u + c * v + shift.y_cm};
  };

  ScanData bare, pre, post;
  bare.kind = ScanKind::no_array;
  pre.kind = ScanKind::pre;
  post.kind = ScanKind::post;

  for (int i = 0; i < 6; ++i) {
    const std::string label = "F" + std::to_string(i);
    const Point3 p = embed(surface, fid2[i].x, fid2[i].y);
    bare.fiducials.push_back({label, p});
    pre.fiducials.push_back({label, p});
    post.fiducials.push_back({label, p});
  }
  for (int i = 0; i < 4; ++i) {
    pre.corners.push_back({kCornerNames[i], embed(surface, corner2[i].x, corner2[i].y)});
    const Point2 q = shifted(corner2[i]);
    post.corners.push_back({kCornerNames[i], embed(surface, q.x, q.y)});
  }

  Rng pre_rng(mix_seed(seed, {kSaltPrePose}));
  Rng post_rng(mix_seed(seed, {kSaltPostPose}));
  const Pose pre_pose = random_pose(pre_rng);
  const Pose post_pose = random_pose(post_rng);
  for (auto& f : pre.fiducials) f.p = apply_pose(pre_pose, f.p);
  for (auto& cpt : pre.corners) cpt.p = apply_pose(pre_pose, cpt.p);
  for (auto& f : post.fiducials) f.p = apply_pose(post_pose, f.p);
  for (auto& cpt : post.corners) cpt.p = apply_pose(post_pose, cpt.p);

  if (noise_sigma_cm > 0.0) {
    Rng noise_rng(mix_seed(seed, {kSaltScanNoise}));
    add_scan_noise(pre, noise_sigma_cm, noise_rng);
    add_scan_noise(post, noise_sigma_cm, noise_rng);
    add_scan_noise(bare, noise_sigma_cm, noise_rng);
  }
  return {pre, post, bare};
}

}  // namespace emg
