#include <doctest.h>

#include <cmath>
#include <vector>

#include "emg/errors.hpp"
#include "emg/rng.hpp"
#include "emg/signal.hpp"

using namespace emg;

namespace {

constexpr double kFs = 2000.0;

Recording tone_recording(double freq_hz, double duration_s, double amp, GridLayout g = {1, 1, 1.0}) {
  Recording rec(kFs, g, static_cast<size_t>(duration_s * kFs));
  for (int c = 0; c < rec.n_channels(); ++c) {
    auto x = rec.channel(c);
    for (size_t i = 0; i < x.size(); ++i)
      x[i] = amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / kFs);
  }
  return rec;
}

double mid_rms(std::span<const double> x) {
  const size_t a = x.size() / 4, b = 3 * x.size() / 4;
  double acc = 0.0;
  for (size_t i = a; i < b; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(b - a));
}

}  // namespace

TEST_CASE("bandpass keeps mid-band tones and rejects out-of-band ones") {
  for (auto [f, keep] : {std::pair{100.0, true}, {235.0, true}, {600.0, false}, {5.0, false}}) {
    CAPTURE(f);
    const Recording rec = tone_recording(f, 4.0, 1.0);
    const Recording out = bandpass_filter(rec);
    const double ratio = mid_rms(out.channel(0)) / mid_rms(rec.channel(0));
    if (keep)
      CHECK(ratio > 0.97);
    else
      CHECK(ratio < 0.01);
  }
}

TEST_CASE("bandpass removes a DC offset") {
  Recording rec(kFs, {1, 1, 1.0}, 8000);
  Rng rng(11);
  for (auto& v : rec.channel(0)) v = 0.7 + 0.1 * rng.gaussian();
  const Recording out = bandpass_filter(rec);
  auto x = out.channel(0);
  double mean = 0.0;
  for (size_t i = x.size() / 4; i < 3 * x.size() / 4; ++i) mean += x[i];
  mean /= static_cast<double>(x.size() / 2);
  CHECK(std::fabs(mean) < 1e-3);
}

TEST_CASE("filter stages set the warm-up guard and keep metadata") {
  Recording rec = tone_recording(100.0, 4.0, 1.0);
  rec.meta.muscle = "GM";
  rec.meta.shift_index = 2;
  const Recording out = notch_powerline(bandpass_filter(rec));
  CHECK(out.warmup_samples == static_cast<size_t>(kEdgeGuardSeconds * kFs));
  CHECK(out.meta.muscle == "GM");
  CHECK(out.meta.shift_index == 2);
  CHECK(out.n_samples() == rec.n_samples());
}

TEST_CASE("notch kills 60 Hz and its harmonics but not neighbors") {
  for (double f : {60.0, 180.0, 420.0}) {
    CAPTURE(f);
    const Recording rec = tone_recording(f, 4.0, 1.0);
    const Recording out = notch_powerline(rec);
    CHECK(mid_rms(out.channel(0)) / mid_rms(rec.channel(0)) < 0.01);
  }
  const Recording rec = tone_recording(100.0, 4.0, 1.0);
  const Recording out = notch_powerline(rec);
  CHECK(mid_rms(out.channel(0)) / mid_rms(rec.channel(0)) > 0.99);
}

TEST_CASE("open-channel detection flags silent spans") {
  Recording rec(kFs, {2, 2, 1.0}, 4000);
  Rng rng(5);
  for (int c = 0; c < 4; ++c)
    for (auto& v : rec.channel(c)) v = 1e-4 * rng.gaussian();
  // channel 2 goes silent from sample 2000 on
  for (size_t i = 2000; i < 4000; ++i) rec.channel(2)[i] = 0.0;

  const ChannelMask mask = detect_open_channels(rec);
  CHECK(mask.open == std::vector<bool>{false, false, true, false});
  CHECK(mask.n_closed() == 3);
  // the flagged window may start a few samples early if the last noise
  // samples before the dropout happen to be tiny
  CHECK(mask.first_offending_window[2] >= 1990);
  CHECK(mask.first_offending_window[2] <= 2000);
  CHECK(mask.first_offending_window[0] == -1);
}

TEST_CASE("an all-silent recording yields an all-open mask, not a throw") {
  Recording rec(kFs, {2, 1, 1.0}, 2000);
  const ChannelMask mask = detect_open_channels(rec);
  CHECK(mask.n_open() == 2);
  CHECK(mask.n_closed() == 0);
  CHECK(mask.first_offending_window[0] == 0);
}

TEST_CASE("envelope of a steady tone settles near the rectified mean") {
  const double amp = 2.5e-3;
  const Recording rec = tone_recording(100.0, 6.0, amp);
  const EnvelopeRecording env = compute_envelope(rec);
  auto x = env.channel(0);
  for (size_t i = x.size() / 4; i < 3 * x.size() / 4; i += 50)
    CHECK(x[i] == doctest::Approx(2.0 * amp / M_PI).epsilon(0.02));
  for (double v : x) CHECK(v >= 0.0);
}

TEST_CASE("envelope tracks a burst") {
  Recording rec(kFs, {1, 1, 1.0}, 12000);
  auto x = rec.channel(0);
  for (size_t i = 4000; i < 8000; ++i)
    x[i] = 1e-3 * std::sin(2.0 * M_PI * 120.0 * static_cast<double>(i) / kFs);
  const EnvelopeRecording env = compute_envelope(rec);
  auto e = env.channel(0);
  CHECK(e[6000] > 10.0 * std::max(e[2000], 1e-12));
  CHECK(e[6000] > 10.0 * std::max(e[10500], 1e-12));
}

TEST_CASE("signal stages validate their configuration") {
  const Recording rec = tone_recording(100.0, 2.0, 1.0);
  CHECK_THROWS_AS(bandpass_filter(rec, 450.0, 20.0), ConfigError);
  CHECK_THROWS_AS(bandpass_filter(rec, 20.0, 1500.0), ConfigError);
  CHECK_THROWS_AS(notch_powerline(rec, 60.0, 2.0, 4), ConfigError);
  CHECK_THROWS_AS(detect_open_channels(rec, -1.0), ConfigError);
  CHECK_THROWS_AS(detect_open_channels(rec, 10.0), ConfigError);
}
