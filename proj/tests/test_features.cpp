#include <doctest.h>

#include <cmath>
#include <vector>

#include "emg/errors.hpp"
#include "emg/features.hpp"

using namespace emg;

namespace {

constexpr double kFs = 2000.0;

PowerSpectrum make_psd(std::vector<double> density, double delta_f = 5.0) {
  PowerSpectrum psd;
  psd.delta_f = delta_f;
  psd.density = std::move(density);
  psd.freqs.resize(psd.density.size());
  for (size_t i = 0; i < psd.freqs.size(); ++i) psd.freqs[i] = static_cast<double>(i) * delta_f;
  psd.n_windows = 1;
  return psd;
}

Recording tone_recording(double freq_hz, double amp, size_t n, GridLayout g = {1, 1, 1.0}) {
  Recording rec(kFs, g, n);
  auto x = rec.channel(0);
  for (size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / kFs);
  return rec;
}

}  // namespace

TEST_CASE("spectral features on a hand-built spectrum") {
  const PowerSpectrum psd = make_psd({0.0, 0.0, 2.0, 1.0, 1.0});
  CHECK(total_power(psd) == doctest::Approx(20.0));
  CHECK(mean_frequency(psd) == doctest::Approx(13.75));  // (10*2 + 15 + 20) / 4
  // cumulative power reaches half the total exactly at the 10 Hz bin
  CHECK(median_frequency(psd) == 10.0);
  CHECK(peak_frequency(psd) == 10.0);
}

TEST_CASE("peak frequency breaks ties toward the lower bin") {
  CHECK(peak_frequency(make_psd({0.0, 3.0, 3.0, 1.0})) == 5.0);
}

TEST_CASE("median frequency lands on the smallest bin reaching half power") {
  // half power = 3; cumsum hits 3 exactly at the second bin
  CHECK(median_frequency(make_psd({2.0, 1.0, 2.0, 1.0}, 1.0)) == 1.0);
  // skewed tail pulls the median right of the peak
  CHECK(median_frequency(make_psd({0.0, 3.0, 1.0, 2.0, 1.0, 1.0}, 1.0)) == 2.0);
}

TEST_CASE("zero spectra make frequency features undefined") {
  const PowerSpectrum psd = make_psd({0.0, 0.0, 0.0});
  CHECK_THROWS_AS(median_frequency(psd), UndefinedFeatureError);
  CHECK_THROWS_AS(mean_frequency(psd), UndefinedFeatureError);
  CHECK_THROWS_AS(peak_frequency(psd), UndefinedFeatureError);
  CHECK(total_power(psd) == 0.0);
}

TEST_CASE("a pure tone pins all three frequency features to its bin") {
  const Recording rec = tone_recording(100.0, 2e-3, 6000);
  const ContractionSegment seg{0, 6000, ""};
  const PowerSpectrum psd = welch_psd(rec, seg, 0);

  CHECK(peak_frequency(psd) == 100.0);
  CHECK(median_frequency(psd) == 100.0);
  CHECK(std::fabs(mean_frequency(psd) - 100.0) <= psd.delta_f);
  CHECK(total_power(psd) == doctest::Approx(2e-3 * 2e-3 / 2.0).epsilon(0.05));
}

TEST_CASE("two tones weight the mean and median as expected") {
  Recording rec = tone_recording(100.0, 1e-3, 6000);
  auto x = rec.channel(0);
  for (size_t i = 0; i < x.size(); ++i)
    x[i] += 2e-3 * std::sin(2.0 * M_PI * 300.0 * static_cast<double>(i) / kFs);
  const PowerSpectrum psd = welch_psd(rec, {0, 6000, ""}, 0);

  // powers 1:4 -> mean at (100 + 4*300)/5, median and peak at the heavy tone
  CHECK(mean_frequency(psd) == doctest::Approx(260.0).epsilon(0.01));
  CHECK(median_frequency(psd) == 300.0);
  CHECK(peak_frequency(psd) == 300.0);
}

TEST_CASE("integrated EMG matches the closed-form ramp integral") {
  const size_t n = 4000;
  EnvelopeRecording env(kFs, {1, 1, 1.0}, n);
  auto x = env.channel(0);
  for (size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / kFs;
  const ContractionSegment seg{0, n, ""};
  const double t_end = static_cast<double>(n - 1) / kFs;
  // trapezoid rule is exact on a linear ramp
  CHECK(integrated_emg(env, seg, 0) == doctest::Approx(t_end * t_end / 2.0).epsilon(1e-12));
}

TEST_CASE("max envelope respects segment bounds") {
  EnvelopeRecording env(kFs, {1, 1, 1.0}, 1000);
  auto x = env.channel(0);
  x[100] = 5.0;
  x[900] = 9.0;
  CHECK(max_envelope(env, {0, 500, ""}, 0) == 5.0);
  CHECK(max_envelope(env, {0, 1000, ""}, 0) == 9.0);
  CHECK_THROWS_AS(max_envelope(env, {500, 1500, ""}, 0), InputError);
  CHECK_THROWS_AS(max_envelope(env, {0, 500, ""}, 3), InputError);
}

TEST_CASE("feature averaging is the arithmetic mean per feature") {
  ContractionFeatures a, b;
  a.channel = b.channel = 4;
  a.mnf_hz = 100.0;
  b.mnf_hz = 120.0;
  a.iemg_vs = 1.0;
  b.iemg_vs = 3.0;
  a.contraction = 0;
  b.contraction = 1;
  const ContractionFeatures arr[] = {a, b};
  const FeatureSet avg = average_features(arr);
  CHECK(avg.get(Feature::mnf) == 110.0);
  CHECK(avg.get(Feature::iemg) == 2.0);
  CHECK(avg.n_contractions == 2);
  CHECK(avg.channel == 4);

  ContractionFeatures c = b;
  c.channel = 5;
  const ContractionFeatures mixed[] = {a, c};
  CHECK_THROWS_AS(average_features(mixed), InputError);
  CHECK_THROWS_AS(average_features({}), InputError);
}

TEST_CASE("recording-level extraction respects the channel mask") {
  Recording rec = tone_recording(100.0, 1e-3, 6000, {2, 1, 1.0});
  auto x1 = rec.channel(1);
  for (size_t i = 0; i < x1.size(); ++i)
    x1[i] = 2e-3 * std::sin(2.0 * M_PI * 150.0 * static_cast<double>(i) / kFs);

  EnvelopeRecording env = rec;  // stand-in envelope with the same shape
  SegmentSet segs;
  segs.segments = {{0, 3000, "a"}, {3000, 6000, "b"}};
  ChannelMask mask;
  mask.open = {false, true};
  mask.first_offending_window = {-1, 0};

  const RecordingFeatures rf = extract_recording_features(rec, env, segs, &mask);
  REQUIRE(rf.averaged.size() == 2);
  CHECK(rf.averaged[0].n_contractions == 2);
  CHECK(rf.per_contraction[0].size() == 2);
  CHECK(rf.averaged[0].get(Feature::mnf) == doctest::Approx(100.0).epsilon(0.01));
  // masked channel stays empty but keeps its slot
  CHECK(rf.averaged[1].n_contractions == 0);
  CHECK(rf.per_contraction[1].empty());
  CHECK(rf.averaged[1].channel == 1);

  SegmentSet none;
  CHECK_THROWS_AS(extract_recording_features(rec, env, none, &mask), EmptySegmentationError);
}

TEST_CASE("a segment shorter than one window cannot be analyzed") {
  const Recording rec = tone_recording(100.0, 1e-3, 6000);
  const EnvelopeRecording env = rec;
  CHECK_THROWS_AS(welch_psd(rec, {0, 300, ""}, 0), InsufficientDataError);
  CHECK_THROWS_AS(extract_features(rec, env, {0, 300, ""}, 0, 0), InsufficientDataError);
}
