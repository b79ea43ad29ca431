#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "emg/features.hpp"
#include "emg/geometry.hpp"

namespace emg {

struct PairDifference {
  double distance_cm = 0.0;
  double abs_pct_diff = 0.0;
  int chan_a = 0;  // reference channel (denominator)
  int chan_b = 0;
};

struct PairwiseResult {
  std::array<std::vector<PairDifference>, kNumFeatures> pairs;
  // Ordered pairs dropped because the reference value was exactly zero.
  std::array<int, kNumFeatures> excluded_zero_ref{};
};

struct FitOptions {
  // Self-pairs (d = 0, diff = 0) would pin the fit trivially; excluded by
  // default but kept in the pair lists.
  bool weight_self_pairs = false;
};

struct FitResult {
  double a = 0.0;          // plateau, percent
  double lambda_cm = 1.0;  // length constant
  double rss = 0.0;
  double tss = 0.0;  // about the mean of the fitted points
  int n_points = 0;
  bool converged = false;
  bool amplitude_null = false;  // all differences zero, lambda unidentifiable
  // Pure-error lack-of-fit F ratio on the distance-binned means; infinity
  // when the bins are exactly reproducible yet off the curve.
  double lof_f = 0.0;
  // Set when lof_f clears its threshold and the binned misfit also exceeds
  // 0.5 percent points weighted RMS, so flat low plateaus stay clean.
  bool poor_fit = false;

  double eval(double d_cm) const;
};

struct SameLocationSummary {
  Feature feature = Feature::mnf;
  double median_pct = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  int n_pairs = 0;
  int n_excluded_zero_ref = 0;
};

struct ResidualTest {
  Feature feature = Feature::mnf;
  std::vector<double> residuals;  // percent points, one per distinct channel
  double p_zero_median = 1.0;
  double p_same_location_median = 1.0;
  bool reject_zero = false;           // at alpha = 0.05
  bool reject_same_location = false;  // at alpha = 0.05
  bool underpowered = false;          // fewer than 5 residuals
};

struct FractionPoint {
  double distance_cm = 0.0;
  double fraction = 0.0;
  int n = 0;
};

struct CurvePoint {
  double distance_cm = 0.0;
  double mean_pct = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;
};

// 100 * |other - ref| / |ref|; nullopt when the reference is zero (the pair is
// excluded, not an error).
std::optional<double> percent_difference(double ref, double other);

// All ordered pairs over unmasked channels, self-pairs included. Distances are
// lattice distances on the layout.
PairwiseResult intra_pairwise(const std::vector<FeatureSet>& features, const GridLayout& layout,
                              const ChannelMask& mask);

// Least-squares fit of f(d) = A * (1 - exp(-d / lambda)). A is profiled in
// closed form; lambda found by multi-start plus golden-section refinement.
// Needs >= 8 weighted points over >= 3 distinct distances.
FitResult fit_inverse_exponential(const std::vector<PairDifference>& points,
                                  const FitOptions& opts = {});

struct SameLocationDiffs {
  std::vector<double> diffs;      // percent
  std::vector<double> abs_diffs;  // feature units (volts for amplitude features)
  int n_excluded_zero_ref = 0;
};

// Raw same-location percent differences; the pipeline pools these across
// shift pairs before summarizing.
SameLocationDiffs same_location_diffs(const std::vector<FeatureSet>& pre,
                                      const std::vector<FeatureSet>& post, const ChannelMap& map,
                                      Feature feature, double max_sep_cm = 0.5);

// Median and IQR of pooled diffs; throws InsufficientOverlapError when empty.
SameLocationSummary summarize_same_location(const SameLocationDiffs& diffs, Feature feature);

// Percent differences between each pre channel's feature and its nearest post
// channel, restricted to separations <= max_sep_cm.
SameLocationSummary same_location_summary(const std::vector<FeatureSet>& pre,
                                          const std::vector<FeatureSet>& post,
                                          const ChannelMap& map, Feature feature,
                                          double max_sep_cm = 0.5);

// One residual per distinct channel touched by the closest-pair matching.
std::vector<double> same_channel_residual_values(const std::vector<FeatureSet>& pre,
                                                 const std::vector<FeatureSet>& post,
                                                 const ChannelMap& map, const FitResult& fit,
                                                 const std::vector<double>& displacement_cm,
                                                 Feature feature);

// Wilcoxon tests of the residual median against zero and against sl_median.
ResidualTest residual_test_from_values(std::vector<double> residuals, Feature feature,
                                       double sl_median);

// Same-channel pre/post percent differences minus the fitted distance effect.
// displacement_cm[c] is how far channel c moved between sessions. Tests the
// residual median against zero and against sl_median.
ResidualTest same_channel_residuals(const std::vector<FeatureSet>& pre,
                                    const std::vector<FeatureSet>& post, const ChannelMap& map,
                                    const FitResult& fit,
                                    const std::vector<double>& displacement_cm, Feature feature,
                                    double sl_median);

// Per distinct distance, the fraction of pairs with abs_pct_diff strictly
// below the threshold.
std::vector<FractionPoint> fraction_below(const std::vector<PairDifference>& points,
                                          double threshold_pct);

// Per distinct distance, sample mean with a seeded bootstrap percentile CI
// (2000 resamples). Single-point distances get a zero-width interval.
std::vector<CurvePoint> mean_curve_with_ci(const std::vector<PairDifference>& points,
                                           double confidence, std::uint64_t seed);

}  // namespace emg
