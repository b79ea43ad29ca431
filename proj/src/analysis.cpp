#include "emg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "emg/errors.hpp"
#include "emg/rng.hpp"
#include "emg/stats.hpp"

namespace emg {

namespace {

// Lattice distances repeat exactly; quantize to 1e-6 cm for grouping.
long long distance_key(double d_cm) { return std::llround(d_cm * 1e6); }

// Pairs sharing a channel are correlated, so bin means wander several times
// more than independent sampling predicts; the flag is for curves the
// family cannot express at all, not for that excess.
constexpr double kLackOfFitThreshold = 20.0;

bool usable(const FeatureSet& fs) { return fs.n_contractions > 0; }

std::map<long long, std::vector<double>> group_by_distance(
    const std::vector<PairDifference>& points) {
  std::map<long long, std::vector<double>> groups;
  for (const auto& p : points) groups[distance_key(p.distance_cm)].push_back(p.abs_pct_diff);
  return groups;
}

}  // namespace

std::optional<double> percent_difference(double ref, double other) {
  if (ref == 0.0) return std::nullopt;
  return 100.0 * std::abs(other - ref) / std::abs(ref);
}

PairwiseResult intra_pairwise(const std::vector<FeatureSet>& features, const GridLayout& layout,
                              const ChannelMask& mask) {
  if (static_cast<int>(features.size()) != layout.n_channels() ||
      static_cast<int>(mask.open.size()) != layout.n_channels())
    throw InputError("feature/mask size does not match the layout");

  std::vector<int> usable_channels;
  for (int c = 0; c < layout.n_channels(); ++c)
    if (!mask.open[c] && usable(features[c])) usable_channels.push_back(c);

  PairwiseResult res;
  for (int f = 0; f < kNumFeatures; ++f) {
    auto& out = res.pairs[f];
    out.reserve(usable_channels.size() * usable_channels.size());
    for (int a : usable_channels) {
      const double ref = features[a].get(static_cast<Feature>(f));
      for (int b : usable_channels) {
        const auto pd = percent_difference(ref, features[b].get(static_cast<Feature>(f)));
        if (!pd) {
          ++res.excluded_zero_ref[f];
          continue;
        }
        out.push_back({intra_grid_distance(layout, a, b), *pd, a, b});
      }
    }
  }
  return res;
}

double FitResult::eval(double d_cm) const { return a * (1.0 - std::exp(-d_cm / lambda_cm)); }

namespace {

struct FitData {
  std::vector<double> d, y;
};

// A is profiled out: for fixed lambda the optimal plateau is
// max(0, <g,y>/<g,g>) with g = 1 - exp(-d/lambda).
double fit_objective(const FitData& data, double lambda, double* a_out) {
  double gy = 0.0, gg = 0.0;
  const size_t n = data.d.size();
  std::vector<double> g(n);
  for (size_t i = 0; i < n; ++i) {
    g[i] = 1.0 - std::exp(-data.d[i] / lambda);
    gy += g[i] * data.y[i];
    gg += g[i] * g[i];
  }
  const double a = gg > 0.0 ? std::max(0.0, gy / gg) : 0.0;
  double rss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = data.y[i] - a * g[i];
    rss += r * r;
  }
  if (a_out) *a_out = a;
  return rss;
}

}  // namespace

FitResult fit_inverse_exponential(const std::vector<PairDifference>& points,
                                  const FitOptions& opts) {
  FitData data;
  for (const auto& p : points) {
    if (p.distance_cm == 0.0 && !opts.weight_self_pairs) continue;
    data.d.push_back(p.distance_cm);
    data.y.push_back(p.abs_pct_diff);
  }
  std::map<long long, int> distinct;
  for (double d : data.d) ++distinct[distance_key(d)];
  if (data.d.size() < 8 || distinct.size() < 3)
    throw UnfittableError("need at least 8 points over 3 distinct distances");

  FitResult res;
  res.n_points = static_cast<int>(data.d.size());
  const double mean_y = std::accumulate(data.y.begin(), data.y.end(), 0.0) /
                        static_cast<double>(data.y.size());
  for (double y : data.y) res.tss += (y - mean_y) * (y - mean_y);

  const bool all_zero = std::all_of(data.y.begin(), data.y.end(), [](double y) { return y == 0.0; });
  if (all_zero) {
    res.a = 0.0;
    res.lambda_cm = 1.0;
    res.rss = 0.0;
    res.converged = true;
    res.amplitude_null = true;
    return res;
  }

  // Top start at 32 so the refinement bracket [best/4, best*4] can reach the
  // lambda cap; shallow curves otherwise pin lambda to an interior bracket
  // edge.
  const double starts[] = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
  double best_lambda = starts[0];
  double best_rss = std::numeric_limits<double>::infinity();
  for (double l : starts) {
    const double rss = fit_objective(data, l, nullptr);
    if (rss < best_rss) {
      best_rss = rss;
      best_lambda = l;
    }
  }

  // Golden-section refinement on log(lambda) around the best start.
  const double kLoBound = 0.05, kHiBound = 50.0;
  double lo = std::log(std::max(kLoBound, best_lambda / 4.0));
  double hi = std::log(std::min(kHiBound, best_lambda * 4.0));
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = fit_objective(data, std::exp(x1), nullptr);
  double f2 = fit_objective(data, std::exp(x2), nullptr);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = fit_objective(data, std::exp(x1), nullptr);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = fit_objective(data, std::exp(x2), nullptr);
    }
  }
  double lambda = std::exp(0.5 * (lo + hi));
  double a = 0.0;
  double rss = fit_objective(data, lambda, &a);
  if (rss > best_rss) {
    lambda = best_lambda;
    rss = fit_objective(data, lambda, &a);
  }

  res.lambda_cm = lambda;
  res.a = a;
  res.rss = rss;
  res.converged = std::isfinite(rss);
  if (a == 0.0) {
    res.amplitude_null = true;
    res.lambda_cm = 1.0;
  }
  // Misfit is judged by pure-error lack of fit on the distance-binned means:
  // the per-pair scatter within each bin sets the noise scale, so plateau
  // wiggle at sampling level stays clean while structure the family cannot
  // express flags regardless of how flat the curve is.
  if (!res.amplitude_null) {
    struct Bin {
      double n = 0.0, sum = 0.0, sumsq = 0.0;
    };
    std::map<long long, Bin> bins;
    for (size_t i = 0; i < data.d.size(); ++i) {
      auto& b = bins[distance_key(data.d[i])];
      b.n += 1.0;
      b.sum += data.y[i];
      b.sumsq += data.y[i] * data.y[i];
    }
    double wsum = 0.0, ss_pe = 0.0, ss_lof = 0.0;
    for (const auto& [k, b] : bins) {
      const double d = static_cast<double>(k) * 1e-6;
      const double yb = b.sum / b.n;
      wsum += b.n;
      ss_pe += std::max(0.0, b.sumsq - b.sum * b.sum / b.n);
      ss_lof += b.n * (yb - res.eval(d)) * (yb - res.eval(d));
    }
    const double df_lof = static_cast<double>(bins.size()) - 2.0;
    const double df_pe = wsum - static_cast<double>(bins.size());
    if (df_lof > 0.0 && ss_lof > 0.0) {
      res.lof_f = (df_pe > 0.0 && ss_pe > 0.0)
                      ? (ss_lof / df_lof) / (ss_pe / df_pe)
                      : std::numeric_limits<double>::infinity();
    }
    res.poor_fit = res.lof_f > kLackOfFitThreshold && std::sqrt(ss_lof / wsum) > 0.5;
  }
  return res;
}

SameLocationDiffs same_location_diffs(const std::vector<FeatureSet>& pre,
                                      const std::vector<FeatureSet>& post, const ChannelMap& map,
                                      Feature feature, double max_sep_cm) {
  if (pre.size() != map.nearest.size())
    throw InputError("feature set size does not match the channel map");

  SameLocationDiffs out;
  for (size_t c = 0; c < pre.size(); ++c) {
    if (!usable(pre[c])) continue;
    const int b = map.nearest[c];
    if (map.separation_cm[c] > max_sep_cm) continue;
    if (b < 0 || static_cast<size_t>(b) >= post.size() || !usable(post[b])) continue;
    const double ref = pre[c].get(feature);
    const double other = post[b].get(feature);
    out.abs_diffs.push_back(std::abs(other - ref));
    const auto pd = percent_difference(ref, other);
    if (!pd) {
      ++out.n_excluded_zero_ref;
      continue;
    }
    out.diffs.push_back(*pd);
  }
  return out;
}

SameLocationSummary summarize_same_location(const SameLocationDiffs& diffs, Feature feature) {
  if (diffs.diffs.empty())
    throw InsufficientOverlapError("no channel pairs within the same-location separation bound");
  SameLocationSummary out;
  out.feature = feature;
  out.n_excluded_zero_ref = diffs.n_excluded_zero_ref;
  out.n_pairs = static_cast<int>(diffs.diffs.size());
  out.median_pct = quantile(diffs.diffs, 0.5);
  out.q1 = quantile(diffs.diffs, 0.25);
  out.q3 = quantile(diffs.diffs, 0.75);
  return out;
}

SameLocationSummary same_location_summary(const std::vector<FeatureSet>& pre,
                                          const std::vector<FeatureSet>& post,
                                          const ChannelMap& map, Feature feature,
                                          double max_sep_cm) {
  return summarize_same_location(same_location_diffs(pre, post, map, feature, max_sep_cm),
                                 feature);
}

std::vector<double> same_channel_residual_values(const std::vector<FeatureSet>& pre,
                                                 const std::vector<FeatureSet>& post,
                                                 const ChannelMap& map, const FitResult& fit,
                                                 const std::vector<double>& displacement_cm,
                                                 Feature feature) {
  if (pre.size() != map.nearest.size() || displacement_cm.size() != pre.size())
    throw InputError("feature/displacement size does not match the channel map");

  std::vector<double> residuals;
  std::vector<char> seen(pre.size(), 0);
  for (size_t a = 0; a < pre.size(); ++a) {
    if (!usable(pre[a])) continue;
    const int candidates[2] = {static_cast<int>(a), map.nearest[a]};
    for (int c : candidates) {
      if (c < 0 || static_cast<size_t>(c) >= pre.size() || seen[c]) continue;
      seen[c] = 1;
      if (!usable(pre[c]) || !usable(post[c])) continue;
      const auto pd = percent_difference(pre[c].get(feature), post[c].get(feature));
      if (!pd) continue;
      residuals.push_back(*pd - fit.eval(displacement_cm[c]));
    }
  }
  return residuals;
}

ResidualTest residual_test_from_values(std::vector<double> residuals, Feature feature,
                                       double sl_median) {
  if (residuals.empty())
    throw InsufficientDataError("no same-channel residuals could be formed");
  ResidualTest out;
  out.feature = feature;
  out.residuals = std::move(residuals);
  out.underpowered = out.residuals.size() < 5;

  // A fully degenerate sample carries no evidence against the null.
  try {
    out.p_zero_median = wilcoxon_signed_rank(out.residuals, 0.0).p_value;
  } catch (const DegenerateSampleError&) {
    out.p_zero_median = 1.0;
  }
  try {
    out.p_same_location_median = wilcoxon_signed_rank(out.residuals, sl_median).p_value;
  } catch (const DegenerateSampleError&) {
    out.p_same_location_median = 1.0;
  }
  out.reject_zero = out.p_zero_median < 0.05;
  out.reject_same_location = out.p_same_location_median < 0.05;
  return out;
}

ResidualTest same_channel_residuals(const std::vector<FeatureSet>& pre,
                                    const std::vector<FeatureSet>& post, const ChannelMap& map,
                                    const FitResult& fit,
                                    const std::vector<double>& displacement_cm, Feature feature,
                                    double sl_median) {
  return residual_test_from_values(
      same_channel_residual_values(pre, post, map, fit, displacement_cm, feature), feature,
      sl_median);
}

std::vector<FractionPoint> fraction_below(const std::vector<PairDifference>& points,
                                          double threshold_pct) {
  if (threshold_pct < 0.0) throw InputError("fraction_below threshold must be nonnegative");
  std::vector<FractionPoint> out;
  for (const auto& [key, diffs] : group_by_distance(points)) {
    const auto below = std::count_if(diffs.begin(), diffs.end(),
                                     [&](double d) { return d < threshold_pct; });
    out.push_back({static_cast<double>(key) * 1e-6,
                   static_cast<double>(below) / static_cast<double>(diffs.size()),
                   static_cast<int>(diffs.size())});
  }
  return out;
}

std::vector<CurvePoint> mean_curve_with_ci(const std::vector<PairDifference>& points,
                                           double confidence, std::uint64_t seed) {
  std::vector<CurvePoint> out;
  std::uint64_t index = 0;
  for (const auto& [key, diffs] : group_by_distance(points)) {
    CurvePoint cp;
    cp.distance_cm = static_cast<double>(key) * 1e-6;
    cp.n = static_cast<int>(diffs.size());
    cp.mean_pct = std::accumulate(diffs.begin(), diffs.end(), 0.0) / cp.n;
    if (cp.n >= 2) {
      const auto mean_stat = [](std::span<const double> s) {
        return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
      };
      std::tie(cp.lo, cp.hi) =
          bootstrap_ci(diffs, mean_stat, confidence, 2000, mix_seed(seed, {0x6d63u, index}));
    } else {
      cp.lo = cp.hi = cp.mean_pct;
    }
    out.push_back(cp);
    ++index;
  }
  return out;
}

}  // namespace emg
