#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace emg {

enum class WilcoxonMethod { auto_select, exact, normal_approx };

struct WilcoxonResult {
  double statistic_w = 0.0;  // sum of ranks of positive differences
  double p_value = 1.0;      // two-sided
  int n_effective = 0;       // after zero-difference removal
  WilcoxonMethod method = WilcoxonMethod::exact;
};

// Signed-rank test of median(x) == mu0. Zero differences are dropped, ties get
// mid-ranks. Exact enumeration up to n_effective = 20, normal approximation
// with continuity and tie correction beyond. Throws DegenerateSampleError when
// every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> samples, double mu0 = 0.0,
                                    WilcoxonMethod method = WilcoxonMethod::auto_select);

// Linear-interpolation quantile on a copy of the data; q in [0, 1].
double quantile(std::span<const double> samples, double q);

inline double median(std::span<const double> samples) { return quantile(samples, 0.5); }

// Percentile bootstrap interval of the statistic. Each resample draws its
// stream from mix_seed(seed, resample index), so the result is independent of
// evaluation order.
std::pair<double, double> bootstrap_ci(std::span<const double> samples,
                                       const std::function<double(std::span<const double>)>& stat,
                                       double confidence, int n_resamples, std::uint64_t seed);

}  // namespace emg
