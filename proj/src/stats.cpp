#include "emg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "emg/errors.hpp"
#include "emg/rng.hpp"

namespace emg {

namespace {

constexpr int kExactLimit = 20;

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> samples, double mu0,
                                    WilcoxonMethod method) {
  std::vector<double> diffs;
  diffs.reserve(samples.size());
  for (double x : samples) {
    const double d = x - mu0;
    if (d != 0.0) diffs.push_back(d);
  }
  const int n = static_cast<int>(diffs.size());
  if (n == 0) throw DegenerateSampleError("all differences equal the hypothesized median");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });

  // Doubled mid-ranks stay integral under ties: a run of tied magnitudes at
  // 1-based positions [lo, hi] gets doubled rank lo + hi.
  std::vector<long long> rank2(n);
  std::vector<int> tie_sizes;
  for (int i = 0; i < n;) {
    int j = i;
    while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    for (int k = i; k < j; ++k) rank2[order[k]] = static_cast<long long>(i + 1) + j;
    tie_sizes.push_back(j - i);
    i = j;
  }

  long long w2 = 0;
  for (int i = 0; i < n; ++i)
    if (diffs[i] > 0.0) w2 += rank2[i];

  WilcoxonResult res;
  res.statistic_w = 0.5 * static_cast<double>(w2);
  res.n_effective = n;

  const bool exact = method == WilcoxonMethod::exact ||
                     (method == WilcoxonMethod::auto_select && n <= kExactLimit);
  if (exact) {
    // Count sign patterns by doubled-rank sum. counts[s] = number of subsets
    // of the doubled ranks summing to s; total mass 2^n.
    const long long total2 = static_cast<long long>(n) * (n + 1);
    std::vector<double> counts(total2 + 1, 0.0);
    counts[0] = 1.0;
    long long reach = 0;
    for (int i = 0; i < n; ++i) {
      const long long r = rank2[i];
      for (long long s = reach; s >= 0; --s)
        if (counts[s] != 0.0) counts[s + r] += counts[s];
      reach += r;
    }
    double le = 0.0, ge = 0.0;
    for (long long s = 0; s <= total2; ++s) {
      if (s <= w2) le += counts[s];
      if (s >= w2) ge += counts[s];
    }
    const double denom = std::ldexp(1.0, n);
    res.p_value = std::min(1.0, 2.0 * std::min(le, ge) / denom);
    res.method = WilcoxonMethod::exact;
  } else {
    const double nn = n;
    const double mu = nn * (nn + 1.0) / 4.0;
    double tie_term = 0.0;
    for (int t : tie_sizes) tie_term += static_cast<double>(t) * t * t - t;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) throw DegenerateSampleError("zero variance in signed-rank statistic");
    const double w = res.statistic_w;
    const double cc = w > mu ? -0.5 : (w < mu ? 0.5 : 0.0);
    const double z = (w - mu + cc) / std::sqrt(var);
    res.p_value = std::min(1.0, 2.0 * normal_sf(std::abs(z)));
    res.method = WilcoxonMethod::normal_approx;
  }
  return res;
}

double quantile(std::span<const double> samples, double q) {
  if (samples.empty()) throw InputError("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile order outside [0, 1]");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double h = q * static_cast<double>(s.size() - 1);
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= s.size()) return s.back();
  const double frac = h - static_cast<double>(lo);
  return s[lo] + frac * (s[lo + 1] - s[lo]);
}

std::pair<double, double> bootstrap_ci(std::span<const double> samples,
                                       const std::function<double(std::span<const double>)>& stat,
                                       double confidence, int n_resamples, std::uint64_t seed) {
  if (samples.empty()) throw InputError("bootstrap over empty sample");
  if (n_resamples < 100) throw InputError("need at least 100 bootstrap resamples");
  if (!(confidence > 0.0 && confidence < 1.0)) throw InputError("confidence outside (0, 1)");

  const size_t n = samples.size();
  std::vector<double> stats(n_resamples);
  std::vector<double> draw(n);
  for (int r = 0; r < n_resamples; ++r) {
    Rng rng(mix_seed(seed, {0x626f6f74ULL, static_cast<std::uint64_t>(r)}));
    for (size_t i = 0; i < n; ++i) draw[i] = samples[rng.bounded(n)];
    stats[r] = stat(draw);
  }
  const double alpha = 1.0 - confidence;
  return {quantile(stats, alpha / 2.0), quantile(stats, 1.0 - alpha / 2.0)};
}

}  // namespace emg
