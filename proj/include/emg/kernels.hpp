#pragma once

#include <cstddef>

namespace emg::kernels {

// Data-parallel inner loops used by the signal path. Each entry has a scalar
// reference implementation and, on x86-64, an AVX2 variant selected once at
// startup. The two are equivalence-tested against each other; reductions may
// differ by reassociation only.
//
// Inputs must not contain NaN (max_abs relies on ordered compares).
struct Ops {
  // y[i] = |x[i]|
  void (*rectify)(const double* x, double* y, size_t n);
  // x[i] = max(x[i], 0) in place
  void (*clamp_nonneg)(double* x, size_t n);
  // sum of x
  double (*sum)(const double* x, size_t n);
  // sum of x[i]^2
  double (*sum_sq)(const double* x, size_t n);
  // max over x; n must be >= 1
  double (*max_val)(const double* x, size_t n);
  // inner product <a, b>
  double (*dot)(const double* a, const double* b, size_t n);
  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, size_t n);
  // y[i] = (x[i] - c) * w[i]   (per-window detrend + taper, fused)
  void (*detrend_window)(const double* x, double c, const double* w, double* y, size_t n);
  // acc[k] += z[2k]^2 + z[2k+1]^2 over n complex bins (interleaved re/im)
  void (*accum_power)(const double* z, double* acc, size_t n);

  const char* name;
};

const Ops& scalar();

// AVX2 variant; null when not compiled in or not supported by this CPU.
const Ops* avx2();

// The dispatched implementation. Honors EMG_KERNELS=scalar in the
// environment; otherwise AVX2 when available.
const Ops& active();

}  // namespace emg::kernels
