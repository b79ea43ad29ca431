#include "emg/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

namespace emg::kernels {

namespace {

void rectify_scalar(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = std::fabs(x[i]);
}

void clamp_nonneg_scalar(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = x[i] < 0.0 ? 0.0 : x[i];
}

double sum_scalar(const double* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sum_sq_scalar(const double* x, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_val_scalar(const double* x, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double dot_scalar(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void detrend_window_scalar(const double* x, double c, const double* w, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = (x[i] - c) * w[i];
}

void accum_power_scalar(const double* z, double* acc, size_t n) {
  for (size_t i = 0; i < n; ++i) acc[i] += z[2 * i] * z[2 * i] + z[2 * i + 1] * z[2 * i + 1];
}

const Ops kScalar = {
    rectify_scalar, clamp_nonneg_scalar, sum_scalar,  sum_sq_scalar,         max_val_scalar,
    dot_scalar,     axpy_scalar,         detrend_window_scalar, accum_power_scalar,
    "scalar",
};

}  // namespace

const Ops& scalar() { return kScalar; }

#if !defined(EMG_HAVE_AVX2_TU)
const Ops* avx2() { return nullptr; }
#endif

const Ops& active() {
  static const Ops* chosen = [] {
    const char* env = std::getenv("EMG_KERNELS");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return &kScalar;
    const Ops* v = avx2();
    return v != nullptr ? v : &kScalar;
  }();
  return *chosen;
}

}  // namespace emg::kernels
