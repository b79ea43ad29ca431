#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "emg/kernels.hpp"
#include "emg/rng.hpp"

using namespace emg;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double scale) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_CASE("scalar kernels match hand-computed values") {
  const auto& k = kernels::scalar();

  const double x[] = {-1.0, 2.0, -3.0};
  double y[3];
  k.rectify(x, y, 3);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 3.0);

  double z[] = {-1.0, 2.0, -0.0, 3.0};
  k.clamp_nonneg(z, 4);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 2.0);
  CHECK(z[2] == 0.0);
  CHECK(z[3] == 3.0);

  const double a[] = {1.0, 2.0, 3.0};
  const double b[] = {4.0, 5.0, 6.0};
  CHECK(k.sum(a, 3) == 6.0);
  CHECK(k.sum_sq(a, 3) == 14.0);
  CHECK(k.dot(a, b, 3) == 32.0);

  const double neg[] = {-5.0, -2.0, -9.0};
  CHECK(k.max_val(neg, 3) == -2.0);
  CHECK(k.max_val(neg, 1) == -5.0);

  double acc[] = {10.0, 20.0};
  k.axpy(2.0, a, acc, 2);
  CHECK(acc[0] == 12.0);
  CHECK(acc[1] == 24.0);

  const double w[] = {0.5, 1.0, 2.0};
  double out[3];
  k.detrend_window(a, 2.0, w, out, 3);
  CHECK(out[0] == -0.5);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 2.0);

  // two complex bins, interleaved re/im
  const double spec[] = {1.0, 2.0, 3.0, 4.0};
  double pw[] = {0.0, 100.0};
  k.accum_power(spec, pw, 2);
  CHECK(pw[0] == 5.0);
  CHECK(pw[1] == 125.0);
}

TEST_CASE("active dispatch names a real implementation") {
  const std::string name = kernels::active().name;
  CHECK((name == "scalar" || name == "avx2"));
  if (kernels::avx2() != nullptr) CHECK(std::string(kernels::avx2()->name) == "avx2");
}

TEST_CASE("avx2 kernels agree with scalar across remainder lengths") {
  const kernels::Ops* v = kernels::avx2();
  if (v == nullptr) return;  // not compiled in or unsupported CPU
  const auto& s = kernels::scalar();

  Rng rng(0x6b65726eULL);
  const size_t sizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 32, 33, 64, 65, 257, 1000};
  for (size_t n : sizes) {
    CAPTURE(n);
    const auto x = random_vec(rng, n, 1e3);
    const auto w = random_vec(rng, n, 1.0);

    std::vector<double> ys(n), yv(n);
    s.rectify(x.data(), ys.data(), n);
    v->rectify(x.data(), yv.data(), n);
    CHECK(std::memcmp(ys.data(), yv.data(), n * sizeof(double)) == 0);

    auto cs = x, cv = x;
    s.clamp_nonneg(cs.data(), n);
    v->clamp_nonneg(cv.data(), n);
    CHECK(std::memcmp(cs.data(), cv.data(), n * sizeof(double)) == 0);

    // reductions may reassociate; bound by a tight relative tolerance
    double mag = 0.0;
    for (double t : x) mag += std::fabs(t);
    CHECK(std::fabs(s.sum(x.data(), n) - v->sum(x.data(), n)) <= 1e-12 * (1.0 + mag));
    CHECK(s.sum_sq(x.data(), n) == doctest::Approx(v->sum_sq(x.data(), n)).epsilon(1e-12));
    CHECK(s.dot(x.data(), w.data(), n) ==
          doctest::Approx(v->dot(x.data(), w.data(), n)).epsilon(1e-12));
    CHECK(s.max_val(x.data(), n) == v->max_val(x.data(), n));

    auto as = w, av = w;
    s.axpy(1.75, x.data(), as.data(), n);
    v->axpy(1.75, x.data(), av.data(), n);
    CHECK(std::memcmp(as.data(), av.data(), n * sizeof(double)) == 0);

    std::vector<double> ds(n), dv(n);
    s.detrend_window(x.data(), 0.25, w.data(), ds.data(), n);
    v->detrend_window(x.data(), 0.25, w.data(), dv.data(), n);
    CHECK(std::memcmp(ds.data(), dv.data(), n * sizeof(double)) == 0);

    const auto z = random_vec(rng, 2 * n, 10.0);
    std::vector<double> ps(n, 1.0), pv(n, 1.0);
    s.accum_power(z.data(), ps.data(), n);
    v->accum_power(z.data(), pv.data(), n);
    for (size_t i = 0; i < n; ++i) CHECK(ps[i] == doctest::Approx(pv[i]).epsilon(1e-12));
  }
}

TEST_CASE("kernels accept zero-length inputs") {
  for (const kernels::Ops* ops : {&kernels::scalar(), kernels::avx2()}) {
    if (ops == nullptr) continue;
    double dummy = 7.0;
    ops->rectify(&dummy, &dummy, 0);
    ops->clamp_nonneg(&dummy, 0);
    CHECK(ops->sum(&dummy, 0) == 0.0);
    CHECK(ops->sum_sq(&dummy, 0) == 0.0);
    CHECK(ops->dot(&dummy, &dummy, 0) == 0.0);
    ops->axpy(2.0, &dummy, &dummy, 0);
    CHECK(dummy == 7.0);
  }
}
