#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gridtopo/kernels.hpp"
#include "gridtopo/rng.hpp"

using namespace gridtopo;
namespace k = gridtopo::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// long-double loops, the ground truth both backends are held to
long double ref_sum(const std::vector<double>& x) {
  long double s = 0;
  for (double v : x) s += v;
  return s;
}

long double ref_dot(const std::vector<double>& x, const std::vector<double>& y) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (long double)x[i] * y[i];
  return s;
}

bool close(double a, long double b, double tol = 1e-12) {
  const long double scale = std::max<long double>(1.0, std::fabs(b));
  return std::fabs((long double)a - b) <= tol * scale;
}

std::vector<k::Backend> testable_backends() {
  std::vector<k::Backend> out = {k::Backend::scalar};
  for (k::Backend b : {k::Backend::avx2, k::Backend::neon})
    if (k::backend_available(b)) out.push_back(b);
  return out;
}

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

const std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 257, 1000};

}  // namespace

TEST_CASE("every compiled backend matches the long-double reference") {
  BackendGuard guard;
  auto rng = make_rng(derive_seed(7, 0));
  for (k::Backend b : testable_backends()) {
    CAPTURE(k::backend_name(b));
    k::set_backend(b);
    REQUIRE(k::active_backend() == b);
    for (std::size_t n : kLengths) {
      CAPTURE(n);
      const auto x = random_vec(rng, n);
      const auto y = random_vec(rng, n);

      CHECK(close(k::sum(x.data(), n), ref_sum(x)));
      CHECK(close(k::dot(x.data(), y.data(), n), ref_dot(x, y)));

      {
        auto z = y;
        k::axpy(0.75, x.data(), z.data(), n);
        for (std::size_t i = 0; i < n; ++i)
          CHECK(close(z[i], (long double)y[i] + 0.75L * x[i]));
      }
      {
        const auto base = random_vec(rng, n);
        std::vector<double> dst(n);
        k::combine(base.data(), 1.5, x.data(), -0.5, y.data(), dst.data(), n);
        for (std::size_t i = 0; i < n; ++i)
          CHECK(close(dst[i], (long double)base[i] + 1.5L * x[i] - 0.5L * y[i]));

        // null base means zeros; writing over the base is allowed
        k::combine(nullptr, 1.5, x.data(), -0.5, y.data(), dst.data(), n);
        for (std::size_t i = 0; i < n; ++i)
          CHECK(close(dst[i], 1.5L * x[i] - 0.5L * y[i]));

        auto inplace = base;
        k::combine(inplace.data(), 1.5, x.data(), -0.5, y.data(), inplace.data(), n);
        for (std::size_t i = 0; i < n; ++i)
          CHECK(close(inplace[i], (long double)base[i] + 1.5L * x[i] - 0.5L * y[i]));
      }
      {
        const k::DiffStats ds = k::diff_stats(x.data(), y.data(), n);
        long double s = 0, s2 = 0;
        for (std::size_t i = 0; i < n; ++i) {
          const long double d = (long double)x[i] - y[i];
          s += d;
          s2 += d * d;
        }
        CHECK(close(ds.sum, s));
        CHECK(close(ds.sum_sq, s2));
      }
      {
        const auto ra = random_vec(rng, n), rb = random_vec(rng, n);
        const auto xa = random_vec(rng, n), xb = random_vec(rng, n);
        const auto wp = random_vec(rng, n), wq = random_vec(rng, n);
        const auto wpq = random_vec(rng, n);
        const double got = k::quad_weighted(ra.data(), rb.data(), xa.data(), xb.data(),
                                            wp.data(), wq.data(), wpq.data(), n);
        long double want = 0;
        for (std::size_t i = 0; i < n; ++i)
          want += (long double)ra[i] * rb[i] * wp[i] + (long double)xa[i] * xb[i] * wq[i] +
                  ((long double)ra[i] * xb[i] + (long double)xa[i] * rb[i]) * wpq[i];
        CHECK(close(got, want));
      }
    }
  }
}

TEST_CASE("vector backends agree with scalar on identical inputs") {
  BackendGuard guard;
  auto rng = make_rng(derive_seed(7, 1));
  for (std::size_t n : {15u, 64u, 1001u}) {
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);
    k::set_backend(k::Backend::scalar);
    const double s0 = k::sum(x.data(), n);
    const double d0 = k::dot(x.data(), y.data(), n);
    for (k::Backend b : testable_backends()) {
      k::set_backend(b);
      CHECK(close(k::sum(x.data(), n), s0));
      CHECK(close(k::dot(x.data(), y.data(), n), d0));
    }
  }
}

TEST_CASE("requesting an unavailable backend throws and changes nothing") {
  BackendGuard guard;
  k::Backend missing;
  bool found = false;
  for (k::Backend b : {k::Backend::avx2, k::Backend::neon})
    if (!k::backend_available(b)) {
      missing = b;
      found = true;
      break;
    }
  if (!found) return;  // machine has every backend compiled in
  const k::Backend before = k::active_backend();
  CHECK_THROWS_AS(k::set_backend(missing), std::runtime_error);
  CHECK(k::active_backend() == before);
}

TEST_CASE("scalar backend is always available and selectable") {
  BackendGuard guard;
  CHECK(k::backend_available(k::Backend::scalar));
  k::set_backend(k::Backend::scalar);
  CHECK(k::active_backend() == k::Backend::scalar);
  const double v[] = {1.0, 2.0, 3.5};
  CHECK(k::sum(v, 3) == doctest::Approx(6.5));
}
