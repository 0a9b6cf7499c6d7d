#include "gridtopo/kernels.hpp"

#ifdef GRIDTOPO_HAVE_AVX2

#include <immintrin.h>

namespace gridtopo::kernels {
namespace {

inline double hadd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double s = hadd(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double s = hadd(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void combine_avx2(const double* base, double a, const double* x, double b,
                  const double* y, double* dst, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  if (base) {
    for (; i + 4 <= n; i += 4) {
      __m256d acc = _mm256_loadu_pd(base + i);
      acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), acc);
      acc = _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), acc);
      _mm256_storeu_pd(dst + i, acc);
    }
    for (; i < n; ++i) dst[i] = base[i] + a * x[i] + b * y[i];
  } else {
    for (; i + 4 <= n; i += 4) {
      __m256d acc = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
      acc = _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), acc);
      _mm256_storeu_pd(dst + i, acc);
    }
    for (; i < n; ++i) dst[i] = a * x[i] + b * y[i];
  }
}

DiffStats diff_stats_avx2(const double* x, const double* y, std::size_t n) {
  __m256d vs = _mm256_setzero_pd();
  __m256d vs2 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    vs = _mm256_add_pd(vs, d);
    vs2 = _mm256_fmadd_pd(d, d, vs2);
  }
  double s = hadd(vs), s2 = hadd(vs2);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d;
    s2 += d * d;
  }
  return {s, s2};
}

double quad_weighted_avx2(const double* ra, const double* rb, const double* xa,
                          const double* xb, const double* wp, const double* wq,
                          const double* wpq, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vra = _mm256_loadu_pd(ra + i);
    const __m256d vrb = _mm256_loadu_pd(rb + i);
    const __m256d vxa = _mm256_loadu_pd(xa + i);
    const __m256d vxb = _mm256_loadu_pd(xb + i);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(vra, vrb), _mm256_loadu_pd(wp + i), acc);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(vxa, vxb), _mm256_loadu_pd(wq + i), acc);
    const __m256d cross = _mm256_fmadd_pd(vra, vxb, _mm256_mul_pd(vxa, vrb));
    acc = _mm256_fmadd_pd(cross, _mm256_loadu_pd(wpq + i), acc);
  }
  double s = hadd(acc);
  for (; i < n; ++i) {
    s += ra[i] * rb[i] * wp[i] + xa[i] * xb[i] * wq[i] +
         (ra[i] * xb[i] + xa[i] * rb[i]) * wpq[i];
  }
  return s;
}

const Table kAvx2Table = {
    sum_avx2, dot_avx2, axpy_avx2, combine_avx2, diff_stats_avx2, quad_weighted_avx2,
};

}  // namespace

const Table* avx2_table() { return &kAvx2Table; }

}  // namespace gridtopo::kernels

#endif  // GRIDTOPO_HAVE_AVX2
