#include "gridtopo/kernels.hpp"

#ifdef GRIDTOPO_HAVE_NEON

#include <arm_neon.h>

namespace gridtopo::kernels {
namespace {

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vfmaq_f64(vy, va, vld1q_f64(x + i));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void combine_neon(const double* base, double a, const double* x, double b,
                  const double* y, double* dst, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t acc = base ? vld1q_f64(base + i) : vdupq_n_f64(0.0);
    acc = vfmaq_f64(acc, va, vld1q_f64(x + i));
    acc = vfmaq_f64(acc, vb, vld1q_f64(y + i));
    vst1q_f64(dst + i, acc);
  }
  for (; i < n; ++i) {
    const double b0 = base ? base[i] : 0.0;
    dst[i] = b0 + a * x[i] + b * y[i];
  }
}

DiffStats diff_stats_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t vs = vdupq_n_f64(0.0);
  float64x2_t vs2 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    vs = vaddq_f64(vs, d);
    vs2 = vfmaq_f64(vs2, d, d);
  }
  double s = vaddvq_f64(vs), s2 = vaddvq_f64(vs2);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d;
    s2 += d * d;
  }
  return {s, s2};
}

double quad_weighted_neon(const double* ra, const double* rb, const double* xa,
                          const double* xb, const double* wp, const double* wq,
                          const double* wpq, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t vra = vld1q_f64(ra + i);
    const float64x2_t vrb = vld1q_f64(rb + i);
    const float64x2_t vxa = vld1q_f64(xa + i);
    const float64x2_t vxb = vld1q_f64(xb + i);
    acc = vfmaq_f64(acc, vmulq_f64(vra, vrb), vld1q_f64(wp + i));
    acc = vfmaq_f64(acc, vmulq_f64(vxa, vxb), vld1q_f64(wq + i));
    const float64x2_t cross = vfmaq_f64(vmulq_f64(vxa, vrb), vra, vxb);
    acc = vfmaq_f64(acc, cross, vld1q_f64(wpq + i));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    s += ra[i] * rb[i] * wp[i] + xa[i] * xb[i] * wq[i] +
         (ra[i] * xb[i] + xa[i] * rb[i]) * wpq[i];
  }
  return s;
}

const Table kNeonTable = {
    sum_neon, dot_neon, axpy_neon, combine_neon, diff_stats_neon, quad_weighted_neon,
};

}  // namespace

const Table* neon_table() { return &kNeonTable; }

}  // namespace gridtopo::kernels

#endif  // GRIDTOPO_HAVE_NEON
