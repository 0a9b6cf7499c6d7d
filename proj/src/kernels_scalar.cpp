#include "gridtopo/kernels.hpp"

namespace gridtopo::kernels {
namespace {

double sum_ref(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_ref(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_ref(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void combine_ref(const double* base, double a, const double* x, double b,
                 const double* y, double* dst, std::size_t n) {
  if (base) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = base[i] + a * x[i] + b * y[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a * x[i] + b * y[i];
  }
}

DiffStats diff_stats_ref(const double* x, const double* y, std::size_t n) {
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d;
    s2 += d * d;
  }
  return {s, s2};
}

double quad_weighted_ref(const double* ra, const double* rb, const double* xa,
                         const double* xb, const double* wp, const double* wq,
                         const double* wpq, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += ra[i] * rb[i] * wp[i] + xa[i] * xb[i] * wq[i] +
         (ra[i] * xb[i] + xa[i] * rb[i]) * wpq[i];
  }
  return s;
}

const Table kScalarTable = {
    sum_ref, dot_ref, axpy_ref, combine_ref, diff_stats_ref, quad_weighted_ref,
};

}  // namespace

const Table* scalar_table() { return &kScalarTable; }

}  // namespace gridtopo::kernels
